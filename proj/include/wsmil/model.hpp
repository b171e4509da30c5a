#pragma once

// Patch encoder (small conv stack + global average pooling), the 4-way
// classification head, and the optional gated-attention block. All weights
// live in one flat vector so optimizers, checkpoints and finite-difference
// checks treat the model uniformly.

#include "wsmil/grading.hpp"
#include "wsmil/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace wsmil {

enum class HeadActivation { Softmax, Sigmoid };
enum class AttentionNorm { Joint, PerClass };

std::string_view to_string(HeadActivation h) noexcept;
std::string_view to_string(AttentionNorm n) noexcept;
HeadActivation parse_head_activation(std::string_view text);
AttentionNorm parse_attention_norm(std::string_view text);

struct EncoderConfig {
    int input_side = 32;
    // Each hidden block is conv3x3 -> ReLU -> 2x2 average pool.
    std::vector<int> hidden_channels{8, 16};
    // Channels of the last conv block, i.e. the feature length M after pooling.
    int feature_dim = 64;
    // Hidden size L of the attention block; 0 means no attention parameters.
    int attention_dim = 0;
    HeadActivation head = HeadActivation::Softmax;
    AttentionNorm attention_norm = AttentionNorm::Joint;
    std::string architecture = "convnet-small";

    void validate() const;
    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct ParamBlock {
    std::size_t offset = 0;
    std::size_t size = 0;
};

struct ParamLayout {
    std::vector<ParamBlock> conv_weight;  // [out][in][3][3]
    std::vector<ParamBlock> conv_bias;
    ParamBlock head_weight;  // [4][M]
    ParamBlock head_bias;
    ParamBlock attention_v;  // [L][M]
    ParamBlock attention_u;  // [L][M]
    ParamBlock attention_w;  // [L][K]
    std::size_t total = 0;
};

ParamLayout make_layout(const EncoderConfig& config);

struct ModelParameters {
    static constexpr std::uint32_t kFormatVersion = 1;

    EncoderConfig config;
    std::vector<double> values;
    std::uint64_t init_seed = 0;

    ParamLayout layout() const { return make_layout(config); }
    std::span<const double> view(const ParamBlock& b) const { return std::span<const double>(values).subspan(b.offset, b.size); }
    std::span<double> view(const ParamBlock& b) { return std::span<double>(values).subspan(b.offset, b.size); }
    bool all_finite() const noexcept;
};

// He-uniform conv weights, zero biases, small uniform head/attention weights.
ModelParameters init_parameters(const EncoderConfig& config, std::uint64_t seed);

struct Prediction {
    std::array<double, kNumClasses> probs{};
    // Lowest class index wins ties.
    GleasonGrade argmax() const noexcept;
};

// Stack of patches converted to NCHW doubles in [-0.5, 0.5].
struct PatchBatch {
    int side = 0;
    int count = 0;
    std::vector<double> data;

    explicit PatchBatch(int side_) : side(side_) {}
    // pixels is side x side x 3, interleaved.
    void add(std::span<const std::uint8_t> pixels);
    void add(const Image& image);
    std::size_t patch_size() const noexcept { return static_cast<std::size_t>(3 * side * side); }
};

struct ForwardPass {
    int batch = 0;
    std::vector<std::vector<double>> conv_inputs;   // input of each conv layer
    std::vector<std::vector<double>> conv_outputs;  // post-ReLU output of each conv layer
    std::vector<double> features;                   // [batch][M]
    std::vector<double> logits;                     // [batch][4]
    std::vector<double> probs;                      // [batch][4]

    std::span<const double> feature(int i, int m) const {
        return std::span<const double>(features).subspan(static_cast<std::size_t>(i * m), static_cast<std::size_t>(m));
    }
    Prediction prediction(int i) const;
};

// keep_activations=false drops intermediate buffers (inference only).
ForwardPass forward(const ModelParameters& params, const PatchBatch& batch, bool keep_activations);

// Accumulates d(loss)/d(params) into grad. dlogits is [batch][4]; dfeatures
// ([batch][M]) is optional extra gradient arriving directly at the features.
// dinput, if non-empty, receives d(loss)/d(normalized input).
void backward(const ModelParameters& params, const ForwardPass& pass, std::span<const double> dlogits,
              std::span<const double> dfeatures, std::span<double> grad, std::span<double> dinput = {});

std::array<double, kNumClasses> head_probabilities(HeadActivation head, std::span<const double> logits);
// d(loss)/d(logits) given d(loss)/d(probs).
std::array<double, kNumClasses> head_backward(HeadActivation head, std::span<const double> probs,
                                              std::span<const double> dprobs);

std::vector<double> encode(const Image& patch, const ModelParameters& params);
Prediction classify(std::span<const double> features, const ModelParameters& params);

void save_checkpoint(const ModelParameters& params, const std::filesystem::path& path);
ModelParameters load_checkpoint(const std::filesystem::path& path);

} // namespace wsmil
