#include "wsmil/model.hpp"

#include "wsmil/error.hpp"
#include "wsmil/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace wsmil {

namespace k = kernels::parallel;

std::string_view to_string(HeadActivation h) noexcept { return h == HeadActivation::Softmax ? "softmax" : "sigmoid"; }
std::string_view to_string(AttentionNorm n) noexcept { return n == AttentionNorm::Joint ? "joint" : "per-class"; }

HeadActivation parse_head_activation(std::string_view text) {
    if (text == "softmax") return HeadActivation::Softmax;
    if (text == "sigmoid") return HeadActivation::Sigmoid;
    throw Error("config", "head must be softmax or sigmoid, got '" + std::string(text) + "'");
}

AttentionNorm parse_attention_norm(std::string_view text) {
    if (text == "joint") return AttentionNorm::Joint;
    if (text == "per-class") return AttentionNorm::PerClass;
    throw Error("config", "attention_norm must be joint or per-class, got '" + std::string(text) + "'");
}

void EncoderConfig::validate() const {
    if (input_side < 8) throw Error("config", "input_side must be >= 8");
    if (feature_dim < 1) throw Error("config", "feature_dim must be >= 1");
    if (attention_dim < 0) throw Error("config", "attention_dim must be >= 0");
    int side = input_side;
    for (int c : hidden_channels) {
        if (c < 1) throw Error("config", "hidden channel counts must be >= 1");
        if (side % 2 != 0) throw Error("config", "input_side must stay even through every pooling block");
        side /= 2;
    }
}

ParamLayout make_layout(const EncoderConfig& config) {
    ParamLayout layout;
    std::size_t offset = 0;
    auto take = [&](std::size_t n) {
        ParamBlock b{offset, n};
        offset += n;
        return b;
    };
    int in = 3;
    std::vector<int> outs = config.hidden_channels;
    outs.push_back(config.feature_dim);
    for (int out : outs) {
        layout.conv_weight.push_back(take(static_cast<std::size_t>(out * in * 9)));
        layout.conv_bias.push_back(take(static_cast<std::size_t>(out)));
        in = out;
    }
    const auto m = static_cast<std::size_t>(config.feature_dim);
    layout.head_weight = take(kNumClasses * m);
    layout.head_bias = take(kNumClasses);
    if (config.attention_dim > 0) {
        const auto l = static_cast<std::size_t>(config.attention_dim);
        layout.attention_v = take(l * m);
        layout.attention_u = take(l * m);
        layout.attention_w = take(l * kNumClasses);
    }
    layout.total = offset;
    return layout;
}

bool ModelParameters::all_finite() const noexcept {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ModelParameters init_parameters(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParameters params;
    params.config = config;
    params.init_seed = seed;
    const ParamLayout layout = make_layout(config);
    params.values.assign(layout.total, 0.0);

    std::mt19937_64 rng(seed);
    auto fill_uniform = [&](ParamBlock b, double limit) {
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t i = 0; i < b.size; ++i) params.values[b.offset + i] = dist(rng);
    };
    int in = 3;
    for (std::size_t i = 0; i < layout.conv_weight.size(); ++i) {
        fill_uniform(layout.conv_weight[i], std::sqrt(6.0 / (in * 9)));
        in = static_cast<int>(layout.conv_bias[i].size);
    }
    fill_uniform(layout.head_weight, 0.05);
    if (config.attention_dim > 0) {
        fill_uniform(layout.attention_v, 0.05);
        fill_uniform(layout.attention_u, 0.05);
        fill_uniform(layout.attention_w, 0.05);
    }
    return params;
}

GleasonGrade Prediction::argmax() const noexcept {
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c)
        if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(best)]) best = c;
    return static_cast<GleasonGrade>(best);
}

void PatchBatch::add(std::span<const std::uint8_t> pixels) {
    const auto plane = static_cast<std::size_t>(side * side);
    if (pixels.size() != 3 * plane)
        throw Error("model", "patch has " + std::to_string(pixels.size()) + " bytes, expected " +
                                 std::to_string(3 * plane) + " for side " + std::to_string(side));
    const std::size_t base = data.size();
    data.resize(base + 3 * plane);
    for (std::size_t p = 0; p < plane; ++p)
        for (std::size_t c = 0; c < 3; ++c) data[base + c * plane + p] = pixels[p * 3 + c] / 255.0 - 0.5;
    ++count;
}

void PatchBatch::add(const Image& image) {
    if (image.width != side || image.height != side || image.channels != 3)
        throw Error("model", "patch is " + std::to_string(image.width) + "x" + std::to_string(image.height) + "x" +
                                 std::to_string(image.channels) + ", encoder expects " + std::to_string(side) + "x" +
                                 std::to_string(side) + "x3");
    add(std::span<const std::uint8_t>(image.data));
}

Prediction ForwardPass::prediction(int i) const {
    Prediction p;
    std::copy_n(probs.begin() + static_cast<std::ptrdiff_t>(i) * kNumClasses, kNumClasses, p.probs.begin());
    return p;
}

std::array<double, kNumClasses> head_probabilities(HeadActivation head, std::span<const double> logits) {
    std::array<double, kNumClasses> p{};
    if (head == HeadActivation::Sigmoid) {
        for (std::size_t c = 0; c < kNumClasses; ++c) p[c] = 1.0 / (1.0 + std::exp(-logits[c]));
        return p;
    }
    const double mx = *std::max_element(logits.begin(), logits.begin() + kNumClasses);
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) sum += (p[c] = std::exp(logits[c] - mx));
    for (auto& v : p) v /= sum;
    return p;
}

std::array<double, kNumClasses> head_backward(HeadActivation head, std::span<const double> probs,
                                              std::span<const double> dprobs) {
    std::array<double, kNumClasses> dlogits{};
    if (head == HeadActivation::Sigmoid) {
        for (std::size_t c = 0; c < kNumClasses; ++c) dlogits[c] = dprobs[c] * probs[c] * (1.0 - probs[c]);
        return dlogits;
    }
    double dot = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) dot += dprobs[c] * probs[c];
    for (std::size_t c = 0; c < kNumClasses; ++c) dlogits[c] = probs[c] * (dprobs[c] - dot);
    return dlogits;
}

ForwardPass forward(const ModelParameters& params, const PatchBatch& batch, bool keep_activations) {
    const EncoderConfig& cfg = params.config;
    if (batch.side != cfg.input_side)
        throw Error("model", "batch side " + std::to_string(batch.side) + " does not match encoder input_side " +
                                 std::to_string(cfg.input_side));
    const ParamLayout layout = params.layout();
    if (params.values.size() != layout.total) throw Error("model", "parameter vector does not match layout");

    ForwardPass pass;
    pass.batch = batch.count;
    const int n = batch.count;
    const std::size_t layers = layout.conv_weight.size();

    std::vector<double> current = batch.data;
    int channels = 3, side = cfg.input_side;
    for (std::size_t l = 0; l < layers; ++l) {
        const int out_channels = static_cast<int>(layout.conv_bias[l].size);
        const kernels::ConvShape shape{n, channels, out_channels, side, side};
        std::vector<double> out(shape.output_size());
        k::conv3x3_forward(shape, current, params.view(layout.conv_weight[l]), params.view(layout.conv_bias[l]), out);
        k::relu_forward(out);
        if (keep_activations) pass.conv_inputs.push_back(std::move(current));
        const bool last = l + 1 == layers;
        if (last) {
            pass.features.resize(static_cast<std::size_t>(n * out_channels));
            k::global_avg_pool_forward(n * out_channels, side * side, out, pass.features);
        } else {
            std::vector<double> pooled(out.size() / 4);
            k::avgpool2_forward(n * out_channels, side, side, out, pooled);
            current = std::move(pooled);
        }
        if (keep_activations) pass.conv_outputs.push_back(std::move(out));
        channels = out_channels;
        if (!last) side /= 2;
    }

    pass.logits.resize(static_cast<std::size_t>(n * kNumClasses));
    k::dense_forward(n, cfg.feature_dim, kNumClasses, pass.features, params.view(layout.head_weight),
                     params.view(layout.head_bias), pass.logits);
    pass.probs.resize(pass.logits.size());
    for (int i = 0; i < n; ++i) {
        const auto p = head_probabilities(cfg.head, std::span<const double>(pass.logits).subspan(static_cast<std::size_t>(i * kNumClasses), kNumClasses));
        std::copy(p.begin(), p.end(), pass.probs.begin() + static_cast<std::ptrdiff_t>(i) * kNumClasses);
    }
    return pass;
}

void backward(const ModelParameters& params, const ForwardPass& pass, std::span<const double> dlogits,
              std::span<const double> dfeatures, std::span<double> grad, std::span<double> dinput) {
    const EncoderConfig& cfg = params.config;
    const ParamLayout layout = params.layout();
    const std::size_t layers = layout.conv_weight.size();
    if (pass.conv_inputs.size() != layers) throw Error("model", "backward needs a forward pass with kept activations");
    const int n = pass.batch;
    const int m = cfg.feature_dim;

    std::vector<double> dfeat(static_cast<std::size_t>(n * m));
    k::dense_backward(n, m, kNumClasses, pass.features, dlogits, params.view(layout.head_weight),
                      grad.subspan(layout.head_weight.offset, layout.head_weight.size),
                      grad.subspan(layout.head_bias.offset, layout.head_bias.size), dfeat);
    if (!dfeatures.empty())
        for (std::size_t i = 0; i < dfeat.size(); ++i) dfeat[i] += dfeatures[i];

    // Spatial side of each conv layer.
    std::vector<int> sides(layers);
    sides[0] = cfg.input_side;
    for (std::size_t l = 1; l < layers; ++l) sides[l] = sides[l - 1] / 2;

    std::vector<double> dout;
    for (std::size_t li = layers; li-- > 0;) {
        const int out_channels = static_cast<int>(layout.conv_bias[li].size);
        const int in_channels = li == 0 ? 3 : static_cast<int>(layout.conv_bias[li - 1].size);
        const int side = sides[li];
        const auto plane = static_cast<std::size_t>(side * side);
        std::vector<double> dconv(static_cast<std::size_t>(n * out_channels) * plane);
        if (li + 1 == layers)
            k::global_avg_pool_backward(n * out_channels, side * side, dfeat, dconv);
        else
            k::avgpool2_backward(n * out_channels, side, side, dout, dconv);
        k::relu_backward(pass.conv_outputs[li], dconv);

        const kernels::ConvShape shape{n, in_channels, out_channels, side, side};
        std::vector<double> din;
        std::span<double> din_span;
        if (li > 0) {
            din.resize(shape.input_size());
            din_span = din;
        } else if (!dinput.empty()) {
            din_span = dinput;
        }
        k::conv3x3_backward(shape, pass.conv_inputs[li], dconv, params.view(layout.conv_weight[li]),
                            grad.subspan(layout.conv_weight[li].offset, layout.conv_weight[li].size),
                            grad.subspan(layout.conv_bias[li].offset, layout.conv_bias[li].size), din_span);
        dout = std::move(din);
    }
}

std::vector<double> encode(const Image& patch, const ModelParameters& params) {
    PatchBatch batch(params.config.input_side);
    batch.add(patch);
    return forward(params, batch, false).features;
}

Prediction classify(std::span<const double> features, const ModelParameters& params) {
    const auto m = static_cast<std::size_t>(params.config.feature_dim);
    if (features.size() != m)
        throw Error("model", "feature vector has length " + std::to_string(features.size()) + ", expected " + std::to_string(m));
    for (double v : features)
        if (!std::isfinite(v)) throw Error("model", "non-finite feature value");
    const ParamLayout layout = params.layout();
    std::array<double, kNumClasses> logits{};
    k::dense_forward(1, static_cast<int>(m), kNumClasses, features, params.view(layout.head_weight),
                     params.view(layout.head_bias), logits);
    return Prediction{head_probabilities(params.config.head, logits)};
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   "WSMILCKP" | u32 version | u32 config length | config text | u64 init seed
//   | u64 value count | doubles | u64 FNV-1a of everything before it

namespace {

constexpr char kMagic[8] = {'W', 'S', 'M', 'I', 'L', 'C', 'K', 'P'};

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_text(const EncoderConfig& c) {
    std::ostringstream os;
    os << "architecture=" << c.architecture << "\n";
    os << "input_side=" << c.input_side << "\n";
    os << "hidden_channels=";
    for (std::size_t i = 0; i < c.hidden_channels.size(); ++i) os << (i ? "," : "") << c.hidden_channels[i];
    os << "\nfeature_dim=" << c.feature_dim << "\n";
    os << "attention_dim=" << c.attention_dim << "\n";
    os << "head=" << to_string(c.head) << "\n";
    os << "attention_norm=" << to_string(c.attention_norm) << "\n";
    return os.str();
}

EncoderConfig parse_config_text(const std::string& text) {
    EncoderConfig c;
    c.hidden_channels.clear();
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "architecture") c.architecture = value;
        else if (key == "input_side") c.input_side = std::stoi(value);
        else if (key == "feature_dim") c.feature_dim = std::stoi(value);
        else if (key == "attention_dim") c.attention_dim = std::stoi(value);
        else if (key == "head") c.head = parse_head_activation(value);
        else if (key == "attention_norm") c.attention_norm = parse_attention_norm(value);
        else if (key == "hidden_channels") {
            std::istringstream vs(value);
            std::string item;
            while (std::getline(vs, item, ','))
                if (!item.empty()) c.hidden_channels.push_back(std::stoi(item));
        } else {
            throw Error("checkpoint", "unknown config key in checkpoint: " + key);
        }
    }
    return c;
}

template <typename T>
void put(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos, const std::filesystem::path& path) {
    if (pos + sizeof(T) > in.size()) throw Error("checkpoint", "truncated checkpoint: " + path.string());
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace

void save_checkpoint(const ModelParameters& params, const std::filesystem::path& path) {
    std::string bytes(kMagic, sizeof(kMagic));
    put(bytes, ModelParameters::kFormatVersion);
    const std::string cfg = config_text(params.config);
    put(bytes, static_cast<std::uint32_t>(cfg.size()));
    bytes += cfg;
    put(bytes, params.init_seed);
    put(bytes, static_cast<std::uint64_t>(params.values.size()));
    bytes.append(reinterpret_cast<const char*>(params.values.data()), params.values.size() * sizeof(double));
    put(bytes, fnv1a(bytes));

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("io", "cannot write checkpoint " + path.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error("io", "failed writing checkpoint " + path.string());
}

ModelParameters load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("io", "cannot read checkpoint " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw Error("checkpoint", "not a checkpoint file: " + path.string());
    std::size_t pos = sizeof(kMagic);
    const auto version = get<std::uint32_t>(bytes, pos, path);
    if (version != ModelParameters::kFormatVersion)
        throw Error("checkpoint", "checkpoint version mismatch: expected " + std::to_string(ModelParameters::kFormatVersion) +
                                      ", found " + std::to_string(version));
    const auto cfg_len = get<std::uint32_t>(bytes, pos, path);
    if (pos + cfg_len > bytes.size()) throw Error("checkpoint", "truncated checkpoint: " + path.string());
    const std::string cfg = bytes.substr(pos, cfg_len);
    pos += cfg_len;

    ModelParameters params;
    params.config = parse_config_text(cfg);
    params.config.validate();
    params.init_seed = get<std::uint64_t>(bytes, pos, path);
    const auto count = get<std::uint64_t>(bytes, pos, path);
    if (count != make_layout(params.config).total)
        throw Error("checkpoint", "checkpoint holds " + std::to_string(count) + " values but its encoder config needs " +
                                      std::to_string(make_layout(params.config).total));
    if (pos + count * sizeof(double) + sizeof(std::uint64_t) > bytes.size())
        throw Error("checkpoint", "truncated checkpoint: " + path.string());
    params.values.resize(count);
    std::memcpy(params.values.data(), bytes.data() + pos, count * sizeof(double));
    pos += count * sizeof(double);
    const std::uint64_t stored = get<std::uint64_t>(bytes, pos, path);
    if (stored != fnv1a(bytes.substr(0, pos - sizeof(std::uint64_t))))
        throw Error("checkpoint", "checkpoint checksum mismatch: " + path.string());
    if (pos != bytes.size()) throw Error("checkpoint", "trailing bytes in checkpoint: " + path.string());
    return params;
}

} // namespace wsmil
