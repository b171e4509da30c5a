#pragma once

// Bag-level aggregation of instance predictions (max pooling and gated
// attention) and the teacher's multi-label BCE objective over the cancerous
// classes.

#include "wsmil/grading.hpp"
#include "wsmil/model.hpp"

#include <array>
#include <span>
#include <vector>

namespace wsmil {

inline constexpr double kProbEpsilon = 1e-7;

struct BagOutput {
    // Over (GG3, GG4, GG5).
    std::array<double, kNumCancerous> bag_probs{};
    std::vector<Prediction> per_instance;
    // I x 4 row-major attention weights; empty for max pooling.
    std::vector<double> attention;
    // Max pooling only: instance that attains each bag probability (first on ties).
    std::array<int, kNumCancerous> argmax{-1, -1, -1};

    bool has_attention() const noexcept { return !attention.empty(); }
};

// Non-owning view of V (L x M), U (L x M), W (L x K).
struct AttentionParameters {
    int hidden = 0;    // L
    int features = 0;  // M
    int classes = kNumClasses;
    std::span<const double> V;
    std::span<const double> U;
    std::span<const double> W;

    void validate() const;
};

AttentionParameters attention_parameters(const ModelParameters& params);

BagOutput aggregate_max(std::span<const Prediction> instances);

// features is I x M row-major.
BagOutput aggregate_attention(std::span<const double> features, std::span<const Prediction> instances,
                              const AttentionParameters& attention, AttentionNorm norm = AttentionNorm::Joint);

double teacher_bag_loss(const BagOutput& bag, const SlideLabel& label);
// d(loss)/d(bag_probs); exact inside (eps, 1-eps), evaluated at the clamp outside.
std::array<double, kNumCancerous> teacher_bag_loss_grad(const BagOutput& bag, const SlideLabel& label);

// d(loss)/d(instance probs), I x 4, for max pooling: only the argmax
// instance of each class receives gradient.
std::vector<double> max_backward(const BagOutput& bag, const std::array<double, kNumCancerous>& dbag);

struct AttentionGradients {
    std::vector<double> dV;         // L x M
    std::vector<double> dU;         // L x M
    std::vector<double> dW;         // L x K
    std::vector<double> dfeatures;  // I x M
    std::vector<double> dprobs;     // I x 4
};

AttentionGradients attention_backward(std::span<const double> features, std::span<const Prediction> instances,
                                      const AttentionParameters& attention, AttentionNorm norm, const BagOutput& bag,
                                      const std::array<double, kNumCancerous>& dbag);

} // namespace wsmil
