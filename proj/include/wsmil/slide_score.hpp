#pragma once

// Slide-level descriptors (mean instance features, grade percentages) and the
// two classifiers fitted on them.

#include "wsmil/dataset.hpp"
#include "wsmil/model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace wsmil {

using SlideEmbedding = std::vector<double>;
using GradePercentages = std::array<double, kNumClasses>;

// features is I x dim row-major.
SlideEmbedding slide_embedding(std::span<const double> features, int dim);

// Frequencies of hard predictions.
GradePercentages grade_percentages(std::span<const GleasonGrade> predictions);
// Mean predicted distribution.
GradePercentages soft_grade_percentages(std::span<const Prediction> predictions);

class Knn {
public:
    explicit Knn(int k = 20);

    void fit(std::vector<std::vector<double>> points, std::vector<int> labels);
    // Majority label among the k nearest training points (Euclidean). Equal
    // distances keep insertion order; tied votes go to the lowest label.
    int predict(std::span<const double> query) const;
    int k() const noexcept { return k_; }

private:
    int k_;
    std::vector<std::vector<double>> points_;
    std::vector<int> labels_;
};

struct MlpConfig {
    int hidden = 64;
    double learning_rate = 1e-2;
    int epochs = 20;
    int batch_size = 16;
    std::uint64_t seed = 0;
};

// One hidden ReLU layer, softmax output, Adam. Inputs are standardized with
// the training mean and deviation.
class Mlp {
public:
    explicit Mlp(MlpConfig config = {});

    void fit(const std::vector<std::vector<double>>& points, const std::vector<int>& labels, int num_classes);
    std::vector<double> predict_proba(std::span<const double> x) const;
    int predict(std::span<const double> x) const;
    int num_classes() const noexcept { return classes_; }

private:
    void forward(std::span<const double> x, std::vector<double>& hidden, std::vector<double>& out) const;

    MlpConfig config_;
    int inputs_ = 0;
    int classes_ = 0;
    std::vector<double> mean_;
    std::vector<double> scale_;
    std::vector<double> params_;  // W1 [H][D], b1 [H], W2 [C][H], b2 [C]
};

enum class ScoreMethod { Knn, Mlp, GgPctKnn, GgPctMlp };
std::string_view to_string(ScoreMethod m) noexcept;
ScoreMethod parse_score_method(std::string_view text);

struct ScoringConfig {
    int k = 20;
    bool soft_percentages = false;
    MlpConfig mlp;
};

// Descriptor of one slide under a method: mean features or grade percentages.
std::vector<double> slide_descriptor(const ModelParameters& params, const Slide& slide, ScoreMethod method,
                                     bool soft_percentages = false);

struct ScoreRow {
    std::string slide_id;
    int true_score = 0;  // score-sum class, 0 benign, 1..5 for sums 6..10
    int pred_score = 0;
    int true_gg = 0;
    int pred_gg = 0;
};

// Fits one Grade Group model and one score-class model on train, predicts
// every slide of eval.
std::vector<ScoreRow> score_slides(const ModelParameters& params, std::span<const Slide> train,
                                   std::span<const Slide> eval, ScoreMethod method, const ScoringConfig& config);

void save_score_rows(std::span<const ScoreRow> rows, const std::filesystem::path& path);

} // namespace wsmil
