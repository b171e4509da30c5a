#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wsmil {

// Rows are truth, columns prediction.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<std::uint64_t> counts;

    std::uint64_t at(int truth, int pred) const {
        return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes) + static_cast<std::size_t>(pred)];
    }
    std::uint64_t total() const noexcept;
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int classes);

// Quadratic-weighted Cohen kappa. Throws "kappa undefined" when the expected
// weighted disagreement is zero.
double quadratic_kappa(const ConfusionMatrix& cm);

struct F1Scores {
    std::vector<double> per_class;
    double macro = 0.0;
};

F1Scores per_class_f1(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

enum class PositiveClass { Cancerous, NonCancerous };
std::string_view to_string(PositiveClass p) noexcept;

// nullopt marks a zero denominator.
struct BinaryMetrics {
    std::optional<double> precision;
    std::optional<double> sensitivity;
};

// Label 0 is non-cancerous, every other label cancerous.
BinaryMetrics binary_cancer_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                                    PositiveClass positive = PositiveClass::Cancerous);

struct EvaluationReport {
    std::string level;
    std::vector<std::string> class_names;
    std::size_t items = 0;
    double accuracy = 0.0;
    F1Scores f1;
    std::optional<double> kappa;  // nullopt when undefined
    BinaryMetrics cancerous;
    BinaryMetrics non_cancerous;
    ConfusionMatrix confusion;
};

EvaluationReport evaluate_labels(std::span<const int> y_true, std::span<const int> y_pred,
                                 std::vector<std::string> class_names, std::string level);

// CSV with columns metric,value. Undefined values are written as "undefined".
void save_report_csv(const EvaluationReport& report, const std::filesystem::path& path);
std::string report_text(const EvaluationReport& report);

} // namespace wsmil
