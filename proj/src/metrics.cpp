#include "wsmil/metrics.hpp"

#include "wsmil/csv.hpp"
#include "wsmil/error.hpp"

#include <cstdio>
#include <numeric>

namespace wsmil {

namespace {

inline std::size_t sz(int v) { return static_cast<std::size_t>(v); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "undefined"; }
std::string csv_value(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

} // namespace

std::uint64_t ConfusionMatrix::total() const noexcept { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int classes) {
    if (classes < 1) throw Error("metrics", "number of classes must be >= 1");
    if (y_true.size() != y_pred.size()) throw Error("metrics", "label vectors differ in length");
    if (y_true.empty()) throw Error("metrics", "no labels to evaluate");
    ConfusionMatrix cm{classes, std::vector<std::uint64_t>(sz(classes) * sz(classes), 0)};
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || t >= classes || p < 0 || p >= classes)
            throw Error("metrics", "label out of range at position " + std::to_string(i));
        ++cm.counts[sz(t) * sz(classes) + sz(p)];
    }
    return cm;
}

double quadratic_kappa(const ConfusionMatrix& cm) {
    const int K = cm.classes;
    const double n = static_cast<double>(cm.total());
    if (n == 0.0) throw Error("metrics", "empty confusion matrix");
    if (K < 2) throw Error("metrics", "kappa undefined");
    std::vector<double> row(sz(K), 0.0), col(sz(K), 0.0);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            row[sz(i)] += static_cast<double>(cm.at(i, j)) / n;
            col[sz(j)] += static_cast<double>(cm.at(i, j)) / n;
        }
    double observed = 0.0, expected = 0.0;
    const double denom = static_cast<double>((K - 1) * (K - 1));
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            const double w = static_cast<double>((i - j) * (i - j)) / denom;
            observed += w * static_cast<double>(cm.at(i, j)) / n;
            expected += w * row[sz(i)] * col[sz(j)];
        }
    if (expected <= 0.0) throw Error("metrics", "kappa undefined");
    return 1.0 - observed / expected;
}

F1Scores per_class_f1(const ConfusionMatrix& cm) {
    const int K = cm.classes;
    F1Scores f;
    for (int c = 0; c < K; ++c) {
        double tp = static_cast<double>(cm.at(c, c)), predicted = 0.0, actual = 0.0;
        for (int j = 0; j < K; ++j) {
            predicted += static_cast<double>(cm.at(j, c));
            actual += static_cast<double>(cm.at(c, j));
        }
        const double p = predicted > 0.0 ? tp / predicted : 0.0;
        const double r = actual > 0.0 ? tp / actual : 0.0;
        f.per_class.push_back(p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0);
    }
    f.macro = std::accumulate(f.per_class.begin(), f.per_class.end(), 0.0) / static_cast<double>(K);
    return f;
}

double accuracy(const ConfusionMatrix& cm) {
    const double n = static_cast<double>(cm.total());
    if (n == 0.0) throw Error("metrics", "empty confusion matrix");
    double trace = 0.0;
    for (int c = 0; c < cm.classes; ++c) trace += static_cast<double>(cm.at(c, c));
    return trace / n;
}

std::string_view to_string(PositiveClass p) noexcept { return p == PositiveClass::Cancerous ? "cancerous" : "non_cancerous"; }

BinaryMetrics binary_cancer_metrics(std::span<const int> y_true, std::span<const int> y_pred, PositiveClass positive) {
    if (y_true.size() != y_pred.size()) throw Error("metrics", "label vectors differ in length");
    if (y_true.empty()) throw Error("metrics", "no labels to evaluate");
    const bool want_cancer = positive == PositiveClass::Cancerous;
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool t = (y_true[i] != 0) == want_cancer;
        const bool p = (y_pred[i] != 0) == want_cancer;
        tp += t && p;
        fp += !t && p;
        fn += t && !p;
    }
    BinaryMetrics m;
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) m.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return m;
}

EvaluationReport evaluate_labels(std::span<const int> y_true, std::span<const int> y_pred,
                                 std::vector<std::string> class_names, std::string level) {
    EvaluationReport r;
    r.level = std::move(level);
    r.confusion = confusion(y_true, y_pred, static_cast<int>(class_names.size()));
    r.class_names = std::move(class_names);
    r.items = y_true.size();
    r.accuracy = accuracy(r.confusion);
    r.f1 = per_class_f1(r.confusion);
    try {
        r.kappa = quadratic_kappa(r.confusion);
    } catch (const Error&) {
        r.kappa.reset();
    }
    r.cancerous = binary_cancer_metrics(y_true, y_pred, PositiveClass::Cancerous);
    r.non_cancerous = binary_cancer_metrics(y_true, y_pred, PositiveClass::NonCancerous);
    return r;
}

void save_report_csv(const EvaluationReport& report, const std::filesystem::path& path) {
    CsvTable t({"metric", "value"});
    t.add_row({"level", report.level});
    t.add_row({"items", std::to_string(report.items)});
    t.add_row({"accuracy", format_double(report.accuracy)});
    for (std::size_t c = 0; c < report.class_names.size(); ++c)
        t.add_row({"f1_" + report.class_names[c], format_double(report.f1.per_class[c])});
    t.add_row({"f1_macro", format_double(report.f1.macro)});
    t.add_row({"kappa", csv_value(report.kappa)});
    t.add_row({"precision_cancerous", csv_value(report.cancerous.precision)});
    t.add_row({"sensitivity_cancerous", csv_value(report.cancerous.sensitivity)});
    t.add_row({"precision_non_cancerous", csv_value(report.non_cancerous.precision)});
    t.add_row({"sensitivity_non_cancerous", csv_value(report.non_cancerous.sensitivity)});
    for (int i = 0; i < report.confusion.classes; ++i)
        for (int j = 0; j < report.confusion.classes; ++j)
            t.add_row({"cm_" + report.class_names[sz(i)] + "_" + report.class_names[sz(j)],
                       std::to_string(report.confusion.at(i, j))});
    t.write(path);
}

std::string report_text(const EvaluationReport& r) {
    std::string out = r.level + "-level evaluation (" + std::to_string(r.items) + " items)\n";
    out += "  ACC    " + fmt(r.accuracy) + "\n";
    out += "  F1    ";
    for (std::size_t c = 0; c < r.class_names.size(); ++c) out += " " + r.class_names[c] + "=" + fmt(r.f1.per_class[c]);
    out += " avg=" + fmt(r.f1.macro) + "\n";
    out += "  kappa  " + fmt(r.kappa) + "\n";
    out += "  binary (positive=cancerous)      sensitivity " + fmt(r.cancerous.sensitivity) + "  precision " +
           fmt(r.cancerous.precision) + "\n";
    out += "  binary (positive=non-cancerous)  sensitivity " + fmt(r.non_cancerous.sensitivity) + "  precision " +
           fmt(r.non_cancerous.precision) + "\n";
    return out;
}

} // namespace wsmil
