#include "wsmil/slide_score.hpp"

#include "wsmil/csv.hpp"
#include "wsmil/error.hpp"
#include "wsmil/optim.hpp"
#include "wsmil/rng.hpp"
#include "wsmil/selflearn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace wsmil {

namespace {
inline std::size_t sz(int v) { return static_cast<std::size_t>(v); }
}

SlideEmbedding slide_embedding(std::span<const double> features, int dim) {
    if (dim < 1 || features.empty() || features.size() % sz(dim) != 0)
        throw Error("score", "slide embedding needs at least one instance");
    const std::size_t n = features.size() / sz(dim);
    SlideEmbedding z(sz(dim), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < sz(dim); ++m) z[m] += features[i * sz(dim) + m];
    for (auto& v : z) v /= static_cast<double>(n);
    return z;
}

GradePercentages grade_percentages(std::span<const GleasonGrade> predictions) {
    if (predictions.empty()) throw Error("score", "grade percentages need at least one prediction");
    std::array<std::size_t, kNumClasses> counts{};
    for (auto g : predictions) ++counts[sz(index_of(g))];
    GradePercentages p{};
    for (std::size_t c = 0; c < kNumClasses; ++c)
        p[c] = static_cast<double>(counts[c]) / static_cast<double>(predictions.size());
    return p;
}

GradePercentages soft_grade_percentages(std::span<const Prediction> predictions) {
    if (predictions.empty()) throw Error("score", "grade percentages need at least one prediction");
    GradePercentages p{};
    for (const auto& pr : predictions)
        for (std::size_t c = 0; c < kNumClasses; ++c) p[c] += pr.probs[c];
    for (auto& v : p) v /= static_cast<double>(predictions.size());
    return p;
}

Knn::Knn(int k) : k_(k) {
    if (k < 1) throw Error("score", "k must be >= 1");
}

void Knn::fit(std::vector<std::vector<double>> points, std::vector<int> labels) {
    if (points.size() != labels.size()) throw Error("score", "kNN points and labels differ in length");
    if (points.size() < sz(k_))
        throw Error("score", "kNN needs at least k=" + std::to_string(k_) + " training points, got " +
                                 std::to_string(points.size()));
    for (const auto& p : points)
        if (p.size() != points.front().size()) throw Error("score", "kNN points differ in dimension");
    points_ = std::move(points);
    labels_ = std::move(labels);
}

int Knn::predict(std::span<const double> query) const {
    if (points_.empty()) throw Error("score", "kNN used before fit");
    if (query.size() != points_.front().size()) throw Error("score", "kNN query dimension mismatch");
    std::vector<std::pair<double, std::size_t>> dist(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
        double d = 0.0;
        for (std::size_t m = 0; m < query.size(); ++m) {
            const double t = points_[i][m] - query[m];
            d += t * t;
        }
        dist[i] = {d, i};
    }
    // Pairs compare by index second, so equal distances keep insertion order.
    std::partial_sort(dist.begin(), dist.begin() + k_, dist.end());
    std::map<int, int> votes;
    for (int j = 0; j < k_; ++j) ++votes[labels_[dist[sz(j)].second]];
    int best = votes.begin()->first, best_votes = -1;
    for (const auto& [label, v] : votes)
        if (v > best_votes) best = label, best_votes = v;
    return best;
}

Mlp::Mlp(MlpConfig config) : config_(config) {
    if (config.hidden < 1 || config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0))
        throw Error("config", "invalid MLP configuration");
}

void Mlp::forward(std::span<const double> x, std::vector<double>& hidden, std::vector<double>& out) const {
    const std::size_t D = sz(inputs_), H = sz(config_.hidden), C = sz(classes_);
    const double* W1 = params_.data();
    const double* b1 = W1 + H * D;
    const double* W2 = b1 + H;
    const double* b2 = W2 + C * H;
    hidden.assign(H, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
        double s = b1[h];
        for (std::size_t d = 0; d < D; ++d) s += W1[h * D + d] * (x[d] - mean_[d]) / scale_[d];
        hidden[h] = std::max(0.0, s);
    }
    out.assign(C, 0.0);
    double mx = -INFINITY;
    for (std::size_t c = 0; c < C; ++c) {
        double s = b2[c];
        for (std::size_t h = 0; h < H; ++h) s += W2[c * H + h] * hidden[h];
        out[c] = s;
        mx = std::max(mx, s);
    }
    double total = 0.0;
    for (auto& v : out) total += (v = std::exp(v - mx));
    for (auto& v : out) v /= total;
}

void Mlp::fit(const std::vector<std::vector<double>>& points, const std::vector<int>& labels, int num_classes) {
    if (points.empty() || points.size() != labels.size()) throw Error("score", "MLP needs matching, nonempty data");
    if (std::set<int>(labels.begin(), labels.end()).size() < 2) throw Error("score", "MLP needs at least two classes");
    for (int l : labels)
        if (l < 0 || l >= num_classes) throw Error("score", "MLP label out of range");
    inputs_ = static_cast<int>(points.front().size());
    classes_ = num_classes;
    const std::size_t D = sz(inputs_), H = sz(config_.hidden), C = sz(classes_), N = points.size();

    mean_.assign(D, 0.0);
    scale_.assign(D, 0.0);
    for (const auto& p : points)
        for (std::size_t d = 0; d < D; ++d) mean_[d] += p[d] / static_cast<double>(N);
    for (const auto& p : points)
        for (std::size_t d = 0; d < D; ++d) scale_[d] += (p[d] - mean_[d]) * (p[d] - mean_[d]) / static_cast<double>(N);
    for (auto& s : scale_) s = s > 1e-24 ? std::sqrt(s) : 1.0;

    auto rng = derive_rng({config_.seed, 0x3177});
    params_.assign(H * D + H + C * H + C, 0.0);
    const double a1 = std::sqrt(6.0 / static_cast<double>(D)), a2 = std::sqrt(6.0 / static_cast<double>(H + C));
    std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
    for (std::size_t i = 0; i < H * D; ++i) params_[i] = u1(rng);
    for (std::size_t i = 0; i < C * H; ++i) params_[H * D + H + i] = u2(rng);

    Optimizer adam({OptimizerKind::Adam}, params_.size());
    std::vector<double> grad(params_.size()), hidden, out;
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < N; start += sz(config_.batch_size)) {
            const std::size_t end = std::min(N, start + sz(config_.batch_size));
            const double b = static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            double* gW1 = grad.data();
            double* gb1 = gW1 + H * D;
            double* gW2 = gb1 + H;
            double* gb2 = gW2 + C * H;
            const double* W2 = params_.data() + H * D + H;
            for (std::size_t j = start; j < end; ++j) {
                const auto& x = points[order[j]];
                forward(x, hidden, out);
                out[sz(labels[order[j]])] -= 1.0;  // dlogits of cross-entropy
                std::vector<double> dh(H, 0.0);
                for (std::size_t c = 0; c < C; ++c) {
                    const double g = out[c] / b;
                    gb2[c] += g;
                    for (std::size_t h = 0; h < H; ++h) {
                        gW2[c * H + h] += g * hidden[h];
                        dh[h] += g * W2[c * H + h];
                    }
                }
                for (std::size_t h = 0; h < H; ++h) {
                    if (hidden[h] <= 0.0) continue;
                    gb1[h] += dh[h];
                    for (std::size_t d = 0; d < D; ++d) gW1[h * D + d] += dh[h] * (x[d] - mean_[d]) / scale_[d];
                }
            }
            adam.step(params_, grad, config_.learning_rate);
        }
    }
}

std::vector<double> Mlp::predict_proba(std::span<const double> x) const {
    if (params_.empty()) throw Error("score", "MLP used before fit");
    if (x.size() != sz(inputs_)) throw Error("score", "MLP input dimension mismatch");
    std::vector<double> hidden, out;
    forward(x, hidden, out);
    return out;
}

int Mlp::predict(std::span<const double> x) const {
    const auto p = predict_proba(x);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::string_view to_string(ScoreMethod m) noexcept {
    switch (m) {
    case ScoreMethod::Knn: return "knn";
    case ScoreMethod::Mlp: return "mlp";
    case ScoreMethod::GgPctKnn: return "ggpct-knn";
    case ScoreMethod::GgPctMlp: return "ggpct-mlp";
    }
    return "knn";
}

ScoreMethod parse_score_method(std::string_view text) {
    for (auto m : {ScoreMethod::Knn, ScoreMethod::Mlp, ScoreMethod::GgPctKnn, ScoreMethod::GgPctMlp})
        if (to_string(m) == text) return m;
    throw Error("config", "method must be knn, mlp, ggpct-knn or ggpct-mlp, got '" + std::string(text) + "'");
}

std::vector<double> slide_descriptor(const ModelParameters& params, const Slide& slide, ScoreMethod method,
                                     bool soft_percentages) {
    const ForwardPass pass = infer_slide(params, slide);
    if (method == ScoreMethod::Knn || method == ScoreMethod::Mlp)
        return slide_embedding(pass.features, params.config.feature_dim);
    std::vector<Prediction> preds(slide.size());
    std::vector<GleasonGrade> hard(slide.size());
    for (std::size_t i = 0; i < slide.size(); ++i) {
        preds[i] = pass.prediction(static_cast<int>(i));
        hard[i] = preds[i].argmax();
    }
    const auto p = soft_percentages ? soft_grade_percentages(preds) : grade_percentages(hard);
    return {p.begin(), p.end()};
}

std::vector<ScoreRow> score_slides(const ModelParameters& params, std::span<const Slide> train,
                                   std::span<const Slide> eval, ScoreMethod method, const ScoringConfig& config) {
    auto describe = [&](std::span<const Slide> slides) {
        std::vector<std::vector<double>> out(slides.size());
#pragma omp parallel for schedule(dynamic)
        for (std::size_t i = 0; i < slides.size(); ++i)
            out[i] = slide_descriptor(params, slides[i], method, config.soft_percentages);
        return out;
    };
    const auto train_x = describe(train);
    const auto eval_x = describe(eval);
    std::vector<int> gg, sc;
    for (const auto& s : train) {
        gg.push_back(score_to_grade_group(s.score).value);
        sc.push_back(score_sum_class(s.score));
    }
    constexpr int kLabels = 6;

    std::vector<ScoreRow> rows;
    auto emit = [&](auto&& predict_gg, auto&& predict_sc) {
        for (std::size_t i = 0; i < eval.size(); ++i)
            rows.push_back({eval[i].id, score_sum_class(eval[i].score), predict_sc(eval_x[i]),
                            score_to_grade_group(eval[i].score).value, predict_gg(eval_x[i])});
    };
    if (method == ScoreMethod::Knn || method == ScoreMethod::GgPctKnn) {
        Knn m_gg(config.k), m_sc(config.k);
        m_gg.fit(train_x, gg);
        m_sc.fit(train_x, sc);
        emit([&](const auto& x) { return m_gg.predict(x); }, [&](const auto& x) { return m_sc.predict(x); });
    } else {
        Mlp m_gg(config.mlp), m_sc(config.mlp);
        m_gg.fit(train_x, gg, kLabels);
        m_sc.fit(train_x, sc, kLabels);
        emit([&](const auto& x) { return m_gg.predict(x); }, [&](const auto& x) { return m_sc.predict(x); });
    }
    return rows;
}

void save_score_rows(std::span<const ScoreRow> rows, const std::filesystem::path& path) {
    CsvTable table({"slide_id", "true_score", "pred_score", "true_gg", "pred_gg"});
    for (const auto& r : rows)
        table.add_row({r.slide_id, std::to_string(r.true_score), std::to_string(r.pred_score), std::to_string(r.true_gg),
                       std::to_string(r.pred_gg)});
    table.write(path);
}

} // namespace wsmil
