#include "wsmil/mil.hpp"

#include "wsmil/error.hpp"

#include <algorithm>
#include <cmath>

namespace wsmil {

namespace {

inline std::size_t sz(int v) { return static_cast<std::size_t>(v); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Gated hidden representation h_i = tanh(V z_i) * sigm(U z_i), plus the two
// gate activations for backward.
struct Gate {
    std::vector<double> t;  // I x L
    std::vector<double> g;  // I x L
    std::vector<double> h;  // I x L
};

Gate gate_forward(std::span<const double> features, int count, const AttentionParameters& a) {
    Gate gate;
    const std::size_t n = sz(count) * sz(a.hidden);
    gate.t.resize(n);
    gate.g.resize(n);
    gate.h.resize(n);
    for (int i = 0; i < count; ++i) {
        const double* z = features.data() + sz(i) * sz(a.features);
        for (int l = 0; l < a.hidden; ++l) {
            double v = 0.0, u = 0.0;
            const double* vr = a.V.data() + sz(l) * sz(a.features);
            const double* ur = a.U.data() + sz(l) * sz(a.features);
            for (int m = 0; m < a.features; ++m) {
                v += vr[m] * z[m];
                u += ur[m] * z[m];
            }
            const std::size_t idx = sz(i) * sz(a.hidden) + sz(l);
            gate.t[idx] = std::tanh(v);
            gate.g[idx] = sigmoid(u);
            gate.h[idx] = gate.t[idx] * gate.g[idx];
        }
    }
    return gate;
}

// Softmax over all (i, k) jointly, or over i separately for each k.
std::vector<double> attention_softmax(const std::vector<double>& scores, int count, int classes, AttentionNorm norm) {
    std::vector<double> a(scores.size());
    auto normalize = [&](auto&& indices) {
        double mx = -INFINITY;
        for (std::size_t idx : indices) mx = std::max(mx, scores[idx]);
        double sum = 0.0;
        for (std::size_t idx : indices) sum += (a[idx] = std::exp(scores[idx] - mx));
        for (std::size_t idx : indices) a[idx] /= sum;
    };
    if (norm == AttentionNorm::Joint) {
        std::vector<std::size_t> all(scores.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        normalize(all);
    } else {
        std::vector<std::size_t> column(sz(count));
        for (int k = 0; k < classes; ++k) {
            for (int i = 0; i < count; ++i) column[sz(i)] = sz(i) * sz(classes) + sz(k);
            normalize(column);
        }
    }
    return a;
}

void check_bag(std::span<const Prediction> instances) {
    if (instances.empty()) throw Error("mil", "empty bag");
}

} // namespace

void AttentionParameters::validate() const {
    if (hidden < 1 || features < 1 || classes != kNumClasses) throw Error("mil", "attention dimensions are invalid");
    if (V.size() != sz(hidden) * sz(features) || U.size() != sz(hidden) * sz(features) ||
        W.size() != sz(hidden) * sz(classes))
        throw Error("mil", "attention parameter sizes do not match L=" + std::to_string(hidden) +
                               ", M=" + std::to_string(features));
}

AttentionParameters attention_parameters(const ModelParameters& params) {
    if (params.config.attention_dim < 1) throw Error("mil", "model has no attention block");
    const ParamLayout layout = params.layout();
    return AttentionParameters{params.config.attention_dim, params.config.feature_dim, kNumClasses,
                               params.view(layout.attention_v), params.view(layout.attention_u),
                               params.view(layout.attention_w)};
}

BagOutput aggregate_max(std::span<const Prediction> instances) {
    check_bag(instances);
    BagOutput out;
    out.per_instance.assign(instances.begin(), instances.end());
    for (int k = 0; k < kNumCancerous; ++k) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(instances.size()); ++i)
            if (instances[sz(i)].probs[sz(k + 1)] > instances[sz(best)].probs[sz(k + 1)]) best = i;
        out.argmax[sz(k)] = best;
        out.bag_probs[sz(k)] = instances[sz(best)].probs[sz(k + 1)];
    }
    return out;
}

BagOutput aggregate_attention(std::span<const double> features, std::span<const Prediction> instances,
                              const AttentionParameters& a, AttentionNorm norm) {
    check_bag(instances);
    a.validate();
    const int count = static_cast<int>(instances.size());
    if (features.size() != sz(count) * sz(a.features))
        throw Error("mil", "feature matrix is " + std::to_string(features.size()) + " values, expected " +
                               std::to_string(count) + " x " + std::to_string(a.features));

    const Gate gate = gate_forward(features, count, a);
    std::vector<double> scores(sz(count) * sz(a.classes), 0.0);
    for (int i = 0; i < count; ++i)
        for (int k = 0; k < a.classes; ++k) {
            double s = 0.0;
            for (int l = 0; l < a.hidden; ++l)
                s += a.W[sz(l) * sz(a.classes) + sz(k)] * gate.h[sz(i) * sz(a.hidden) + sz(l)];
            scores[sz(i) * sz(a.classes) + sz(k)] = s;
        }

    BagOutput out;
    out.per_instance.assign(instances.begin(), instances.end());
    out.attention = attention_softmax(scores, count, a.classes, norm);
    for (int k = 0; k < kNumCancerous; ++k) {
        double sum = 0.0;
        for (int i = 0; i < count; ++i)
            sum += out.attention[sz(i) * sz(a.classes) + sz(k + 1)] * instances[sz(i)].probs[sz(k + 1)];
        out.bag_probs[sz(k)] = sum;
    }
    return out;
}

double teacher_bag_loss(const BagOutput& bag, const SlideLabel& label) {
    double loss = 0.0;
    for (int k = 0; k < kNumCancerous; ++k) {
        const double p = std::clamp(bag.bag_probs[sz(k)], kProbEpsilon, 1.0 - kProbEpsilon);
        const double y = label.presence[sz(k + 1)] ? 1.0 : 0.0;
        loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return loss / kNumCancerous;
}

std::array<double, kNumCancerous> teacher_bag_loss_grad(const BagOutput& bag, const SlideLabel& label) {
    std::array<double, kNumCancerous> grad{};
    for (int k = 0; k < kNumCancerous; ++k) {
        // Evaluated at the clamped value so saturated bags still get pushed back.
        const double p = std::clamp(bag.bag_probs[sz(k)], kProbEpsilon, 1.0 - kProbEpsilon);
        const double y = label.presence[sz(k + 1)] ? 1.0 : 0.0;
        grad[sz(k)] = (-y / p + (1.0 - y) / (1.0 - p)) / kNumCancerous;
    }
    return grad;
}

std::vector<double> max_backward(const BagOutput& bag, const std::array<double, kNumCancerous>& dbag) {
    std::vector<double> dprobs(bag.per_instance.size() * kNumClasses, 0.0);
    for (int k = 0; k < kNumCancerous; ++k) {
        if (bag.argmax[sz(k)] < 0) throw Error("mil", "max_backward needs a max-pooled bag");
        dprobs[sz(bag.argmax[sz(k)]) * kNumClasses + sz(k + 1)] += dbag[sz(k)];
    }
    return dprobs;
}

AttentionGradients attention_backward(std::span<const double> features, std::span<const Prediction> instances,
                                      const AttentionParameters& a, AttentionNorm norm, const BagOutput& bag,
                                      const std::array<double, kNumCancerous>& dbag) {
    a.validate();
    const int count = static_cast<int>(instances.size());
    const int K = a.classes, L = a.hidden, M = a.features;
    AttentionGradients g;
    g.dV.assign(sz(L) * sz(M), 0.0);
    g.dU.assign(sz(L) * sz(M), 0.0);
    g.dW.assign(sz(L) * sz(K), 0.0);
    g.dfeatures.assign(sz(count) * sz(M), 0.0);
    g.dprobs.assign(sz(count) * sz(K), 0.0);

    // bag_k = sum_i a_ik y_ik for cancerous k.
    std::vector<double> da(sz(count) * sz(K), 0.0);
    for (int i = 0; i < count; ++i)
        for (int k = 0; k < kNumCancerous; ++k) {
            const std::size_t idx = sz(i) * sz(K) + sz(k + 1);
            da[idx] = dbag[sz(k)] * instances[sz(i)].probs[sz(k + 1)];
            g.dprobs[idx] = dbag[sz(k)] * bag.attention[idx];
        }

    // Softmax backward within each normalization group.
    std::vector<double> ds(da.size(), 0.0);
    if (norm == AttentionNorm::Joint) {
        double dot = 0.0;
        for (std::size_t j = 0; j < da.size(); ++j) dot += bag.attention[j] * da[j];
        for (std::size_t j = 0; j < da.size(); ++j) ds[j] = bag.attention[j] * (da[j] - dot);
    } else {
        for (int k = 0; k < K; ++k) {
            double dot = 0.0;
            for (int i = 0; i < count; ++i) dot += bag.attention[sz(i) * sz(K) + sz(k)] * da[sz(i) * sz(K) + sz(k)];
            for (int i = 0; i < count; ++i) {
                const std::size_t idx = sz(i) * sz(K) + sz(k);
                ds[idx] = bag.attention[idx] * (da[idx] - dot);
            }
        }
    }

    const Gate gate = gate_forward(features, count, a);
    std::vector<double> dpre_v(sz(L)), dpre_u(sz(L));
    for (int i = 0; i < count; ++i) {
        const double* z = features.data() + sz(i) * sz(M);
        for (int l = 0; l < L; ++l) {
            const std::size_t hi = sz(i) * sz(L) + sz(l);
            double dh = 0.0;
            for (int k = 0; k < K; ++k) {
                const double dsk = ds[sz(i) * sz(K) + sz(k)];
                g.dW[sz(l) * sz(K) + sz(k)] += dsk * gate.h[hi];
                dh += dsk * a.W[sz(l) * sz(K) + sz(k)];
            }
            const double t = gate.t[hi], s = gate.g[hi];
            dpre_v[sz(l)] = dh * s * (1.0 - t * t);
            dpre_u[sz(l)] = dh * t * s * (1.0 - s);
        }
        double* dz = g.dfeatures.data() + sz(i) * sz(M);
        for (int l = 0; l < L; ++l) {
            const double gv = dpre_v[sz(l)], gu = dpre_u[sz(l)];
            const double* vr = a.V.data() + sz(l) * sz(M);
            const double* ur = a.U.data() + sz(l) * sz(M);
            double* dvr = g.dV.data() + sz(l) * sz(M);
            double* dur = g.dU.data() + sz(l) * sz(M);
            for (int m = 0; m < M; ++m) {
                dvr[m] += gv * z[m];
                dur[m] += gu * z[m];
                dz[m] += gv * vr[m] + gu * ur[m];
            }
        }
    }
    return g;
}

} // namespace wsmil
