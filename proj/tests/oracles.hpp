#pragma once

// Straight-line reference computations used only by the tests. They are
// written from the definitions, not from the library code, and favour
// obviousness over speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

namespace oracle {

// Weighted kappa from the pairwise definition: observed mean disagreement
// over matched pairs against mean disagreement over all (truth, pred) pairs.
inline double quadratic_kappa(const std::vector<int>& t, const std::vector<int>& p, int K) {
    const double n = static_cast<double>(t.size());
    auto w = [K](int a, int b) { return double(a - b) * double(a - b) / (double(K - 1) * double(K - 1)); };
    double observed = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) observed += w(t[i], p[i]);
    observed /= n;
    double expected = 0.0;
    for (std::size_t a = 0; a < t.size(); ++a)
        for (std::size_t b = 0; b < p.size(); ++b) expected += w(t[a], p[b]);
    expected /= n * n;
    return 1.0 - observed / expected;
}

inline std::vector<double> f1_per_class(const std::vector<int>& t, const std::vector<int>& p, int K) {
    std::vector<double> f(static_cast<std::size_t>(K));
    for (int c = 0; c < K; ++c) {
        int tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] == c && p[i] == c) ++tp;
            if (t[i] != c && p[i] == c) ++fp;
            if (t[i] == c && p[i] != c) ++fn;
        }
        // 2PR/(P+R) rewritten as 2TP/(2TP+FP+FN); 0 when nothing is true or predicted.
        f[static_cast<std::size_t>(c)] = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    }
    return f;
}

inline int knn(const std::vector<std::vector<double>>& pts, const std::vector<int>& labels, const std::vector<double>& q,
               int k) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) s += (pts[i][j] - q[j]) * (pts[i][j] - q[j]);
        d.push_back({s, i});
    }
    std::stable_sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::map<int, int> votes;
    for (int i = 0; i < k; ++i) votes[labels[d[static_cast<std::size_t>(i)].second]]++;
    int best_label = 0, best = -1;
    for (auto [label, v] : votes)
        if (v > best) best = v, best_label = label;
    return best_label;
}

// Exhaustive between-class variance maximiser; -1 when no cut separates mass.
inline int otsu(const std::array<std::uint64_t, 256>& h) {
    double best = -1.0;
    std::vector<double> var(255, -1.0);
    for (int t = 0; t < 255; ++t) {
        double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
        for (int i = 0; i <= t; ++i) n0 += double(h[i]), s0 += double(i) * double(h[i]);
        for (int i = t + 1; i < 256; ++i) n1 += double(h[i]), s1 += double(i) * double(h[i]);
        if (n0 == 0 || n1 == 0) continue;
        const double n = n0 + n1;
        const double m0 = s0 / n0, m1 = s1 / n1;
        var[static_cast<std::size_t>(t)] = (n0 / n) * (n1 / n) * (m0 - m1) * (m0 - m1);
        best = std::max(best, var[static_cast<std::size_t>(t)]);
    }
    if (best < 0) return -1;
    for (int t = 0; t < 255; ++t)
        if (var[static_cast<std::size_t>(t)] >= best * (1 - 1e-12)) return t;
    return -1;
}

// Bilinear value at pixel (x, y) found by scanning for the bracketing
// anchors along each axis.
inline double bilinear(const std::vector<double>& grid, int rows, int cols, int stride, int window, int x, int y, int k) {
    auto bracket = [&](double pos, int n, int& lo, int& hi, double& t) {
        const double first = window / 2.0, last = (n - 1) * double(stride) + window / 2.0;
        if (pos <= first) { lo = hi = 0; t = 0; return; }
        if (pos >= last) { lo = hi = n - 1; t = 0; return; }
        for (int i = 0; i + 1 < n; ++i) {
            const double a = i * double(stride) + window / 2.0, b = a + stride;
            if (pos >= a && pos <= b) { lo = i; hi = i + 1; t = (pos - a) / (b - a); return; }
        }
    };
    int c0, c1, r0, r1;
    double tx, ty;
    bracket(x + 0.5, cols, c0, c1, tx);
    bracket(y + 0.5, rows, r0, r1, ty);
    auto g = [&](int r, int c) { return grid[(static_cast<std::size_t>(r) * cols + c) * 4 + k]; };
    return g(r0, c0) * (1 - tx) * (1 - ty) + g(r0, c1) * tx * (1 - ty) + g(r1, c0) * (1 - tx) * ty + g(r1, c1) * tx * ty;
}

// Joint softmax over (i, k) of w_k . (tanh(V z_i) * sigmoid(U z_i)).
inline std::vector<double> attention(const std::vector<std::vector<double>>& z, const std::vector<double>& V,
                                     const std::vector<double>& U, const std::vector<double>& W, int L, int K,
                                     bool per_class) {
    const std::size_t I = z.size(), M = z[0].size();
    std::vector<double> score(I * K);
    for (std::size_t i = 0; i < I; ++i)
        for (int k = 0; k < K; ++k) {
            double s = 0;
            for (int l = 0; l < L; ++l) {
                double v = 0, u = 0;
                for (std::size_t m = 0; m < M; ++m) {
                    v += V[l * M + m] * z[i][m];
                    u += U[l * M + m] * z[i][m];
                }
                s += W[static_cast<std::size_t>(l) * K + k] * std::tanh(v) * (1 / (1 + std::exp(-u)));
            }
            score[i * K + k] = s;
        }
    std::vector<double> a(I * K);
    if (!per_class) {
        double total = 0;
        for (double s : score) total += std::exp(s);
        for (std::size_t j = 0; j < a.size(); ++j) a[j] = std::exp(score[j]) / total;
    } else {
        for (int k = 0; k < K; ++k) {
            double total = 0;
            for (std::size_t i = 0; i < I; ++i) total += std::exp(score[i * K + k]);
            for (std::size_t i = 0; i < I; ++i) a[i * K + k] = std::exp(score[i * K + k]) / total;
        }
    }
    return a;
}

inline std::array<double, 4> softmax(const std::array<double, 4>& x) {
    std::array<double, 4> e{};
    double s = 0;
    for (int i = 0; i < 4; ++i) s += (e[i] = std::exp(x[i]));
    for (auto& v : e) v /= s;
    return e;
}

// Histogram matching from integer counts: v maps to the smallest u whose
// reference mass fraction reaches v's source mass fraction, compared exactly
// by cross-multiplication.
inline std::array<int, 256> match_lut(const std::vector<std::uint8_t>& src, const std::vector<std::uint8_t>& ref) {
    std::array<std::uint64_t, 256> cs{}, cr{};
    for (auto v : src) cs[v]++;
    for (auto v : ref) cr[v]++;
    for (int i = 1; i < 256; ++i) cs[i] += cs[i - 1], cr[i] += cr[i - 1];
    const auto ns = static_cast<unsigned __int128>(src.size()), nr = static_cast<unsigned __int128>(ref.size());
    std::array<int, 256> lut{};
    for (int v = 0; v < 256; ++v) {
        lut[v] = 255;
        for (int u = 0; u < 256; ++u)
            if (static_cast<unsigned __int128>(cr[u]) * ns >= static_cast<unsigned __int128>(cs[v]) * nr) {
                lut[v] = u;
                break;
            }
    }
    return lut;
}

} // namespace oracle
