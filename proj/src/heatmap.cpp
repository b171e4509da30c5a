#include "wsmil/heatmap.hpp"

#include "wsmil/csv.hpp"
#include "wsmil/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace wsmil {

namespace {

inline std::size_t sz(int v) { return static_cast<std::size_t>(v); }

struct Axis {
    int lo = 0;
    int hi = 0;
    double t = 0.0;
};

// Neighbouring anchors and weight of the upper one for pixel coordinate p.
Axis locate(double p, int anchors, int stride, int window) {
    double u = (p - window / 2.0) / stride;
    u = std::clamp(u, 0.0, static_cast<double>(anchors - 1));
    Axis a;
    a.lo = static_cast<int>(std::floor(u));
    a.hi = std::min(a.lo + 1, anchors - 1);
    a.t = u - a.lo;
    return a;
}

} // namespace

ProbGrid grid_from_predictions(std::span<const PatchIndexRow> patches, std::span<const Prediction> predictions) {
    if (patches.empty()) throw Error("heatmap", "no patches");
    if (patches.size() != predictions.size()) throw Error("heatmap", "patch and prediction counts differ");
    ProbGrid g;
    g.stride = patches.front().stride;
    g.window = patches.front().window;
    if (g.stride < 1 || g.window < 1) throw Error("heatmap", "patch index lacks window/stride");
    for (const auto& p : patches) {
        if (p.grid_col < 0 || p.grid_row < 0) throw Error("heatmap", "negative grid position");
        g.cols = std::max(g.cols, p.grid_col + 1);
        g.rows = std::max(g.rows, p.grid_row + 1);
    }
    g.probs.assign(sz(g.rows) * sz(g.cols) * kNumClasses, 0.0);
    for (std::size_t i = 0; i < g.probs.size(); i += kNumClasses) g.probs[i] = 1.0;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const std::size_t cell = (sz(patches[i].grid_row) * sz(g.cols) + sz(patches[i].grid_col)) * kNumClasses;
        std::copy(predictions[i].probs.begin(), predictions[i].probs.end(), g.probs.begin() + static_cast<std::ptrdiff_t>(cell));
    }
    return g;
}

ProbMap probability_map(const ProbGrid& grid, int out_h, int out_w) {
    if (grid.rows < 1 || grid.cols < 1) throw Error("heatmap", "empty probability grid");
    if (out_h < 1 || out_w < 1) throw Error("heatmap", "output size must be positive");
    ProbMap map{out_w, out_h, std::vector<double>(sz(out_w) * sz(out_h) * kNumClasses)};
    std::vector<Axis> xs(sz(out_w));
    for (int x = 0; x < out_w; ++x) xs[sz(x)] = locate(x + 0.5, grid.cols, grid.stride, grid.window);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < out_h; ++y) {
        const Axis ay = locate(y + 0.5, grid.rows, grid.stride, grid.window);
        for (int x = 0; x < out_w; ++x) {
            const Axis& ax = xs[sz(x)];
            const auto p00 = grid.at(ay.lo, ax.lo), p01 = grid.at(ay.lo, ax.hi);
            const auto p10 = grid.at(ay.hi, ax.lo), p11 = grid.at(ay.hi, ax.hi);
            double* out = &map.data[(sz(y) * sz(out_w) + sz(x)) * kNumClasses];
            for (std::size_t k = 0; k < kNumClasses; ++k) {
                const double top = (1.0 - ax.t) * p00[k] + ax.t * p01[k];
                const double bottom = (1.0 - ax.t) * p10[k] + ax.t * p11[k];
                out[k] = (1.0 - ay.t) * top + ay.t * bottom;
            }
        }
    }
    return map;
}

Image class_overlay(const ProbMap& map, const Mask& tissue, const Palette& palette) {
    const bool masked = !tissue.bits.empty();
    if (masked && (tissue.width != map.width || tissue.height != map.height))
        throw Error("heatmap", "tissue mask size does not match the probability map");
    Image out(map.width, map.height, 4, 0);
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) {
            if (masked && !tissue.at(x, y)) continue;
            const auto p = map.at(x, y);
            const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
            if (best == 0) continue;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = palette.colors[best][sz(c)];
            out.at(x, y, 3) = palette.alpha;
        }
    return out;
}

Mask coverage_mask(std::span<const PatchIndexRow> patches, int width, int height) {
    Mask m{width, height, std::vector<std::uint8_t>(sz(width) * sz(height), 0)};
    for (const auto& p : patches)
        for (int y = std::max(0, p.y); y < std::min(height, p.y + p.window); ++y)
            for (int x = std::max(0, p.x); x < std::min(width, p.x + p.window); ++x) m.bits[sz(y) * sz(width) + sz(x)] = 1;
    return m;
}

void save_prob_map_csv(const ProbMap& map, const std::filesystem::path& path) {
    CsvTable t({"x", "y", "p_nc", "p_gg3", "p_gg4", "p_gg5"});
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) {
            const auto p = map.at(x, y);
            t.add_row({std::to_string(x), std::to_string(y), format_double(p[0]), format_double(p[1]), format_double(p[2]),
                       format_double(p[3])});
        }
    t.write(path);
}

} // namespace wsmil
