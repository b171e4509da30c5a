#include "oracles.hpp"
#include "test_util.hpp"
#include "wsmil/error.hpp"
#include "wsmil/heatmap.hpp"

#include <doctest.h>

#include <numeric>

using namespace wsmil;

namespace {

std::array<double, 4> random_probs(std::mt19937_64& rng) {
    return head_probabilities(HeadActivation::Softmax, testutil::uniform(rng, 4, -3, 3));
}

ProbGrid random_grid(std::mt19937_64& rng, int rows, int cols, int stride, int window) {
    ProbGrid g{rows, cols, stride, window, {}};
    for (int i = 0; i < rows * cols; ++i) {
        const auto p = random_probs(rng);
        g.probs.insert(g.probs.end(), p.begin(), p.end());
    }
    return g;
}

} // namespace

TEST_CASE("probability map examples") {
    std::mt19937_64 rng(91);
    const auto single = random_grid(rng, 1, 1, 16, 32);
    const auto flat = probability_map(single, 20, 30);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 30; ++x)
            for (int k = 0; k < 4; ++k) CHECK(flat.at(x, y)[k] == single.probs[static_cast<std::size_t>(k)]);

    // Anchors at 1.5 and 5.5; pixel 3 samples 3.5, the midpoint.
    const auto pair = random_grid(rng, 1, 2, 4, 3);
    const auto m = probability_map(pair, 1, 8);
    for (int k = 0; k < 4; ++k)
        CHECK(m.at(3, 0)[k] == doctest::Approx((pair.probs[static_cast<std::size_t>(k)] + pair.probs[static_cast<std::size_t>(4 + k)]) / 2).epsilon(1e-14));
    // Clamped outside the outer anchors.
    for (int k = 0; k < 4; ++k) {
        CHECK(m.at(0, 0)[k] == pair.probs[static_cast<std::size_t>(k)]);
        CHECK(m.at(7, 0)[k] == pair.probs[static_cast<std::size_t>(4 + k)]);
    }
}

TEST_CASE("probability map matches the scalar bilinear oracle") {
    std::mt19937_64 rng(92);
    for (int trial = 0; trial < 250; ++trial) {
        const int rows = 1 + static_cast<int>(rng() % 4), cols = 1 + static_cast<int>(rng() % 4);
        const int stride = 1 + static_cast<int>(rng() % 9), window = stride + static_cast<int>(rng() % 9);
        const auto g = random_grid(rng, rows, cols, stride, window);
        const int h = (rows - 1) * stride + window, w = (cols - 1) * stride + window;
        const auto map = probability_map(g, h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int k = 0; k < 4; ++k)
                    CHECK(std::abs(map.at(x, y)[k] - oracle::bilinear(g.probs, rows, cols, stride, window, x, y, k)) < 1e-9);
    }
}

TEST_CASE("interpolated vectors stay convex") {
    std::mt19937_64 rng(93);
    for (int trial = 0; trial < 100; ++trial) {
        const int rows = 1 + static_cast<int>(rng() % 5), cols = 1 + static_cast<int>(rng() % 5);
        const int stride = 2 + static_cast<int>(rng() % 6), window = stride * (1 + static_cast<int>(rng() % 2));
        const auto g = random_grid(rng, rows, cols, stride, window);
        const auto map = probability_map(g, (rows - 1) * stride + window, (cols - 1) * stride + window);
        for (int y = 0; y < map.height; ++y)
            for (int x = 0; x < map.width; ++x) {
                const auto p = map.at(x, y);
                CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-6);
                // Bounds from the four surrounding anchors.
                const double ux = std::clamp((x + 0.5 - window / 2.0) / stride, 0.0, double(cols - 1));
                const double uy = std::clamp((y + 0.5 - window / 2.0) / stride, 0.0, double(rows - 1));
                const int c0 = int(ux), r0 = int(uy), c1 = std::min(c0 + 1, cols - 1), r1 = std::min(r0 + 1, rows - 1);
                for (int k = 0; k < 4; ++k) {
                    const double a = g.at(r0, c0)[k], b = g.at(r0, c1)[k], c = g.at(r1, c0)[k], d = g.at(r1, c1)[k];
                    CHECK(p[k] >= std::min({a, b, c, d}) - 1e-12);
                    CHECK(p[k] <= std::max({a, b, c, d}) + 1e-12);
                }
            }
    }
}

TEST_CASE("grid from predictions fills holes with NC") {
    std::vector<PatchIndexRow> rows{{"a", 0, 0, 0, 0, 8, 4}, {"b", 8, 4, 2, 1, 8, 4}};
    std::vector<Prediction> preds{Prediction{{0.1, 0.2, 0.3, 0.4}}, Prediction{{0.4, 0.3, 0.2, 0.1}}};
    const auto g = grid_from_predictions(rows, preds);
    CHECK(g.rows == 2);
    CHECK(g.cols == 3);
    CHECK(g.stride == 4);
    CHECK(g.window == 8);
    CHECK(g.at(0, 0)[3] == 0.4);
    CHECK(g.at(1, 2)[0] == 0.4);
    CHECK(g.at(0, 1)[0] == 1.0);
    CHECK(g.at(1, 0)[1] == 0.0);
    CHECK_THROWS_AS(grid_from_predictions(rows, std::vector<Prediction>{}), Error);
}

TEST_CASE("overlay colors") {
    ProbMap nc{3, 2, {}};
    for (int i = 0; i < 6; ++i) nc.data.insert(nc.data.end(), {0.7, 0.1, 0.1, 0.1});
    const auto clear = class_overlay(nc, {});
    CHECK(clear.channels == 4);
    for (auto v : clear.data) CHECK(v == 0);

    ProbMap g4{3, 2, {}};
    for (int i = 0; i < 6; ++i) g4.data.insert(g4.data.end(), {0.1, 0.1, 0.7, 0.1});
    Mask tissue{3, 2, {1, 1, 0, 1, 1, 1}};
    const auto blue = class_overlay(g4, tissue);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x) {
            if (!tissue.at(x, y)) {
                CHECK(blue.at(x, y, 3) == 0);
                continue;
            }
            CHECK(blue.at(x, y, 0) == 0);
            CHECK(blue.at(x, y, 1) == 0);
            CHECK(blue.at(x, y, 2) == 255);
            CHECK(blue.at(x, y, 3) == 115);
        }

    ProbMap tie{2, 1, {0.1, 0.4, 0.4, 0.1, 0.0, 0.0, 0.5, 0.5}};
    const auto t = class_overlay(tie, {});
    CHECK(t.at(0, 0, 1) == 200);  // GG3 green beats GG4
    CHECK(t.at(1, 0, 2) == 255);  // GG4 blue beats GG5
    ProbMap nc_tie{1, 1, {0.5, 0.5, 0, 0}};
    CHECK(class_overlay(nc_tie, {}).at(0, 0, 3) == 0);
}

TEST_CASE("coverage mask is the union of windows") {
    std::vector<PatchIndexRow> rows{{"a", 0, 0, 0, 0, 4, 4}, {"b", 6, 2, 0, 0, 4, 4}};
    const auto m = coverage_mask(rows, 12, 8);
    std::size_t expected = 0;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 12; ++x) {
            const bool in = (x < 4 && y < 4) || (x >= 6 && x < 10 && y >= 2 && y < 6);
            CHECK(m.at(x, y) == in);
            expected += in;
        }
    CHECK(m.count() == expected);
}
