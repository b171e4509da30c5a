#pragma once

// Pixel-level probability maps interpolated from patch-grid predictions, and
// the colored overlay rendered from them.

#include "wsmil/dataset.hpp"
#include "wsmil/image.hpp"
#include "wsmil/model.hpp"
#include "wsmil/preprocess.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace wsmil {

struct ProbGrid {
    int rows = 0;
    int cols = 0;
    int stride = 1;
    int window = 1;
    std::vector<double> probs;  // rows x cols x 4

    std::span<const double> at(int r, int c) const {
        return std::span<const double>(probs).subspan(
            (static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)) * kNumClasses,
            kNumClasses);
    }
};

// Grid cells without a kept patch are filled with a certain-NC vector.
ProbGrid grid_from_predictions(std::span<const PatchIndexRow> patches, std::span<const Prediction> predictions);

struct ProbMap {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // height x width x 4

    std::span<const double> at(int x, int y) const {
        return std::span<const double>(data).subspan(
            (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * kNumClasses,
            kNumClasses);
    }
};

// Anchors sit at patch centers (c * stride + window / 2); pixel (x, y) is
// sampled at (x + 0.5, y + 0.5). Separable bilinear between the neighbouring
// anchors, clamped to the nearest anchor outside the outer ones.
ProbMap probability_map(const ProbGrid& grid, int out_h, int out_w);

struct Palette {
    std::array<std::array<std::uint8_t, 3>, kNumClasses> colors{{{0, 0, 0}, {0, 200, 0}, {0, 0, 255}, {255, 0, 0}}};
    std::uint8_t alpha = 115;  // 0.45
};

// RGBA overlay: per-pixel argmax (lowest index on ties); NC and pixels
// outside the mask are fully transparent. An empty mask means all tissue.
Image class_overlay(const ProbMap& map, const Mask& tissue, const Palette& palette = {});

// Tissue coverage of a patch grid: union of the kept windows.
Mask coverage_mask(std::span<const PatchIndexRow> patches, int width, int height);

void save_prob_map_csv(const ProbMap& map, const std::filesystem::path& path);

} // namespace wsmil
