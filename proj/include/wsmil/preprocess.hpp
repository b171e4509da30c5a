#pragma once

// Tissue masking (Otsu on the channel-mean grayscale) and moving-window
// patch extraction.

#include "wsmil/error.hpp"
#include "wsmil/image.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace wsmil {

using Histogram256 = std::array<std::uint64_t, 256>;

// Raised when all histogram mass sits in one bin.
class DegenerateHistogram : public Error {
public:
    DegenerateHistogram() : Error("otsu", "degenerate histogram") {}
};

// Threshold t splitting the bins into [0, t] and (t, 255]. Maximizes the
// between-class variance; the smallest maximizer wins.
int otsu_threshold(const Histogram256& histogram);

// Row-major H x W mask.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    bool at(int x, int y) const noexcept {
        return bits[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] != 0;
    }
    std::size_t count() const noexcept;
};

// Rounded mean of the color channels.
Image grayscale(const Image& image);
Histogram256 gray_histogram(const Image& image);

// Tissue is the darker side of the Otsu threshold. A degenerate histogram
// yields an all-background mask.
Mask tissue_mask(const Image& image);

struct TilingConfig {
    int window = 512;
    int stride = 256;
    double min_tissue = 0.20;
};

struct Patch {
    Image pixels;
    int x = 0;
    int y = 0;
    int grid_col = 0;
    int grid_row = 0;
    double tissue_fraction = 0.0;
};

// Number of valid window offsets along one axis.
int tile_positions(int extent, int window, int stride);

// Row-major list of kept patches (tissue_fraction >= min_tissue).
std::vector<Patch> tile_slide(const SlideImage& slide, const TilingConfig& config = {});

// Same selection, against a precomputed mask.
std::vector<Patch> tile_with_mask(const Image& image, const Mask& mask, const TilingConfig& config);

} // namespace wsmil
