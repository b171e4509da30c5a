#include "wsmil/preprocess.hpp"

#include <algorithm>
#include <numeric>

namespace wsmil {

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

int otsu_threshold(const Histogram256& histogram) {
    std::uint64_t total = 0;
    double total_sum = 0.0;
    int occupied = 0;
    for (int i = 0; i < 256; ++i) {
        total += histogram[static_cast<std::size_t>(i)];
        total_sum += static_cast<double>(i) * static_cast<double>(histogram[static_cast<std::size_t>(i)]);
        if (histogram[static_cast<std::size_t>(i)] > 0) ++occupied;
    }
    if (total == 0) throw Error("otsu", "empty histogram");
    if (occupied <= 1) throw DegenerateHistogram();

    const double n = static_cast<double>(total);
    std::array<double, 255> variance{};
    double n0 = 0.0, sum0 = 0.0;
    for (int t = 0; t < 255; ++t) {
        n0 += static_cast<double>(histogram[static_cast<std::size_t>(t)]);
        sum0 += static_cast<double>(t) * static_cast<double>(histogram[static_cast<std::size_t>(t)]);
        const double n1 = n - n0;
        if (n0 == 0.0 || n1 == 0.0) continue;
        const double mean0 = sum0 / n0;
        const double mean1 = (total_sum - sum0) / n1;
        variance[static_cast<std::size_t>(t)] = (n0 / n) * (n1 / n) * (mean0 - mean1) * (mean0 - mean1);
    }
    const double best = *std::max_element(variance.begin(), variance.end());
    // Values within rounding noise of the maximum count as ties.
    const double tol = best * 1e-12;
    for (int t = 0; t < 255; ++t)
        if (variance[static_cast<std::size_t>(t)] >= best - tol) return t;
    return 0;
}

Image grayscale(const Image& image) {
    Image gray(image.width, image.height, 1);
    const std::size_t pixels = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
    const auto c = static_cast<std::size_t>(image.channels);
    const int color = std::min(image.channels, 3);
    for (std::size_t p = 0; p < pixels; ++p) {
        int sum = 0;
        for (int k = 0; k < color; ++k) sum += image.data[p * c + static_cast<std::size_t>(k)];
        gray.data[p] = static_cast<std::uint8_t>((2 * sum + color) / (2 * color));
    }
    return gray;
}

Histogram256 gray_histogram(const Image& image) {
    Histogram256 hist{};
    for (auto v : grayscale(image).data) ++hist[v];
    return hist;
}

Mask tissue_mask(const Image& image) {
    if (image.empty()) throw Error("preprocess", "empty image");
    const Image gray = grayscale(image);
    Mask mask{image.width, image.height, std::vector<std::uint8_t>(gray.data.size(), 0)};
    Histogram256 hist{};
    for (auto v : gray.data) ++hist[v];
    int threshold = 0;
    try {
        threshold = otsu_threshold(hist);
    } catch (const DegenerateHistogram&) {
        return mask;
    }
    for (std::size_t i = 0; i < gray.data.size(); ++i) mask.bits[i] = gray.data[i] <= threshold ? 1 : 0;
    return mask;
}

int tile_positions(int extent, int window, int stride) {
    if (window > extent) return 0;
    return (extent - window) / stride + 1;
}

std::vector<Patch> tile_with_mask(const Image& image, const Mask& mask, const TilingConfig& config) {
    if (config.window < 1 || config.stride < 1) throw Error("preprocess", "window and stride must be >= 1");
    if (config.window > image.width || config.window > image.height) throw Error("preprocess", "slide smaller than window");
    if (mask.width != image.width || mask.height != image.height) throw Error("preprocess", "mask does not match image");

    // Summed-area table of the mask, (W+1) x (H+1).
    const std::size_t sw = static_cast<std::size_t>(image.width) + 1;
    std::vector<std::uint64_t> integral(sw * (static_cast<std::size_t>(image.height) + 1), 0);
    for (int y = 0; y < image.height; ++y) {
        std::uint64_t row = 0;
        for (int x = 0; x < image.width; ++x) {
            row += mask.at(x, y) ? 1 : 0;
            integral[(static_cast<std::size_t>(y) + 1) * sw + static_cast<std::size_t>(x) + 1] =
                integral[static_cast<std::size_t>(y) * sw + static_cast<std::size_t>(x) + 1] + row;
        }
    }
    auto window_sum = [&](int x, int y, int w) {
        const auto x0 = static_cast<std::size_t>(x), y0 = static_cast<std::size_t>(y);
        const auto x1 = x0 + static_cast<std::size_t>(w), y1 = y0 + static_cast<std::size_t>(w);
        return integral[y1 * sw + x1] + integral[y0 * sw + x0] - integral[y0 * sw + x1] - integral[y1 * sw + x0];
    };

    const int cols = tile_positions(image.width, config.window, config.stride);
    const int rows = tile_positions(image.height, config.window, config.stride);
    const double area = static_cast<double>(config.window) * static_cast<double>(config.window);
    std::vector<Patch> patches;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int x = c * config.stride, y = r * config.stride;
            const double fraction = static_cast<double>(window_sum(x, y, config.window)) / area;
            if (fraction < config.min_tissue) continue;
            patches.push_back({crop(image, x, y, config.window, config.window), x, y, c, r, fraction});
        }
    }
    return patches;
}

std::vector<Patch> tile_slide(const SlideImage& slide, const TilingConfig& config) {
    if (config.window > slide.pixels.width || config.window > slide.pixels.height)
        throw Error("preprocess", "slide smaller than window");
    return tile_with_mask(slide.pixels, tissue_mask(slide.pixels), config);
}

} // namespace wsmil
