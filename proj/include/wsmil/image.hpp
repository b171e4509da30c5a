#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wsmil {

// Interleaved 8-bit image (HWC). Channels is 1, 3 or 4.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill) {}

    bool empty() const noexcept { return data.empty(); }
    std::size_t index(int x, int y, int c = 0) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }
    std::uint8_t& at(int x, int y, int c = 0) noexcept { return data[index(x, y, c)]; }
    std::uint8_t at(int x, int y, int c = 0) const noexcept { return data[index(x, y, c)]; }

    friend bool operator==(const Image&, const Image&) = default;
};

// A slide image as handed to tiling and stain normalization.
struct SlideImage {
    std::string id;
    Image pixels;
};

Image load_png(const std::filesystem::path& path);
void save_png(const Image& image, const std::filesystem::path& path);

// Drops alpha / expands gray so the result has three channels.
Image to_rgb(const Image& image);

// Copy of the w x h window at (x, y); the window must lie inside the image.
Image crop(const Image& image, int x, int y, int w, int h);

// Area-average resampling; exact box filter when the factor is an integer.
Image resize_area(const Image& image, int out_w, int out_h);

} // namespace wsmil
