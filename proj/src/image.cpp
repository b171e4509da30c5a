#include "wsmil/image.hpp"

#include "wsmil/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace wsmil {

namespace {

png_uint_32 png_format_for(int channels) {
    switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    default: throw Error("image", "unsupported channel count " + std::to_string(channels));
    }
}

} // namespace

Image load_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str()))
        throw Error("io", "cannot read PNG " + path.string() + ": " + png.message);

    const bool alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    const int channels = color ? (alpha ? 4 : 3) : 1;
    png.format = png_format_for(channels);

    Image image(static_cast<int>(png.width), static_cast<int>(png.height), channels);
    if (!png_image_finish_read(&png, nullptr, image.data.data(), 0, nullptr)) {
        png_image_free(&png);
        throw Error("io", "cannot decode PNG " + path.string() + ": " + png.message);
    }
    return image;
}

void save_png(const Image& image, const std::filesystem::path& path) {
    if (image.empty()) throw Error("image", "refusing to write an empty image to " + path.string());
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = png_format_for(image.channels);
    if (!png_image_write_to_file(&png, path.c_str(), 0, image.data.data(), 0, nullptr))
        throw Error("io", "cannot write PNG " + path.string() + ": " + png.message);
}

Image to_rgb(const Image& image) {
    if (image.channels == 3) return image;
    Image rgb(image.width, image.height, 3);
    const auto n = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
    const auto c = static_cast<std::size_t>(image.channels);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < 3; ++k) rgb.data[i * 3 + k] = image.data[i * c + (c >= 3 ? k : 0)];
    return rgb;
}

Image crop(const Image& image, int x, int y, int w, int h) {
    if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > image.width || y + h > image.height)
        throw Error("image", "crop window outside image");
    Image out(w, h, image.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(w) * static_cast<std::size_t>(image.channels);
    for (int r = 0; r < h; ++r)
        std::memcpy(&out.data[out.index(0, r)], &image.data[image.index(x, y + r)], row_bytes);
    return out;
}

Image resize_area(const Image& image, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) throw Error("image", "resize target must be positive");
    if (out_w == image.width && out_h == image.height) return image;

    Image out(out_w, out_h, image.channels);
    const double sx = static_cast<double>(image.width) / out_w;
    const double sy = static_cast<double>(image.height) / out_h;
    std::vector<double> acc(static_cast<std::size_t>(image.channels));
    for (int oy = 0; oy < out_h; ++oy) {
        const double y0 = oy * sy, y1 = (oy + 1) * sy;
        for (int ox = 0; ox < out_w; ++ox) {
            const double x0 = ox * sx, x1 = (ox + 1) * sx;
            std::fill(acc.begin(), acc.end(), 0.0);
            double area = 0.0;
            for (int iy = static_cast<int>(y0); iy < std::min(image.height, static_cast<int>(std::ceil(y1))); ++iy) {
                const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
                if (wy <= 0) continue;
                for (int ix = static_cast<int>(x0); ix < std::min(image.width, static_cast<int>(std::ceil(x1))); ++ix) {
                    const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
                    if (wx <= 0) continue;
                    for (int c = 0; c < image.channels; ++c) acc[static_cast<std::size_t>(c)] += wx * wy * image.at(ix, iy, c);
                    area += wx * wy;
                }
            }
            for (int c = 0; c < image.channels; ++c)
                out.at(ox, oy, c) = static_cast<std::uint8_t>(std::clamp(std::lround(acc[static_cast<std::size_t>(c)] / area), 0L, 255L));
        }
    }
    return out;
}

} // namespace wsmil
