#include "wsmil/stain.hpp"

#include "wsmil/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace wsmil {

namespace {

void require_rgb(const Image& image) {
    if (image.channels < 3) throw Error("stain", "histogram matching needs an RGB image");
}

Cdf256 cdf_from_counts(const std::array<std::uint64_t, 256>& counts) {
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw Error("stain", "empty image");
    Cdf256 cdf{};
    std::uint64_t running = 0;
    for (std::size_t i = 0; i < 256; ++i) {
        running += counts[i];
        cdf[i] = static_cast<double>(running) / static_cast<double>(total);
    }
    return cdf;
}

void accumulate(const Image& image, int channel, std::array<std::uint64_t, 256>& counts) {
    require_rgb(image);
    const auto stride = static_cast<std::size_t>(image.channels);
    for (std::size_t i = static_cast<std::size_t>(channel); i < image.data.size(); i += stride) ++counts[image.data[i]];
}

} // namespace

Cdf256 channel_cdf(const Image& image, int channel) {
    std::array<std::uint64_t, 256> counts{};
    accumulate(image, channel, counts);
    return cdf_from_counts(counts);
}

Cdf256 channel_cdf(std::span<const Image> images, int channel) {
    std::array<std::uint64_t, 256> counts{};
    for (const auto& image : images) accumulate(image, channel, counts);
    return cdf_from_counts(counts);
}

ReferenceProfile build_reference(const Image& image) {
    ReferenceProfile profile;
    for (int c = 0; c < 3; ++c) profile.cdf[static_cast<std::size_t>(c)] = channel_cdf(image, c);
    return profile;
}

Lut256 matching_lut(const Cdf256& source, const Cdf256& reference) {
    Lut256 lut{};
    std::size_t u = 0;
    // Both CDFs are nondecreasing, so the inverse can be walked once.
    for (std::size_t v = 0; v < 256; ++v) {
        while (u < 255 && reference[u] < source[v]) ++u;
        lut[v] = static_cast<std::uint8_t>(u);
    }
    return lut;
}

Image apply_luts(const Image& image, const std::array<Lut256, 3>& luts) {
    require_rgb(image);
    Image out = image;
    const auto stride = static_cast<std::size_t>(image.channels);
    for (std::size_t i = 0; i < out.data.size(); i += stride)
        for (std::size_t c = 0; c < 3; ++c) out.data[i + c] = luts[c][image.data[i + c]];
    return out;
}

Image histogram_match(const Image& image, const ReferenceProfile& reference) {
    std::array<Lut256, 3> luts{};
    for (int c = 0; c < 3; ++c)
        luts[static_cast<std::size_t>(c)] = matching_lut(channel_cdf(image, c), reference.cdf[static_cast<std::size_t>(c)]);
    return apply_luts(image, luts);
}

std::vector<Image> HistogramMatcher::normalize(std::span<const Image> images) const {
    std::array<Lut256, 3> luts{};
    for (int c = 0; c < 3; ++c)
        luts[static_cast<std::size_t>(c)] = matching_lut(channel_cdf(images, c), reference_.cdf[static_cast<std::size_t>(c)]);
    std::vector<Image> out;
    out.reserve(images.size());
    for (const auto& image : images) out.push_back(apply_luts(image, luts));
    return out;
}

void save_profile(const ReferenceProfile& profile, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("io", "cannot write reference profile " + path.string());
    os << "wsmil-reference-profile 1\n";
    char buf[32];
    for (const auto& cdf : profile.cdf) {
        for (std::size_t i = 0; i < 256; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", cdf[i]);
            os << (i ? " " : "") << buf;
        }
        os << '\n';
    }
}

ReferenceProfile load_profile(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("io", "cannot read reference profile " + path.string());
    std::string magic;
    int version = 0;
    is >> magic >> version;
    if (magic != "wsmil-reference-profile" || version != 1)
        throw Error("stain", "not a reference profile: " + path.string());
    ReferenceProfile profile;
    for (auto& cdf : profile.cdf) {
        for (auto& v : cdf)
            if (!(is >> v)) throw Error("stain", "truncated reference profile: " + path.string());
        for (std::size_t i = 1; i < 256; ++i)
            if (cdf[i] < cdf[i - 1]) throw Error("stain", "reference CDF is not monotone");
        if (cdf[255] != 1.0) throw Error("stain", "reference CDF does not end at 1");
    }
    return profile;
}

} // namespace wsmil
