#pragma once

// Channel-wise histogram matching against a reference image.

#include "wsmil/image.hpp"

#include <array>
#include <filesystem>
#include <memory>
#include <span>

namespace wsmil {

using Cdf256 = std::array<double, 256>;
using Lut256 = std::array<std::uint8_t, 256>;

struct ReferenceProfile {
    std::array<Cdf256, 3> cdf{};
};

// Normalized cumulative histogram of one channel. Entries are count/total so
// equal rational mass fractions compare equal.
Cdf256 channel_cdf(const Image& image, int channel);

// Same, pooled over several images (e.g. every patch of one slide).
Cdf256 channel_cdf(std::span<const Image> images, int channel);

ReferenceProfile build_reference(const Image& image);

// v -> smallest u with reference(u) >= source(v).
Lut256 matching_lut(const Cdf256& source, const Cdf256& reference);

Image apply_luts(const Image& image, const std::array<Lut256, 3>& luts);

Image histogram_match(const Image& image, const ReferenceProfile& reference);

void save_profile(const ReferenceProfile& profile, const std::filesystem::path& path);
ReferenceProfile load_profile(const std::filesystem::path& path);

// Pluggable normalization stage. Histogram matching is the only built-in
// implementation; a structure-preserving method can be slotted in after it.
class StainNormalizer {
public:
    virtual ~StainNormalizer() = default;
    // Normalizes a group of images that share one source distribution.
    virtual std::vector<Image> normalize(std::span<const Image> images) const = 0;
};

class HistogramMatcher final : public StainNormalizer {
public:
    explicit HistogramMatcher(ReferenceProfile reference) : reference_(std::move(reference)) {}
    std::vector<Image> normalize(std::span<const Image> images) const override;
    const ReferenceProfile& reference() const noexcept { return reference_; }

private:
    ReferenceProfile reference_;
};

} // namespace wsmil
