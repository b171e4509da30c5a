#pragma once

// Synthetic slides with known patch grades. Each grade has its own hue and
// spatial structure; hues are jittered per patch so color alone is ambiguous.

#include "wsmil/dataset.hpp"
#include "wsmil/grading.hpp"
#include "wsmil/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace wsmil {

struct TextureParams {
    double hue_jitter = 22.0;     // per-channel uniform jitter of the base color
    double noise_sigma = 10.0;    // additive Gaussian pixel noise
    double structure_gain = 1.0;  // scales ring / blob / speckle contrast
};

struct SynthConfig {
    int n_slides = 250;
    int min_instances = 16;
    int max_instances = 64;
    int patch_side = 32;
    double train_fraction = 0.8;
    double val_fraction = 0.0;
    // Fraction of NC patches on cancerous slides, drawn uniformly.
    double min_nc_fraction = 0.5;
    double max_nc_fraction = 0.85;
    // Primary share of the cancerous patches on two-grade slides.
    double min_primary_share = 0.55;
    double max_primary_share = 0.85;
    // Probability of each entry of all_scores(), in that order.
    std::array<double, 10> score_prior{0.10, 0.30, 0.15, 0.10, 0.10, 0.03, 0.03, 0.07, 0.06, 0.06};
    TextureParams texture;
    std::array<int, 3> color_shift{0, 0, 0};  // added to every pixel of the dataset
    std::uint64_t seed = 0;

    void validate() const;
};

Image generate_patch(GleasonGrade grade, std::mt19937_64& rng, int side = 32, const TextureParams& texture = {},
                     const std::array<int, 3>& color_shift = {0, 0, 0});

// Patch grades of one slide in grid order. Throws when n cannot carry the
// score (two-grade slides need n >= 4).
std::vector<GleasonGrade> generate_slide_labels(const GleasonScore& score, int n, std::mt19937_64& rng,
                                                const SynthConfig& config = {});

struct SynthSlide {
    std::string id;
    GleasonScore score = GleasonScore::benign();
    Split split = Split::Train;
    int cols = 0;
    std::vector<GleasonGrade> labels;
    std::vector<Image> patches;
};

// Everything about slide `index` derives from (config.seed, index).
SynthSlide generate_slide(const SynthConfig& config, int index);

struct SynthSummary {
    int slides = 0;
    std::size_t patches = 0;
    // Nearest-centroid on mean patch color, fit and scored on the dataset.
    double mean_color_centroid_accuracy = 0.0;
};

// Writes manifest.csv, patches/<slide_id>/{index.csv,*.png}, ground_truth.csv
// and synth_summary.csv under out_dir.
SynthSummary generate_dataset(const SynthConfig& config, const std::filesystem::path& out_dir);

double nearest_centroid_accuracy(std::span<const std::array<double, 3>> features, std::span<const GleasonGrade> labels);

} // namespace wsmil
