#include "wsmil/synth.hpp"

#include "wsmil/csv.hpp"
#include "wsmil/error.hpp"
#include "wsmil/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace wsmil {

namespace fs = std::filesystem;

namespace {

inline std::size_t sz(int v) { return static_cast<std::size_t>(v); }

constexpr std::array<std::array<double, 3>, kNumClasses> kBaseColor{{
    {225, 170, 195},  // NC
    {205, 140, 190},  // GG3
    {185, 115, 180},  // GG4
    {165, 95, 170},   // GG5
}};

// Direction in RGB of "dark" structure (nuclei-like).
constexpr std::array<double, 3> kInk{1.0, 1.2, 0.6};

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

void add_rings(std::vector<double>& ink, int side, std::mt19937_64& rng, double gain) {
    const int rings = uniform_int(rng, 2, 4);
    for (int r = 0; r < rings; ++r) {
        const double cx = uniform(rng, 4, side - 4), cy = uniform(rng, 4, side - 4);
        const double radius = uniform(rng, 4.0, 7.0);
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy) - radius;
                ink[sz(y * side + x)] += gain * 70.0 * std::exp(-d * d / (2 * 0.8 * 0.8));
            }
    }
}

void add_blobs(std::vector<double>& ink, int side, std::mt19937_64& rng, double gain) {
    const int clusters = uniform_int(rng, 1, 2);
    for (int c = 0; c < clusters; ++c) {
        const double cx = uniform(rng, 8, side - 8), cy = uniform(rng, 8, side - 8);
        const int blobs = uniform_int(rng, 3, 5);
        for (int b = 0; b < blobs; ++b) {
            const double bx = cx + uniform(rng, -6, 6), by = cy + uniform(rng, -6, 6);
            const double s = uniform(rng, 2.5, 4.0);
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    const double d2 = (x + 0.5 - bx) * (x + 0.5 - bx) + (y + 0.5 - by) * (y + 0.5 - by);
                    ink[sz(y * side + x)] += gain * 40.0 * std::exp(-d2 / (2 * s * s));
                }
        }
    }
}

void add_speckle(std::vector<double>& ink, std::mt19937_64& rng, double gain) {
    std::bernoulli_distribution dot(0.18);
    for (auto& v : ink)
        if (dot(rng)) v += gain * uniform(rng, 50.0, 90.0);
}

void add_field(std::vector<double>& ink, int side, std::mt19937_64& rng, double gain) {
    const double fx = uniform(rng, -1.5, 1.5), fy = uniform(rng, -1.5, 1.5), phase = uniform(rng, 0, 2 * std::numbers::pi);
    const double amp = gain * 12.0;
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            ink[sz(y * side + x)] += amp * (1.0 + std::sin(2 * std::numbers::pi * (fx * x + fy * y) / side + phase));
}

} // namespace

void SynthConfig::validate() const {
    if (n_slides < 0) throw Error("config", "synth.n_slides must be >= 0");
    if (min_instances < 1 || max_instances < min_instances)
        throw Error("config", "synth instance range must satisfy 1 <= min_instances <= max_instances");
    if (patch_side < 8) throw Error("config", "synth.patch_side must be >= 8");
    if (train_fraction < 0 || val_fraction < 0 || train_fraction + val_fraction > 1)
        throw Error("config", "synth split fractions must be nonnegative and sum to <= 1");
    if (min_nc_fraction < 0 || max_nc_fraction < min_nc_fraction || max_nc_fraction >= 1)
        throw Error("config", "synth NC fraction range must satisfy 0 <= min <= max < 1");
    if (min_primary_share <= 0.5 || max_primary_share < min_primary_share || max_primary_share >= 1)
        throw Error("config", "synth primary share range must satisfy 0.5 < min <= max < 1");
    double total = 0.0;
    for (double p : score_prior) {
        if (p < 0) throw Error("config", "synth.score_prior entries must be >= 0");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error("config", "synth.score_prior must sum to 1");
}

Image generate_patch(GleasonGrade grade, std::mt19937_64& rng, int side, const TextureParams& texture,
                     const std::array<int, 3>& color_shift) {
    std::array<double, 3> base = kBaseColor[sz(index_of(grade))];
    for (auto& b : base) b += uniform(rng, -texture.hue_jitter, texture.hue_jitter);
    std::vector<double> ink(sz(side * side), 0.0);
    switch (grade) {
    case GleasonGrade::NC: add_field(ink, side, rng, texture.structure_gain); break;
    case GleasonGrade::GG3: add_rings(ink, side, rng, texture.structure_gain); break;
    case GleasonGrade::GG4: add_blobs(ink, side, rng, texture.structure_gain); break;
    case GleasonGrade::GG5: add_speckle(ink, rng, texture.structure_gain); break;
    }
    std::normal_distribution<double> noise(0.0, texture.noise_sigma);
    Image img(side, side, 3);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = base[sz(c)] - kInk[sz(c)] * ink[sz(y * side + x)] + noise(rng) + color_shift[sz(c)];
                img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
    return img;
}

std::vector<GleasonGrade> generate_slide_labels(const GleasonScore& score, int n, std::mt19937_64& rng,
                                                const SynthConfig& config) {
    if (n < 1) throw Error("synth", "a slide needs at least one patch");
    std::vector<GleasonGrade> labels;
    if (score.is_benign()) {
        labels.assign(sz(n), GleasonGrade::NC);
        return labels;
    }
    const bool two_grades = score.primary() != score.secondary();
    const int min_cancer = two_grades ? 3 : 1;
    if (two_grades && n < 4)
        throw Error("synth", "score " + to_string(score) + " needs at least 4 patches, got " + std::to_string(n));
    int n_nc = static_cast<int>(std::lround(n * uniform(rng, config.min_nc_fraction, config.max_nc_fraction)));
    n_nc = std::clamp(n_nc, 0, n - min_cancer);
    const int cancer = n - n_nc;
    int n_primary = cancer, n_secondary = 0;
    if (two_grades) {
        n_primary = static_cast<int>(std::lround(cancer * uniform(rng, config.min_primary_share, config.max_primary_share)));
        n_primary = std::clamp(n_primary, cancer / 2 + 1, cancer - 1);
        n_secondary = cancer - n_primary;
    }
    labels.insert(labels.end(), sz(n_nc), GleasonGrade::NC);
    labels.insert(labels.end(), sz(n_primary), score.primary());
    labels.insert(labels.end(), sz(n_secondary), score.secondary());
    std::shuffle(labels.begin(), labels.end(), rng);
    return labels;
}

SynthSlide generate_slide(const SynthConfig& config, int index) {
    auto rng = derive_rng({config.seed, 0x5A17, static_cast<std::uint64_t>(index)});
    SynthSlide s;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04d", index);
    s.id = id;
    std::discrete_distribution<int> prior(config.score_prior.begin(), config.score_prior.end());
    s.score = all_scores()[sz(prior(rng))];
    const int n_train = static_cast<int>(std::lround(config.n_slides * config.train_fraction));
    const int n_val = static_cast<int>(std::lround(config.n_slides * (config.train_fraction + config.val_fraction))) - n_train;
    s.split = index < n_train ? Split::Train : index < n_train + n_val ? Split::Val : Split::Test;
    int n = uniform_int(rng, config.min_instances, config.max_instances);
    if (!s.score.is_benign() && s.score.primary() != s.score.secondary()) n = std::max(n, 4);
    s.labels = generate_slide_labels(s.score, n, rng, config);
    s.cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    s.patches.reserve(s.labels.size());
    for (auto g : s.labels) s.patches.push_back(generate_patch(g, rng, config.patch_side, config.texture, config.color_shift));
    return s;
}

double nearest_centroid_accuracy(std::span<const std::array<double, 3>> features, std::span<const GleasonGrade> labels) {
    if (features.empty() || features.size() != labels.size()) return 0.0;
    std::array<std::array<double, 3>, kNumClasses> centroid{};
    std::array<std::size_t, kNumClasses> count{};
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto c = sz(index_of(labels[i]));
        ++count[c];
        for (std::size_t k = 0; k < 3; ++k) centroid[c][k] += features[i][k];
    }
    for (std::size_t c = 0; c < kNumClasses; ++c)
        for (auto& v : centroid[c]) v = count[c] ? v / static_cast<double>(count[c]) : 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        double best = INFINITY;
        std::size_t arg = 0;
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            if (!count[c]) continue;
            double d = 0.0;
            for (std::size_t k = 0; k < 3; ++k) d += (features[i][k] - centroid[c][k]) * (features[i][k] - centroid[c][k]);
            if (d < best) best = d, arg = c;
        }
        correct += arg == sz(index_of(labels[i]));
    }
    return static_cast<double>(correct) / static_cast<double>(features.size());
}

SynthSummary generate_dataset(const SynthConfig& config, const fs::path& out_dir) {
    config.validate();
    std::error_code ec;
    fs::create_directories(out_dir / "patches", ec);
    if (ec) throw Error("io", "cannot create " + (out_dir / "patches").string() + ": " + ec.message());

    const auto n = sz(config.n_slides);
    std::vector<SynthSlide> slides(n);
    std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < n; ++i) {
        try {
            SynthSlide s = generate_slide(config, static_cast<int>(i));
            const fs::path dir = out_dir / "patches" / s.id;
            std::vector<PatchIndexRow> index;
            for (std::size_t p = 0; p < s.patches.size(); ++p) {
                const int col = static_cast<int>(p) % s.cols, row = static_cast<int>(p) / s.cols;
                PatchIndexRow r{patch_name(s.id, col, row), col * config.patch_side, row * config.patch_side, col, row,
                                config.patch_side, config.patch_side, 1.0};
                fs::create_directories(dir);
                save_png(s.patches[p], dir / (r.patch_id + ".png"));
                index.push_back(std::move(r));
            }
            save_patch_index(index, dir);
            slides[i] = std::move(s);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw Error("synth", e);

    Manifest manifest;
    CsvTable truth({"slide_id", "patch_id", "true_grade"});
    SynthSummary summary;
    std::vector<std::array<double, 3>> colors;
    std::vector<GleasonGrade> color_labels;
    for (const auto& s : slides) {
        manifest.rows.push_back({s.id, fs::path("patches") / s.id, s.score, s.split});
        for (std::size_t p = 0; p < s.patches.size(); ++p) {
            const int col = static_cast<int>(p) % s.cols, row = static_cast<int>(p) / s.cols;
            truth.add_row({s.id, patch_name(s.id, col, row), std::string(to_string(s.labels[p]))});
            std::array<double, 3> mean{};
            const auto& d = s.patches[p].data;
            for (std::size_t k = 0; k < d.size(); ++k) mean[k % 3] += d[k];
            for (auto& m : mean) m /= static_cast<double>(d.size() / 3);
            colors.push_back(mean);
            color_labels.push_back(s.labels[p]);
        }
        summary.patches += s.patches.size();
    }
    summary.slides = config.n_slides;
    summary.mean_color_centroid_accuracy = nearest_centroid_accuracy(colors, color_labels);
    save_manifest(manifest, out_dir / "manifest.csv");
    truth.write(out_dir / "ground_truth.csv");
    CsvTable props({"property", "value"});
    props.add_row({"slides", std::to_string(summary.slides)});
    props.add_row({"patches", std::to_string(summary.patches)});
    props.add_row({"mean_color_centroid_accuracy", format_double(summary.mean_color_centroid_accuracy)});
    props.write(out_dir / "synth_summary.csv");
    return summary;
}

} // namespace wsmil
