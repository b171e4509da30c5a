#pragma once

// On-disk formats shared by every command (manifest, per-slide patch index,
// pseudo-label store, ground truth) and the in-memory bag representation.

#include "wsmil/grading.hpp"
#include "wsmil/image.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wsmil {

enum class Split { Train, Val, Test };

std::string_view to_string(Split s) noexcept;
Split parse_split(std::string_view text);

// manifest.csv: slide_id,path,gleason_primary,gleason_secondary,split
// path is a patch directory (with index.csv) or a slide image, relative to
// the manifest's directory unless absolute. Benign slides use 0,0.
struct ManifestRow {
    std::string slide_id;
    std::filesystem::path path;
    GleasonScore score = GleasonScore::benign();
    Split split = Split::Train;
};

struct Manifest {
    std::vector<ManifestRow> rows;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const ManifestRow& row) const;
    const ManifestRow& find(std::string_view slide_id) const;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// index.csv inside a patch directory.
struct PatchIndexRow {
    std::string patch_id;
    int x = 0;
    int y = 0;
    int grid_col = 0;
    int grid_row = 0;
    int window = 0;
    int stride = 0;
    double tissue_fraction = 1.0;
};

std::string patch_name(std::string_view slide_id, int grid_col, int grid_row);
std::vector<PatchIndexRow> load_patch_index(const std::filesystem::path& dir);
void save_patch_index(const std::vector<PatchIndexRow>& rows, const std::filesystem::path& dir);

// A bag: ordered instances with grid positions and their pixels, resampled
// to the encoder input side.
struct Slide {
    std::string id;
    GleasonScore score = GleasonScore::benign();
    SlideLabel label;
    Split split = Split::Train;
    int side = 0;
    std::vector<PatchIndexRow> patches;
    std::vector<std::uint8_t> pixels;  // patches.size() x side x side x 3

    std::size_t size() const noexcept { return patches.size(); }
    std::size_t patch_bytes() const noexcept { return static_cast<std::size_t>(side * side * 3); }
    std::span<const std::uint8_t> patch_pixels(std::size_t i) const {
        return std::span<const std::uint8_t>(pixels).subspan(i * patch_bytes(), patch_bytes());
    }
    void add_patch(PatchIndexRow row, const Image& image);
};

// Loads every manifest row whose path is a patch directory. An empty filter
// loads all splits.
std::vector<Slide> load_slides(const Manifest& manifest, int input_side, std::span<const Split> splits = {});
Slide load_slide(const Manifest& manifest, const ManifestRow& row, int input_side);

// Pseudo-label store.
// slide_id,patch_id,p_nc,p_gg3,p_gg4,p_gg5,refined
struct PseudoLabelRecord {
    std::string slide_id;
    std::string patch_id;
    std::array<double, kNumClasses> teacher_probs{};
    std::optional<GleasonGrade> refined;  // nullopt = DISCARD
};

std::string refined_to_string(const std::optional<GleasonGrade>& refined);
std::optional<GleasonGrade> parse_refined(std::string_view text);

void save_pseudo_labels(std::span<const PseudoLabelRecord> records, const std::filesystem::path& path);
std::vector<PseudoLabelRecord> load_pseudo_labels(const std::filesystem::path& path);

// Ground truth (synthetic data only): slide_id,patch_id,true_grade
using PatchKey = std::pair<std::string, std::string>;
std::map<PatchKey, GleasonGrade> load_ground_truth(const std::filesystem::path& path);

} // namespace wsmil
