#include "wsmil/dataset.hpp"

#include "wsmil/csv.hpp"
#include "wsmil/error.hpp"

#include <algorithm>
#include <set>

namespace wsmil {

namespace fs = std::filesystem;

std::string_view to_string(Split s) noexcept {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "val") return Split::Val;
    if (text == "test") return Split::Test;
    throw Error("manifest", "split must be train, val or test, got '" + std::string(text) + "'");
}

fs::path Manifest::resolve(const ManifestRow& row) const {
    return row.path.is_absolute() ? row.path : base_dir / row.path;
}

const ManifestRow& Manifest::find(std::string_view slide_id) const {
    for (const auto& r : rows)
        if (r.slide_id == slide_id) return r;
    throw Error("manifest", "slide '" + std::string(slide_id) + "' is not in the manifest");
}

Manifest load_manifest(const fs::path& path) {
    const CsvTable table = CsvTable::read(path);
    Manifest manifest;
    manifest.base_dir = path.parent_path();
    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const std::string where = path.string() + ":" + std::to_string(table.line_of(r)) + ": ";
        try {
            ManifestRow row;
            row.slide_id = table.at(r, "slide_id");
            if (row.slide_id.empty()) throw Error("manifest", "empty slide_id");
            if (!seen.insert(row.slide_id).second) throw Error("manifest", "duplicate slide_id '" + row.slide_id + "'");
            row.path = table.at(r, "path");
            row.score = GleasonScore::of_patterns(parse_int(table.at(r, "gleason_primary"), "gleason_primary"),
                                                  parse_int(table.at(r, "gleason_secondary"), "gleason_secondary"));
            row.split = parse_split(table.at(r, "split"));
            manifest.rows.push_back(std::move(row));
        } catch (const Error& e) {
            throw Error("manifest", where + e.what());
        }
    }
    return manifest;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
    CsvTable table({"slide_id", "path", "gleason_primary", "gleason_secondary", "split"});
    for (const auto& r : manifest.rows)
        table.add_row({r.slide_id, r.path.generic_string(), std::to_string(pattern_of(r.score.primary())),
                       std::to_string(pattern_of(r.score.secondary())), std::string(to_string(r.split))});
    table.write(path);
}

std::string patch_name(std::string_view slide_id, int grid_col, int grid_row) {
    return std::string(slide_id) + "_x" + std::to_string(grid_col) + "_y" + std::to_string(grid_row);
}

std::vector<PatchIndexRow> load_patch_index(const fs::path& dir) {
    const CsvTable table = CsvTable::read(dir / "index.csv");
    std::vector<PatchIndexRow> rows;
    rows.reserve(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        PatchIndexRow row;
        row.patch_id = table.at(r, "patch_id");
        row.x = parse_int(table.at(r, "x"), "x");
        row.y = parse_int(table.at(r, "y"), "y");
        row.grid_col = parse_int(table.at(r, "grid_col"), "grid_col");
        row.grid_row = parse_int(table.at(r, "grid_row"), "grid_row");
        row.window = parse_int(table.at(r, "window"), "window");
        row.stride = parse_int(table.at(r, "stride"), "stride");
        row.tissue_fraction = parse_double(table.at(r, "tissue_fraction"), "tissue_fraction");
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_patch_index(const std::vector<PatchIndexRow>& rows, const fs::path& dir) {
    CsvTable table({"patch_id", "x", "y", "grid_col", "grid_row", "window", "stride", "tissue_fraction"});
    for (const auto& r : rows)
        table.add_row({r.patch_id, std::to_string(r.x), std::to_string(r.y), std::to_string(r.grid_col),
                       std::to_string(r.grid_row), std::to_string(r.window), std::to_string(r.stride),
                       format_double(r.tissue_fraction)});
    table.write(dir / "index.csv");
}

void Slide::add_patch(PatchIndexRow row, const Image& image) {
    if (image.channels != 3) throw Error("dataset", "patch " + row.patch_id + " is not RGB");
    const Image resized = (image.width == side && image.height == side) ? image : resize_area(image, side, side);
    pixels.insert(pixels.end(), resized.data.begin(), resized.data.end());
    patches.push_back(std::move(row));
}

Slide load_slide(const Manifest& manifest, const ManifestRow& row, int input_side) {
    const fs::path dir = manifest.resolve(row);
    if (!fs::is_directory(dir))
        throw Error("dataset", "slide '" + row.slide_id + "' path is not a patch directory: " + dir.string());
    Slide slide;
    slide.id = row.slide_id;
    slide.score = row.score;
    slide.label = slide_label_from_score(row.score);
    slide.split = row.split;
    slide.side = input_side;
    auto index = load_patch_index(dir);
    slide.pixels.reserve(index.size() * slide.patch_bytes());
    for (auto& p : index) {
        const Image image = to_rgb(load_png(dir / (p.patch_id + ".png")));
        slide.add_patch(std::move(p), image);
    }
    if (slide.size() == 0) throw Error("dataset", "slide '" + row.slide_id + "' has no patches");
    return slide;
}

std::vector<Slide> load_slides(const Manifest& manifest, int input_side, std::span<const Split> splits) {
    std::vector<const ManifestRow*> wanted;
    for (const auto& row : manifest.rows)
        if (splits.empty() || std::find(splits.begin(), splits.end(), row.split) != splits.end()) wanted.push_back(&row);
    std::vector<Slide> slides(wanted.size());
    // PNG decoding dominates; slides are independent.
    std::vector<std::string> errors(wanted.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < wanted.size(); ++i) {
        try {
            slides[i] = load_slide(manifest, *wanted[i], input_side);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw Error("dataset", e);
    return slides;
}

std::string refined_to_string(const std::optional<GleasonGrade>& refined) {
    return refined ? std::string(to_string(*refined)) : std::string("DISCARD");
}

std::optional<GleasonGrade> parse_refined(std::string_view text) {
    if (text == "DISCARD") return std::nullopt;
    return parse_grade(text);
}

void save_pseudo_labels(std::span<const PseudoLabelRecord> records, const fs::path& path) {
    CsvTable table({"slide_id", "patch_id", "p_nc", "p_gg3", "p_gg4", "p_gg5", "refined"});
    for (const auto& r : records)
        table.add_row({r.slide_id, r.patch_id, format_double(r.teacher_probs[0]), format_double(r.teacher_probs[1]),
                       format_double(r.teacher_probs[2]), format_double(r.teacher_probs[3]), refined_to_string(r.refined)});
    table.write(path);
}

std::vector<PseudoLabelRecord> load_pseudo_labels(const fs::path& path) {
    const CsvTable table = CsvTable::read(path);
    std::vector<PseudoLabelRecord> records;
    records.reserve(table.rows());
    static constexpr std::array<std::string_view, 4> cols{"p_nc", "p_gg3", "p_gg4", "p_gg5"};
    for (std::size_t r = 0; r < table.rows(); ++r) {
        PseudoLabelRecord rec;
        rec.slide_id = table.at(r, "slide_id");
        rec.patch_id = table.at(r, "patch_id");
        for (std::size_t c = 0; c < 4; ++c) rec.teacher_probs[c] = parse_double(table.at(r, cols[c]), cols[c]);
        rec.refined = parse_refined(table.at(r, "refined"));
        records.push_back(std::move(rec));
    }
    return records;
}

std::map<PatchKey, GleasonGrade> load_ground_truth(const fs::path& path) {
    const CsvTable table = CsvTable::read(path);
    std::map<PatchKey, GleasonGrade> truth;
    for (std::size_t r = 0; r < table.rows(); ++r)
        truth[{table.at(r, "slide_id"), table.at(r, "patch_id")}] = parse_grade(table.at(r, "true_grade"));
    return truth;
}

} // namespace wsmil
