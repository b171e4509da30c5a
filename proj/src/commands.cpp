#include "wsmil/commands.hpp"

#include "wsmil/csv.hpp"
#include "wsmil/error.hpp"
#include "wsmil/heatmap.hpp"
#include "wsmil/metrics.hpp"
#include "wsmil/preprocess.hpp"
#include "wsmil/selflearn.hpp"
#include "wsmil/slide_score.hpp"
#include "wsmil/stain.hpp"
#include "wsmil/synth.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

namespace wsmil {

namespace fs = std::filesystem;

path resolve_output(const path& p) {
    if (p.is_absolute()) return p;
    const char* root = std::getenv("WSMIL_OUTPUT_ROOT");
    return root && *root ? path(root) / p : p;
}

PipelineConfig CommonArgs::load() const {
    PipelineConfig c = load_config_or_default(config);
    if (seed) c.apply_seed(*seed);
    return c;
}

path loss_csv_path(const path& ckpt) {
    path p = ckpt;
    return p.replace_extension(".loss.csv");
}

namespace {

std::map<std::string, SlideLabel, std::less<>> slide_labels(const Manifest& manifest) {
    std::map<std::string, SlideLabel, std::less<>> labels;
    for (const auto& r : manifest.rows) labels[r.slide_id] = slide_label_from_score(r.score);
    return labels;
}

std::vector<Slide> load_split(const Manifest& manifest, int side, std::initializer_list<Split> splits) {
    const std::vector<Split> s(splits);
    return load_slides(manifest, side, s);
}

// Patch-directory rows are passed through with absolute paths.
ManifestRow absolute_row(const Manifest& manifest, const ManifestRow& row) {
    ManifestRow out = row;
    out.path = fs::absolute(manifest.resolve(row));
    return out;
}

} // namespace

void run_synth_gen(const SynthGenArgs& args) {
    const PipelineConfig config = args.load();
    const SynthSummary s = generate_dataset(config.synth, resolve_output(args.out));
    std::cout << "synth-gen: " << s.slides << " slides, " << s.patches << " patches, mean-color centroid accuracy "
              << s.mean_color_centroid_accuracy << "\n";
}

void run_tile(const TileArgs& args) {
    const PipelineConfig config = args.load();
    const Manifest manifest = load_manifest(args.manifest);
    const path out = resolve_output(args.out);
    Manifest tiled;
    for (const auto& row : manifest.rows) {
        const path src = manifest.resolve(row);
        if (fs::is_directory(src)) {
            tiled.rows.push_back(absolute_row(manifest, row));
            continue;
        }
        SlideImage slide{row.slide_id, to_rgb(load_png(src))};
        const auto patches = tile_slide(slide, config.tiling);
        const path dir = out / "patches" / row.slide_id;
        fs::create_directories(dir);
        std::vector<PatchIndexRow> index;
        for (const auto& p : patches) {
            PatchIndexRow r{patch_name(row.slide_id, p.grid_col, p.grid_row), p.x, p.y, p.grid_col, p.grid_row,
                            config.tiling.window, config.tiling.stride, p.tissue_fraction};
            save_png(p.pixels, dir / (r.patch_id + ".png"));
            index.push_back(std::move(r));
        }
        save_patch_index(index, dir);
        ManifestRow t = row;
        t.path = path("patches") / row.slide_id;
        tiled.rows.push_back(std::move(t));
        std::cout << row.slide_id << ": " << patches.size() << " patches\n";
    }
    save_manifest(tiled, out / "manifest.csv");
}

void run_normalize(const NormalizeArgs& args) {
    const PipelineConfig config = args.load();
    const Manifest manifest = load_manifest(args.manifest);
    const path out = resolve_output(args.out);
    const ReferenceProfile profile = build_reference(to_rgb(load_png(args.reference)));
    fs::create_directories(out);
    save_profile(profile, out / "reference_profile.txt");
    const HistogramMatcher matcher(profile);
    Manifest normalized;
    for (const auto& row : manifest.rows) {
        const path src = manifest.resolve(row);
        ManifestRow n = row;
        if (fs::is_directory(src)) {
            const auto index = load_patch_index(src);
            std::vector<Image> images;
            for (const auto& p : index) images.push_back(to_rgb(load_png(src / (p.patch_id + ".png"))));
            std::vector<Image> matched;
            if (config.stain.pool_per_slide) {
                matched = matcher.normalize(images);
            } else {
                for (const auto& im : images) matched.push_back(matcher.normalize(std::span<const Image>(&im, 1)).front());
            }
            const path dir = out / "patches" / row.slide_id;
            fs::create_directories(dir);
            for (std::size_t i = 0; i < index.size(); ++i) save_png(matched[i], dir / (index[i].patch_id + ".png"));
            save_patch_index(index, dir);
            n.path = path("patches") / row.slide_id;
        } else {
            const Image image = to_rgb(load_png(src));
            const path file = out / "slides" / (row.slide_id + ".png");
            fs::create_directories(file.parent_path());
            save_png(histogram_match(image, profile), file);
            n.path = path("slides") / (row.slide_id + ".png");
        }
        normalized.rows.push_back(std::move(n));
    }
    save_manifest(normalized, out / "manifest.csv");
}

void run_train_teacher(const TrainTeacherArgs& args) {
    PipelineConfig config = args.load();
    if (args.aggregation) config.aggregation = parse_aggregation(*args.aggregation);
    config.validate();
    const Manifest manifest = load_manifest(args.manifest);
    const auto slides = load_split(manifest, config.model.input_side, {Split::Train});
    const TrainResult r = train_teacher(slides, config.model, config.teacher, config.aggregation);
    const path out = resolve_output(args.out);
    save_checkpoint(r.params, out);
    save_loss_history(r.epochs, loss_csv_path(out));
    std::cout << "train-teacher (" << to_string(config.aggregation) << "): " << slides.size() << " slides, final loss "
              << r.epochs.back().mean_loss << "\n";
}

void run_pseudo_label(const PseudoLabelArgs& args) {
    const ModelParameters params = load_checkpoint(args.ckpt);
    const Manifest manifest = load_manifest(args.manifest);
    const auto slides = load_split(manifest, params.config.input_side, {parse_split(args.split)});
    const auto predictions = predict_slides(params, slides);
    const auto records = refine_labels(predictions, slide_labels(manifest));
    save_pseudo_labels(records, resolve_output(args.out));
    std::size_t kept = 0;
    for (const auto& r : records) kept += r.refined.has_value();
    std::cout << "pseudo-label: " << records.size() << " patches, " << kept << " kept\n";
}

void run_train_student(const TrainStudentArgs& args) {
    const PipelineConfig config = args.load();
    const auto records = load_pseudo_labels(args.pseudo);
    const Manifest manifest = load_manifest(args.manifest);
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.slide_id);
    std::vector<Slide> slides;
    for (const auto& row : manifest.rows)
        if (ids.count(row.slide_id)) slides.push_back(load_slide(manifest, row, config.model.input_side));
    const TrainResult r = train_student(records, slides, config.model, config.student);
    const path out = resolve_output(args.out);
    save_checkpoint(r.params, out);
    save_loss_history(r.epochs, loss_csv_path(out));
    std::cout << "train-student: final loss " << r.epochs.back().mean_loss << "\n";
}

void run_baseline_global(const BaselineGlobalArgs& args) {
    const PipelineConfig config = args.load();
    const Manifest manifest = load_manifest(args.manifest);
    const auto slides = load_split(manifest, config.model.input_side, {Split::Train});
    const auto samples = global_assignment_dataset(slides);
    TrainConfig schedule = config.student;
    schedule.class_weighted = config.baseline_class_weighted;
    const TrainResult r = train_supervised(samples, config.model.input_side, config.model, schedule);
    const path out = resolve_output(args.out);
    save_checkpoint(r.params, out);
    save_loss_history(r.epochs, loss_csv_path(out));
    std::cout << "baseline-global: " << samples.size() << " patches, final loss " << r.epochs.back().mean_loss << "\n";
}

void run_score(const ScoreArgs& args) {
    const PipelineConfig config = args.load();
    const ModelParameters params = load_checkpoint(args.ckpt);
    const Manifest manifest = load_manifest(args.manifest);
    const auto train = load_split(manifest, params.config.input_side, {Split::Train});
    const auto eval = load_split(manifest, params.config.input_side, {Split::Val, Split::Test});
    const auto rows = score_slides(params, train, eval, parse_score_method(args.method), config.scoring);
    save_score_rows(rows, resolve_output(args.out));
}

namespace {

// Predicted patch grade from whichever columns the file carries.
GleasonGrade patch_prediction(const CsvTable& t, std::size_t r) {
    if (t.has_column("pred_grade")) return parse_grade(t.at(r, "pred_grade"));
    if (t.has_column("p_nc")) {
        Prediction p;
        static constexpr std::array<std::string_view, 4> cols{"p_nc", "p_gg3", "p_gg4", "p_gg5"};
        for (std::size_t c = 0; c < 4; ++c) p.probs[c] = parse_double(t.at(r, cols[c]), cols[c]);
        return p.argmax();
    }
    if (t.has_column("true_grade")) return parse_grade(t.at(r, "true_grade"));
    throw Error("evaluate", t.source() + ": no prediction column (pred_grade, p_nc..p_gg5 or true_grade)");
}

std::map<std::string, int> slide_truth(const path& file) {
    const CsvTable t = CsvTable::read(file);
    std::map<std::string, int> truth;
    if (t.has_column("true_gg")) {
        for (std::size_t r = 0; r < t.rows(); ++r) truth[t.at(r, "slide_id")] = parse_int(t.at(r, "true_gg"), "true_gg");
    } else {
        for (const auto& row : load_manifest(file).rows) truth[row.slide_id] = score_to_grade_group(row.score).value;
    }
    return truth;
}

} // namespace

std::string run_evaluate(const EvaluateArgs& args) {
    std::vector<int> y_true, y_pred;
    EvaluationReport report;
    if (args.level == "patch") {
        const auto truth = load_ground_truth(args.truth);
        const CsvTable pred = CsvTable::read(args.pred);
        for (std::size_t r = 0; r < pred.rows(); ++r) {
            const PatchKey key{pred.at(r, "slide_id"), pred.at(r, "patch_id")};
            auto it = truth.find(key);
            if (it == truth.end())
                throw Error("evaluate", "no ground truth for patch '" + key.second + "' of slide '" + key.first + "'");
            y_true.push_back(index_of(it->second));
            y_pred.push_back(index_of(patch_prediction(pred, r)));
        }
        report = evaluate_labels(y_true, y_pred, {"NC", "GG3", "GG4", "GG5"}, "patch");
    } else if (args.level == "slide") {
        const auto truth = slide_truth(args.truth);
        const CsvTable pred = CsvTable::read(args.pred);
        const char* col = pred.has_column("pred_gg") ? "pred_gg" : "true_gg";
        for (std::size_t r = 0; r < pred.rows(); ++r) {
            auto it = truth.find(pred.at(r, "slide_id"));
            if (it == truth.end()) throw Error("evaluate", "no ground truth for slide '" + pred.at(r, "slide_id") + "'");
            y_true.push_back(it->second);
            y_pred.push_back(parse_int(pred.at(r, col), col));
        }
        report = evaluate_labels(y_true, y_pred, {"GG0", "GG1", "GG2", "GG3", "GG4", "GG5"}, "slide");
    } else {
        throw Error("evaluate", "level must be patch or slide, got '" + args.level + "'");
    }
    const path out = resolve_output(args.out);
    save_report_csv(report, out);
    const std::string text = report_text(report);
    path txt = out;
    txt.replace_extension(".txt");
    std::ofstream(txt) << text;
    return text;
}

void run_heatmap(const HeatmapArgs& args) {
    const PipelineConfig config = args.load();
    const ModelParameters params = load_checkpoint(args.ckpt);
    const Manifest manifest = load_manifest(args.manifest);
    const ManifestRow& row = manifest.find(args.slide);
    const path src = manifest.resolve(row);

    Slide slide;
    Mask tissue;
    int width = 0, height = 0;
    if (fs::is_directory(src)) {
        slide = load_slide(manifest, row, params.config.input_side);
        for (const auto& p : slide.patches) {
            width = std::max(width, p.x + p.window);
            height = std::max(height, p.y + p.window);
        }
        tissue = coverage_mask(slide.patches, width, height);
    } else {
        const Image image = to_rgb(load_png(src));
        width = image.width;
        height = image.height;
        tissue = tissue_mask(image);
        slide.id = row.slide_id;
        slide.side = params.config.input_side;
        for (const auto& p : tile_with_mask(image, tissue, config.tiling))
            slide.add_patch({patch_name(row.slide_id, p.grid_col, p.grid_row), p.x, p.y, p.grid_col, p.grid_row,
                             config.tiling.window, config.tiling.stride, p.tissue_fraction},
                            p.pixels);
        if (slide.size() == 0) throw Error("heatmap", "slide '" + row.slide_id + "' has no tissue patches");
    }
    const auto preds = predict_slide(params, slide);
    const ProbMap map = probability_map(grid_from_predictions(slide.patches, preds), height, width);
    const path out = resolve_output(args.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_png(class_overlay(map, tissue), out);
    path csv = out;
    save_prob_map_csv(map, csv.replace_extension(".csv"));
}

} // namespace wsmil
