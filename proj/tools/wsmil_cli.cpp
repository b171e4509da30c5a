#include "wsmil/commands.hpp"
#include "wsmil/error.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

std::string one_line(std::string s) {
    for (auto& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

void add_common(CLI::App* cmd, wsmil::CommonArgs& args) {
    cmd->add_option("--config", args.config, "pipeline configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "overrides the configured seed");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weakly supervised Gleason grading with teacher-student MIL"};
    app.require_subcommand(1);

    wsmil::SynthGenArgs synth;
    auto* c_synth = app.add_subcommand("synth-gen", "write a synthetic dataset");
    add_common(c_synth, synth);
    c_synth->add_option("--out", synth.out, "output directory")->required();

    wsmil::TileArgs tile;
    auto* c_tile = app.add_subcommand("tile", "extract tissue patches from slide images");
    add_common(c_tile, tile);
    c_tile->add_option("--manifest", tile.manifest)->required()->check(CLI::ExistingFile);
    c_tile->add_option("--out", tile.out, "output directory")->required();

    wsmil::NormalizeArgs norm;
    auto* c_norm = app.add_subcommand("normalize", "histogram-match slides to a reference image");
    add_common(c_norm, norm);
    c_norm->add_option("--manifest", norm.manifest)->required()->check(CLI::ExistingFile);
    c_norm->add_option("--reference", norm.reference, "reference PNG")->required()->check(CLI::ExistingFile);
    c_norm->add_option("--out", norm.out, "output directory")->required();

    wsmil::TrainTeacherArgs teacher;
    auto* c_teacher = app.add_subcommand("train-teacher", "train the MIL teacher on slide labels");
    add_common(c_teacher, teacher);
    c_teacher->add_option("--manifest", teacher.manifest)->required()->check(CLI::ExistingFile);
    c_teacher->add_option("--out", teacher.out, "checkpoint path")->required();
    c_teacher->add_option("--agg", teacher.aggregation, "max or attention")->check(CLI::IsMember({"max", "attention"}));

    wsmil::PseudoLabelArgs pseudo;
    auto* c_pseudo = app.add_subcommand("pseudo-label", "teacher inference and label refinement");
    add_common(c_pseudo, pseudo);
    c_pseudo->add_option("--ckpt", pseudo.ckpt)->required()->check(CLI::ExistingFile);
    c_pseudo->add_option("--manifest", pseudo.manifest)->required()->check(CLI::ExistingFile);
    c_pseudo->add_option("--out", pseudo.out, "pseudo-label CSV")->required();
    c_pseudo->add_option("--split", pseudo.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

    wsmil::TrainStudentArgs student;
    auto* c_student = app.add_subcommand("train-student", "train the student on refined pseudo-labels");
    add_common(c_student, student);
    c_student->add_option("--pseudo", student.pseudo)->required()->check(CLI::ExistingFile);
    c_student->add_option("--manifest", student.manifest)->required()->check(CLI::ExistingFile);
    c_student->add_option("--out", student.out, "checkpoint path")->required();

    wsmil::BaselineGlobalArgs global;
    auto* c_global = app.add_subcommand("baseline-global", "train the global-assignment baseline");
    add_common(c_global, global);
    c_global->add_option("--manifest", global.manifest)->required()->check(CLI::ExistingFile);
    c_global->add_option("--out", global.out, "checkpoint path")->required();

    wsmil::ScoreArgs score;
    auto* c_score = app.add_subcommand("score", "slide-level Gleason scoring");
    add_common(c_score, score);
    c_score->add_option("--ckpt", score.ckpt)->required()->check(CLI::ExistingFile);
    c_score->add_option("--manifest", score.manifest)->required()->check(CLI::ExistingFile);
    c_score->add_option("--method", score.method)->check(CLI::IsMember({"knn", "mlp", "ggpct-knn", "ggpct-mlp"}));
    c_score->add_option("--out", score.out, "scoring report CSV")->required();

    wsmil::EvaluateArgs eval;
    auto* c_eval = app.add_subcommand("evaluate", "metrics for patch or slide predictions");
    add_common(c_eval, eval);
    c_eval->add_option("--pred", eval.pred)->required()->check(CLI::ExistingFile);
    c_eval->add_option("--truth", eval.truth)->required()->check(CLI::ExistingFile);
    c_eval->add_option("--level", eval.level)->check(CLI::IsMember({"patch", "slide"}));
    c_eval->add_option("--out", eval.out, "report CSV (text report beside it)")->required();

    wsmil::HeatmapArgs heat;
    auto* c_heat = app.add_subcommand("heatmap", "Gleason grade overlay for one slide");
    add_common(c_heat, heat);
    c_heat->add_option("--ckpt", heat.ckpt)->required()->check(CLI::ExistingFile);
    c_heat->add_option("--manifest", heat.manifest)->required()->check(CLI::ExistingFile);
    c_heat->add_option("--slide", heat.slide)->required();
    c_heat->add_option("--out", heat.out, "overlay PNG (probability map CSV beside it)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << "\n";
        return 2;
    }

    try {
        if (*c_synth) wsmil::run_synth_gen(synth);
        else if (*c_tile) wsmil::run_tile(tile);
        else if (*c_norm) wsmil::run_normalize(norm);
        else if (*c_teacher) wsmil::run_train_teacher(teacher);
        else if (*c_pseudo) wsmil::run_pseudo_label(pseudo);
        else if (*c_student) wsmil::run_train_student(student);
        else if (*c_global) wsmil::run_baseline_global(global);
        else if (*c_score) wsmil::run_score(score);
        else if (*c_eval) std::cout << wsmil::run_evaluate(eval);
        else if (*c_heat) wsmil::run_heatmap(heat);
    } catch (const wsmil::Error& e) {
        std::cerr << "error: " << e.category() << ": " << one_line(e.what()) << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}
