#pragma once

// Pipeline stages behind the CLI subcommands. Each stage reads and writes
// only persisted artifacts, so any stage can be re-run on its own.

#include "wsmil/config.hpp"
#include "wsmil/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace wsmil {

using std::filesystem::path;

// Relative output paths land under $WSMIL_OUTPUT_ROOT when it is set.
path resolve_output(const path& p);

struct CommonArgs {
    std::optional<path> config;
    std::optional<std::uint64_t> seed;

    PipelineConfig load() const;
};

struct SynthGenArgs : CommonArgs {
    path out;
};
void run_synth_gen(const SynthGenArgs& args);

struct TileArgs : CommonArgs {
    path manifest;
    path out;
};
void run_tile(const TileArgs& args);

struct NormalizeArgs : CommonArgs {
    path manifest;
    path reference;
    path out;
};
void run_normalize(const NormalizeArgs& args);

struct TrainTeacherArgs : CommonArgs {
    path manifest;
    path out;
    std::optional<std::string> aggregation;
};
void run_train_teacher(const TrainTeacherArgs& args);

struct PseudoLabelArgs : CommonArgs {
    path ckpt;
    path manifest;
    path out;
    std::string split = "train";
};
void run_pseudo_label(const PseudoLabelArgs& args);

struct TrainStudentArgs : CommonArgs {
    path pseudo;
    path manifest;
    path out;
};
void run_train_student(const TrainStudentArgs& args);

struct BaselineGlobalArgs : CommonArgs {
    path manifest;
    path out;
};
void run_baseline_global(const BaselineGlobalArgs& args);

struct ScoreArgs : CommonArgs {
    path ckpt;
    path manifest;
    std::string method = "knn";
    path out;
};
void run_score(const ScoreArgs& args);

struct EvaluateArgs : CommonArgs {
    path pred;
    path truth;
    std::string level = "patch";
    path out;
};
// Returns the human-readable report.
std::string run_evaluate(const EvaluateArgs& args);

struct HeatmapArgs : CommonArgs {
    path ckpt;
    path manifest;
    std::string slide;
    path out;
};
void run_heatmap(const HeatmapArgs& args);

// Loss history lives beside the checkpoint: model.ckpt -> model.loss.csv.
path loss_csv_path(const path& ckpt);

} // namespace wsmil
