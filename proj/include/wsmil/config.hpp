#pragma once

// Pipeline configuration file (JSON). Sections mirror the module configs;
// unknown sections or keys are rejected with their dotted path.

#include "wsmil/model.hpp"
#include "wsmil/preprocess.hpp"
#include "wsmil/selflearn.hpp"
#include "wsmil/slide_score.hpp"
#include "wsmil/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace wsmil {

struct StainConfig {
    // One source distribution per slide (all its patches) instead of per image.
    bool pool_per_slide = true;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    TilingConfig tiling;
    StainConfig stain;
    EncoderConfig model;
    TrainConfig teacher;
    Aggregation aggregation = Aggregation::Max;
    TrainConfig student;
    // The global-assignment baseline trains with the student's schedule;
    // only the loss weighting is configured separately.
    bool baseline_class_weighted = false;
    ScoringConfig scoring;
    SynthConfig synth;

    // Pushes `seed` into every stage that consumes randomness.
    void apply_seed(std::uint64_t s);
    void validate() const;
};

PipelineConfig default_config();
PipelineConfig parse_config(const std::string& json_text, const std::string& source = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);
// Defaults when no path is given.
PipelineConfig load_config_or_default(const std::optional<std::filesystem::path>& path);

std::string dump_config(const PipelineConfig& config);

} // namespace wsmil
