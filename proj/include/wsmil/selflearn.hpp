#pragma once

// Teacher training under bag supervision, label refinement of the teacher's
// patch predictions, the class-weighted student, and the global-assignment
// baseline.

#include "wsmil/dataset.hpp"
#include "wsmil/mil.hpp"
#include "wsmil/model.hpp"
#include "wsmil/optim.hpp"

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace wsmil {

struct TrainConfig {
    int epochs = 30;
    OptimizerKind optimizer = OptimizerKind::SGD;
    double momentum = 0.9;
    double lr_init = 1e-2;
    // lr_init / lr_drop_factor from epoch ceil(epochs/2) on.
    double lr_drop_factor = 10.0;
    // Last epochs use (lr_init / lr_drop_factor) * exp(-0.1 t).
    int decay_tail_epochs = 5;
    // t counts from the first tail epoch (1-based) unless this is set, in
    // which case t is the 1-based epoch number.
    bool tail_index_from_start = false;
    int max_patches_per_bag = 200;
    int batch_size = 32;  // student / baseline only
    // Student / baseline only: scale the loss by w_c (uniform weights when off).
    bool class_weighted = true;
    std::uint64_t seed = 0;

    void validate() const;
};

double learning_rate(int epoch, const TrainConfig& config);

enum class Aggregation { Max, Attention };
std::string_view to_string(Aggregation a) noexcept;
Aggregation parse_aggregation(std::string_view text);

struct EpochLoss {
    int epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    ModelParameters params;
    std::vector<double> step_losses;  // one per optimizer step
    std::vector<EpochLoss> epochs;
};

void save_loss_history(std::span<const EpochLoss> history, const std::filesystem::path& path);

// One step per slide per epoch; slides shuffled and instances subsampled
// without replacement from a per-epoch stream of config.seed.
TrainResult train_teacher(std::span<const Slide> slides, EncoderConfig encoder, const TrainConfig& config,
                          Aggregation aggregation);

// Single-slide inference, chunked.
ForwardPass infer_slide(const ModelParameters& params, const Slide& slide);
std::vector<Prediction> predict_slide(const ModelParameters& params, const Slide& slide);

struct TeacherPrediction {
    std::string slide_id;
    std::string patch_id;
    Prediction prediction;
};

std::vector<TeacherPrediction> predict_slides(const ModelParameters& params, std::span<const Slide> slides);

// Benign slide -> NC; cancerous slide whose argmax grade is in the bag label
// -> that grade; everything else -> DISCARD.
std::vector<PseudoLabelRecord> refine_labels(std::span<const TeacherPrediction> predictions,
                                             const std::map<std::string, SlideLabel, std::less<>>& labels);

struct RefinementAudit {
    std::size_t records = 0;
    std::size_t nc_from_cancerous = 0;       // refined NC on a cancerous slide
    std::size_t grade_outside_label = 0;     // refined G with G not in Y_b
    std::size_t cancerous_nc_predictions = 0;
    std::size_t cancerous_nc_discarded = 0;
    std::size_t violations() const noexcept { return nc_from_cancerous + grade_outside_label; }
};

RefinementAudit audit_refinement(std::span<const PseudoLabelRecord> records,
                                 const std::map<std::string, SlideLabel, std::less<>>& labels);

// w_c = C * N / N_c, zero for empty classes.
std::array<double, kNumClasses> class_weights(const std::array<std::size_t, kNumClasses>& counts);

// -(1/C) w_c log p_c for the refined class c.
double student_loss(const Prediction& prediction, GleasonGrade refined, const std::array<double, kNumClasses>& weights);

struct LabeledPatch {
    std::span<const std::uint8_t> pixels;
    GleasonGrade label = GleasonGrade::NC;
};

// Mini-batch training with the class-weighted loss; needs >= 2 classes.
TrainResult train_supervised(std::span<const LabeledPatch> samples, int side, EncoderConfig encoder,
                             const TrainConfig& config);

// Kept pseudo-labels joined with their pixels.
std::vector<LabeledPatch> student_dataset(std::span<const PseudoLabelRecord> records, std::span<const Slide> slides);

TrainResult train_student(std::span<const PseudoLabelRecord> records, std::span<const Slide> slides,
                          EncoderConfig encoder, const TrainConfig& config);

// Benign slides -> all patches NC; single-grade slides -> all patches that
// grade; mixed slides contribute nothing.
std::vector<LabeledPatch> global_assignment_dataset(std::span<const Slide> slides);

} // namespace wsmil
