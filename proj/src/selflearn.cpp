#include "wsmil/selflearn.hpp"

#include "wsmil/csv.hpp"
#include "wsmil/error.hpp"
#include "wsmil/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wsmil {

namespace {

inline std::size_t sz(int v) { return static_cast<std::size_t>(v); }

constexpr int kInferenceChunk = 64;

// Stream identifiers for derive_rng.
constexpr std::uint64_t kTeacherStream = 0x7EAC;
constexpr std::uint64_t kStudentStream = 0x57D7;

void add_block(std::vector<double>& grad, const ParamBlock& block, const std::vector<double>& values) {
    for (std::size_t i = 0; i < block.size; ++i) grad[block.offset + i] += values[i];
}

void check_finite(double loss, int epoch, const std::string& where) {
    if (!std::isfinite(loss))
        throw Error("train", "non-finite loss at epoch " + std::to_string(epoch) + " (" + where + ")");
}

} // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw Error("config", "epochs must be >= 1");
    if (!(lr_init > 0.0)) throw Error("config", "lr_init must be > 0");
    if (!(lr_drop_factor > 0.0)) throw Error("config", "lr_drop_factor must be > 0");
    if (decay_tail_epochs < 0) throw Error("config", "decay_tail_epochs must be >= 0");
    if (max_patches_per_bag < 1) throw Error("config", "max_patches_per_bag must be >= 1");
    if (batch_size < 1) throw Error("config", "batch_size must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) throw Error("config", "momentum must be in [0, 1)");
}

double learning_rate(int epoch, const TrainConfig& config) {
    const int drop_epoch = (config.epochs + 1) / 2;
    // The tail never starts before the first dropped epoch has run.
    const int tail_start = std::max(drop_epoch + 1, config.epochs - config.decay_tail_epochs);
    const double dropped = config.lr_init / config.lr_drop_factor;
    if (epoch < drop_epoch) return config.lr_init;
    if (epoch < tail_start) return dropped;
    const int t = config.tail_index_from_start ? epoch + 1 : epoch - tail_start + 1;
    return dropped * std::exp(-0.1 * t);
}

std::string_view to_string(Aggregation a) noexcept { return a == Aggregation::Max ? "max" : "attention"; }

Aggregation parse_aggregation(std::string_view text) {
    if (text == "max") return Aggregation::Max;
    if (text == "attention") return Aggregation::Attention;
    throw Error("config", "aggregation must be max or attention, got '" + std::string(text) + "'");
}

void save_loss_history(std::span<const EpochLoss> history, const std::filesystem::path& path) {
    CsvTable table({"epoch", "mean_loss", "lr"});
    for (const auto& e : history) table.add_row({std::to_string(e.epoch), format_double(e.mean_loss), format_double(e.lr)});
    table.write(path);
}

namespace {

PatchBatch gather(const Slide& slide, std::span<const std::size_t> indices) {
    PatchBatch batch(slide.side);
    batch.data.reserve(indices.size() * batch.patch_size());
    for (auto i : indices) batch.add(slide.patch_pixels(i));
    return batch;
}

// One teacher step on a max-pooled bag. Only the argmax instances carry
// gradient, so only they are re-run with activations kept.
double max_step(const ModelParameters& params, const Slide& slide, std::span<const std::size_t> sample,
                std::vector<double>& grad) {
    const PatchBatch batch = gather(slide, sample);
    const ForwardPass pass = forward(params, batch, false);
    std::vector<Prediction> preds(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) preds[i] = pass.prediction(static_cast<int>(i));
    const BagOutput bag = aggregate_max(preds);
    const double loss = teacher_bag_loss(bag, slide.label);
    const auto dbag = teacher_bag_loss_grad(bag, slide.label);
    const std::vector<double> dprobs = max_backward(bag, dbag);

    std::vector<int> active(bag.argmax.begin(), bag.argmax.end());
    std::sort(active.begin(), active.end());
    active.erase(std::unique(active.begin(), active.end()), active.end());

    std::vector<std::size_t> sub;
    for (int i : active) sub.push_back(sample[sz(i)]);
    const ForwardPass kept = forward(params, gather(slide, sub), true);
    std::vector<double> dlogits(active.size() * kNumClasses);
    for (std::size_t j = 0; j < active.size(); ++j) {
        const auto probs = std::span<const double>(kept.probs).subspan(j * kNumClasses, kNumClasses);
        const auto dp = std::span<const double>(dprobs).subspan(sz(active[j]) * kNumClasses, kNumClasses);
        const auto dl = head_backward(params.config.head, probs, dp);
        std::copy(dl.begin(), dl.end(), dlogits.begin() + static_cast<std::ptrdiff_t>(j * kNumClasses));
    }
    backward(params, kept, dlogits, {}, grad);
    return loss;
}

double attention_step(const ModelParameters& params, const Slide& slide, std::span<const std::size_t> sample,
                      std::vector<double>& grad) {
    const ForwardPass pass = forward(params, gather(slide, sample), true);
    std::vector<Prediction> preds(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) preds[i] = pass.prediction(static_cast<int>(i));
    const AttentionParameters attn = attention_parameters(params);
    const BagOutput bag = aggregate_attention(pass.features, preds, attn, params.config.attention_norm);
    const double loss = teacher_bag_loss(bag, slide.label);
    const auto dbag = teacher_bag_loss_grad(bag, slide.label);
    const AttentionGradients ag = attention_backward(pass.features, preds, attn, params.config.attention_norm, bag, dbag);

    std::vector<double> dlogits(sample.size() * kNumClasses);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const auto probs = std::span<const double>(pass.probs).subspan(i * kNumClasses, kNumClasses);
        const auto dp = std::span<const double>(ag.dprobs).subspan(i * kNumClasses, kNumClasses);
        const auto dl = head_backward(params.config.head, probs, dp);
        std::copy(dl.begin(), dl.end(), dlogits.begin() + static_cast<std::ptrdiff_t>(i * kNumClasses));
    }
    backward(params, pass, dlogits, ag.dfeatures, grad);
    const ParamLayout layout = params.layout();
    add_block(grad, layout.attention_v, ag.dV);
    add_block(grad, layout.attention_u, ag.dU);
    add_block(grad, layout.attention_w, ag.dW);
    return loss;
}

} // namespace

TrainResult train_teacher(std::span<const Slide> slides, EncoderConfig encoder, const TrainConfig& config,
                          Aggregation aggregation) {
    config.validate();
    if (slides.empty()) throw Error("train", "empty dataset");
    bool any_benign = false, any_cancerous = false;
    for (const auto& s : slides) {
        if (s.size() == 0) throw Error("train", "slide '" + s.id + "' has no patches");
        (s.label.is_benign() ? any_benign : any_cancerous) = true;
    }
    if (!any_benign || !any_cancerous) throw Error("train", "teacher needs at least one benign and one cancerous slide");
    if (aggregation == Aggregation::Max) encoder.attention_dim = 0;
    else if (encoder.attention_dim < 1) throw Error("config", "attention aggregation needs attention_dim >= 1");
    for (const auto& s : slides)
        if (s.side != encoder.input_side) throw Error("train", "slide '" + s.id + "' was loaded at a different input side");

    TrainResult result;
    result.params = init_parameters(encoder, config.seed);
    ModelParameters& params = result.params;
    Optimizer optimizer({config.optimizer, config.momentum}, params.values.size());
    std::vector<double> grad(params.values.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = learning_rate(epoch, config);
        auto rng = derive_rng({config.seed, kTeacherStream, static_cast<std::uint64_t>(epoch)});
        std::vector<std::size_t> order(slides.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        for (std::size_t idx : order) {
            const Slide& slide = slides[idx];
            std::vector<std::size_t> sample(slide.size());
            std::iota(sample.begin(), sample.end(), 0);
            if (sample.size() > sz(config.max_patches_per_bag)) {
                std::shuffle(sample.begin(), sample.end(), rng);
                sample.resize(sz(config.max_patches_per_bag));
                std::sort(sample.begin(), sample.end());
            }
            std::fill(grad.begin(), grad.end(), 0.0);
            const double loss = aggregation == Aggregation::Max ? max_step(params, slide, sample, grad)
                                                                : attention_step(params, slide, sample, grad);
            check_finite(loss, epoch, "slide " + slide.id);
            optimizer.step(params.values, grad, lr);
            result.step_losses.push_back(loss);
            epoch_loss += loss;
        }
        if (!params.all_finite()) throw Error("train", "parameters diverged at epoch " + std::to_string(epoch));
        result.epochs.push_back({epoch, epoch_loss / static_cast<double>(slides.size()), lr});
    }
    return result;
}

ForwardPass infer_slide(const ModelParameters& params, const Slide& slide) {
    if (slide.side != params.config.input_side)
        throw Error("model", "slide '" + slide.id + "' was loaded at side " + std::to_string(slide.side) +
                                 ", model expects " + std::to_string(params.config.input_side));
    ForwardPass all;
    all.batch = static_cast<int>(slide.size());
    for (std::size_t start = 0; start < slide.size(); start += kInferenceChunk) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(slide.size(), start + kInferenceChunk); ++i) idx.push_back(i);
        const ForwardPass part = forward(params, gather(slide, idx), false);
        all.features.insert(all.features.end(), part.features.begin(), part.features.end());
        all.logits.insert(all.logits.end(), part.logits.begin(), part.logits.end());
        all.probs.insert(all.probs.end(), part.probs.begin(), part.probs.end());
    }
    return all;
}

std::vector<Prediction> predict_slide(const ModelParameters& params, const Slide& slide) {
    const ForwardPass pass = infer_slide(params, slide);
    std::vector<Prediction> preds(slide.size());
    for (std::size_t i = 0; i < slide.size(); ++i) preds[i] = pass.prediction(static_cast<int>(i));
    return preds;
}

std::vector<TeacherPrediction> predict_slides(const ModelParameters& params, std::span<const Slide> slides) {
    std::vector<std::vector<Prediction>> per_slide(slides.size());
    // Inference is read-only on params; slides fan out.
#pragma omp parallel for schedule(dynamic)
    for (std::size_t s = 0; s < slides.size(); ++s) per_slide[s] = predict_slide(params, slides[s]);
    std::vector<TeacherPrediction> out;
    for (std::size_t s = 0; s < slides.size(); ++s)
        for (std::size_t i = 0; i < slides[s].size(); ++i)
            out.push_back({slides[s].id, slides[s].patches[i].patch_id, per_slide[s][i]});
    return out;
}

std::vector<PseudoLabelRecord> refine_labels(std::span<const TeacherPrediction> predictions,
                                             const std::map<std::string, SlideLabel, std::less<>>& labels) {
    std::vector<PseudoLabelRecord> records;
    records.reserve(predictions.size());
    for (const auto& p : predictions) {
        auto it = labels.find(p.slide_id);
        if (it == labels.end()) throw Error("refine", "missing slide label for '" + p.slide_id + "'");
        const SlideLabel& label = it->second;
        PseudoLabelRecord rec{p.slide_id, p.patch_id, p.prediction.probs, std::nullopt};
        const GleasonGrade g = p.prediction.argmax();
        if (label.is_benign())
            rec.refined = GleasonGrade::NC;
        else if (is_cancerous(g) && label.contains(g))
            rec.refined = g;
        records.push_back(std::move(rec));
    }
    return records;
}

RefinementAudit audit_refinement(std::span<const PseudoLabelRecord> records,
                                 const std::map<std::string, SlideLabel, std::less<>>& labels) {
    RefinementAudit audit;
    for (const auto& r : records) {
        const SlideLabel& label = labels.at(r.slide_id);
        ++audit.records;
        if (r.refined == GleasonGrade::NC && !label.is_benign()) ++audit.nc_from_cancerous;
        if (r.refined && is_cancerous(*r.refined) && !label.contains(*r.refined)) ++audit.grade_outside_label;
        if (!label.is_benign() && Prediction{r.teacher_probs}.argmax() == GleasonGrade::NC) {
            ++audit.cancerous_nc_predictions;
            if (!r.refined) ++audit.cancerous_nc_discarded;
        }
    }
    return audit;
}

std::array<double, kNumClasses> class_weights(const std::array<std::size_t, kNumClasses>& counts) {
    const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    std::array<double, kNumClasses> w{};
    for (std::size_t c = 0; c < kNumClasses; ++c)
        w[c] = counts[c] == 0 ? 0.0 : (kNumClasses * n) / static_cast<double>(counts[c]);
    return w;
}

double student_loss(const Prediction& prediction, GleasonGrade refined, const std::array<double, kNumClasses>& weights) {
    const auto c = static_cast<std::size_t>(index_of(refined));
    if (weights[c] == 0.0) return 0.0;
    const double p = std::clamp(prediction.probs[c], kProbEpsilon, 1.0);
    return -weights[c] * std::log(p) / kNumClasses;
}

TrainResult train_supervised(std::span<const LabeledPatch> samples, int side, EncoderConfig encoder,
                             const TrainConfig& config) {
    config.validate();
    if (samples.empty()) throw Error("train", "degenerate pseudo-dataset: no samples");
    std::array<std::size_t, kNumClasses> counts{};
    for (const auto& s : samples) ++counts[static_cast<std::size_t>(index_of(s.label))];
    if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2)
        throw Error("train", "degenerate pseudo-dataset: fewer than two classes");
    if (side != encoder.input_side) throw Error("train", "sample side does not match encoder input_side");
    encoder.attention_dim = 0;
    std::array<double, kNumClasses> weights;
    if (config.class_weighted) weights = class_weights(counts);
    else weights.fill(static_cast<double>(kNumClasses));

    TrainResult result;
    result.params = init_parameters(encoder, config.seed);
    ModelParameters& params = result.params;
    Optimizer optimizer({config.optimizer, config.momentum}, params.values.size());
    std::vector<double> grad(params.values.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = learning_rate(epoch, config);
        auto rng = derive_rng({config.seed, kStudentStream, static_cast<std::uint64_t>(epoch)});
        std::vector<std::size_t> order(samples.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += sz(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + sz(config.batch_size));
            const auto b = static_cast<double>(end - start);
            PatchBatch batch(side);
            batch.data.reserve((end - start) * batch.patch_size());
            for (std::size_t j = start; j < end; ++j) batch.add(samples[order[j]].pixels);
            const ForwardPass pass = forward(params, batch, true);

            double loss = 0.0;
            std::vector<double> dlogits((end - start) * kNumClasses, 0.0);
            for (std::size_t j = start; j < end; ++j) {
                const std::size_t r = j - start;
                const GleasonGrade label = samples[order[j]].label;
                const auto c = static_cast<std::size_t>(index_of(label));
                const Prediction pred = pass.prediction(static_cast<int>(r));
                loss += student_loss(pred, label, weights);
                std::array<double, kNumClasses> dp{};
                const double p = std::max(pred.probs[c], kProbEpsilon);
                dp[c] = -weights[c] / (kNumClasses * p * b);
                const auto dl = head_backward(params.config.head, pred.probs, dp);
                std::copy(dl.begin(), dl.end(), dlogits.begin() + static_cast<std::ptrdiff_t>(r * kNumClasses));
            }
            loss /= b;
            check_finite(loss, epoch, "batch " + std::to_string(batches));
            std::fill(grad.begin(), grad.end(), 0.0);
            backward(params, pass, dlogits, {}, grad);
            optimizer.step(params.values, grad, lr);
            result.step_losses.push_back(loss);
            epoch_loss += loss;
            ++batches;
        }
        if (!params.all_finite()) throw Error("train", "parameters diverged at epoch " + std::to_string(epoch));
        result.epochs.push_back({epoch, epoch_loss / static_cast<double>(batches), lr});
    }
    return result;
}

std::vector<LabeledPatch> student_dataset(std::span<const PseudoLabelRecord> records, std::span<const Slide> slides) {
    std::map<PatchKey, std::pair<const Slide*, std::size_t>> where;
    for (const auto& s : slides)
        for (std::size_t i = 0; i < s.size(); ++i) where[{s.id, s.patches[i].patch_id}] = {&s, i};
    std::vector<LabeledPatch> samples;
    for (const auto& r : records) {
        if (!r.refined) continue;
        auto it = where.find({r.slide_id, r.patch_id});
        if (it == where.end())
            throw Error("dataset", "pseudo-label references unknown patch '" + r.patch_id + "' of slide '" + r.slide_id + "'");
        samples.push_back({it->second.first->patch_pixels(it->second.second), *r.refined});
    }
    return samples;
}

TrainResult train_student(std::span<const PseudoLabelRecord> records, std::span<const Slide> slides,
                          EncoderConfig encoder, const TrainConfig& config) {
    const auto samples = student_dataset(records, slides);
    return train_supervised(samples, encoder.input_side, std::move(encoder), config);
}

std::vector<LabeledPatch> global_assignment_dataset(std::span<const Slide> slides) {
    std::vector<LabeledPatch> samples;
    for (const auto& s : slides) {
        if (!s.score.is_benign() && s.score.primary() != s.score.secondary()) continue;
        const GleasonGrade label = s.score.primary();
        for (std::size_t i = 0; i < s.size(); ++i) samples.push_back({s.patch_pixels(i), label});
    }
    return samples;
}

} // namespace wsmil
