#include "test_util.hpp"
#include "wsmil/error.hpp"
#include "wsmil/selflearn.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace wsmil;
using G = GleasonGrade;

namespace {

TrainConfig quick(int epochs, std::uint64_t seed) {
    TrainConfig c;
    c.epochs = epochs;
    c.seed = seed;
    c.batch_size = 16;
    return c;
}

std::map<std::string, SlideLabel, std::less<>> labels_of(const std::vector<Slide>& slides) {
    std::map<std::string, SlideLabel, std::less<>> m;
    for (const auto& s : slides) m[s.id] = s.label;
    return m;
}

TeacherPrediction pred(std::string slide, std::string patch, std::array<double, 4> probs) {
    return {std::move(slide), std::move(patch), Prediction{probs}};
}

} // namespace

TEST_CASE("learning rate schedule") {
    TrainConfig c;
    CHECK(learning_rate(0, c) == doctest::Approx(1e-2));
    CHECK(learning_rate(14, c) == doctest::Approx(1e-2));
    CHECK(learning_rate(15, c) == doctest::Approx(1e-3));
    CHECK(learning_rate(24, c) == doctest::Approx(1e-3));
    CHECK(learning_rate(25, c) == doctest::Approx(9.048e-4).epsilon(1e-4));
    CHECK(learning_rate(29, c) == doctest::Approx(1e-3 * std::exp(-0.5)));
    for (int e = 1; e < c.epochs; ++e) CHECK(learning_rate(e, c) <= learning_rate(e - 1, c));

    TrainConfig two;
    two.epochs = 2;
    CHECK(learning_rate(0, two) == doctest::Approx(1e-2));
    CHECK(learning_rate(1, two) == doctest::Approx(1e-3));

    TrainConfig from_start;
    from_start.tail_index_from_start = true;
    CHECK(learning_rate(25, from_start) == doctest::Approx(1e-3 * std::exp(-2.6)));

    TrainConfig bad;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = {};
    bad.lr_init = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = {};
    bad.max_patches_per_bag = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("refinement rule") {
    std::map<std::string, SlideLabel, std::less<>> labels{
        {"mixed", slide_label_from_score(GleasonScore::of_patterns(3, 4))},
        {"g3", slide_label_from_score(GleasonScore::of_patterns(3, 3))},
        {"benign", SlideLabel{}},
    };
    const std::vector<TeacherPrediction> preds{
        pred("mixed", "a", {0.1, 0.2, 0.6, 0.1}),   // GG4 in label
        pred("g3", "b", {0.7, 0.1, 0.1, 0.1}),      // NC on cancerous slide
        pred("benign", "c", {0.1, 0.1, 0.1, 0.7}),  // anything on a benign slide
        pred("g3", "d", {0.1, 0.2, 0.1, 0.6}),      // grade outside the label
    };
    const auto out = refine_labels(preds, labels);
    REQUIRE(out.size() == 4);
    CHECK(out[0].refined == G::GG4);
    CHECK_FALSE(out[1].refined.has_value());
    CHECK(out[2].refined == G::NC);
    CHECK_FALSE(out[3].refined.has_value());
    CHECK(out[0].teacher_probs == preds[0].prediction.probs);

    const auto audit = audit_refinement(out, labels);
    CHECK(audit.records == 4);
    CHECK(audit.violations() == 0);
    CHECK(audit.cancerous_nc_predictions == 1);
    CHECK(audit.cancerous_nc_discarded == 1);

    CHECK_THROWS_AS(refine_labels(std::vector<TeacherPrediction>{pred("nope", "x", {1, 0, 0, 0})}, labels), Error);
}

TEST_CASE("refinement is sound on random predictions") {
    std::mt19937_64 rng(61);
    std::map<std::string, SlideLabel, std::less<>> labels;
    for (int s = 0; s < 40; ++s) labels["s" + std::to_string(s)] = slide_label_from_score(all_scores()[rng() % 10]);
    std::vector<TeacherPrediction> preds;
    for (int i = 0; i < 2000; ++i) {
        const auto logits = testutil::uniform(rng, 4, -2, 2);
        preds.push_back(pred("s" + std::to_string(rng() % 40), "p" + std::to_string(i),
                             head_probabilities(HeadActivation::Softmax, logits)));
    }
    const auto out = refine_labels(preds, labels);
    REQUIRE(out.size() == preds.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& label = labels.at(out[i].slide_id);
        const G arg = preds[i].prediction.argmax();
        if (out[i].refined == G::NC) CHECK(label.is_benign());
        if (out[i].refined && *out[i].refined != G::NC) CHECK(label.contains(*out[i].refined));
        if (!label.is_benign() && arg == G::NC) CHECK_FALSE(out[i].refined.has_value());
        if (!label.is_benign() && arg != G::NC && label.contains(arg)) CHECK(out[i].refined == arg);
    }
    const auto audit = audit_refinement(out, labels);
    CHECK(audit.violations() == 0);
    CHECK(audit.cancerous_nc_discarded == audit.cancerous_nc_predictions);
}

TEST_CASE("audit flags violations") {
    std::map<std::string, SlideLabel, std::less<>> labels{{"g3", slide_label_from_score(GleasonScore::of_patterns(3, 3))}};
    std::vector<PseudoLabelRecord> bad{{"g3", "a", {0.9, 0.1, 0, 0}, G::NC}, {"g3", "b", {0, 0, 0, 1}, G::GG5}};
    const auto audit = audit_refinement(bad, labels);
    CHECK(audit.nc_from_cancerous == 1);
    CHECK(audit.grade_outside_label == 1);
}

TEST_CASE("class weights and student loss") {
    CHECK(class_weights({200, 100, 50, 50}) == std::array<double, 4>{8, 16, 32, 32});
    CHECK(class_weights({100, 100, 100, 100}) == std::array<double, 4>{16, 16, 16, 16});
    CHECK(class_weights({1, 1, 1, 1}) == std::array<double, 4>{16, 16, 16, 16});
    CHECK(class_weights({10, 0, 10, 0}) == std::array<double, 4>{8, 0, 8, 0});

    const Prediction uniform{{0.25, 0.25, 0.25, 0.25}};
    CHECK(student_loss(uniform, G::GG3, {16, 16, 16, 16}) == doctest::Approx(5.5452).epsilon(1e-4));
    CHECK(student_loss(uniform, G::GG3, {16, 16, 16, 16}) == doctest::Approx(4.0 * std::log(4.0)));
    CHECK(student_loss(Prediction{{0, 1, 0, 0}}, G::GG3, {1, 1, 1, 1}) == 0.0);
    CHECK(student_loss(uniform, G::GG4, {1, 1, 0, 1}) == 0.0);
    CHECK(std::isfinite(student_loss(Prediction{{1, 0, 0, 0}}, G::GG5, {1, 1, 1, 1})));
}

TEST_CASE("global assignment dataset") {
    auto bags = testutil::synth_bags(testutil::small_synth(40, 3));
    std::size_t expected = 0;
    for (const auto& s : bags.slides)
        if (s.score.primary() == s.score.secondary()) expected += s.size();
    const auto data = global_assignment_dataset(bags.slides);
    CHECK(data.size() == expected);

    Slide g4;
    g4.id = "g4";
    g4.score = GleasonScore::of_patterns(4, 4);
    g4.label = slide_label_from_score(g4.score);
    g4.side = 8;
    for (int i = 0; i < 30; ++i) g4.add_patch({"p" + std::to_string(i)}, Image(8, 8, 3, 100));
    Slide mixed = g4;
    mixed.score = GleasonScore::of_patterns(3, 4);
    mixed.label = slide_label_from_score(mixed.score);
    Slide benign = g4;
    benign.score = GleasonScore::benign();
    benign.label = {};
    const auto only_g4 = global_assignment_dataset(std::vector<Slide>{g4});
    CHECK(only_g4.size() == 30);
    for (const auto& p : only_g4) CHECK(p.label == G::GG4);
    CHECK(global_assignment_dataset(std::vector<Slide>{mixed}).empty());
    const auto nc = global_assignment_dataset(std::vector<Slide>{benign});
    CHECK(nc.size() == 30);
    for (const auto& p : nc) CHECK(p.label == G::NC);
}

TEST_CASE("teacher training: history, determinism, improvement") {
    const auto bags = testutil::synth_bags(testutil::small_synth(60, 8));
    const auto cfg = testutil::tiny_encoder(4);
    for (auto agg : {Aggregation::Max, Aggregation::Attention}) {
        const auto a = train_teacher(bags.slides, cfg, quick(30, 5), agg);
        const auto b = train_teacher(bags.slides, cfg, quick(30, 5), agg);
        CHECK(a.params.values == b.params.values);
        CHECK(a.step_losses.size() == 30 * bags.slides.size());
        REQUIRE(a.epochs.size() == 30);
        CHECK(a.epochs.back().mean_loss < a.epochs.front().mean_loss);
        CHECK(a.params.config.attention_dim == (agg == Aggregation::Max ? 0 : 4));
    }
    auto no_attention = cfg;
    no_attention.attention_dim = 0;
    CHECK_THROWS_AS(train_teacher(bags.slides, no_attention, quick(1, 1), Aggregation::Attention), Error);
    CHECK_THROWS_AS(train_teacher(std::vector<Slide>{}, cfg, quick(1, 1), Aggregation::Max), Error);

    std::vector<Slide> benign_only;
    for (const auto& s : bags.slides)
        if (s.label.is_benign()) benign_only.push_back(s);
    CHECK_THROWS_AS(train_teacher(benign_only, cfg, quick(1, 1), Aggregation::Max), Error);
}

TEST_CASE("teacher subsampling caps the bag") {
    // With a one-patch cap the teacher still trains and stays deterministic.
    const auto bags = testutil::synth_bags(testutil::small_synth(20, 9));
    auto c = quick(2, 3);
    c.max_patches_per_bag = 1;
    const auto a = train_teacher(bags.slides, testutil::tiny_encoder(), c, Aggregation::Max);
    const auto b = train_teacher(bags.slides, testutil::tiny_encoder(), c, Aggregation::Max);
    CHECK(a.params.values == b.params.values);
    c.seed = 4;
    CHECK(train_teacher(bags.slides, testutil::tiny_encoder(), c, Aggregation::Max).params.values != a.params.values);
}

TEST_CASE("predictions cover every patch and are independent of chunking") {
    const auto bags = testutil::synth_bags(testutil::small_synth(10, 10));
    const auto params = testutil::random_params(testutil::tiny_encoder(), 3);
    const auto all = predict_slides(params, bags.slides);
    std::size_t total = 0;
    for (const auto& s : bags.slides) total += s.size();
    REQUIRE(all.size() == total);
    std::size_t i = 0;
    for (const auto& s : bags.slides) {
        const auto per = predict_slide(params, s);
        for (std::size_t p = 0; p < s.size(); ++p, ++i) {
            CHECK(all[i].slide_id == s.id);
            CHECK(all[i].patch_id == s.patches[p].patch_id);
            CHECK(all[i].prediction.probs == per[p].probs);
        }
    }
}

TEST_CASE("student training") {
    const auto bags = testutil::synth_bags(testutil::small_synth(40, 11));
    std::vector<PseudoLabelRecord> records;
    for (const auto& [key, grade] : bags.truth) records.push_back({key.first, key.second, {}, grade});
    const auto a = train_student(records, bags.slides, testutil::tiny_encoder(), quick(3, 2));
    const auto b = train_student(records, bags.slides, testutil::tiny_encoder(), quick(3, 2));
    CHECK(a.params.values == b.params.values);
    CHECK(a.epochs.size() == 3);
    CHECK(a.params.config.attention_dim == 0);

    CHECK_THROWS_WITH_AS(train_student(std::vector<PseudoLabelRecord>{}, bags.slides, testutil::tiny_encoder(), quick(1, 1)),
                         doctest::Contains("degenerate pseudo-dataset"), Error);
    std::vector<PseudoLabelRecord> one_class;
    for (auto r : records)
        if (r.refined == G::NC) one_class.push_back(r);
    CHECK_THROWS_WITH_AS(train_student(one_class, bags.slides, testutil::tiny_encoder(), quick(1, 1)),
                         doctest::Contains("degenerate pseudo-dataset"), Error);

    // DISCARD records are dropped before training.
    std::vector<PseudoLabelRecord> with_discards = records;
    for (std::size_t i = 0; i < with_discards.size(); i += 3) with_discards[i].refined.reset();
    const auto kept = student_dataset(with_discards, bags.slides);
    CHECK(kept.size() == with_discards.size() - (with_discards.size() + 2) / 3);
}

TEST_CASE("supervised training fits a separable toy set") {
    // Dark versus bright patches: the class-weighted student must separate them.
    std::vector<Image> imgs;
    std::vector<LabeledPatch> samples;
    for (int i = 0; i < 40; ++i) imgs.emplace_back(8, 8, 3, static_cast<std::uint8_t>(i % 2 ? 220 : 30));
    for (int i = 0; i < 40; ++i) samples.push_back({imgs[static_cast<std::size_t>(i)].data, i % 2 ? G::NC : G::GG4});
    auto c = quick(30, 1);
    c.lr_init = 0.05;
    const auto trained = train_supervised(samples, 8, testutil::tiny_encoder(), c);
    for (int i = 0; i < 2; ++i)
        CHECK(classify(encode(imgs[static_cast<std::size_t>(i)], trained.params), trained.params).argmax() == (i % 2 ? G::NC : G::GG4));
}
