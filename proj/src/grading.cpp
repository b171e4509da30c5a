#include "wsmil/grading.hpp"

#include "wsmil/error.hpp"

#include <algorithm>
#include <charconv>

namespace wsmil {

GleasonGrade grade_from_index(int index) {
    if (index < 0 || index >= kNumClasses)
        throw Error("grade", "grade index out of range: " + std::to_string(index));
    return static_cast<GleasonGrade>(index);
}

GleasonGrade grade_from_pattern(int pattern) {
    if (pattern == 0) return GleasonGrade::NC;
    if (pattern < 3 || pattern > 5)
        throw Error("grade", "Gleason pattern must be 0 or 3..5, got " + std::to_string(pattern));
    return static_cast<GleasonGrade>(pattern - 2);
}

std::string_view to_string(GleasonGrade g) noexcept {
    switch (g) {
    case GleasonGrade::NC: return "NC";
    case GleasonGrade::GG3: return "GG3";
    case GleasonGrade::GG4: return "GG4";
    case GleasonGrade::GG5: return "GG5";
    }
    return "NC";
}

GleasonGrade parse_grade(std::string_view text) {
    if (text == "NC") return GleasonGrade::NC;
    if (text == "GG3") return GleasonGrade::GG3;
    if (text == "GG4") return GleasonGrade::GG4;
    if (text == "GG5") return GleasonGrade::GG5;
    throw Error("grade", "unknown grade '" + std::string(text) + "'");
}

GleasonScore GleasonScore::of(GleasonGrade primary, GleasonGrade secondary) {
    if (is_cancerous(primary) != is_cancerous(secondary))
        throw Error("grade", "primary and secondary must both be benign or both cancerous");
    if (!is_cancerous(primary)) return benign();
    return GleasonScore(primary, secondary);
}

GleasonScore GleasonScore::of_patterns(int primary, int secondary) {
    return of(grade_from_pattern(primary), grade_from_pattern(secondary));
}

std::string to_string(const GleasonScore& score) {
    return std::to_string(pattern_of(score.primary())) + "+" + std::to_string(pattern_of(score.secondary()));
}

GleasonScore parse_score(std::string_view text) {
    const auto plus = text.find('+');
    if (plus == std::string_view::npos)
        throw Error("grade", "score must look like P+S, got '" + std::string(text) + "'");
    auto parse_int = [&](std::string_view part) {
        int v = -1;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc{} || ptr != part.data() + part.size())
            throw Error("grade", "score must look like P+S, got '" + std::string(text) + "'");
        return v;
    };
    return GleasonScore::of_patterns(parse_int(text.substr(0, plus)), parse_int(text.substr(plus + 1)));
}

std::span<const GleasonScore> all_scores() {
    using G = GleasonGrade;
    static const std::array<GleasonScore, 10> scores{
        GleasonScore::benign(),
        GleasonScore::of(G::GG3, G::GG3), GleasonScore::of(G::GG3, G::GG4), GleasonScore::of(G::GG4, G::GG3),
        GleasonScore::of(G::GG4, G::GG4), GleasonScore::of(G::GG3, G::GG5), GleasonScore::of(G::GG5, G::GG3),
        GleasonScore::of(G::GG4, G::GG5), GleasonScore::of(G::GG5, G::GG4), GleasonScore::of(G::GG5, G::GG5),
    };
    return scores;
}

GradeGroup score_to_grade_group(const GleasonScore& score) noexcept {
    if (score.is_benign()) return {0};
    const int sum = score.sum();
    if (sum <= 6) return {1};
    if (sum == 7) return {score.primary() == GleasonGrade::GG3 ? 2 : 3};
    if (sum == 8) return {4};
    return {5};
}

int score_sum_class(const GleasonScore& score) noexcept {
    return score.is_benign() ? 0 : score.sum() - 5;
}

SlideLabel slide_label_from_score(const GleasonScore& score) noexcept {
    SlideLabel label;
    if (!score.is_benign()) {
        label.presence[static_cast<std::size_t>(index_of(score.primary()))] = true;
        label.presence[static_cast<std::size_t>(index_of(score.secondary()))] = true;
    }
    return label;
}

GleasonScore score_from_grade_counts(const std::array<std::size_t, kNumClasses>& counts) {
    std::size_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw Error("grade", "empty slide");

    // Severity-descending scan with strict '>' keeps the more severe grade on ties.
    auto best_excluding = [&](int excluded) {
        int best = -1;
        for (int g = kNumClasses - 1; g >= 1; --g) {
            if (g == excluded || counts[static_cast<std::size_t>(g)] == 0) continue;
            if (best < 0 || counts[static_cast<std::size_t>(g)] > counts[static_cast<std::size_t>(best)]) best = g;
        }
        return best;
    };
    const int primary = best_excluding(-1);
    if (primary < 0) return GleasonScore::benign();
    int secondary = best_excluding(primary);
    if (secondary < 0) secondary = primary;
    return GleasonScore::of(grade_from_index(primary), grade_from_index(secondary));
}

GleasonScore score_from_patch_labels(std::span<const GleasonGrade> labels) {
    std::array<std::size_t, kNumClasses> counts{};
    for (auto g : labels) ++counts[static_cast<std::size_t>(index_of(g))];
    return score_from_grade_counts(counts);
}

} // namespace wsmil
