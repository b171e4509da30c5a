#pragma once

// Gleason label algebra: grades, scores, Grade Groups and the multi-hot
// slide labels used as bag supervision.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace wsmil {

inline constexpr int kNumClasses = 4;    // NC, GG3, GG4, GG5
inline constexpr int kNumCancerous = 3;  // GG3, GG4, GG5

enum class GleasonGrade : int { NC = 0, GG3 = 1, GG4 = 2, GG5 = 3 };

constexpr int index_of(GleasonGrade g) noexcept { return static_cast<int>(g); }
constexpr bool is_cancerous(GleasonGrade g) noexcept { return g != GleasonGrade::NC; }
GleasonGrade grade_from_index(int index);

// Pattern number 3..5 for cancerous grades, 0 for NC.
constexpr int pattern_of(GleasonGrade g) noexcept { return g == GleasonGrade::NC ? 0 : index_of(g) + 2; }
GleasonGrade grade_from_pattern(int pattern);

std::string_view to_string(GleasonGrade g) noexcept;
GleasonGrade parse_grade(std::string_view text);

// A Gleason score is either benign or a (primary, secondary) pair of
// cancerous grades.
class GleasonScore {
public:
    static GleasonScore benign() noexcept { return GleasonScore{}; }
    static GleasonScore of(GleasonGrade primary, GleasonGrade secondary);
    static GleasonScore of_patterns(int primary, int secondary);

    bool is_benign() const noexcept { return primary_ == GleasonGrade::NC; }
    GleasonGrade primary() const noexcept { return primary_; }
    GleasonGrade secondary() const noexcept { return secondary_; }
    int sum() const noexcept { return pattern_of(primary_) + pattern_of(secondary_); }

    friend bool operator==(const GleasonScore&, const GleasonScore&) = default;

private:
    GleasonScore() = default;
    GleasonScore(GleasonGrade p, GleasonGrade s) : primary_(p), secondary_(s) {}

    GleasonGrade primary_ = GleasonGrade::NC;
    GleasonGrade secondary_ = GleasonGrade::NC;
};

// "3+4", benign is "0+0".
std::string to_string(const GleasonScore& score);
GleasonScore parse_score(std::string_view text);

// The ten cancerous scores plus benign, in a fixed order.
std::span<const GleasonScore> all_scores();

struct GradeGroup {
    int value = 0;
    friend bool operator==(const GradeGroup&, const GradeGroup&) = default;
};

GradeGroup score_to_grade_group(const GleasonScore& score) noexcept;

// Ordinal score class used for score-level targets: benign -> 0, sums 6..10 -> 1..5.
int score_sum_class(const GleasonScore& score) noexcept;

// Multi-hot presence over (NC, GG3, GG4, GG5). NC is always present.
struct SlideLabel {
    std::array<bool, kNumClasses> presence{true, false, false, false};

    bool is_benign() const noexcept { return !presence[1] && !presence[2] && !presence[3]; }
    bool contains(GleasonGrade g) const noexcept { return presence[static_cast<std::size_t>(index_of(g))]; }
    friend bool operator==(const SlideLabel&, const SlideLabel&) = default;
};

SlideLabel slide_label_from_score(const GleasonScore& score) noexcept;

// Primary = most frequent cancerous grade, secondary = runner-up (or the
// primary again for single-grade populations). Frequency ties go to the more
// severe grade. Throws on an empty population.
GleasonScore score_from_patch_labels(std::span<const GleasonGrade> labels);
GleasonScore score_from_grade_counts(const std::array<std::size_t, kNumClasses>& counts);

} // namespace wsmil
