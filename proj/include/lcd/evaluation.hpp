#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcd/fusion.hpp"
#include "lcd/geometry.hpp"

namespace lcd {

enum class Polarity : std::uint8_t { positive, negative };

std::string_view to_string(Polarity polarity) noexcept;
Polarity parse_polarity(std::string_view text);

struct TestSample {
    std::string query_image_id;
    std::string gt_ref_image_id;
    Polarity polarity = Polarity::negative;
    std::vector<BBox> gt_change_boxes;

    /// Throws invalid_input if polarity and box list disagree.
    void validate() const;
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};

struct DifficultyConfig {
    Interval roc_pos{0.9, 1.0};
    Interval roc_neg{0.0, 0.05};
    Interval sob_pos{0.0, 0.4};
    Interval sob_neg{0.4, 1.0};

    void validate() const;
};

enum class Label : std::uint8_t { change, no_change, excluded };

std::string_view to_string(Label label) noexcept;

/// Fraction of `box` covered by the union of `gt_boxes`.
double roc(const BBox& box, std::span<const BBox> gt_boxes);

/// Area of `box` relative to the image.
double sob(const BBox& box, std::int32_t width, std::int32_t height);

Label label_qbb(double roc_value, double sob_value, Polarity polarity, const DifficultyConfig& cfg);

struct LabeledQBB {
    BBox box;
    double roc = 0.0;
    double sob = 0.0;
    Label label = Label::excluded;
    double score = 0.0;
};

struct ScoredSample {
    double score = 0.0;
    bool is_change = false;
};

/// 101-point interpolated average precision. Samples are ranked by
/// descending score; equal scores keep their input order. Throws
/// undefined_metric when there is no positive sample.
double ap_101(std::span<const ScoredSample> scored);

/// Detection output for one test sample: every evaluated qBB with its LoC
/// score under each method that was run.
struct QbbDetection {
    BBox box;
    std::vector<std::optional<double>> loc;  // indexed by FusionMethod

    std::optional<double> score(FusionMethod m) const {
        const auto i = static_cast<std::size_t>(m);
        return i < loc.size() ? loc[i] : std::nullopt;
    }
};

struct SampleDetections {
    TestSample sample;
    std::int32_t width = 0;
    std::int32_t height = 0;
    std::vector<QbbDetection> qbbs;
};

inline constexpr std::array<double, 5> kDefaultRocNegMaxSweep = {0.01, 0.02, 0.03, 0.04, 0.05};

struct MethodReport {
    std::vector<FusionMethod> methods;
    std::vector<double> roc_neg_max;
    std::vector<std::vector<double>> ap;  // [method][column]
    std::vector<std::size_t> positives;   // per column
    std::vector<std::size_t> negatives;   // per column

    /// Comma-separated table: header "method,<sweep values>", one row per
    /// method, AP cells with two decimals.
    std::string to_csv() const;
};

struct EvalOptions {
    DifficultyConfig difficulty;
    std::vector<double> roc_neg_max{kDefaultRocNegMaxSweep.begin(), kDefaultRocNegMaxSweep.end()};
    /// Applied to every qBB score before ranking; must be strictly increasing.
    std::function<double(double)> score_transform;
};

/// Labels every qBB of every sample per sweep column (only RoC-_max varies)
/// and computes AP per (method, column).
MethodReport evaluate_methods(std::span<const SampleDetections> samples,
                              std::span<const FusionMethod> methods, const EvalOptions& options);

}  // namespace lcd
