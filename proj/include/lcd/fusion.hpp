#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcd/geometry.hpp"

namespace lcd {

enum class FusionMethod : std::uint8_t {
    rank_fusion,
    rank_fusion_cap2,
    rank_fusion_cap3,
    rank_no_fusion,
    score_max,
    score_sum,
};

inline constexpr std::array<FusionMethod, 6> kAllMethods = {
    FusionMethod::rank_fusion,    FusionMethod::rank_fusion_cap2, FusionMethod::rank_fusion_cap3,
    FusionMethod::rank_no_fusion, FusionMethod::score_max,        FusionMethod::score_sum,
};

std::string_view to_string(FusionMethod method) noexcept;
FusionMethod parse_fusion_method(std::string_view name);
bool is_rank_method(FusionMethod method) noexcept;

/// R = N * sum_k 1/r_k over normalized ranks r_k in (0, 1]. The sum runs in
/// input order.
double rank_fuse(std::span<const double> ranks);

/// rank_fuse restricted to at most `k_max` ranks. When more are given,
/// `k_max` of them are drawn uniformly without replacement from `seed`, and
/// the chosen subset is fused in input order with N = k_max.
double rank_fuse_capped(std::span<const double> ranks, std::uint32_t k_max, std::uint64_t seed);

double score_max(std::span<const double> values);
double score_sum(std::span<const double> values);

/// Per-proposal evidence. Rank methods read `rank` (normalized gt rank),
/// score methods read `score` (relevance score; larger = more change-like).
struct ProposalEvidence {
    BBox box;
    std::optional<double> rank;
    std::optional<double> score;
};

/// Seed for a capped draw over one coverer set. Pixels (and closure
/// regions) with the same coverers draw the same subset.
std::uint64_t coverer_seed(std::uint64_t seed, std::span<const std::uint32_t> coverers) noexcept;

/// Fused value of `method` over the proposals listed in `coverers`
/// (ascending indices). For rank_no_fusion this is 1/r of the
/// smallest-area coverer (ties: lowest index).
double fused_value(std::span<const std::uint32_t> coverers, std::span<const ProposalEvidence> evidence,
                   FusionMethod method, std::uint64_t seed);

/// Pre-rescale LoC for a fused value: 1/(1+R) for rank methods (large R
/// means good localization), the fused score itself for score methods.
double raw_loc(double fused, FusionMethod method) noexcept;

struct LoCMap {
    std::int32_t width = 0;
    std::int32_t height = 0;
    FusionMethod method = FusionMethod::rank_fusion;
    std::vector<double> loc;           // row-major, in [0, 1]; 0 where uncovered
    std::vector<std::uint8_t> covered;  // 1 if any proposal covers the pixel

    double at(std::int32_t x, std::int32_t y) const noexcept {
        return loc[static_cast<std::size_t>(y) * width + x];
    }
    bool is_covered(std::int32_t x, std::int32_t y) const noexcept {
        return covered[static_cast<std::size_t>(y) * width + x] != 0;
    }
};

/// Pixel-wise LoC map. Each pixel takes the fused value over the proposals
/// covering it, mapped through raw_loc and min-max rescaled over the covered
/// pixels. A map whose covered values are all equal, or whose proposals all
/// carry the same input value, is 0 everywhere.
///
/// Computed region-wise over intersection_closure(); identical to the
/// per-pixel definition.
LoCMap build_loc_map(std::int32_t width, std::int32_t height,
                     std::span<const ProposalEvidence> evidence, FusionMethod method,
                     std::uint64_t seed);

/// Mean LoC over the covered pixels of `box`. Throws no_evidence if none.
double qbb_loc_score(const LoCMap& map, const BBox& box);

/// Writes <dir>/<image_id>.<method>.loc.pgm and .cov.pgm.
void export_loc_map(const LoCMap& map, const std::filesystem::path& dir, const std::string& image_id);

}  // namespace lcd
