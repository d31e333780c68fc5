#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace lcd {

/// Integer pixel rectangle, half-open: pixel (x, y) is inside iff
/// x0 <= x < x1 and y0 <= y < y1.
struct BBox {
    std::int32_t x0 = 0;
    std::int32_t y0 = 0;
    std::int32_t x1 = 0;
    std::int32_t y1 = 0;

    std::int64_t width() const noexcept { return x1 - x0; }
    std::int64_t height() const noexcept { return y1 - y0; }
    std::int64_t area() const noexcept { return width() * height(); }
    bool valid() const noexcept { return x0 >= 0 && y0 >= 0 && x0 < x1 && y0 < y1; }
    bool within(std::int64_t img_width, std::int64_t img_height) const noexcept {
        return valid() && x1 <= img_width && y1 <= img_height;
    }
    bool contains(std::int32_t x, std::int32_t y) const noexcept {
        return x0 <= x && x < x1 && y0 <= y && y < y1;
    }
    bool contains(const BBox& other) const noexcept {
        return x0 <= other.x0 && y0 <= other.y0 && other.x1 <= x1 && other.y1 <= y1;
    }

    auto operator<=>(const BBox&) const = default;
};

enum class ProposalSource : std::uint8_t { grid, external };

std::string_view to_string(ProposalSource source) noexcept;
ProposalSource parse_proposal_source(std::string_view text);

struct Proposal {
    BBox box;
    ProposalSource source = ProposalSource::grid;
    double confidence = 1.0;
};

/// Default rejection threshold for externally generated proposals.
inline constexpr double kDefaultConfidenceThreshold = 0.05;

/// One element of the intersection closure: a rectangle and the indices
/// (ascending) of every original proposal that contains it entirely.
struct Region {
    BBox box;
    std::vector<std::uint32_t> coverers;
};

struct RegionPartition {
    std::vector<Region> regions;  // ordered by box (lexicographic x0, y0, x1, y1)
};

/// The fixed five-box layout: centre third-box plus the four overlapping
/// two-thirds corner boxes. Throws invalid_input for width or height < 3.
std::vector<Proposal> five_box_proposals(std::int32_t width, std::int32_t height);

std::optional<BBox> intersect(const BBox& a, const BBox& b) noexcept;

/// Closure of the proposal boxes under pairwise intersection. Duplicate boxes
/// are coalesced; zero-area intersections are never registered.
RegionPartition intersection_closure(std::span<const Proposal> proposals);
RegionPartition intersection_closure(std::span<const BBox> boxes);

std::vector<std::uint32_t> coverers_at(std::int32_t x, std::int32_t y,
                                       std::span<const Proposal> proposals);

/// Drops external proposals whose confidence is below `threshold`; grid
/// proposals always pass.
std::vector<Proposal> filter_by_confidence(std::span<const Proposal> proposals, double threshold);

}  // namespace lcd
