#include "lcd/geometry.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "lcd/error.hpp"

namespace lcd {

std::string_view to_string(ProposalSource source) noexcept {
    return source == ProposalSource::grid ? "grid" : "external";
}

ProposalSource parse_proposal_source(std::string_view text) {
    if (text == "grid") return ProposalSource::grid;
    if (text == "external") return ProposalSource::external;
    throw Error(ErrorKind::format, "unknown proposal source '" + std::string(text) + "'");
}

std::vector<Proposal> five_box_proposals(std::int32_t width, std::int32_t height) {
    if (width < 3 || height < 3) {
        throw Error(ErrorKind::invalid_input,
                    "five-box layout needs an image of at least 3x3 pixels, got " +
                        std::to_string(width) + "x" + std::to_string(height));
    }
    const std::int32_t x1 = width / 3;
    const std::int32_t x2 = static_cast<std::int32_t>((2 * static_cast<std::int64_t>(width)) / 3);
    const std::int32_t y1 = height / 3;
    const std::int32_t y2 = static_cast<std::int32_t>((2 * static_cast<std::int64_t>(height)) / 3);

    const BBox boxes[5] = {
        {x1, y1, x2, y2},
        {0, 0, x2, y2},
        {x1, 0, width, y2},
        {0, y1, x2, height},
        {x1, y1, width, height},
    };
    std::vector<Proposal> out;
    out.reserve(5);
    for (const auto& b : boxes) out.push_back({b, ProposalSource::grid, 1.0});
    return out;
}

std::optional<BBox> intersect(const BBox& a, const BBox& b) noexcept {
    BBox r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
    if (r.x0 >= r.x1 || r.y0 >= r.y1) return std::nullopt;
    return r;
}

RegionPartition intersection_closure(std::span<const BBox> boxes) {
    if (boxes.empty()) {
        throw Error(ErrorKind::invalid_input, "intersection closure of an empty proposal set");
    }
    for (const auto& b : boxes) {
        if (!b.valid()) throw Error(ErrorKind::invalid_input, "proposal box with non-positive area");
    }

    // Every closure member is the intersection of some subset of the
    // originals, so growing the frontier against the originals alone is
    // enough to reach the fixed point.
    std::set<BBox> closure(boxes.begin(), boxes.end());
    std::vector<BBox> frontier(closure.begin(), closure.end());
    while (!frontier.empty()) {
        std::vector<BBox> next;
        for (const auto& f : frontier) {
            for (const auto& b : boxes) {
                auto r = intersect(f, b);
                if (r && closure.insert(*r).second) next.push_back(*r);
            }
        }
        frontier = std::move(next);
    }

    RegionPartition out;
    out.regions.reserve(closure.size());
    for (const auto& box : closure) {
        Region region{box, {}};
        for (std::uint32_t k = 0; k < boxes.size(); ++k) {
            if (boxes[k].contains(box)) region.coverers.push_back(k);
        }
        out.regions.push_back(std::move(region));
    }
    return out;
}

RegionPartition intersection_closure(std::span<const Proposal> proposals) {
    std::vector<BBox> boxes;
    boxes.reserve(proposals.size());
    for (const auto& p : proposals) boxes.push_back(p.box);
    return intersection_closure(std::span<const BBox>(boxes));
}

std::vector<std::uint32_t> coverers_at(std::int32_t x, std::int32_t y,
                                       std::span<const Proposal> proposals) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t k = 0; k < proposals.size(); ++k) {
        if (proposals[k].box.contains(x, y)) out.push_back(k);
    }
    return out;
}

std::vector<Proposal> filter_by_confidence(std::span<const Proposal> proposals, double threshold) {
    std::vector<Proposal> out;
    out.reserve(proposals.size());
    for (const auto& p : proposals) {
        if (p.source == ProposalSource::external && p.confidence < threshold) continue;
        out.push_back(p);
    }
    return out;
}

}  // namespace lcd
