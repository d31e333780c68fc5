#include "lcd/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lcd/error.hpp"
#include "lcd/image.hpp"
#include "lcd/rng.hpp"

namespace lcd {

std::string_view to_string(FusionMethod method) noexcept {
    switch (method) {
        case FusionMethod::rank_fusion: return "rank_fusion";
        case FusionMethod::rank_fusion_cap2: return "rank_fusion_cap2";
        case FusionMethod::rank_fusion_cap3: return "rank_fusion_cap3";
        case FusionMethod::rank_no_fusion: return "rank_no_fusion";
        case FusionMethod::score_max: return "score_max";
        case FusionMethod::score_sum: return "score_sum";
    }
    return "unknown";
}

FusionMethod parse_fusion_method(std::string_view name) {
    for (auto m : kAllMethods) {
        if (to_string(m) == name) return m;
    }
    throw Error(ErrorKind::invalid_input, "unknown fusion method '" + std::string(name) + "'");
}

bool is_rank_method(FusionMethod method) noexcept {
    return method != FusionMethod::score_max && method != FusionMethod::score_sum;
}

double rank_fuse(std::span<const double> ranks) {
    if (ranks.empty()) throw Error(ErrorKind::invalid_input, "rank fusion over an empty list");
    double sum = 0.0;
    for (double r : ranks) {
        if (!(r > 0.0 && r <= 1.0)) {
            throw Error(ErrorKind::invalid_input,
                        "normalized rank must lie in (0, 1], got " + std::to_string(r));
        }
        sum += 1.0 / r;
    }
    return static_cast<double>(ranks.size()) * sum;
}

double rank_fuse_capped(std::span<const double> ranks, std::uint32_t k_max, std::uint64_t seed) {
    if (k_max == 0) throw Error(ErrorKind::invalid_input, "fusion cap must be at least 1");
    if (ranks.size() <= k_max) return rank_fuse(ranks);

    // Partial Fisher-Yates: the first k_max slots become the sample.
    std::vector<std::uint32_t> idx(ranks.size());
    std::iota(idx.begin(), idx.end(), 0u);
    SplitMix64 rng(seed);
    for (std::uint32_t i = 0; i < k_max; ++i) {
        const auto j = i + static_cast<std::uint32_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    std::sort(idx.begin(), idx.begin() + k_max);
    std::vector<double> chosen(k_max);
    for (std::uint32_t i = 0; i < k_max; ++i) chosen[i] = ranks[idx[i]];
    return rank_fuse(chosen);
}

double score_max(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorKind::invalid_input, "score max over an empty list");
    return *std::max_element(values.begin(), values.end());
}

double score_sum(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorKind::invalid_input, "score sum over an empty list");
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

std::uint64_t coverer_seed(std::uint64_t seed, std::span<const std::uint32_t> coverers) noexcept {
    std::uint64_t h = mix64(seed, coverers.size());
    for (auto c : coverers) h = mix64(h, c);
    return h;
}

double fused_value(std::span<const std::uint32_t> coverers, std::span<const ProposalEvidence> evidence,
                   FusionMethod method, std::uint64_t seed) {
    if (coverers.empty()) throw Error(ErrorKind::invalid_input, "fusion over an empty coverer set");
    std::vector<double> values;
    values.reserve(coverers.size());

    switch (method) {
        case FusionMethod::rank_no_fusion: {
            std::uint32_t best = coverers.front();
            for (auto k : coverers) {
                if (evidence[k].box.area() < evidence[best].box.area()) best = k;
            }
            const double r = *evidence[best].rank;
            return rank_fuse(std::span<const double>(&r, 1));
        }
        case FusionMethod::rank_fusion:
        case FusionMethod::rank_fusion_cap2:
        case FusionMethod::rank_fusion_cap3:
            for (auto k : coverers) values.push_back(*evidence[k].rank);
            if (method == FusionMethod::rank_fusion) return rank_fuse(values);
            return rank_fuse_capped(values, method == FusionMethod::rank_fusion_cap2 ? 2 : 3,
                                    coverer_seed(seed, coverers));
        case FusionMethod::score_max:
        case FusionMethod::score_sum:
            for (auto k : coverers) values.push_back(*evidence[k].score);
            return method == FusionMethod::score_max ? score_max(values) : score_sum(values);
    }
    throw Error(ErrorKind::invalid_input, "unknown fusion method");
}

double raw_loc(double fused, FusionMethod method) noexcept {
    return is_rank_method(method) ? 1.0 / (1.0 + fused) : fused;
}

namespace {

void validate_evidence(std::int32_t width, std::int32_t height,
                       std::span<const ProposalEvidence> evidence, FusionMethod method) {
    if (evidence.empty()) throw Error(ErrorKind::invalid_input, "LoC map needs at least one proposal");
    const bool rank_based = is_rank_method(method);
    for (std::size_t k = 0; k < evidence.size(); ++k) {
        const auto& e = evidence[k];
        const auto where = "proposal " + std::to_string(k);
        if (!e.box.within(width, height)) {
            throw Error(ErrorKind::invalid_input, where + " lies outside the image frame");
        }
        if (rank_based) {
            if (!e.rank) throw Error(ErrorKind::invalid_input, where + " has no rank input");
            if (!(*e.rank > 0.0 && *e.rank <= 1.0)) {
                throw Error(ErrorKind::invalid_input, where + " rank outside (0, 1]");
            }
        } else {
            if (!e.score) throw Error(ErrorKind::invalid_input, where + " has no score input");
            if (!std::isfinite(*e.score) || *e.score < 0.0) {
                throw Error(ErrorKind::invalid_input, where + " score must be finite and >= 0");
            }
        }
    }
}

bool uniform_inputs(std::span<const ProposalEvidence> evidence, FusionMethod method) {
    const bool rank_based = is_rank_method(method);
    const double first = rank_based ? *evidence.front().rank : *evidence.front().score;
    return std::all_of(evidence.begin(), evidence.end(), [&](const ProposalEvidence& e) {
        return (rank_based ? *e.rank : *e.score) == first;
    });
}

}  // namespace

LoCMap build_loc_map(std::int32_t width, std::int32_t height,
                     std::span<const ProposalEvidence> evidence, FusionMethod method,
                     std::uint64_t seed) {
    validate_evidence(width, height, evidence, method);

    LoCMap map;
    map.width = width;
    map.height = height;
    map.method = method;
    const auto npix = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    map.loc.assign(npix, 0.0);
    map.covered.assign(npix, 0);

    std::vector<BBox> boxes;
    boxes.reserve(evidence.size());
    for (const auto& e : evidence) boxes.push_back(e.box);
    const RegionPartition partition = intersection_closure(std::span<const BBox>(boxes));

    // Painting largest-first leaves every pixel holding the value of the
    // smallest closure region containing it, whose coverers are exactly the
    // proposals containing the pixel.
    std::vector<std::size_t> order(partition.regions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return partition.regions[a].box.area() > partition.regions[b].box.area();
    });
    for (auto idx : order) {
        const auto& region = partition.regions[idx];
        const double value = raw_loc(fused_value(region.coverers, evidence, method, seed), method);
        for (std::int32_t y = region.box.y0; y < region.box.y1; ++y) {
            const auto row = static_cast<std::size_t>(y) * width;
            for (std::int32_t x = region.box.x0; x < region.box.x1; ++x) {
                map.loc[row + x] = value;
                map.covered[row + x] = 1;
            }
        }
    }

    double lo = INFINITY;
    double hi = -INFINITY;
    for (std::size_t i = 0; i < npix; ++i) {
        if (!map.covered[i]) continue;
        lo = std::min(lo, map.loc[i]);
        hi = std::max(hi, map.loc[i]);
    }
    const bool constant = !(hi > lo) || uniform_inputs(evidence, method);
    for (std::size_t i = 0; i < npix; ++i) {
        if (!map.covered[i] || constant) {
            map.loc[i] = 0.0;
        } else {
            map.loc[i] = (map.loc[i] - lo) / (hi - lo);
        }
    }
    return map;
}

double qbb_loc_score(const LoCMap& map, const BBox& box) {
    if (!box.within(map.width, map.height)) {
        throw Error(ErrorKind::invalid_input, "qBB lies outside the LoC map");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::int32_t y = box.y0; y < box.y1; ++y) {
        for (std::int32_t x = box.x0; x < box.x1; ++x) {
            if (!map.is_covered(x, y)) continue;
            sum += map.at(x, y);
            ++n;
        }
    }
    if (n == 0) throw Error(ErrorKind::no_evidence, "qBB contains no covered pixel");
    return sum / static_cast<double>(n);
}

void export_loc_map(const LoCMap& map, const std::filesystem::path& dir, const std::string& image_id) {
    std::filesystem::create_directories(dir);
    std::vector<std::uint8_t> loc(map.loc.size());
    std::vector<std::uint8_t> cov(map.covered.size());
    for (std::size_t i = 0; i < loc.size(); ++i) {
        loc[i] = static_cast<std::uint8_t>(std::lround(std::clamp(map.loc[i], 0.0, 1.0) * 255.0));
        cov[i] = map.covered[i] ? 255 : 0;
    }
    const auto stem = image_id + "." + std::string(to_string(map.method));
    write_pgm(dir / (stem + ".loc.pgm"), map.width, map.height, loc);
    write_pgm(dir / (stem + ".cov.pgm"), map.width, map.height, cov);
}

}  // namespace lcd
