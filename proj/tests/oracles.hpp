#pragma once

// Independent reference implementations used by unit and acceptance tests.
// They follow the definitions directly and share no code with the library
// beyond the elementwise fusion operators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lcd/evaluation.hpp"
#include "lcd/fusion.hpp"
#include "lcd/geometry.hpp"

namespace oracle {

// Materializes every cutoff: sort by descending score (stable), compute
// (recall, precision) at each prefix, then for each of the 101 recall levels
// take the max precision over cutoffs whose recall reaches the level.
inline double ap_101(const std::vector<lcd::ScoredSample>& scored) {
    std::vector<lcd::ScoredSample> sorted = scored;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const lcd::ScoredSample& a, const lcd::ScoredSample& b) { return a.score > b.score; });
    std::int64_t positives = 0;
    for (const auto& s : sorted) positives += s.is_change;
    struct Cutoff {
        std::int64_t tp;
        double precision;
    };
    std::vector<Cutoff> cutoffs;
    std::int64_t tp = 0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        tp += sorted[k].is_change;
        cutoffs.push_back({tp, static_cast<double>(tp) / static_cast<double>(k + 1)});
    }
    double sum = 0.0;
    for (std::int64_t level = 0; level <= 100; ++level) {
        double p = 0.0;
        for (const auto& c : cutoffs) {
            // recall >= level/100, compared exactly in integers
            if (c.tp * 100 >= level * positives) p = std::max(p, c.precision);
        }
        sum += p;
    }
    return sum / 101.0;
}

struct PixelMap {
    std::vector<double> loc;
    std::vector<std::uint8_t> covered;
};

// Evaluates the LoC map pixel by pixel from the coverer set of each pixel.
inline PixelMap loc_per_pixel(std::int32_t w, std::int32_t h, const std::vector<lcd::ProposalEvidence>& ev,
                              lcd::FusionMethod method, std::uint64_t seed) {
    PixelMap out;
    out.loc.assign(static_cast<std::size_t>(w) * h, 0.0);
    out.covered.assign(out.loc.size(), 0);
    for (std::int32_t y = 0; y < h; ++y) {
        for (std::int32_t x = 0; x < w; ++x) {
            std::vector<std::uint32_t> cov;
            for (std::uint32_t k = 0; k < ev.size(); ++k) {
                if (ev[k].box.contains(x, y)) cov.push_back(k);
            }
            if (cov.empty()) continue;
            const auto i = static_cast<std::size_t>(y) * w + x;
            out.covered[i] = 1;
            out.loc[i] = lcd::raw_loc(lcd::fused_value(cov, ev, method, seed), method);
        }
    }
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < out.loc.size(); ++i) {
        if (!out.covered[i]) continue;
        lo = std::min(lo, out.loc[i]);
        hi = std::max(hi, out.loc[i]);
    }
    bool uniform = true;
    for (const auto& e : ev) {
        const double a = lcd::is_rank_method(method) ? *e.rank : *e.score;
        const double b = lcd::is_rank_method(method) ? *ev.front().rank : *ev.front().score;
        uniform = uniform && a == b;
    }
    for (std::size_t i = 0; i < out.loc.size(); ++i) {
        if (!out.covered[i] || !(hi > lo) || uniform) {
            out.loc[i] = 0.0;
        } else {
            out.loc[i] = (out.loc[i] - lo) / (hi - lo);
        }
    }
    return out;
}

}  // namespace oracle
