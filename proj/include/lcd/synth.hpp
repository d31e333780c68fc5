#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lcd/evaluation.hpp"
#include "lcd/geometry.hpp"
#include "lcd/image.hpp"

namespace lcd {

/// Seeded scene generator: every pair is a distinct place rendered twice,
/// once as the reference view and once as a translated, re-lit query view
/// with (for positive pairs) planted objects.
struct SynthConfig {
    std::uint64_t seed = 1;
    std::int32_t image_size = 256;
    std::uint32_t n_pairs = 200;
    double change_rate = 0.5;
    std::int32_t jitter_max = 8;
    std::int32_t object_size_min = 24;
    std::int32_t object_size_max = 64;
    std::int32_t texture_complexity = 4;  // noise octaves
    /// Global gain perturbation of the query, +-fraction (season proxy).
    double brightness_max = 0.15;
    std::int32_t static_shapes_min = 3;
    std::int32_t static_shapes_max = 6;
    /// Simulated detector: box edges jitter by up to this many pixels.
    std::int32_t proposal_noise = 2;
    std::int32_t distractor_proposals = 2;

    void validate() const;
};

struct SynthPair {
    Raster reference;
    Raster query;
    std::vector<BBox> gt_change_boxes;  // query frame
    Polarity polarity = Polarity::negative;
    /// Simulated external detector output for each view.
    std::vector<Proposal> reference_proposals;
    std::vector<Proposal> query_proposals;
};

/// Pair `pair_index` is positive iff floor((i+1)*rate) > floor(i*rate), so
/// exactly floor(n*rate) of the first n pairs are positive.
bool synth_is_positive(const SynthConfig& cfg, std::uint32_t pair_index) noexcept;

/// Fully determined by (cfg, pair_index).
SynthPair gen_pair(const SynthConfig& cfg, std::uint32_t pair_index);

std::string synth_reference_id(std::uint32_t pair_index);
std::string synth_query_id(std::uint32_t pair_index);

/// Writes <dir>/images/<id>.ppm for every view, <dir>/manifest.jsonl and
/// <dir>/proposals.jsonl. Returns the samples in pair order.
std::vector<TestSample> gen_dataset(const SynthConfig& cfg, const std::filesystem::path& dir);

}  // namespace lcd
