#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lcd/descriptor.hpp"
#include "lcd/evaluation.hpp"
#include "lcd/formats.hpp"
#include "lcd/fusion.hpp"
#include "lcd/retrieval.hpp"
#include "lcd/synth.hpp"

namespace lcd {

/// Everything a pipeline run depends on. Loaded from a JSON document; see
/// docs/config.md for the schema. Relative paths resolve against the
/// directory holding the config file.
struct PipelineConfig {
    std::filesystem::path manifest;        // dataset manifest (.jsonl)
    std::filesystem::path image_dir;       // <image_id>.ppm
    std::filesystem::path out_dir = "out";
    std::optional<std::filesystem::path> proposals_file;
    std::optional<std::filesystem::path> external_features;
    std::vector<std::string> extra_reference_ids;

    bool grid_proposals = true;
    double confidence_threshold = kDefaultConfidenceThreshold;
    DescriptorConfig descriptor;
    bool separate_engines = false;

    std::vector<FusionMethod> methods{kAllMethods.begin(), kAllMethods.end()};
    DifficultyConfig difficulty;
    std::vector<double> roc_neg_max{kDefaultRocNegMaxSweep.begin(), kDefaultRocNegMaxSweep.end()};

    std::uint64_t seed = 0;
    std::uint32_t workers = 0;  // 0: hardware concurrency
    bool export_maps = true;

    SynthConfig synth;

    std::filesystem::path db_dir() const { return out_dir / "db"; }
    std::filesystem::path detect_dir() const { return out_dir / "detect"; }
    std::filesystem::path report_path() const { return out_dir / "report.csv"; }

    void validate() const;
};

PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);

/// Per-stage wall time, reported on stderr by the CLI and never written to
/// artifacts.
struct StageTimings {
    double proposals_ms = 0.0;
    double features_ms = 0.0;
    double retrieval_ms = 0.0;
    double fusion_ms = 0.0;
    double io_ms = 0.0;
};

// ---------------------------------------------------------------------------
// In-memory building blocks
// ---------------------------------------------------------------------------

/// Grid boxes (when enabled) followed by the image's external proposals.
std::vector<Proposal> image_proposals(const std::string& image_id, std::int32_t width, std::int32_t height,
                                      bool grid, const ProposalTable* external);

/// Features for every proposal, from the ingested table when given
/// (missing entries are a format error) and the built-in descriptor otherwise.
std::vector<FeatureVector> proposal_features(const std::string& image_id, const Raster& image,
                                             std::span<const Proposal> proposals,
                                             const DescriptorConfig& descriptor,
                                             const FeatureTable* external);

/// Retrieval engines keyed by proposal source. Unless `separate` is set,
/// every source is served by `merged`.
struct Engines {
    ReferenceDB merged;
    ReferenceDB grid;
    ReferenceDB external;
    bool separate = false;

    const ReferenceDB& for_source(ProposalSource s) const noexcept {
        if (!separate) return merged;
        return s == ProposalSource::grid ? grid : external;
    }
};

Engines make_engines(ReferenceDB db, bool separate);

struct ProposalOutcome {
    Proposal proposal;
    GroundTruthRank rank;
    double score = 0.0;  // min L2 distance to the gt image's subimages
};

struct QbbRecord {
    BBox box;
    bool original = false;
    std::uint32_t coverers = 0;  // N
    std::vector<std::optional<double>> fused;  // indexed by FusionMethod
    std::vector<std::optional<double>> loc;    // indexed by FusionMethod
};

struct QueryDetection {
    std::string query_image_id;
    std::int32_t width = 0;
    std::int32_t height = 0;
    std::vector<ProposalOutcome> proposals;
    std::vector<LoCMap> maps;  // one per requested method, request order
    std::vector<QbbRecord> qbbs;  // closure regions of the query proposals
};

std::uint64_t query_seed(std::uint64_t seed, const std::string& query_image_id) noexcept;

/// Proposals -> features -> rankings -> gt ranks -> fusion -> LoC maps ->
/// per-qBB scores, for one query image.
QueryDetection detect_query(const std::string& query_image_id, const Raster& query,
                            std::span<const Proposal> proposals, std::span<const FeatureVector> features,
                            const std::string& gt_ref_image_id, const Engines& engines,
                            std::span<const FusionMethod> methods, std::uint64_t seed,
                            StageTimings* timings = nullptr);

// ---------------------------------------------------------------------------
// Commands. Each returns the number of failed items (0 on full success) and
// throws only for failures that stop the whole command.
// ---------------------------------------------------------------------------

struct CommandResult {
    std::size_t failures = 0;
    std::vector<std::string> messages;
    StageTimings timings;
};

CommandResult cmd_index(const PipelineConfig& cfg);
CommandResult cmd_detect(const PipelineConfig& cfg);
CommandResult cmd_eval(const PipelineConfig& cfg, MethodReport* report_out = nullptr,
                       const std::function<double(double)>& score_transform = {});
/// Generates the synthetic dataset into cfg.out_dir and writes a ready
/// pipeline config (pipeline.json) next to it.
CommandResult cmd_synth(const PipelineConfig& cfg);

/// Reads <detect_dir>/detections.jsonl.
std::vector<SampleDetections> read_detections(const std::filesystem::path& path,
                                              std::span<const TestSample> manifest,
                                              std::vector<std::string>& missing,
                                              std::vector<std::string>& failed);

}  // namespace lcd
