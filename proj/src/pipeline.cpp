#include "lcd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lcd/error.hpp"
#include "lcd/rng.hpp"

namespace lcd {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

Interval interval_from(const json& j, const char* key) {
    if (!j.is_array() || j.size() != 2) {
        throw Error(ErrorKind::format, std::string("config: ") + key + " must be [min, max]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw Error(ErrorKind::format, fmt::format("config: unknown key '{}' in {}", key, where));
        }
    }
}

void parse_synth(const json& j, SynthConfig& s) {
    check_keys(j,
               {"seed", "image_size", "n_pairs", "change_rate", "jitter_max", "object_size_range",
                "texture_complexity", "brightness_max", "static_shapes_range", "proposal_noise",
                "distractor_proposals"},
               "synth");
    s.seed = j.value("seed", s.seed);
    s.image_size = j.value("image_size", s.image_size);
    s.n_pairs = j.value("n_pairs", s.n_pairs);
    s.change_rate = j.value("change_rate", s.change_rate);
    s.jitter_max = j.value("jitter_max", s.jitter_max);
    if (j.contains("object_size_range")) {
        s.object_size_min = j["object_size_range"].at(0).get<std::int32_t>();
        s.object_size_max = j["object_size_range"].at(1).get<std::int32_t>();
    }
    if (j.contains("static_shapes_range")) {
        s.static_shapes_min = j["static_shapes_range"].at(0).get<std::int32_t>();
        s.static_shapes_max = j["static_shapes_range"].at(1).get<std::int32_t>();
    }
    s.texture_complexity = j.value("texture_complexity", s.texture_complexity);
    s.brightness_max = j.value("brightness_max", s.brightness_max);
    s.proposal_noise = j.value("proposal_noise", s.proposal_noise);
    s.distractor_proposals = j.value("distractor_proposals", s.distractor_proposals);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Callers write results
// into per-index slots, so completion order never affects output.
template <typename Fn>
void parallel_for(std::size_t n, std::uint32_t workers, Fn&& fn) {
    std::uint32_t threads = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<std::uint32_t>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::uint32_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
}

std::vector<std::string> reference_ids(const PipelineConfig& cfg, std::span<const TestSample> samples) {
    std::set<std::string> ids(cfg.extra_reference_ids.begin(), cfg.extra_reference_ids.end());
    for (const auto& s : samples) ids.insert(s.gt_ref_image_id);
    return {ids.begin(), ids.end()};
}

std::filesystem::path image_path(const PipelineConfig& cfg, const std::string& id) {
    return cfg.image_dir / (id + ".ppm");
}

json optional_map(const std::vector<std::optional<double>>& values) {
    json j = json::object();
    for (std::size_t m = 0; m < values.size(); ++m) {
        if (values[m]) j[std::string(to_string(static_cast<FusionMethod>(m)))] = *values[m];
    }
    return j;
}

std::vector<std::optional<double>> optional_from(const json& j) {
    std::vector<std::optional<double>> out(kAllMethods.size());
    for (const auto& [name, value] : j.items()) {
        out[static_cast<std::size_t>(parse_fusion_method(name))] = value.get<double>();
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
    if (methods.empty()) throw Error(ErrorKind::invalid_input, "at least one fusion method is required");
    std::set<FusionMethod> unique(methods.begin(), methods.end());
    if (unique.size() != methods.size()) throw Error(ErrorKind::invalid_input, "duplicate fusion method");
    descriptor.validate();
    difficulty.validate();
    if (roc_neg_max.empty()) throw Error(ErrorKind::invalid_input, "empty RoC- max sweep");
    for (double v : roc_neg_max) {
        DifficultyConfig d = difficulty;
        d.roc_neg.hi = v;
        d.validate();
    }
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
        throw Error(ErrorKind::invalid_input, "confidence_threshold must lie in [0, 1]");
    }
    synth.validate();
}

PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    PipelineConfig cfg;
    try {
        const json j = json::parse(json_text);
        check_keys(j,
                   {"manifest", "image_dir", "out_dir", "proposals_file", "external_features",
                    "reference_ids", "grid_proposals", "confidence_threshold", "descriptor",
                    "separate_engines", "methods", "difficulty", "roc_neg_max_sweep", "seed", "workers",
                    "export_maps", "synth"},
                   "top level");
        if (j.contains("manifest")) cfg.manifest = resolve(base_dir, j["manifest"].get<std::string>());
        if (j.contains("image_dir")) cfg.image_dir = resolve(base_dir, j["image_dir"].get<std::string>());
        cfg.out_dir = resolve(base_dir, j.value("out_dir", std::string("out")));
        if (j.contains("proposals_file")) {
            cfg.proposals_file = resolve(base_dir, j["proposals_file"].get<std::string>());
        }
        if (j.contains("external_features")) {
            cfg.external_features = resolve(base_dir, j["external_features"].get<std::string>());
        }
        cfg.extra_reference_ids = j.value("reference_ids", std::vector<std::string>{});
        cfg.grid_proposals = j.value("grid_proposals", cfg.grid_proposals);
        cfg.confidence_threshold = j.value("confidence_threshold", cfg.confidence_threshold);
        if (j.contains("descriptor")) {
            const auto& d = j["descriptor"];
            check_keys(d, {"canonical_size", "builtin_grid"}, "descriptor");
            cfg.descriptor.canonical_size = d.value("canonical_size", cfg.descriptor.canonical_size);
            cfg.descriptor.builtin_grid = d.value("builtin_grid", cfg.descriptor.builtin_grid);
        }
        cfg.separate_engines = j.value("separate_engines", cfg.separate_engines);
        if (j.contains("methods")) {
            cfg.methods.clear();
            for (const auto& m : j["methods"]) cfg.methods.push_back(parse_fusion_method(m.get<std::string>()));
        }
        if (j.contains("difficulty")) {
            const auto& d = j["difficulty"];
            check_keys(d, {"roc_pos", "roc_neg", "sob_pos", "sob_neg"}, "difficulty");
            if (d.contains("roc_pos")) cfg.difficulty.roc_pos = interval_from(d["roc_pos"], "roc_pos");
            if (d.contains("roc_neg")) cfg.difficulty.roc_neg = interval_from(d["roc_neg"], "roc_neg");
            if (d.contains("sob_pos")) cfg.difficulty.sob_pos = interval_from(d["sob_pos"], "sob_pos");
            if (d.contains("sob_neg")) cfg.difficulty.sob_neg = interval_from(d["sob_neg"], "sob_neg");
        }
        cfg.roc_neg_max = j.value("roc_neg_max_sweep", cfg.roc_neg_max);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.workers = j.value("workers", cfg.workers);
        cfg.export_maps = j.value("export_maps", cfg.export_maps);
        if (j.contains("synth")) parse_synth(j["synth"], cfg.synth);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::format, std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str(), path.parent_path());
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Building blocks

std::vector<Proposal> image_proposals(const std::string& image_id, std::int32_t width, std::int32_t height,
                                      bool grid, const ProposalTable* external) {
    std::vector<Proposal> out;
    if (grid) out = five_box_proposals(width, height);
    if (external) {
        if (auto it = external->find(image_id); it != external->end()) {
            for (const auto& p : it->second) {
                if (!p.box.within(width, height)) {
                    throw Error(ErrorKind::format, "proposal for '" + image_id + "' lies outside the " +
                                                       std::to_string(width) + "x" + std::to_string(height) +
                                                       " frame");
                }
                out.push_back(p);
            }
        }
    }
    if (out.empty()) throw Error(ErrorKind::invalid_input, "no proposals for image '" + image_id + "'");
    return out;
}

std::vector<FeatureVector> proposal_features(const std::string& image_id, const Raster& image,
                                             std::span<const Proposal> proposals,
                                             const DescriptorConfig& descriptor,
                                             const FeatureTable* external) {
    std::vector<FeatureVector> out;
    out.reserve(proposals.size());
    for (const auto& p : proposals) {
        if (external) {
            const auto* f = external->find(image_id, p.box);
            if (!f) {
                throw Error(ErrorKind::format,
                            fmt::format("no ingested feature for '{}' box [{},{},{},{}]", image_id, p.box.x0,
                                        p.box.y0, p.box.x1, p.box.y1));
            }
            out.push_back(*f);
        } else {
            out.push_back(extract_builtin(image, p.box, descriptor));
        }
    }
    return out;
}

Engines make_engines(ReferenceDB db, bool separate) {
    Engines e;
    e.separate = separate;
    if (separate) {
        e.grid = db.subset(ProposalSource::grid);
        e.external = db.subset(ProposalSource::external);
    }
    e.merged = std::move(db);
    return e;
}

std::uint64_t query_seed(std::uint64_t seed, const std::string& query_image_id) noexcept {
    return mix64(seed, hash_string(query_image_id));
}

QueryDetection detect_query(const std::string& query_image_id, const Raster& query,
                            std::span<const Proposal> proposals, std::span<const FeatureVector> features,
                            const std::string& gt_ref_image_id, const Engines& engines,
                            std::span<const FusionMethod> methods, std::uint64_t seed,
                            StageTimings* timings) {
    if (proposals.size() != features.size()) {
        throw Error(ErrorKind::invalid_input, "proposal and feature counts differ");
    }
    QueryDetection det;
    det.query_image_id = query_image_id;
    det.width = query.width();
    det.height = query.height();

    auto t0 = Clock::now();
    std::vector<ProposalEvidence> evidence;
    evidence.reserve(proposals.size());
    for (std::size_t k = 0; k < proposals.size(); ++k) {
        const ReferenceDB& db = engines.for_source(proposals[k].source);
        if (db.size() == 0) {
            throw Error(ErrorKind::missing_ground_truth,
                        fmt::format("no {} reference engine", to_string(proposals[k].source)));
        }
        const RankedList list = rank(features[k], db);
        const GroundTruthRank gt = gt_rank(list, gt_ref_image_id, db);
        // The list is sorted, so the first gt entry is also the closest one.
        const double score = list.entries[gt.raw - 1].distance;
        det.proposals.push_back({proposals[k], gt, score});
        evidence.push_back({proposals[k].box, gt.normalized, score});
    }
    if (timings) timings->retrieval_ms += ms_since(t0);

    t0 = Clock::now();
    const std::uint64_t qseed = query_seed(seed, query_image_id);
    for (auto m : methods) det.maps.push_back(build_loc_map(det.width, det.height, evidence, m, qseed));

    std::set<BBox> originals;
    for (const auto& p : proposals) originals.insert(p.box);
    const RegionPartition partition = intersection_closure(proposals);
    det.qbbs.reserve(partition.regions.size());
    for (const auto& region : partition.regions) {
        QbbRecord rec;
        rec.box = region.box;
        rec.original = originals.contains(region.box);
        rec.coverers = static_cast<std::uint32_t>(region.coverers.size());
        rec.fused.resize(kAllMethods.size());
        rec.loc.resize(kAllMethods.size());
        for (std::size_t i = 0; i < methods.size(); ++i) {
            const auto m = static_cast<std::size_t>(methods[i]);
            rec.fused[m] = fused_value(region.coverers, evidence, methods[i], qseed);
            rec.loc[m] = qbb_loc_score(det.maps[i], region.box);
        }
        det.qbbs.push_back(std::move(rec));
    }
    if (timings) timings->fusion_ms += ms_since(t0);
    return det;
}

// ---------------------------------------------------------------------------
// Commands

CommandResult cmd_index(const PipelineConfig& cfg) {
    CommandResult result;
    const auto samples = read_manifest(cfg.manifest);
    const auto ids = reference_ids(cfg, samples);
    if (ids.empty()) throw Error(ErrorKind::invalid_input, "no reference images to index");

    auto t0 = Clock::now();
    std::optional<ProposalTable> proposals;
    if (cfg.proposals_file) proposals = read_proposals_file(*cfg.proposals_file, cfg.confidence_threshold);
    std::optional<FeatureTable> features;
    if (cfg.external_features) features = load_external_features(*cfg.external_features);
    result.timings.io_ms += ms_since(t0);

    std::vector<std::vector<ReferenceSubimage>> per_image(ids.size());
    std::vector<std::string> errors(ids.size());
    parallel_for(ids.size(), cfg.workers, [&](std::size_t i) {
        try {
            const Raster image = read_ppm(image_path(cfg, ids[i]));
            const auto props = image_proposals(ids[i], image.width(), image.height(), cfg.grid_proposals,
                                               proposals ? &*proposals : nullptr);
            auto feats = proposal_features(ids[i], image, props, cfg.descriptor, features ? &*features : nullptr);
            for (std::size_t k = 0; k < props.size(); ++k) {
                per_image[i].push_back({ids[i], props[k].box, props[k].source, std::move(feats[k])});
            }
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!errors[i].empty()) {
            ++result.failures;
            result.messages.push_back("reference " + ids[i] + ": " + errors[i]);
        }
    }
    result.timings.features_ms += ms_since(t0);
    if (result.failures) return result;

    std::vector<ReferenceSubimage> all;
    for (auto& v : per_image) std::move(v.begin(), v.end(), std::back_inserter(all));
    const ReferenceDB db = build_db(std::move(all));
    save_db(db, cfg.db_dir());
    result.messages.push_back(fmt::format("indexed {} subimages from {} reference images into {}", db.size(),
                                          ids.size(), cfg.db_dir().string()));
    return result;
}

CommandResult cmd_detect(const PipelineConfig& cfg) {
    CommandResult result;
    auto t0 = Clock::now();
    const auto samples = read_manifest(cfg.manifest);
    const Engines engines = make_engines(load_db(cfg.db_dir()), cfg.separate_engines);
    std::optional<ProposalTable> proposals;
    if (cfg.proposals_file) proposals = read_proposals_file(*cfg.proposals_file, cfg.confidence_threshold);
    std::optional<FeatureTable> features;
    if (cfg.external_features) features = load_external_features(*cfg.external_features);
    if (features && features->dimension != engines.merged.dimension()) {
        throw Error(ErrorKind::format, "ingested feature dimension does not match the database");
    }
    result.timings.io_ms += ms_since(t0);

    const auto maps_dir = cfg.detect_dir() / "maps";
    std::vector<std::string> detection_lines(samples.size());
    std::vector<std::string> rank_lines(samples.size());
    std::vector<std::string> errors(samples.size());
    std::vector<StageTimings> timings(samples.size());

    parallel_for(samples.size(), cfg.workers, [&](std::size_t i) {
        const auto& s = samples[i];
        try {
            auto t = Clock::now();
            const Raster image = read_ppm(image_path(cfg, s.query_image_id));
            const auto props = image_proposals(s.query_image_id, image.width(), image.height(), cfg.grid_proposals,
                                               proposals ? &*proposals : nullptr);
            timings[i].proposals_ms += ms_since(t);
            t = Clock::now();
            const auto feats =
                proposal_features(s.query_image_id, image, props, cfg.descriptor, features ? &*features : nullptr);
            timings[i].features_ms += ms_since(t);

            const QueryDetection det = detect_query(s.query_image_id, image, props, feats, s.gt_ref_image_id,
                                                    engines, cfg.methods, cfg.seed, &timings[i]);
            t = Clock::now();
            if (cfg.export_maps) {
                for (const auto& map : det.maps) export_loc_map(map, maps_dir, s.query_image_id);
            }
            json qbbs = json::array();
            for (const auto& q : det.qbbs) {
                qbbs.push_back({{"box", {q.box.x0, q.box.y0, q.box.x1, q.box.y1}},
                                {"original", q.original},
                                {"n", q.coverers},
                                {"fused", optional_map(q.fused)},
                                {"loc", optional_map(q.loc)}});
            }
            detection_lines[i] = json{{"query_image_id", s.query_image_id},
                                      {"gt_ref_image_id", s.gt_ref_image_id},
                                      {"width", det.width},
                                      {"height", det.height},
                                      {"qbbs", std::move(qbbs)}}
                                     .dump();
            json ranks = json::array();
            for (const auto& p : det.proposals) {
                const auto& b = p.proposal.box;
                ranks.push_back({{"box", {b.x0, b.y0, b.x1, b.y1}},
                                 {"source", to_string(p.proposal.source)},
                                 {"raw_rank", p.rank.raw},
                                 {"list_length", p.rank.length},
                                 {"normalized_rank", p.rank.normalized},
                                 {"score", p.score}});
            }
            rank_lines[i] = json{{"query_image_id", s.query_image_id}, {"proposals", std::move(ranks)}}.dump();
            timings[i].io_ms += ms_since(t);
        } catch (const std::exception& e) {
            errors[i] = e.what();
            detection_lines[i] = json{{"query_image_id", s.query_image_id}, {"error", e.what()}}.dump();
            rank_lines[i] = detection_lines[i];
        }
    });

    std::string detections, ranks;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        detections += detection_lines[i] + '\n';
        ranks += rank_lines[i] + '\n';
        if (!errors[i].empty()) {
            ++result.failures;
            result.messages.push_back("sample " + samples[i].query_image_id + ": " + errors[i]);
        }
        result.timings.proposals_ms += timings[i].proposals_ms;
        result.timings.features_ms += timings[i].features_ms;
        result.timings.retrieval_ms += timings[i].retrieval_ms;
        result.timings.fusion_ms += timings[i].fusion_ms;
        result.timings.io_ms += timings[i].io_ms;
    }
    write_text(cfg.detect_dir() / "detections.jsonl", detections);
    write_text(cfg.detect_dir() / "ranks.jsonl", ranks);
    result.messages.push_back(fmt::format("detected {} of {} samples into {}", samples.size() - result.failures,
                                          samples.size(), cfg.detect_dir().string()));
    return result;
}

std::vector<SampleDetections> read_detections(const std::filesystem::path& path,
                                              std::span<const TestSample> manifest,
                                              std::vector<std::string>& missing,
                                              std::vector<std::string>& failed) {
    std::map<std::string, json> by_id;
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            auto id = j.at("query_image_id").get<std::string>();
            by_id[id] = std::move(j);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::format, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
    }

    std::vector<SampleDetections> out;
    for (const auto& s : manifest) {
        auto it = by_id.find(s.query_image_id);
        if (it == by_id.end()) {
            missing.push_back(s.query_image_id);
            continue;
        }
        const json& j = it->second;
        if (j.contains("error")) {
            failed.push_back(s.query_image_id);
            continue;
        }
        try {
            SampleDetections d;
            d.sample = s;
            d.width = j.at("width").get<std::int32_t>();
            d.height = j.at("height").get<std::int32_t>();
            for (const auto& q : j.at("qbbs")) {
                const auto& b = q.at("box");
                d.qbbs.push_back({{b.at(0).get<std::int32_t>(), b.at(1).get<std::int32_t>(),
                                   b.at(2).get<std::int32_t>(), b.at(3).get<std::int32_t>()},
                                  optional_from(q.at("loc"))});
            }
            out.push_back(std::move(d));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::format, path.string() + ": sample " + s.query_image_id + ": " + e.what());
        }
    }
    return out;
}

CommandResult cmd_eval(const PipelineConfig& cfg, MethodReport* report_out,
                       const std::function<double(double)>& score_transform) {
    cfg.validate();
    CommandResult result;
    const auto samples = read_manifest(cfg.manifest);
    std::vector<std::string> missing, failed;
    const auto detections = read_detections(cfg.detect_dir() / "detections.jsonl", samples, missing, failed);
    if (!missing.empty()) {
        std::string ids;
        for (const auto& m : missing) ids += (ids.empty() ? "" : ", ") + m;
        throw Error(ErrorKind::invalid_input, "missing detection records for samples: " + ids);
    }
    for (const auto& f : failed) {
        ++result.failures;
        result.messages.push_back("sample " + f + ": detection failed, excluded from evaluation");
    }

    EvalOptions options;
    options.difficulty = cfg.difficulty;
    options.roc_neg_max = cfg.roc_neg_max;
    options.score_transform = score_transform;
    MethodReport report = evaluate_methods(detections, cfg.methods, options);
    write_text(cfg.report_path(), report.to_csv());

    for (std::size_t c = 0; c < report.roc_neg_max.size(); ++c) {
        result.messages.push_back(fmt::format("RoC- max {:.2f}: {} change / {} no-change qBBs",
                                              report.roc_neg_max[c], report.positives[c], report.negatives[c]));
    }
    if (report_out) *report_out = std::move(report);
    return result;
}

CommandResult cmd_synth(const PipelineConfig& cfg) {
    CommandResult result;
    const auto samples = gen_dataset(cfg.synth, cfg.out_dir);
    const json pipeline = {
        {"manifest", "manifest.jsonl"},
        {"image_dir", "images"},
        {"proposals_file", "proposals.jsonl"},
        {"out_dir", "run"},
        {"seed", cfg.seed},
    };
    write_text(cfg.out_dir / "pipeline.json", pipeline.dump(2) + '\n');
    const auto positives = std::count_if(samples.begin(), samples.end(),
                                         [](const TestSample& s) { return s.polarity == Polarity::positive; });
    result.messages.push_back(fmt::format("generated {} pairs ({} positive) into {}", samples.size(), positives,
                                          cfg.out_dir.string()));
    return result;
}

}  // namespace lcd
