// lcd: detection-by-localization change detection pipeline.
//
//   lcd synth  --out data/                      synthetic benchmark + pipeline.json
//   lcd index  --config data/pipeline.json      reference database
//   lcd detect --config data/pipeline.json      LoC maps + per-qBB records
//   lcd eval   --config data/pipeline.json      AP table (report.csv)
//
// Exit status: 0 success, 1 some samples failed, 2 usage or config error,
// 3 any other fatal error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lcd/error.hpp"
#include "lcd/pipeline.hpp"

namespace {

struct Options {
    std::string config;
    std::vector<std::string> methods;
    std::optional<double> roc_neg_max;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::uint32_t> workers;
    bool quiet = false;
};

lcd::PipelineConfig resolve_config(const Options& opt, bool config_required) {
    lcd::PipelineConfig cfg;
    if (!opt.config.empty()) {
        cfg = lcd::load_config(opt.config);
    } else if (config_required) {
        throw lcd::Error(lcd::ErrorKind::invalid_input, "--config is required");
    }
    if (!opt.methods.empty()) {
        cfg.methods.clear();
        for (const auto& m : opt.methods) cfg.methods.push_back(lcd::parse_fusion_method(m));
    }
    if (opt.roc_neg_max) cfg.roc_neg_max = {*opt.roc_neg_max};
    if (opt.seed) {
        cfg.seed = *opt.seed;
        cfg.synth.seed = *opt.seed;
    }
    if (!opt.out.empty()) cfg.out_dir = opt.out;
    if (opt.workers) cfg.workers = *opt.workers;
    cfg.validate();
    return cfg;
}

void print_timings(const lcd::StageTimings& t) {
    fmt::print(stderr,
               "timing: proposals {:.1f} ms, features {:.1f} ms, retrieval {:.1f} ms, fusion {:.1f} ms, io {:.1f} ms\n",
               t.proposals_ms, t.features_ms, t.retrieval_ms, t.fusion_ms, t.io_ms);
}

int report(const lcd::CommandResult& r, bool quiet) {
    for (const auto& m : r.messages) {
        if (!quiet || r.failures) fmt::print(stderr, "{}\n", m);
    }
    if (!quiet) print_timings(r.timings);
    return r.failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Object-level change detection by self-localization rank fusion"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub, bool with_methods) {
        sub->add_option("--config", opt.config, "Pipeline config (JSON)");
        sub->add_option("--seed", opt.seed, "Seed for capped fusion draws / synthetic generation");
        sub->add_option("--out", opt.out, "Output directory (overrides config out_dir)");
        sub->add_option("--workers", opt.workers, "Worker threads (0 = all cores)");
        sub->add_flag("-q,--quiet", opt.quiet, "Only print failures");
        if (with_methods) {
            sub->add_option("--method", opt.methods, "Fusion method (repeatable)")
                ->check(CLI::IsMember({"rank_fusion", "rank_fusion_cap2", "rank_fusion_cap3", "rank_no_fusion",
                                       "score_max", "score_sum"}));
        }
    };

    auto* index = app.add_subcommand("index", "Build the reference-subimage database");
    add_common(index, false);
    auto* detect = app.add_subcommand("detect", "Compute LoC maps and per-qBB scores for every query");
    add_common(detect, true);
    auto* eval = app.add_subcommand("eval", "Evaluate detections as an AP table");
    add_common(eval, true);
    eval->add_option("--roc-neg-max", opt.roc_neg_max, "Single RoC- max column instead of the sweep")
        ->check(CLI::Range(0.0, 1.0));
    auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark");
    add_common(synth, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Help and version requests exit 0; every other parse error is a usage error.
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (index->parsed()) return report(lcd::cmd_index(resolve_config(opt, true)), opt.quiet);
        if (detect->parsed()) return report(lcd::cmd_detect(resolve_config(opt, true)), opt.quiet);
        if (eval->parsed()) {
            const auto cfg = resolve_config(opt, true);
            lcd::MethodReport table;
            const int rc = report(lcd::cmd_eval(cfg, &table), opt.quiet);
            std::cout << table.to_csv();
            return rc;
        }
        if (synth->parsed()) {
            auto cfg = resolve_config(opt, false);
            if (opt.out.empty() && opt.config.empty()) cfg.out_dir = "synth";
            return report(lcd::cmd_synth(cfg), opt.quiet);
        }
    } catch (const lcd::Error& e) {
        fmt::print(stderr, "lcd: {}: {}\n", lcd::to_string(e.kind()), e.what());
        return e.kind() == lcd::ErrorKind::invalid_input ? 2 : 3;
    } catch (const std::exception& e) {
        fmt::print(stderr, "lcd: {}\n", e.what());
        return 3;
    }
    return 2;
}
