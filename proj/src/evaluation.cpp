#include "lcd/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "lcd/error.hpp"

namespace lcd {

std::string_view to_string(Polarity polarity) noexcept {
    return polarity == Polarity::positive ? "positive" : "negative";
}

Polarity parse_polarity(std::string_view text) {
    if (text == "positive") return Polarity::positive;
    if (text == "negative") return Polarity::negative;
    throw Error(ErrorKind::format, "unknown polarity '" + std::string(text) + "'");
}

std::string_view to_string(Label label) noexcept {
    switch (label) {
        case Label::change: return "change";
        case Label::no_change: return "no_change";
        case Label::excluded: return "excluded";
    }
    return "unknown";
}

void TestSample::validate() const {
    if (polarity == Polarity::positive && gt_change_boxes.empty()) {
        throw Error(ErrorKind::invalid_input, query_image_id + ": positive sample without change boxes");
    }
    if (polarity == Polarity::negative && !gt_change_boxes.empty()) {
        throw Error(ErrorKind::invalid_input, query_image_id + ": negative sample with change boxes");
    }
    for (const auto& b : gt_change_boxes) {
        if (!b.valid()) throw Error(ErrorKind::invalid_input, query_image_id + ": empty change box");
    }
}

void DifficultyConfig::validate() const {
    for (const auto* iv : {&roc_pos, &roc_neg, &sob_pos, &sob_neg}) {
        if (!(0.0 <= iv->lo && iv->lo <= iv->hi && iv->hi <= 1.0)) {
            throw Error(ErrorKind::invalid_input,
                        fmt::format("difficulty interval [{}, {}] must satisfy 0 <= min <= max <= 1",
                                    iv->lo, iv->hi));
        }
    }
    if (!(roc_neg.hi < roc_pos.lo)) {
        throw Error(ErrorKind::invalid_input, "RoC- max must stay below RoC+ min");
    }
}

double roc(const BBox& box, std::span<const BBox> gt_boxes) {
    if (!box.valid()) throw Error(ErrorKind::invalid_input, "RoC of an empty box");
    std::vector<BBox> clipped;
    for (const auto& g : gt_boxes) {
        if (auto r = intersect(box, g)) clipped.push_back(*r);
    }
    if (clipped.empty()) return 0.0;

    // Union area by coordinate compression.
    std::vector<std::int32_t> xs, ys;
    for (const auto& c : clipped) {
        xs.insert(xs.end(), {c.x0, c.x1});
        ys.insert(ys.end(), {c.y0, c.y1});
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    std::int64_t covered = 0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
            const bool hit = std::any_of(clipped.begin(), clipped.end(), [&](const BBox& c) {
                return c.x0 <= xs[i] && xs[i + 1] <= c.x1 && c.y0 <= ys[j] && ys[j + 1] <= c.y1;
            });
            if (hit) covered += static_cast<std::int64_t>(xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
        }
    }
    return static_cast<double>(covered) / static_cast<double>(box.area());
}

double sob(const BBox& box, std::int32_t width, std::int32_t height) {
    if (!box.within(width, height)) throw Error(ErrorKind::invalid_input, "SoB box outside the frame");
    return static_cast<double>(box.area()) /
           (static_cast<double>(width) * static_cast<double>(height));
}

Label label_qbb(double roc_value, double sob_value, Polarity polarity, const DifficultyConfig& cfg) {
    if (polarity == Polarity::positive && cfg.roc_pos.contains(roc_value) &&
        cfg.sob_pos.contains(sob_value)) {
        return Label::change;
    }
    if (cfg.roc_neg.contains(roc_value) && cfg.sob_neg.contains(sob_value)) return Label::no_change;
    return Label::excluded;
}

double ap_101(std::span<const ScoredSample> scored) {
    const auto positives =
        static_cast<std::int64_t>(std::count_if(scored.begin(), scored.end(),
                                                [](const ScoredSample& s) { return s.is_change; }));
    if (positives == 0) throw Error(ErrorKind::undefined_metric, "AP is undefined without positives");

    std::vector<std::size_t> order(scored.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scored[a].score > scored[b].score;
    });

    // best[j] = max precision over cutoffs whose recall >= j/100. Walk the
    // cutoffs once, then take a suffix maximum over recall levels.
    std::array<double, 101> best{};
    std::int64_t tp = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (scored[order[i]].is_change) ++tp;
        const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
        // Largest j with j/100 <= tp/positives.
        const auto j = static_cast<std::size_t>((tp * 100) / positives);
        best[j] = std::max(best[j], precision);
    }
    double running = 0.0;
    double sum = 0.0;
    for (std::size_t j = 101; j-- > 0;) {
        running = std::max(running, best[j]);
        sum += running;
    }
    return sum / 101.0;
}

std::string MethodReport::to_csv() const {
    std::string out = "method";
    for (double c : roc_neg_max) out += fmt::format(",{:.2f}", c);
    out += '\n';
    for (std::size_t m = 0; m < methods.size(); ++m) {
        out += to_string(methods[m]);
        for (double v : ap[m]) out += fmt::format(",{:.2f}", v);
        out += '\n';
    }
    return out;
}

MethodReport evaluate_methods(std::span<const SampleDetections> samples,
                              std::span<const FusionMethod> methods, const EvalOptions& options) {
    if (methods.empty()) throw Error(ErrorKind::invalid_input, "no fusion methods to evaluate");
    if (options.roc_neg_max.empty()) throw Error(ErrorKind::invalid_input, "empty RoC- max sweep");

    // roc/sob do not depend on the sweep; compute once per qBB.
    struct Geometry {
        double roc;
        double sob;
        Polarity polarity;
    };
    std::vector<Geometry> geometry;
    for (const auto& s : samples) {
        try {
            s.sample.validate();
            for (const auto& q : s.qbbs) {
                geometry.push_back({roc(q.box, s.sample.gt_change_boxes), sob(q.box, s.width, s.height),
                                    s.sample.polarity});
            }
        } catch (const Error& e) {
            throw Error(e.kind(), "sample " + s.sample.query_image_id + ": " + e.what());
        }
    }

    MethodReport report;
    report.methods.assign(methods.begin(), methods.end());
    report.roc_neg_max = options.roc_neg_max;
    report.ap.assign(methods.size(), std::vector<double>(options.roc_neg_max.size(), 0.0));

    for (std::size_t c = 0; c < options.roc_neg_max.size(); ++c) {
        DifficultyConfig cfg = options.difficulty;
        cfg.roc_neg.hi = options.roc_neg_max[c];
        cfg.validate();

        std::vector<Label> labels;
        labels.reserve(geometry.size());
        std::size_t npos = 0, nneg = 0;
        for (const auto& g : geometry) {
            labels.push_back(label_qbb(g.roc, g.sob, g.polarity, cfg));
            npos += labels.back() == Label::change;
            nneg += labels.back() == Label::no_change;
        }
        report.positives.push_back(npos);
        report.negatives.push_back(nneg);

        for (std::size_t m = 0; m < methods.size(); ++m) {
            std::vector<ScoredSample> scored;
            std::size_t flat = 0;
            for (const auto& s : samples) {
                for (const auto& q : s.qbbs) {
                    const Label label = labels[flat++];
                    if (label == Label::excluded) continue;
                    auto score = q.score(methods[m]);
                    if (!score) {
                        throw Error(ErrorKind::invalid_input,
                                    "sample " + s.sample.query_image_id + ": no " +
                                        std::string(to_string(methods[m])) + " score for a qBB");
                    }
                    const double v = options.score_transform ? options.score_transform(*score) : *score;
                    scored.push_back({v, label == Label::change});
                }
            }
            try {
                report.ap[m][c] = ap_101(scored);
            } catch (const Error& e) {
                throw Error(e.kind(), fmt::format("{} at RoC- max {:.2f}: {}", to_string(methods[m]),
                                                  options.roc_neg_max[c], e.what()));
            }
        }
    }
    return report;
}

}  // namespace lcd
