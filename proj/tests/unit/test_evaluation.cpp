#include <catch_amalgamated.hpp>

#include "lcd/error.hpp"
#include "lcd/evaluation.hpp"
#include "lcd/rng.hpp"
#include "oracles.hpp"

using namespace lcd;
using Catch::Matchers::WithinAbs;

TEST_CASE("roc uses the union of gt boxes") {
    BBox box{0, 0, 10, 10};
    CHECK(roc(box, std::vector<BBox>{{0, 0, 10, 9}}) == 0.9);
    CHECK(roc(box, std::vector<BBox>{{20, 20, 30, 30}}) == 0.0);
    CHECK(roc(box, std::vector<BBox>{}) == 0.0);
    CHECK(roc(box, std::vector<BBox>{{0, 0, 5, 10}, {5, 0, 10, 10}}) == 1.0);
    CHECK(roc(box, std::vector<BBox>{{0, 0, 10, 10}, {0, 0, 10, 10}}) == 1.0);
    CHECK(roc(box, std::vector<BBox>{{0, 0, 6, 10}, {4, 0, 10, 5}}) == 0.8);
}

TEST_CASE("roc agrees with per-pixel counting") {
    SplitMix64 rng(21);
    for (int t = 0; t < 300; ++t) {
        auto rbox = [&] {
            const int x0 = static_cast<int>(rng.between(0, 18)), y0 = static_cast<int>(rng.between(0, 18));
            return BBox{x0, y0, static_cast<int>(rng.between(x0 + 1, 20)), static_cast<int>(rng.between(y0 + 1, 20))};
        };
        const BBox box = rbox();
        std::vector<BBox> gts(static_cast<std::size_t>(rng.between(0, 4)));
        for (auto& g : gts) g = rbox();
        std::int64_t hit = 0;
        for (int y = box.y0; y < box.y1; ++y) {
            for (int x = box.x0; x < box.x1; ++x) {
                hit += std::any_of(gts.begin(), gts.end(), [&](const BBox& g) { return g.contains(x, y); });
            }
        }
        CHECK(roc(box, gts) == static_cast<double>(hit) / static_cast<double>(box.area()));
        // Enlarging a gt box never lowers RoC.
        if (!gts.empty()) {
            auto bigger = gts;
            bigger[0] = {0, 0, 20, bigger[0].y1};
            CHECK(roc(box, bigger) >= roc(box, gts));
        }
    }
}

TEST_CASE("sob") {
    CHECK(sob({0, 0, 10, 10}, 20, 20) == 0.25);
    CHECK(sob({0, 0, 20, 20}, 20, 20) == 1.0);
    CHECK(sob({100, 100, 200, 200}, 300, 300) == 1.0 / 9.0);
    CHECK_THROWS_AS(sob({0, 0, 21, 20}, 20, 20), Error);
}

TEST_CASE("label_qbb with default intervals") {
    DifficultyConfig d;
    CHECK(label_qbb(0.95, 0.3, Polarity::positive, d) == Label::change);
    CHECK(label_qbb(0.02, 0.5, Polarity::positive, d) == Label::no_change);
    CHECK(label_qbb(0.02, 0.5, Polarity::negative, d) == Label::no_change);
    CHECK(label_qbb(0.5, 0.3, Polarity::positive, d) == Label::excluded);
    CHECK(label_qbb(0.95, 0.5, Polarity::positive, d) == Label::excluded);  // too big for a change qBB
    CHECK(label_qbb(0.0, 0.3, Polarity::negative, d) == Label::excluded);   // too small for a no-change qBB
    CHECK(label_qbb(0.95, 0.3, Polarity::negative, d) == Label::excluded);
    DifficultyConfig bad;
    bad.roc_neg = {0.0, 0.95};
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("ap_101 hand cases") {
    std::vector<ScoredSample> hand = {{0.9, true}, {0.8, false}, {0.7, true}};
    const double expect = (51.0 * 1.0 + 50.0 * (2.0 / 3.0)) / 101.0;
    CHECK_THAT(ap_101(hand), WithinAbs(expect, 1e-15));
    CHECK_THAT(oracle::ap_101(hand), WithinAbs(expect, 1e-15));
    CHECK_THAT(expect, WithinAbs(0.8350, 5e-5));

    std::vector<ScoredSample> all_pos = {{0.1, true}, {0.5, true}};
    CHECK(ap_101(all_pos) == 1.0);
    std::vector<ScoredSample> flipped = {{0.9, false}, {0.1, true}};
    CHECK(ap_101(flipped) == 0.5);
    std::vector<ScoredSample> none = {{0.9, false}};
    CHECK_THROWS_AS(ap_101(none), Error);
    // Ties keep input order.
    std::vector<ScoredSample> tie_neg_first = {{0.5, false}, {0.5, true}};
    CHECK(ap_101(tie_neg_first) == 0.5);
    std::vector<ScoredSample> tie_pos_first = {{0.5, true}, {0.5, false}};
    CHECK(ap_101(tie_pos_first) == 1.0);
}

TEST_CASE("ap_101 matches the exhaustive oracle") {
    SplitMix64 rng(31);
    for (int t = 0; t < 500; ++t) {
        const auto n = static_cast<std::size_t>(rng.between(1, 20));
        std::vector<ScoredSample> s(n);
        for (auto& x : s) x = {static_cast<double>(rng.below(8)) / 8.0, rng.below(2) == 1};
        s[rng.below(n)].is_change = true;
        const double ap = ap_101(s);
        CHECK_THAT(ap, WithinAbs(oracle::ap_101(s), 1e-9));
        CHECK(ap >= 0.0);
        CHECK(ap <= 1.0);
        auto cubed = s;
        for (auto& x : cubed) x.score = x.score * x.score * x.score;
        CHECK(ap_101(cubed) == ap);
    }
}

namespace {

SampleDetections sample(const std::string& id, Polarity pol, std::vector<BBox> gt,
                        std::vector<std::pair<BBox, double>> qbbs) {
    SampleDetections d;
    d.sample = {id, "ref_" + id, pol, std::move(gt)};
    d.width = 100;
    d.height = 100;
    for (auto& [box, score] : qbbs) {
        QbbDetection q{box, std::vector<std::optional<double>>(kAllMethods.size())};
        q.loc[static_cast<std::size_t>(FusionMethod::rank_fusion)] = score;
        q.loc[static_cast<std::size_t>(FusionMethod::score_max)] = 1.0 - score;
        d.qbbs.push_back(std::move(q));
    }
    return d;
}

}  // namespace

TEST_CASE("evaluate_methods builds a method x sweep table") {
    std::vector<SampleDetections> samples = {
        sample("a", Polarity::positive, {{0, 0, 20, 20}},
               {{{0, 0, 20, 20}, 0.9}, {{0, 30, 100, 100}, 0.2}, {{0, 18, 100, 100}, 0.1}}),
        sample("b", Polarity::negative, {}, {{{0, 0, 100, 100}, 0.3}, {{10, 10, 30, 30}, 0.8}}),
    };
    std::vector<FusionMethod> methods = {FusionMethod::rank_fusion, FusionMethod::score_max};
    EvalOptions opt;
    auto rep = evaluate_methods(samples, methods, opt);
    REQUIRE(rep.ap.size() == 2);
    REQUIRE(rep.ap[0].size() == 5);
    // (0,18)-(100,100) overlaps the gt by 2 rows of 20 px: RoC 40/8200 ~ 0.0049,
    // a no-change qBB in every column. Positives: the gt box only.
    for (std::size_t c = 0; c < 5; ++c) {
        CHECK(rep.positives[c] == 1);
        CHECK(rep.negatives[c] == 3);
        CHECK(rep.ap[0][c] == 1.0);
        CHECK(rep.ap[1][c] == 0.25);
    }
    CHECK(rep.to_csv() ==
          "method,0.01,0.02,0.03,0.04,0.05\n"
          "rank_fusion,1.00,1.00,1.00,1.00,1.00\n"
          "score_max,0.25,0.25,0.25,0.25,0.25\n");

    opt.score_transform = [](double x) { return x * x * x; };
    CHECK(evaluate_methods(samples, methods, opt).to_csv() == rep.to_csv());

    std::vector<FusionMethod> missing = {FusionMethod::score_sum};
    CHECK_THROWS_AS(evaluate_methods(samples, missing, {}), Error);
    CHECK_THROWS_AS(evaluate_methods(samples, std::vector<FusionMethod>{}, {}), Error);
}

TEST_CASE("raising RoC- max never shrinks the negative set") {
    SplitMix64 rng(41);
    std::vector<SampleDetections> samples;
    for (int i = 0; i < 30; ++i) {
        std::vector<std::pair<BBox, double>> q;
        for (int k = 0; k < 6; ++k) {
            const int x0 = static_cast<int>(rng.between(0, 60)), y0 = static_cast<int>(rng.between(0, 60));
            q.push_back({{x0, y0, static_cast<int>(rng.between(x0 + 30, 100)), static_cast<int>(rng.between(y0 + 30, 100))},
                         static_cast<double>(rng.below(100)) / 100.0});
        }
        q.push_back({{40, 40, 50, 50}, 0.5});
        samples.push_back(sample("s" + std::to_string(i), Polarity::positive, {{40, 40, 51, 51}}, q));
    }
    std::vector<FusionMethod> methods = {FusionMethod::rank_fusion};
    auto rep = evaluate_methods(samples, methods, {});
    for (std::size_t c = 1; c < rep.negatives.size(); ++c) CHECK(rep.negatives[c] >= rep.negatives[c - 1]);
}

TEST_CASE("sample validation") {
    TestSample bad{"q", "r", Polarity::positive, {}};
    CHECK_THROWS_AS(bad.validate(), Error);
    TestSample bad2{"q", "r", Polarity::negative, {{0, 0, 1, 1}}};
    CHECK_THROWS_AS(bad2.validate(), Error);
    CHECK(parse_polarity("positive") == Polarity::positive);
    CHECK_THROWS_AS(parse_polarity("maybe"), Error);
}
