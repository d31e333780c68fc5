#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "lcd/error.hpp"
#include "lcd/retrieval.hpp"
#include "lcd/rng.hpp"
#include "test_util.hpp"

using namespace lcd;

namespace {

FeatureVector random_unit(SplitMix64& rng, std::size_t d) {
    std::vector<double> v(d);
    for (auto& x : v) x = static_cast<double>(rng.below(2001)) - 1000.0 + 0.5;
    return l2_normalize(std::span<const double>(v));
}

FeatureVector unit(std::initializer_list<double> v) {
    std::vector<double> tmp(v);
    return l2_normalize(std::span<const double>(tmp));
}

ReferenceDB random_db(SplitMix64& rng, std::size_t images, std::size_t per_image, std::size_t d) {
    std::vector<ReferenceSubimage> subs;
    for (std::size_t i = 0; i < images; ++i) {
        for (std::size_t k = 0; k < per_image; ++k) {
            subs.push_back({"img" + std::to_string(i), {0, 0, static_cast<int>(k) + 1, 1}, ProposalSource::grid,
                            random_unit(rng, d)});
        }
    }
    return build_db(std::move(subs));
}

}  // namespace

TEST_CASE("build_db orders by image id then input order") {
    std::vector<ReferenceSubimage> subs = {
        {"b", {0, 0, 1, 1}, ProposalSource::grid, unit({1, 0})},
        {"a", {0, 0, 2, 2}, ProposalSource::grid, unit({0, 1})},
        {"b", {0, 0, 3, 3}, ProposalSource::external, unit({1, 1})},
        {"a", {0, 0, 4, 4}, ProposalSource::external, unit({1, 2})},
    };
    auto db = build_db(subs);
    REQUIRE(db.size() == 4);
    CHECK(db.entries()[0].box == BBox{0, 0, 2, 2});
    CHECK(db.entries()[1].box == BBox{0, 0, 4, 4});
    CHECK(db.entries()[2].box == BBox{0, 0, 1, 1});
    CHECK(db.entries()[3].box == BBox{0, 0, 3, 3});
    for (std::uint32_t i = 0; i < 4; ++i) CHECK(db.entries()[i].entry_id == i);

    auto ext = db.subset(ProposalSource::external);
    REQUIRE(ext.size() == 2);
    CHECK(ext.entries()[1].entry_id == 1);
    CHECK(std::ranges::equal(ext.feature(1), db.feature(3)));

    CHECK_THROWS_AS(build_db({}), Error);
    subs.push_back({"c", {0, 0, 1, 1}, ProposalSource::grid, unit({1, 0, 0})});
    CHECK_THROWS_AS(build_db(subs), Error);
}

TEST_CASE("rank ties break by entry id") {
    std::vector<ReferenceSubimage> subs = {
        {"x", {0, 0, 1, 1}, ProposalSource::grid, unit({0, 1})},
        {"x", {0, 0, 2, 2}, ProposalSource::grid, unit({0, -1})},
        {"x", {0, 0, 3, 3}, ProposalSource::grid, unit({1, 0})},
    };
    auto db = build_db(subs);
    auto list = rank(unit({1, 0}), db);
    REQUIRE(list.entries.size() == 3);
    CHECK(list.entries[0].entry_id == 2);
    CHECK(list.entries[0].distance == 0.0);
    CHECK(list.entries[1].entry_id == 0);
    CHECK(list.entries[2].entry_id == 1);
    CHECK(list.entries[1].distance == list.entries[2].distance);

    CHECK_THROWS_AS(rank(unit({1, 0, 0}), db), Error);
}

TEST_CASE("rank matches a naive sort and is a permutation") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto db = random_db(rng, 6, 5, 8);
        auto q = random_unit(rng, 8);
        auto list = rank(q, db);
        std::vector<std::pair<double, std::uint32_t>> naive;
        for (std::uint32_t id = 0; id < db.size(); ++id) naive.push_back({l2_distance(q.values, db.feature(id)), id});
        std::sort(naive.begin(), naive.end());
        REQUIRE(list.entries.size() == naive.size());
        for (std::size_t i = 0; i < naive.size(); ++i) CHECK(list.entries[i].entry_id == naive[i].second);
    }
}

TEST_CASE("single entry db") {
    auto db = build_db({{"a", {0, 0, 1, 1}, ProposalSource::grid, unit({1, 0})}});
    auto list = rank(unit({0, 1}), db);
    REQUIRE(list.entries.size() == 1);
    auto g = gt_rank(list, "a", db);
    CHECK(g.raw == 1);
    CHECK(g.length == 1);
    CHECK(g.normalized == 1.0);
}

TEST_CASE("gt_rank finds the first entry of the gt image") {
    // Entries: P.0, P.1, Q.0 after sorting by image id. Query list order Q.0, P.1, P.0.
    std::vector<ReferenceSubimage> subs = {
        {"P", {0, 0, 1, 1}, ProposalSource::grid, unit({0, 0, 1})},
        {"P", {0, 0, 2, 2}, ProposalSource::grid, unit({0, 1, 0.2})},
        {"Q", {0, 0, 3, 3}, ProposalSource::grid, unit({1, 0, 0})},
    };
    auto db = build_db(subs);
    auto list = rank(unit({1, 0.5, 0}), db);
    REQUIRE(list.entries[0].entry_id == 2);
    REQUIRE(list.entries[1].entry_id == 1);
    auto p = gt_rank(list, "P", db);
    CHECK(p.raw == 2);
    CHECK(p.normalized == 2.0 / 3.0);
    CHECK(gt_rank(list, "Q", db).raw == 1);
    CHECK_THROWS_AS(gt_rank(list, "R", db), Error);
    CHECK(min_distance_to_image(unit({1, 0.5, 0}).values, "P", db) == list.entries[1].distance);
}

TEST_CASE("self-localization: a query found in the db ranks first") {
    SplitMix64 rng(3);
    auto db = random_db(rng, 10, 5, 16);
    for (std::uint32_t id = 0; id < db.size(); ++id) {
        auto f = db.feature(id);
        auto list = rank(f, db);
        CHECK(list.entries[0].entry_id == id);
        CHECK(gt_rank(list, db.entries()[id].image_id, db).raw == 1);
    }
}

TEST_CASE("retrieval order is invariant under a shared rotation") {
    SplitMix64 rng(5);
    auto db = random_db(rng, 4, 4, 6);
    auto q = random_unit(rng, 6);
    // Rotate the first two axes by the same angle everywhere.
    const double c = std::cos(0.7), s = std::sin(0.7);
    auto rot = [&](std::span<const float> v) {
        std::vector<double> out(v.begin(), v.end());
        out[0] = c * v[0] - s * v[1];
        out[1] = s * v[0] + c * v[1];
        return l2_normalize(std::span<const double>(out));
    };
    std::vector<ReferenceSubimage> subs;
    for (const auto& e : db.entries()) subs.push_back({e.image_id, e.box, e.source, rot(db.feature(e.entry_id))});
    auto rdb = build_db(subs);
    auto a = rank(q, db);
    auto b = rank(rot(q.values), rdb);
    for (std::size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i].entry_id == b.entries[i].entry_id);
}

TEST_CASE("db save and load round trip byte-identically") {
    SplitMix64 rng(9);
    auto db = random_db(rng, 3, 5, 4);
    auto dir = scratch_dir("db");
    save_db(db, dir / "one");
    auto loaded = load_db(dir / "one");
    REQUIRE(loaded.size() == db.size());
    for (std::uint32_t id = 0; id < db.size(); ++id) {
        CHECK(loaded.entries()[id].image_id == db.entries()[id].image_id);
        CHECK(loaded.entries()[id].box == db.entries()[id].box);
        CHECK(std::ranges::equal(loaded.feature(id), db.feature(id)));
    }
    save_db(loaded, dir / "two");
    CHECK(slurp(dir / "one" / "db.features") == slurp(dir / "two" / "db.features"));
    CHECK(slurp(dir / "one" / "db.manifest.jsonl") == slurp(dir / "two" / "db.manifest.jsonl"));
    CHECK_THROWS_AS(load_db(dir / "missing"), Error);
}
