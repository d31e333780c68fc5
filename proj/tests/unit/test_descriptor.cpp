#include <catch_amalgamated.hpp>

#include <cmath>

#include "lcd/descriptor.hpp"
#include "lcd/error.hpp"
#include "lcd/image.hpp"
#include "test_util.hpp"

using namespace lcd;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

TEST_CASE("uniform crop gives the flat descriptor") {
    Raster img(40, 30, 128);
    auto f = extract_builtin(img, {3, 4, 37, 29}, {});
    REQUIRE(f.dimension() == 256);
    for (float v : f.values) CHECK_THAT(v, WithinAbs(1.0 / 16.0, 1e-7));
}

TEST_CASE("half black half white raster on a 2x2 grid") {
    Raster img(4, 4, 0);
    for (int y = 0; y < 4; ++y) {
        for (int x = 2; x < 4; ++x) img.set(x, y, 255, 255, 255);
    }
    auto f = extract_builtin(img, {0, 0, 4, 4}, {4, 2});
    REQUIRE(f.dimension() == 4);
    const double s = 1.0 / std::sqrt(2.0);
    CHECK_THAT(f.values[0], WithinAbs(0.0, 1e-7));
    CHECK_THAT(f.values[1], WithinAbs(s, 1e-7));
    CHECK_THAT(f.values[2], WithinAbs(0.0, 1e-7));
    CHECK_THAT(f.values[3], WithinAbs(s, 1e-7));
}

TEST_CASE("descriptors are unit norm and deterministic") {
    Raster img(64, 48);
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 64; ++x) img.set(x, y, static_cast<std::uint8_t>(x * 3), static_cast<std::uint8_t>(y * 5), 7);
    }
    auto a = extract_builtin(img, {5, 5, 50, 40}, {});
    auto b = extract_builtin(img, {5, 5, 50, 40}, {});
    CHECK(a == b);
    CHECK_THAT(l2_norm(a.values), WithinAbs(1.0, 1e-6));
    // Small crops are upsampled to the canonical size.
    auto c = extract_builtin(img, {10, 10, 13, 12}, {});
    CHECK_THAT(l2_norm(c.values), WithinAbs(1.0, 1e-6));
}

TEST_CASE("black crop and bad configs are rejected") {
    Raster img(10, 10, 0);
    CHECK_THROWS_AS(extract_builtin(img, {0, 0, 10, 10}, {}), Error);
    Raster ok(10, 10, 9);
    CHECK_THROWS_AS(extract_builtin(ok, {0, 0, 11, 10}, {}), Error);
    CHECK_THROWS_AS(DescriptorConfig({4, 8}).validate(), Error);
    CHECK_THROWS_AS(DescriptorConfig({4, 0}).validate(), Error);
    const double zeros[3] = {0, 0, 0};
    CHECK_THROWS_AS(l2_normalize(std::span<const double>(zeros)), Error);
}

TEST_CASE("feature file round trip") {
    auto dir = scratch_dir("featfile");
    std::vector<FeatureRecord> recs = {
        {{"img_a", {0, 0, 4, 4}}, {{0.6f, 0.8f, 0.0f}}},
        {{"img_b", {1, 2, 3, 5}}, {{1.0f, 0.0f, 0.0f}}},
    };
    write_feature_file(dir / "f.bin", 3, recs);
    auto file = read_feature_file(dir / "f.bin");
    CHECK(file.dimension == 3);
    REQUIRE(file.records.size() == 2);
    CHECK(file.records[0].key.image_id == "img_a");
    CHECK(file.records[1].key.box == BBox{1, 2, 3, 5});
    CHECK(file.records[0].feature == recs[0].feature);
    CHECK(slurp(dir / "f.bin").substr(0, 8) == "RLFEAT01");

    auto table = load_external_features(dir / "f.bin");
    REQUIRE(table.find("img_a", {0, 0, 4, 4}));
    CHECK(table.find("img_a", {0, 0, 4, 5}) == nullptr);
}

TEST_CASE("feature file errors") {
    auto dir = scratch_dir("featerr");
    std::vector<FeatureRecord> mixed = {
        {{"a", {0, 0, 1, 1}}, {{1.0f, 0.0f}}},
        {{"b", {0, 0, 1, 1}}, {{1.0f, 0.0f, 0.0f}}},
    };
    CHECK_THROWS_AS(write_feature_file(dir / "m.bin", 2, mixed), Error);

    std::vector<FeatureRecord> one = {{{"a", {0, 0, 1, 1}}, {{1.0f, 0.0f}}}};
    write_feature_file(dir / "t.bin", 2, one);
    auto bytes = slurp(dir / "t.bin");
    spit(dir / "t.bin", bytes.substr(0, bytes.size() - 2));
    try {
        read_feature_file(dir / "t.bin");
        FAIL("truncated file accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::format);
        CHECK_THAT(e.what(), ContainsSubstring("byte offset 41"));
    }

    spit(dir / "x.bin", bytes + "zz");
    CHECK_THROWS_WITH(read_feature_file(dir / "x.bin"), ContainsSubstring("trailing"));
    spit(dir / "bad.bin", "NOTMAGIC" + bytes.substr(8));
    CHECK_THROWS_WITH(read_feature_file(dir / "bad.bin"), ContainsSubstring("magic"));

    std::vector<FeatureRecord> dup = {one[0], one[0]};
    write_feature_file(dir / "d.bin", 2, dup);
    CHECK_THROWS_WITH(load_external_features(dir / "d.bin"), ContainsSubstring("duplicate"));

    std::vector<FeatureRecord> zero = {{{"a", {0, 0, 1, 1}}, {{0.0f, 0.0f}}}};
    write_feature_file(dir / "z.bin", 2, zero);
    CHECK_THROWS_AS(load_external_features(dir / "z.bin"), Error);
}

TEST_CASE("external features are renormalized") {
    auto dir = scratch_dir("featnorm");
    std::vector<FeatureRecord> recs = {{{"a", {0, 0, 2, 2}}, {{3.0f, 4.0f}}}};
    write_feature_file(dir / "f.bin", 2, recs);
    auto table = load_external_features(dir / "f.bin");
    const auto* f = table.find("a", {0, 0, 2, 2});
    REQUIRE(f);
    CHECK_THAT(f->values[0], WithinAbs(0.6, 1e-7));
    CHECK_THAT(f->values[1], WithinAbs(0.8, 1e-7));
}

TEST_CASE("ppm round trip") {
    auto dir = scratch_dir("ppm");
    Raster img(5, 3);
    img.set(4, 2, 1, 2, 3);
    write_ppm(dir / "a.ppm", img);
    CHECK(read_ppm(dir / "a.ppm") == img);
    CHECK_THROWS_AS(read_ppm(dir / "missing.ppm"), Error);
}
