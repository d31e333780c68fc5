#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lcd/geometry.hpp"
#include "lcd/image.hpp"

namespace lcd {

/// Unit-L2-norm subimage descriptor. Dimension is fixed per database/query
/// session; the built-in descriptor is builtin_grid^2 wide, ingested
/// encoder features may be far wider.
struct FeatureVector {
    std::vector<float> values;

    std::size_t dimension() const noexcept { return values.size(); }
    bool operator==(const FeatureVector&) const = default;
};

struct DescriptorConfig {
    std::int32_t canonical_size = 256;
    std::int32_t builtin_grid = 16;

    void validate() const;
};

/// Returns `v / ||v||`. Throws degenerate_input for a zero (or non-finite) norm.
FeatureVector l2_normalize(std::span<const double> v);
FeatureVector l2_normalize(std::span<const float> v);

double l2_norm(std::span<const float> v) noexcept;

/// Crop -> bilinear resize to canonical_size^2 -> grayscale (r+g+b)/3 ->
/// per-cell mean on a builtin_grid^2 grid (row-major) -> L2 normalize.
/// Resizing and the grayscale projection are both linear, so the crop is
/// projected to gray first; the result is the same map.
FeatureVector extract_builtin(const Raster& image, const BBox& box, const DescriptorConfig& cfg);

// ---------------------------------------------------------------------------
// Binary feature file
//
//   header : "RLFEAT01" | u32 dimension | u32 record count      (little endian)
//   record : u32 id length | id bytes | i32 x0 y0 x1 y1 | D x f32
// ---------------------------------------------------------------------------

inline constexpr char kFeatureMagic[8] = {'R', 'L', 'F', 'E', 'A', 'T', '0', '1'};

struct FeatureKey {
    std::string image_id;
    BBox box;

    auto operator<=>(const FeatureKey&) const = default;
};

struct FeatureRecord {
    FeatureKey key;
    FeatureVector feature;
};

struct FeatureFile {
    std::uint32_t dimension = 0;
    std::vector<FeatureRecord> records;  // file order
};

/// Writes records in the given order. All features must share `dimension`.
void write_feature_file(const std::filesystem::path& path, std::uint32_t dimension,
                        std::span<const FeatureRecord> records);

/// Reads records verbatim (no renormalization). Format errors name the byte
/// offset at which parsing failed.
FeatureFile read_feature_file(const std::filesystem::path& path);

struct FeatureTable {
    std::uint32_t dimension = 0;
    std::map<FeatureKey, FeatureVector> features;

    const FeatureVector* find(const std::string& image_id, const BBox& box) const;
};

/// Loads externally computed features and re-normalizes every vector.
/// Duplicate (image_id, box) keys are a format error.
FeatureTable load_external_features(const std::filesystem::path& path);

}  // namespace lcd
