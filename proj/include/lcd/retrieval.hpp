#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcd/descriptor.hpp"
#include "lcd/geometry.hpp"

namespace lcd {

struct ReferenceSubimage {
    std::string image_id;
    BBox box;
    ProposalSource source = ProposalSource::grid;
    FeatureVector feature;
};

struct DbEntry {
    std::uint32_t entry_id = 0;
    std::string image_id;
    BBox box;
    ProposalSource source = ProposalSource::grid;
};

/// Immutable reference-subimage database. Entry ids are dense, 0..size()-1,
/// and features are stored contiguously in entry order.
class ReferenceDB {
public:
    ReferenceDB() = default;

    std::size_t size() const noexcept { return entries_.size(); }
    std::uint32_t dimension() const noexcept { return dimension_; }
    const std::vector<DbEntry>& entries() const noexcept { return entries_; }
    std::span<const float> feature(std::uint32_t entry_id) const noexcept {
        return {features_.data() + static_cast<std::size_t>(entry_id) * dimension_, dimension_};
    }
    bool contains_image(const std::string& image_id) const;

    /// Entries of a single proposal source, re-numbered densely. Used when
    /// grid and external proposals are served by independent engines.
    ReferenceDB subset(ProposalSource source) const;

    friend ReferenceDB build_db(std::vector<ReferenceSubimage> subimages);
    friend ReferenceDB load_db(const std::filesystem::path& dir);

private:
    std::uint32_t dimension_ = 0;
    std::vector<DbEntry> entries_;
    std::vector<float> features_;
};

/// One entry per reference subimage, ordered by image id then by input
/// (proposal) order. Throws invalid_input when empty and format on
/// inconsistent dimensions.
ReferenceDB build_db(std::vector<ReferenceSubimage> subimages);

struct RankedEntry {
    std::uint32_t entry_id = 0;
    double distance = 0.0;
};

struct RankedList {
    std::vector<RankedEntry> entries;  // ascending distance, ties by entry id
};

/// Exhaustive L2 ranking of every database entry against `query`.
RankedList rank(std::span<const float> query, const ReferenceDB& db);
inline RankedList rank(const FeatureVector& query, const ReferenceDB& db) {
    return rank(std::span<const float>(query.values), db);
}

struct GroundTruthRank {
    std::uint32_t raw = 0;      // 1-based
    std::uint32_t length = 0;   // rank list length L
    double normalized = 0.0;    // raw / L
};

/// Position of the first entry belonging to `gt_image_id`. Throws
/// missing_ground_truth when the image has no entry in the list.
GroundTruthRank gt_rank(const RankedList& list, const std::string& gt_image_id,
                        const ReferenceDB& db);

/// Smallest L2 distance from `query` to any subimage of `image_id`.
double min_distance_to_image(std::span<const float> query, const std::string& image_id,
                             const ReferenceDB& db);

double l2_distance(std::span<const float> a, std::span<const float> b) noexcept;

/// Persists the database as <dir>/db.features (binary feature file, entry
/// order) plus <dir>/db.manifest.jsonl (one line per entry).
void save_db(const ReferenceDB& db, const std::filesystem::path& dir);
ReferenceDB load_db(const std::filesystem::path& dir);

}  // namespace lcd
