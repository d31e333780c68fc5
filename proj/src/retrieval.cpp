#include "lcd/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lcd/error.hpp"

namespace lcd {

namespace {

constexpr const char* kDbFeatures = "db.features";
constexpr const char* kDbManifest = "db.manifest.jsonl";

}  // namespace

bool ReferenceDB::contains_image(const std::string& image_id) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const DbEntry& e) { return e.image_id == image_id; });
}

ReferenceDB ReferenceDB::subset(ProposalSource source) const {
    ReferenceDB out;
    out.dimension_ = dimension_;
    for (const auto& e : entries_) {
        if (e.source != source) continue;
        DbEntry copy = e;
        copy.entry_id = static_cast<std::uint32_t>(out.entries_.size());
        out.entries_.push_back(std::move(copy));
        auto f = feature(e.entry_id);
        out.features_.insert(out.features_.end(), f.begin(), f.end());
    }
    return out;
}

ReferenceDB build_db(std::vector<ReferenceSubimage> subimages) {
    if (subimages.empty()) {
        throw Error(ErrorKind::invalid_input, "reference database needs at least one subimage");
    }
    std::stable_sort(subimages.begin(), subimages.end(),
                     [](const ReferenceSubimage& a, const ReferenceSubimage& b) {
                         return a.image_id < b.image_id;
                     });
    ReferenceDB db;
    db.dimension_ = static_cast<std::uint32_t>(subimages.front().feature.dimension());
    if (db.dimension_ == 0) throw Error(ErrorKind::format, "reference feature with dimension 0");
    db.entries_.reserve(subimages.size());
    db.features_.reserve(subimages.size() * db.dimension_);
    for (auto& s : subimages) {
        if (s.feature.dimension() != db.dimension_) {
            throw Error(ErrorKind::format,
                        "reference subimage of '" + s.image_id + "' has dimension " +
                            std::to_string(s.feature.dimension()) + ", expected " +
                            std::to_string(db.dimension_));
        }
        db.entries_.push_back({static_cast<std::uint32_t>(db.entries_.size()), std::move(s.image_id),
                               s.box, s.source});
        db.features_.insert(db.features_.end(), s.feature.values.begin(), s.feature.values.end());
    }
    return db;
}

double l2_distance(std::span<const float> a, std::span<const float> b) noexcept {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sq += d * d;
    }
    return std::sqrt(sq);
}

RankedList rank(std::span<const float> query, const ReferenceDB& db) {
    if (query.size() != db.dimension()) {
        throw Error(ErrorKind::invalid_input, "query dimension " + std::to_string(query.size()) +
                                                  " does not match database dimension " +
                                                  std::to_string(db.dimension()));
    }
    RankedList list;
    list.entries.resize(db.size());
    for (std::uint32_t id = 0; id < db.size(); ++id) {
        list.entries[id] = {id, l2_distance(query, db.feature(id))};
    }
    std::sort(list.entries.begin(), list.entries.end(),
              [](const RankedEntry& a, const RankedEntry& b) {
                  return a.distance < b.distance ||
                         (a.distance == b.distance && a.entry_id < b.entry_id);
              });
    return list;
}

GroundTruthRank gt_rank(const RankedList& list, const std::string& gt_image_id,
                        const ReferenceDB& db) {
    const auto length = static_cast<std::uint32_t>(list.entries.size());
    for (std::uint32_t pos = 0; pos < length; ++pos) {
        if (db.entries()[list.entries[pos].entry_id].image_id == gt_image_id) {
            return {pos + 1, length, static_cast<double>(pos + 1) / length};
        }
    }
    throw Error(ErrorKind::missing_ground_truth,
                "ground-truth reference image '" + gt_image_id + "' is not in the database");
}

double min_distance_to_image(std::span<const float> query, const std::string& image_id,
                             const ReferenceDB& db) {
    double best = INFINITY;
    bool found = false;
    for (const auto& e : db.entries()) {
        if (e.image_id != image_id) continue;
        found = true;
        best = std::min(best, l2_distance(query, db.feature(e.entry_id)));
    }
    if (!found) {
        throw Error(ErrorKind::missing_ground_truth,
                    "ground-truth reference image '" + image_id + "' is not in the database");
    }
    return best;
}

void save_db(const ReferenceDB& db, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<FeatureRecord> records;
    records.reserve(db.size());
    std::ofstream manifest(dir / kDbManifest, std::ios::binary | std::ios::trunc);
    if (!manifest) throw Error(ErrorKind::io, "cannot write " + (dir / kDbManifest).string());
    for (const auto& e : db.entries()) {
        auto f = db.feature(e.entry_id);
        records.push_back({{e.image_id, e.box}, FeatureVector{{f.begin(), f.end()}}});
        nlohmann::json line = {
            {"entry_id", e.entry_id},
            {"image_id", e.image_id},
            {"box", {e.box.x0, e.box.y0, e.box.x1, e.box.y1}},
            {"source", to_string(e.source)},
        };
        manifest << line.dump() << '\n';
    }
    write_feature_file(dir / kDbFeatures, db.dimension(), records);
}

ReferenceDB load_db(const std::filesystem::path& dir) {
    const FeatureFile file = read_feature_file(dir / kDbFeatures);
    std::ifstream manifest(dir / kDbManifest);
    if (!manifest) throw Error(ErrorKind::io, "cannot open " + (dir / kDbManifest).string());

    ReferenceDB db;
    db.dimension_ = file.dimension;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(manifest, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto where = (dir / kDbManifest).string() + ":" + std::to_string(lineno);
        DbEntry e;
        try {
            auto j = nlohmann::json::parse(line);
            e.entry_id = j.at("entry_id").get<std::uint32_t>();
            e.image_id = j.at("image_id").get<std::string>();
            const auto& b = j.at("box");
            e.box = {b.at(0).get<std::int32_t>(), b.at(1).get<std::int32_t>(),
                     b.at(2).get<std::int32_t>(), b.at(3).get<std::int32_t>()};
            e.source = parse_proposal_source(j.at("source").get<std::string>());
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorKind::format, where + ": " + ex.what());
        }
        if (e.entry_id != db.entries_.size()) {
            throw Error(ErrorKind::format, where + ": entry ids must be dense and in order");
        }
        if (e.entry_id >= file.records.size() ||
            file.records[e.entry_id].key != FeatureKey{e.image_id, e.box}) {
            throw Error(ErrorKind::format, where + ": manifest entry does not match feature record");
        }
        db.entries_.push_back(std::move(e));
    }
    if (db.entries_.size() != file.records.size()) {
        throw Error(ErrorKind::format, dir.string() + ": manifest lists " +
                                           std::to_string(db.entries_.size()) + " entries, features file has " +
                                           std::to_string(file.records.size()));
    }
    if (db.entries_.empty()) throw Error(ErrorKind::format, dir.string() + ": empty database");
    db.features_.reserve(file.records.size() * file.dimension);
    for (const auto& rec : file.records) {
        db.features_.insert(db.features_.end(), rec.feature.values.begin(), rec.feature.values.end());
    }
    return db;
}

}  // namespace lcd
