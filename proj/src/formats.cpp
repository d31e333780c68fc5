#include "lcd/formats.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "lcd/error.hpp"

namespace lcd {

namespace {

using nlohmann::json;

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = path.string() + ":" + std::to_string(lineno);
        try {
            fn(json::parse(line), where);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::format, where + ": " + e.what());
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::format) throw;
            throw Error(ErrorKind::format, where + ": " + e.what());
        }
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    return out;
}

BBox box_from_array(const json& a) {
    if (!a.is_array() || a.size() != 4) throw Error(ErrorKind::format, "box must be [x0, y0, x1, y1]");
    BBox b{a[0].get<std::int32_t>(), a[1].get<std::int32_t>(), a[2].get<std::int32_t>(),
           a[3].get<std::int32_t>()};
    if (!b.valid()) throw Error(ErrorKind::format, "box with non-positive area or negative origin");
    return b;
}

}  // namespace

ProposalTable read_proposals_file(const std::filesystem::path& path, double confidence_threshold) {
    ProposalTable table;
    for_each_line(path, [&](const json& j, const std::string& where) {
        auto id = j.at("image_id").get<std::string>();
        std::vector<Proposal> proposals;
        for (const auto& p : j.at("proposals")) {
            Proposal prop;
            prop.box = {p.at("x0").get<std::int32_t>(), p.at("y0").get<std::int32_t>(),
                        p.at("x1").get<std::int32_t>(), p.at("y1").get<std::int32_t>()};
            prop.confidence = p.at("confidence").get<double>();
            prop.source = parse_proposal_source(p.value("source", std::string("external")));
            if (!prop.box.valid()) {
                throw Error(ErrorKind::format, where + ": proposal box with non-positive area");
            }
            if (!(prop.confidence >= 0.0 && prop.confidence <= 1.0)) {
                throw Error(ErrorKind::format, where + ": confidence outside [0, 1]");
            }
            proposals.push_back(prop);
        }
        proposals = filter_by_confidence(proposals, confidence_threshold);
        if (!table.emplace(id, std::move(proposals)).second) {
            throw Error(ErrorKind::format, where + ": duplicate image id '" + id + "'");
        }
    });
    return table;
}

void write_proposals_file(const std::filesystem::path& path, const ProposalTable& table) {
    auto out = open_out(path);
    for (const auto& [id, proposals] : table) {
        json arr = json::array();
        for (const auto& p : proposals) {
            arr.push_back({{"x0", p.box.x0},
                           {"y0", p.box.y0},
                           {"x1", p.box.x1},
                           {"y1", p.box.y1},
                           {"confidence", p.confidence},
                           {"source", to_string(p.source)}});
        }
        out << json{{"image_id", id}, {"proposals", std::move(arr)}}.dump() << '\n';
    }
}

std::vector<TestSample> read_manifest(const std::filesystem::path& path) {
    std::vector<TestSample> samples;
    for_each_line(path, [&](const json& j, const std::string& where) {
        TestSample s;
        s.query_image_id = j.at("query_image_id").get<std::string>();
        s.gt_ref_image_id = j.at("gt_ref_image_id").get<std::string>();
        s.polarity = parse_polarity(j.at("polarity").get<std::string>());
        for (const auto& b : j.at("gt_boxes")) s.gt_change_boxes.push_back(box_from_array(b));
        try {
            s.validate();
        } catch (const Error& e) {
            throw Error(ErrorKind::format, where + ": " + e.what());
        }
        samples.push_back(std::move(s));
    });
    return samples;
}

void write_manifest(const std::filesystem::path& path, std::span<const TestSample> samples) {
    auto out = open_out(path);
    for (const auto& s : samples) {
        json boxes = json::array();
        for (const auto& b : s.gt_change_boxes) boxes.push_back({b.x0, b.y0, b.x1, b.y1});
        out << json{{"query_image_id", s.query_image_id},
                    {"gt_ref_image_id", s.gt_ref_image_id},
                    {"polarity", to_string(s.polarity)},
                    {"gt_boxes", std::move(boxes)}}
                   .dump()
            << '\n';
    }
}

}  // namespace lcd
