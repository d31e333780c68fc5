#pragma once

// Line-delimited JSON formats shared by the pipeline stages.
//
// Proposals file, one image per line:
//   {"image_id": "qry_0001", "proposals": [
//       {"x0": 10, "y0": 12, "x1": 80, "y1": 90, "confidence": 0.82, "source": "external"}, ...]}
//
// Dataset manifest, one test sample per line:
//   {"query_image_id": "qry_0001", "gt_ref_image_id": "ref_0001",
//    "polarity": "positive", "gt_boxes": [[x0, y0, x1, y1], ...]}

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lcd/evaluation.hpp"
#include "lcd/geometry.hpp"

namespace lcd {

using ProposalTable = std::map<std::string, std::vector<Proposal>>;

/// Reads a proposals file. External proposals below `confidence_threshold`
/// are rejected; a repeated image id is a format error.
ProposalTable read_proposals_file(const std::filesystem::path& path,
                                  double confidence_threshold = kDefaultConfidenceThreshold);

/// Writes records in map (image id) order.
void write_proposals_file(const std::filesystem::path& path, const ProposalTable& table);

std::vector<TestSample> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const TestSample> samples);

}  // namespace lcd
