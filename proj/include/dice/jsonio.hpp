#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dice/datagen.hpp"
#include "dice/detmetrics.hpp"
#include "dice/parse.hpp"
#include "dice/types.hpp"

namespace dice {

using Json = nlohmann::json;

// Boxes serialize as [x_min, y_min, x_max, y_max] at 6-decimal precision.
Json bbox_to_json(const NormalizedBBox& b);
NormalizedBBox bbox_from_json(const Json& j);

Json difference_to_json(const Difference& d);
Difference difference_from_json(const Json& j);

Json ground_truth_to_json(const GroundTruthDifference& g);
GroundTruthDifference ground_truth_from_json(const Json& j);

// EditCase with unknown fields preserved across a load/save round-trip.
struct CaseFileEntry {
    EditCase edit_case;
    Json extra = Json::object();
};

Json case_to_json(const CaseFileEntry& e);
CaseFileEntry case_from_json(const Json& j);

Json annotated_image_to_json(const AnnotatedImage& a);
AnnotatedImage annotated_image_from_json(const Json& j);

Json stage1_pair_to_json(const Stage1Pair& p);
Stage1Pair stage1_pair_from_json(const Json& j);

Json stage2_record_to_json(const Stage2Record& r, const Stage2Params& params);
Stage2Record stage2_record_from_json(const Json& j);

Json parse_report_to_json(const ParseReport& r);
ParseReport parse_report_from_json(const Json& j);

Json verdict_to_json(const CoherenceVerdict& v);
CoherenceVerdict verdict_from_json(const Json& j);

Json ap_report_to_json(const APReport& r);

// JSONL: one JSON object per non-empty line; parse errors carry the 1-based
// line number.
std::vector<Json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<Json>& rows);
std::string jsonl_to_string(const std::vector<Json>& rows);

}  // namespace dice
