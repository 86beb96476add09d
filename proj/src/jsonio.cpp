#include "dice/jsonio.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dice/util.hpp"

namespace dice {

namespace {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

EditCommand command_from_json_value(const Json& j) {
    const auto c = command_from_string(j.get<std::string>());
    if (!c) throw std::invalid_argument("unknown command: " + j.get<std::string>());
    return *c;
}

}  // namespace

Json bbox_to_json(const NormalizedBBox& b) {
    return Json::array({round6(b.x_min()), round6(b.y_min()), round6(b.x_max()),
                        round6(b.y_max())});
}

NormalizedBBox bbox_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 4) throw std::invalid_argument("bbox must be a 4-array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

Json difference_to_json(const Difference& d) {
    Json j{{"command", to_string(d.command)},
           {"subject", d.subject},
           {"bbox", bbox_to_json(d.bbox)},
           {"confidence", d.confidence}};
    if (d.confidence_fallback) j["confidence_fallback"] = true;
    return j;
}

Difference difference_from_json(const Json& j) {
    return {command_from_json_value(j.at("command")), j.at("subject").get<std::string>(),
            bbox_from_json(j.at("bbox")), j.value("confidence", 1.0),
            j.value("confidence_fallback", false)};
}

Json ground_truth_to_json(const GroundTruthDifference& g) {
    Json j{{"command", to_string(g.command)},
           {"subject", g.subject},
           {"bbox", bbox_to_json(g.bbox)}};
    if (g.coherent) j["coherent"] = *g.coherent;
    return j;
}

GroundTruthDifference ground_truth_from_json(const Json& j) {
    GroundTruthDifference g{command_from_json_value(j.at("command")),
                            j.at("subject").get<std::string>(), bbox_from_json(j.at("bbox")),
                            std::nullopt};
    if (j.contains("coherent") && !j.at("coherent").is_null())
        g.coherent = j.at("coherent").get<bool>();
    return g;
}

namespace {
const char* kCaseKeys[] = {"case_id", "original_image", "edited_image", "prompt",
                           "width",   "height",         "ground_truth", "human_ratings"};
}

Json case_to_json(const CaseFileEntry& e) {
    const EditCase& c = e.edit_case;
    Json j{{"case_id", c.case_id},   {"original_image", c.original_image},
           {"edited_image", c.edited_image}, {"prompt", c.prompt},
           {"width", c.width},       {"height", c.height}};
    if (c.ground_truth) {
        Json arr = Json::array();
        for (const auto& g : *c.ground_truth) arr.push_back(ground_truth_to_json(g));
        j["ground_truth"] = arr;
    }
    if (c.human_ratings) {
        j["human_ratings"] = {{"prompt_adherence", c.human_ratings->prompt_adherence},
                              {"background_preservation", c.human_ratings->background_preservation}};
    }
    for (auto& [k, v] : e.extra.items()) j[k] = v;
    return j;
}

CaseFileEntry case_from_json(const Json& j) {
    CaseFileEntry e;
    EditCase& c = e.edit_case;
    c.case_id = j.at("case_id").get<std::string>();
    c.original_image = j.at("original_image").get<std::string>();
    c.edited_image = j.at("edited_image").get<std::string>();
    c.prompt = j.at("prompt").get<std::string>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    if (c.width <= 0 || c.height <= 0)
        throw std::invalid_argument("case " + c.case_id + ": dimensions must be > 0");
    if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
        std::vector<GroundTruthDifference> gts;
        for (const auto& g : j.at("ground_truth")) gts.push_back(ground_truth_from_json(g));
        c.ground_truth = std::move(gts);
    }
    if (j.contains("human_ratings") && !j.at("human_ratings").is_null()) {
        HumanRatings hr;
        hr.prompt_adherence = j.at("human_ratings").at("prompt_adherence").get<int>();
        hr.background_preservation =
            j.at("human_ratings").at("background_preservation").get<int>();
        c.human_ratings = hr;
    }
    for (auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* kk : kCaseKeys) known |= (k == kk);
        if (!known) e.extra[k] = v;
    }
    return e;
}

Json annotated_image_to_json(const AnnotatedImage& a) {
    Json objs = Json::array();
    for (const auto& o : a.objects) {
        Json jo{{"class", o.class_name}, {"bbox", bbox_to_json(o.bbox)}};
        if (o.mask_ref) jo["mask_ref"] = *o.mask_ref;
        objs.push_back(jo);
    }
    Json j{{"image_id", a.image_id}, {"width", a.width}, {"height", a.height},
           {"objects", objs}};
    if (a.embedding) j["embedding"] = *a.embedding;
    return j;
}

AnnotatedImage annotated_image_from_json(const Json& j) {
    AnnotatedImage a;
    a.image_id = j.at("image_id").get<std::string>();
    a.width = j.at("width").get<int>();
    a.height = j.at("height").get<int>();
    for (const auto& jo : j.at("objects")) {
        AnnotatedObject o{jo.at("class").get<std::string>(), bbox_from_json(jo.at("bbox")),
                          std::nullopt};
        if (jo.contains("mask_ref") && !jo.at("mask_ref").is_null())
            o.mask_ref = jo.at("mask_ref").get<std::string>();
        a.objects.push_back(std::move(o));
    }
    if (j.contains("embedding") && !j.at("embedding").is_null())
        a.embedding = j.at("embedding").get<std::vector<double>>();
    return a;
}

Json stage1_pair_to_json(const Stage1Pair& p) {
    Json labels = Json::array();
    for (const auto& g : p.labels) labels.push_back(ground_truth_to_json(g));
    return Json{{"image_a", p.image_a},
                {"image_b", p.image_b},
                {"cosine_similarity", round6(p.cosine_similarity)},
                {"labels", labels}};
}

Stage1Pair stage1_pair_from_json(const Json& j) {
    Stage1Pair p;
    p.image_a = j.at("image_a").get<std::string>();
    p.image_b = j.at("image_b").get<std::string>();
    p.cosine_similarity = j.at("cosine_similarity").get<double>();
    for (const auto& g : j.at("labels")) p.labels.push_back(ground_truth_from_json(g));
    return p;
}

Json stage2_record_to_json(const Stage2Record& r, const Stage2Params& params) {
    Json ops = Json::array();
    for (const auto& op : r.operations) {
        Json target{{"class", op.target_class}, {"bbox", bbox_to_json(op.bbox)}};
        target["mask_ref"] = op.mask_ref ? Json(*op.mask_ref) : Json(nullptr);
        Json jo{{"op", to_string(op.op)},
                {"target_object", target},
                {"edit_kind", op.edit_kind ? Json(*op.edit_kind) : Json(nullptr)},
                {"substitution_target",
                 op.substitution_target ? Json(*op.substitution_target) : Json(nullptr)},
                {"inpaint_params", {{"steps", op.inpaint.steps}, {"guidance", op.inpaint.guidance}}},
                {"which_side", op.which_side}};
        ops.push_back(jo);
    }
    Json j{{"image_id", r.image_id},
           {"operations", ops},
           {"augmentation",
            {{"jpeg_qualities", params.jpeg_qualities},
             {"apply_probability", params.apply_probability},
             {"jpeg_quality", r.jpeg_quality ? Json(*r.jpeg_quality) : Json(nullptr)}}}};
    return j;
}

Stage2Record stage2_record_from_json(const Json& j) {
    Stage2Record r;
    r.image_id = j.at("image_id").get<std::string>();
    for (const auto& jo : j.at("operations")) {
        const auto c = command_from_string(jo.at("op").get<std::string>());
        if (!c) throw std::invalid_argument("unknown op");
        Stage2Operation op{*c,
                           jo.at("target_object").at("class").get<std::string>(),
                           bbox_from_json(jo.at("target_object").at("bbox")),
                           std::nullopt,
                           std::nullopt,
                           std::nullopt,
                           {},
                           ""};
        if (!jo.at("target_object").at("mask_ref").is_null())
            op.mask_ref = jo.at("target_object").at("mask_ref").get<std::string>();
        if (!jo.at("edit_kind").is_null()) op.edit_kind = jo.at("edit_kind").get<std::string>();
        if (!jo.at("substitution_target").is_null())
            op.substitution_target = jo.at("substitution_target").get<std::string>();
        op.inpaint.steps = jo.at("inpaint_params").at("steps").get<int>();
        op.inpaint.guidance = jo.at("inpaint_params").at("guidance").get<double>();
        op.which_side = jo.at("which_side").get<std::string>();
        r.operations.push_back(std::move(op));
    }
    if (j.contains("augmentation") && !j.at("augmentation").at("jpeg_quality").is_null())
        r.jpeg_quality = j.at("augmentation").at("jpeg_quality").get<int>();
    return r;
}

Json parse_report_to_json(const ParseReport& r) {
    Json diffs = Json::array();
    for (const auto& d : r.differences) diffs.push_back(difference_to_json(d));
    Json malformed = Json::array();
    for (const auto& m : r.malformed_lines)
        malformed.push_back({{"line", m.line}, {"reason", m.reason}});
    return Json{{"differences", diffs}, {"malformed_lines", malformed}, {"raw_text", r.raw_text}};
}

ParseReport parse_report_from_json(const Json& j) {
    ParseReport r;
    for (const auto& d : j.at("differences")) r.differences.push_back(difference_from_json(d));
    for (const auto& m : j.at("malformed_lines"))
        r.malformed_lines.push_back(
            {m.at("line").get<std::string>(), m.at("reason").get<std::string>()});
    r.raw_text = j.value("raw_text", "");
    return r;
}

Json verdict_to_json(const CoherenceVerdict& v) {
    return Json{{"decision", v.decision},
                {"rationale", v.rationale},
                {"flagged_unparseable", v.flagged_unparseable}};
}

CoherenceVerdict verdict_from_json(const Json& j) {
    return {j.at("decision").get<bool>(), j.value("rationale", ""),
            j.value("flagged_unparseable", false)};
}

Json ap_report_to_json(const APReport& r) {
    Json j{{"ap", r.ap}, {"ap50", r.ap50}, {"ap75", r.ap75}, {"ap_m", r.ap_m}, {"ap_l", r.ap_l},
           {"mode", r.mode == APMode::ClassAgnostic ? "class_agnostic" : "class_aware"}};
    if (r.mode == APMode::ClassAware && !r.per_class.empty()) {
        const auto get = [&](EditCommand c) {
            const auto it = r.per_class.find(c);
            return it == r.per_class.end() ? Json(nullptr) : Json(it->second);
        };
        j["ap_add"] = get(EditCommand::Add);
        j["ap_rem"] = get(EditCommand::Remove);
        j["ap_edit"] = get(EditCommand::Edit);
    }
    return j;
}

std::vector<Json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<Json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            rows.push_back(Json::parse(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

std::string jsonl_to_string(const std::vector<Json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out.push_back('\n');
    }
    return out;
}

void write_jsonl(const std::string& path, const std::vector<Json>& rows) {
    write_file_atomic(path, jsonl_to_string(rows));
}

}  // namespace dice
