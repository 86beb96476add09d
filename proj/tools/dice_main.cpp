#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dice/datagen.hpp"
#include "dice/detmetrics.hpp"
#include "dice/evalcomp.hpp"
#include "dice/gateway.hpp"
#include "dice/image_io.hpp"
#include "dice/jsonio.hpp"
#include "dice/util.hpp"

namespace fs = std::filesystem;
using dice::Json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

struct RunConfig {
    std::string dataset;
    std::string annotations;
    std::string chat_endpoint;
    std::string embed_endpoint;  // defaults to chat_endpoint
    std::string chat_model = "default-chat";
    std::string embed_model = "default-embed";
    std::uint64_t seed = 0;
    double edit_iou = 0.5;
    double confidence_floor = 0.0;
    double sim_threshold = 0.6;
    double apply_probability = 0.5;
    std::vector<int> mask_fill = {0, 0, 0};
    std::string cache_dir;
    std::string output_dir = ".";
    int concurrency = 4;
    int overlay_thickness = 4;
    int retry_attempts = 3;
    std::vector<int> backoff_ms = {1000, 4000, 16000};
};

Json config_to_json(const RunConfig& c) {
    return Json{{"dataset", c.dataset},
                {"annotations", c.annotations},
                {"chat_endpoint", c.chat_endpoint},
                {"embed_endpoint", c.embed_endpoint},
                {"chat_model", c.chat_model},
                {"embed_model", c.embed_model},
                {"seed", c.seed},
                {"edit_iou", c.edit_iou},
                {"confidence_floor", c.confidence_floor},
                {"sim_threshold", c.sim_threshold},
                {"apply_probability", c.apply_probability},
                {"mask_fill", c.mask_fill},
                {"cache_dir", c.cache_dir},
                {"output_dir", c.output_dir},
                {"concurrency", c.concurrency},
                {"overlay_thickness", c.overlay_thickness},
                {"retry_attempts", c.retry_attempts},
                {"backoff_ms", c.backoff_ms}};
}

void apply_config_json(RunConfig& c, const Json& j) {
    static const std::set<std::string> known = {
        "dataset",        "annotations",   "chat_endpoint",     "embed_endpoint",
        "chat_model",     "embed_model",   "seed",              "edit_iou",
        "confidence_floor", "sim_threshold", "apply_probability", "mask_fill",
        "cache_dir",      "output_dir",    "concurrency",       "overlay_thickness",
        "retry_attempts", "backoff_ms"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw std::invalid_argument("unknown config key: " + key);
    c.dataset = j.value("dataset", c.dataset);
    c.annotations = j.value("annotations", c.annotations);
    c.chat_endpoint = j.value("chat_endpoint", c.chat_endpoint);
    c.embed_endpoint = j.value("embed_endpoint", c.embed_endpoint);
    c.chat_model = j.value("chat_model", c.chat_model);
    c.embed_model = j.value("embed_model", c.embed_model);
    c.seed = j.value("seed", c.seed);
    c.edit_iou = j.value("edit_iou", c.edit_iou);
    c.confidence_floor = j.value("confidence_floor", c.confidence_floor);
    c.sim_threshold = j.value("sim_threshold", c.sim_threshold);
    c.apply_probability = j.value("apply_probability", c.apply_probability);
    c.mask_fill = j.value("mask_fill", c.mask_fill);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.concurrency = j.value("concurrency", c.concurrency);
    c.overlay_thickness = j.value("overlay_thickness", c.overlay_thickness);
    c.retry_attempts = j.value("retry_attempts", c.retry_attempts);
    c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
    if (c.mask_fill.size() != 3) throw std::invalid_argument("mask_fill must have 3 channels");
    if (c.concurrency < 1) throw std::invalid_argument("concurrency must be >= 1");
}

// Command-line values that should override the config file. CLI11 fills
// these only when the flag is present.
struct Overrides {
    std::string config_path;
    std::string out;
    std::vector<std::string> pending;  // key=value pairs via --set
};

void apply_overrides(RunConfig& c, const Overrides& o) {
    Json patch = Json::object();
    for (const std::string& kv : o.pending) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got: " + kv);
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        // numbers and arrays parse as JSON, anything else is a string
        try {
            patch[key] = Json::parse(value);
        } catch (const std::exception&) {
            patch[key] = value;
        }
    }
    apply_config_json(c, patch);
}

RunConfig load_config(const Overrides& o) {
    RunConfig c;
    if (!o.config_path.empty())
        apply_config_json(c, Json::parse(dice::read_file(o.config_path)));
    apply_overrides(c, o);
    return c;
}

std::string file_sha256(const std::string& path) {
    return dice::sha256_hex(dice::read_file(path));
}

std::string resolve_near(const std::string& base_file, const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(base_file).parent_path() / path).string();
}

struct Dataset {
    std::vector<dice::CaseFileEntry> entries;
    std::string path;
    std::string hash;
};

Dataset load_dataset(const RunConfig& config) {
    if (config.dataset.empty()) throw std::invalid_argument("config: dataset is required");
    Dataset ds;
    ds.path = config.dataset;
    ds.hash = file_sha256(config.dataset);
    for (const Json& row : dice::read_jsonl(config.dataset))
        ds.entries.push_back(dice::case_from_json(row));
    return ds;
}

dice::Gateway make_gateway(const RunConfig& config, const std::string& dataset_path) {
    if (config.chat_endpoint.empty())
        throw std::invalid_argument("config: chat_endpoint is required");
    dice::HttpBackendConfig hc;
    hc.base_url = config.chat_endpoint;
    hc.chat_model = config.chat_model;
    hc.embed_model = config.embed_model;
    if (const char* key = std::getenv("DICE_API_KEY")) hc.api_key = key;
    hc.retry.attempts = config.retry_attempts;
    hc.retry.backoff_ms = config.backoff_ms;
    std::shared_ptr<dice::ChatBackend> backend = std::make_shared<dice::HttpBackend>(hc);
    if (!config.cache_dir.empty())
        backend = std::make_shared<dice::CachingBackend>(
            backend, std::make_shared<dice::ResponseCache>(config.cache_dir));
    dice::GatewayOptions options;
    options.overlay_thickness = config.overlay_thickness;
    dice::Gateway gw(std::move(backend), options);
    gw.load = [dataset_path](const std::string& path) {
        return dice::load_image(resolve_near(dataset_path, path));
    };
    return gw;
}

std::string output_path(const RunConfig& config, const Overrides& o,
                        const std::string& default_name) {
    if (!o.out.empty()) {
        const fs::path parent = fs::path(o.out).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        return o.out;
    }
    fs::create_directories(config.output_dir);
    return (fs::path(config.output_dir) / default_name).string();
}

void write_summary(const std::string& out_path, const RunConfig& config,
                   const std::string& command, const std::string& dataset_hash, Json extra) {
    extra["tool_version"] = kToolVersion;
    extra["command"] = command;
    extra["config"] = config_to_json(config);
    extra["config_hash"] = dice::sha256_hex(config_to_json(config).dump());
    extra["dataset_hash"] = dataset_hash;
    dice::write_file_atomic(out_path + ".summary.json", extra.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

int cmd_mine_pairs(const RunConfig& config, const Overrides& o) {
    if (config.annotations.empty())
        throw std::invalid_argument("config: annotations is required");
    std::vector<dice::AnnotatedImage> corpus;
    for (const Json& row : dice::read_jsonl(config.annotations))
        corpus.push_back(dice::annotated_image_from_json(row));

    dice::MiningParams mining;
    mining.sim_threshold = config.sim_threshold;
    dice::LabelParams labeling;
    labeling.edit_iou_threshold = config.edit_iou;

    std::map<std::string, const dice::AnnotatedImage*> by_id;
    for (const auto& img : corpus) by_id[img.image_id] = &img;

    auto pairs = dice::mine_pairs(corpus, mining);
    std::map<std::string, std::size_t> label_counts;
    std::vector<Json> rows;
    for (auto& pair : pairs) {
        pair.labels = dice::label_pair(*by_id.at(pair.image_a), *by_id.at(pair.image_b),
                                       labeling);
        for (const auto& label : pair.labels) ++label_counts[dice::to_string(label.command)];
        rows.push_back(dice::stage1_pair_to_json(pair));
    }

    const std::string out = output_path(config, o, "stage1_pairs.jsonl");
    dice::write_jsonl(out, rows);
    write_summary(out, config, "mine-pairs", file_sha256(config.annotations),
                  Json{{"pairs", pairs.size()}, {"label_counts", label_counts},
                       {"images", corpus.size()}});
    std::printf("mined %zu pairs from %zu images -> %s\n", pairs.size(), corpus.size(),
                out.c_str());
    return kExitOk;
}

int cmd_build_stage2(const RunConfig& config, const Overrides& o) {
    if (config.annotations.empty())
        throw std::invalid_argument("config: annotations is required");
    std::vector<dice::AnnotatedImage> corpus;
    for (const Json& row : dice::read_jsonl(config.annotations))
        corpus.push_back(dice::annotated_image_from_json(row));

    dice::Stage2Params params;
    params.apply_probability = config.apply_probability;
    auto manifest = dice::build_stage2_manifest(corpus, config.seed, params);
    dice::plan_augmentation(manifest, config.apply_probability);

    bool missing_masks = false;
    std::map<std::string, std::size_t> op_counts;
    std::size_t unchanged = 0;
    std::vector<Json> rows;
    for (const auto& rec : manifest.records) {
        if (rec.operations.empty()) ++unchanged;
        for (const auto& op : rec.operations) {
            ++op_counts[dice::to_string(op.op)];
            missing_masks |= !op.mask_ref.has_value();
        }
        rows.push_back(dice::stage2_record_to_json(rec, manifest.params));
    }
    if (missing_masks)
        std::fprintf(stderr,
                     "warning: some targets lack mask_ref; box-overlap rule applies\n");

    const std::string out = output_path(config, o, "stage2_manifest.jsonl");
    dice::write_jsonl(out, rows);
    write_summary(out, config, "build-stage2", file_sha256(config.annotations),
                  Json{{"records", manifest.records.size()},
                       {"unchanged", unchanged},
                       {"op_counts", op_counts},
                       {"seed", config.seed},
                       {"mask_fallback", missing_masks}});
    std::printf("planned %zu records -> %s\n", manifest.records.size(), out.c_str());
    return kExitOk;
}

int cmd_detect(const RunConfig& config, const Overrides& o) {
    const Dataset ds = load_dataset(config);
    dice::Gateway gw = make_gateway(config, ds.path);

    std::vector<Json> rows(ds.entries.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < ds.entries.size(); ++i) {
        tasks.push_back([&, i] {
            const dice::EditCase& c = ds.entries[i].edit_case;
            Json row{{"case_id", c.case_id}};
            try {
                const dice::ParseReport report = gw.detect(c);
                row.update(dice::parse_report_to_json(report));
            } catch (const std::exception& e) {
                row["error"] = e.what();
            }
            rows[i] = std::move(row);
        });
    }
    dice::run_bounded(config.concurrency, tasks);

    std::size_t failures = 0, differences = 0, malformed = 0;
    for (const Json& row : rows) {
        if (row.contains("error")) {
            ++failures;
            continue;
        }
        differences += row.at("differences").size();
        malformed += row.at("malformed_lines").size();
    }
    const std::string out = output_path(config, o, "detections.jsonl");
    dice::write_jsonl(out, rows);
    write_summary(out, config, "detect", ds.hash,
                  Json{{"cases", rows.size()},
                       {"failures", failures},
                       {"differences", differences},
                       {"malformed_lines", malformed}});
    std::printf("detected %zu differences over %zu cases (%zu failures) -> %s\n", differences,
                rows.size(), failures, out.c_str());
    return failures == 0 ? kExitOk : kExitPartial;
}

int cmd_coherence(const RunConfig& config, const Overrides& o,
                  const std::string& detections_path, bool on_ground_truth) {
    const Dataset ds = load_dataset(config);
    dice::Gateway gw = make_gateway(config, ds.path);

    std::map<std::string, const dice::EditCase*> by_id;
    for (const auto& e : ds.entries) by_id[e.edit_case.case_id] = &e.edit_case;

    // one work item per difference
    struct Item {
        const dice::EditCase* edit_case;
        dice::Difference diff;
        std::size_t diff_index;
    };
    std::vector<Item> items;
    if (on_ground_truth) {
        for (const auto& e : ds.entries) {
            if (!e.edit_case.ground_truth) continue;
            const auto& gts = *e.edit_case.ground_truth;
            for (std::size_t k = 0; k < gts.size(); ++k)
                items.push_back({&e.edit_case,
                                 {gts[k].command, gts[k].subject, gts[k].bbox}, k});
        }
    } else {
        if (detections_path.empty())
            throw std::invalid_argument("--detections is required (or pass --on-gt)");
        for (const Json& row : dice::read_jsonl(detections_path)) {
            if (row.contains("error")) continue;
            const std::string case_id = row.at("case_id").get<std::string>();
            const auto it = by_id.find(case_id);
            if (it == by_id.end())
                throw std::invalid_argument("detections reference unknown case " + case_id);
            const Json& diffs = row.at("differences");
            for (std::size_t k = 0; k < diffs.size(); ++k)
                items.push_back({it->second, dice::difference_from_json(diffs[k]), k});
        }
    }

    std::vector<Json> rows(items.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < items.size(); ++i) {
        tasks.push_back([&, i] {
            const Item& item = items[i];
            Json row{{"case_id", item.edit_case->case_id},
                     {"diff_index", item.diff_index},
                     {"difference", dice::difference_to_json(item.diff)}};
            try {
                row["verdict"] =
                    dice::verdict_to_json(gw.assess_coherence(*item.edit_case, item.diff));
            } catch (const std::exception& e) {
                row["error"] = e.what();
            }
            rows[i] = std::move(row);
        });
    }
    dice::run_bounded(config.concurrency, tasks);

    std::size_t failures = 0, coherent = 0, flagged = 0;
    for (const Json& row : rows) {
        if (row.contains("error")) {
            ++failures;
            continue;
        }
        coherent += row.at("verdict").at("decision").get<bool>() ? 1 : 0;
        flagged += row.at("verdict").at("flagged_unparseable").get<bool>() ? 1 : 0;
    }
    const std::string out =
        output_path(config, o, on_ground_truth ? "gt_verdicts.jsonl" : "verdicts.jsonl");
    dice::write_jsonl(out, rows);
    write_summary(out, config, "coherence", ds.hash,
                  Json{{"differences", rows.size()},
                       {"failures", failures},
                       {"coherent", coherent},
                       {"flagged_unparseable", flagged},
                       {"on_ground_truth", on_ground_truth}});
    std::printf("assessed %zu differences (%zu coherent, %zu failures) -> %s\n", rows.size(),
                coherent, failures, out.c_str());
    return failures == 0 ? kExitOk : kExitPartial;
}

std::map<std::string, std::vector<dice::Difference>> load_detections(
    const std::string& path) {
    std::map<std::string, std::vector<dice::Difference>> det;
    for (const Json& row : dice::read_jsonl(path)) {
        if (row.contains("error")) continue;
        auto& list = det[row.at("case_id").get<std::string>()];
        for (const Json& d : row.at("differences"))
            list.push_back(dice::difference_from_json(d));
    }
    return det;
}

int cmd_eval_detect(const RunConfig& config, const Overrides& o,
                    const std::string& detections_path) {
    if (detections_path.empty()) throw std::invalid_argument("--detections is required");
    const Dataset ds = load_dataset(config);
    const auto detections = load_detections(detections_path);

    std::vector<dice::DetectionCase> cases;
    for (const auto& e : ds.entries) {
        if (!e.edit_case.ground_truth)
            throw std::invalid_argument("case " + e.edit_case.case_id +
                                        " has no ground_truth");
        dice::DetectionCase dc{{}, e.edit_case};
        const auto it = detections.find(e.edit_case.case_id);
        if (it != detections.end()) dc.preds = it->second;
        cases.push_back(std::move(dc));
    }

    const auto agnostic = dice::evaluate_detection(cases, dice::APMode::ClassAgnostic);
    const auto aware = dice::evaluate_detection(cases, dice::APMode::ClassAware);
    const Json report{{"class_agnostic", dice::ap_report_to_json(agnostic)},
                      {"class_aware", dice::ap_report_to_json(aware)},
                      {"cases", cases.size()}};

    const std::string out = output_path(config, o, "eval_detect.json");
    dice::write_file_atomic(out, report.dump(2) + "\n");
    write_summary(out, config, "eval-detect", ds.hash, Json{{"metrics", report}});
    std::printf("AP %.4f (class-agnostic) / %.4f (class-aware) -> %s\n", agnostic.ap, aware.ap,
                out.c_str());
    return kExitOk;
}

std::map<std::string, std::map<std::size_t, dice::CoherenceVerdict>> load_verdicts(
    const std::string& path) {
    std::map<std::string, std::map<std::size_t, dice::CoherenceVerdict>> verdicts;
    for (const Json& row : dice::read_jsonl(path)) {
        if (row.contains("error") || !row.contains("verdict")) continue;
        verdicts[row.at("case_id").get<std::string>()][row.at("diff_index").get<std::size_t>()] =
            dice::verdict_from_json(row.at("verdict"));
    }
    return verdicts;
}

int cmd_eval_pipeline(const RunConfig& config, const Overrides& o,
                      const std::string& detections_path, const std::string& verdicts_path,
                      const std::string& gt_verdicts_path) {
    const Dataset ds = load_dataset(config);
    Json report{{"cases", ds.entries.size()}};

    if (!gt_verdicts_path.empty()) {
        // coherence accuracy: estimator verdicts on GT areas vs GT labels
        const auto gt_verdicts = load_verdicts(gt_verdicts_path);
        std::vector<dice::GroundTruthDifference> gts;
        std::vector<dice::CoherenceVerdict> verdicts;
        for (const auto& e : ds.entries) {
            if (!e.edit_case.ground_truth) continue;
            const auto it = gt_verdicts.find(e.edit_case.case_id);
            const auto& case_gts = *e.edit_case.ground_truth;
            for (std::size_t k = 0; k < case_gts.size(); ++k) {
                if (it == gt_verdicts.end() || !it->second.count(k))
                    throw std::invalid_argument("missing verdict for case " +
                                                e.edit_case.case_id + " gt " +
                                                std::to_string(k));
                gts.push_back(case_gts[k]);
                verdicts.push_back(it->second.at(k));
            }
        }
        report["coherence_accuracy"] = dice::coherence_accuracy(gts, verdicts);
        report["gt_differences"] = gts.size();
    }

    if (!detections_path.empty() && !verdicts_path.empty()) {
        // coherence over detected areas: AP against GT coherence labels
        const auto detections = load_detections(detections_path);
        const auto verdicts = load_verdicts(verdicts_path);
        std::vector<dice::CoherenceCase> cases;
        for (const auto& e : ds.entries) {
            dice::CoherenceCase cc{{}, {}, e.edit_case};
            const auto it = detections.find(e.edit_case.case_id);
            if (it != detections.end()) {
                const auto vit = verdicts.find(e.edit_case.case_id);
                for (std::size_t k = 0; k < it->second.size(); ++k) {
                    if (vit == verdicts.end() || !vit->second.count(k))
                        throw std::invalid_argument("missing verdict for case " +
                                                    e.edit_case.case_id + " difference " +
                                                    std::to_string(k));
                    cc.preds.push_back(it->second[k]);
                    cc.verdicts.push_back(vit->second.at(k));
                }
            }
            cases.push_back(std::move(cc));
        }
        report["coherence_over_detected"] =
            dice::ap_report_to_json(dice::evaluate_coherence_ap(cases));
    }

    if (!report.contains("coherence_accuracy") && !report.contains("coherence_over_detected"))
        throw std::invalid_argument(
            "nothing to evaluate: pass --gt-verdicts and/or --detections with --verdicts");

    const std::string out = output_path(config, o, "eval_pipeline.json");
    dice::write_file_atomic(out, report.dump(2) + "\n");
    write_summary(out, config, "eval-pipeline", ds.hash, Json{{"metrics", report}});
    std::printf("pipeline evaluation -> %s\n", out.c_str());
    return kExitOk;
}

dice::CaseRun make_case_run(const dice::EditCase& c,
                            const std::map<std::string, std::vector<dice::Difference>>& dets,
                            const std::map<std::string,
                                           std::map<std::size_t, dice::CoherenceVerdict>>& verds) {
    dice::CaseRun run;
    run.edit_case = c;
    const auto it = dets.find(c.case_id);
    if (it == dets.end()) return run;
    const auto vit = verds.find(c.case_id);
    for (std::size_t k = 0; k < it->second.size(); ++k) {
        if (vit == verds.end() || !vit->second.count(k))
            throw std::invalid_argument("missing verdict for case " + c.case_id +
                                        " difference " + std::to_string(k));
        run.diffs.push_back(it->second[k]);
        run.verdicts.push_back(vit->second.at(k));
    }
    return run;
}

int cmd_rank(const RunConfig& config, const Overrides& o,
             const std::vector<std::string>& model_specs) {
    if (model_specs.empty())
        throw std::invalid_argument("--model name=detections.jsonl,verdicts.jsonl is required");
    const Dataset ds = load_dataset(config);

    std::map<std::string, std::vector<dice::CaseRun>> model_runs;
    for (const std::string& spec : model_specs) {
        const auto eq = spec.find('=');
        const auto comma = spec.find(',', eq == std::string::npos ? 0 : eq);
        if (eq == std::string::npos || comma == std::string::npos)
            throw std::invalid_argument(
                "--model expects name=detections.jsonl,verdicts.jsonl, got: " + spec);
        const std::string name = spec.substr(0, eq);
        const auto dets = load_detections(spec.substr(eq + 1, comma - eq - 1));
        const auto verds = load_verdicts(spec.substr(comma + 1));
        std::vector<dice::CaseRun> runs;
        for (const auto& e : ds.entries) runs.push_back(make_case_run(e.edit_case, dets, verds));
        model_runs[name] = std::move(runs);
    }

    const auto table = dice::ranking_table(model_runs, config.confidence_floor);
    Json rows = Json::array();
    std::string text = "model\tcorrect_edits%\tunwanted_area%\tno_visual_change%\n";
    for (const auto& [model, r] : table) {
        rows.push_back({{"model", model},
                        {"correct_edits_pct", r.correct_edits_pct},
                        {"unwanted_edit_area_pct", r.unwanted_edit_area_pct},
                        {"no_visual_change_pct", r.no_visual_change_pct}});
        char line[256];
        std::snprintf(line, sizeof(line), "%s\t%.2f\t%.2f\t%.2f\n", model.c_str(),
                      r.correct_edits_pct, r.unwanted_edit_area_pct, r.no_visual_change_pct);
        text += line;
    }

    const std::string out = output_path(config, o, "ranking.json");
    dice::write_file_atomic(out, Json{{"models", rows}}.dump(2) + "\n");
    dice::write_file_atomic(out + ".txt", text);
    write_summary(out, config, "rank", ds.hash, Json{{"metrics", Json{{"models", rows}}}});
    std::printf("%s", text.c_str());
    return kExitOk;
}

int cmd_correlate(const RunConfig& config, const Overrides& o,
                  const std::string& detections_path, const std::string& verdicts_path) {
    if (detections_path.empty() || verdicts_path.empty())
        throw std::invalid_argument("--detections and --verdicts are required");
    const Dataset ds = load_dataset(config);
    dice::Gateway gw = make_gateway(config, ds.path);
    const auto dets = load_detections(detections_path);
    const auto verds = load_verdicts(verdicts_path);

    std::vector<dice::StudyCase> cases;
    for (const auto& e : ds.entries) {
        dice::StudyCase sc;
        sc.run = make_case_run(e.edit_case, dets, verds);
        const std::string caption = gw.caption(gw.load(e.edit_case.original_image));
        sc.target_caption = gw.compose_target_caption(caption, e.edit_case.prompt);
        cases.push_back(std::move(sc));
    }

    const dice::Rgb fill = {static_cast<std::uint8_t>(config.mask_fill[0]),
                            static_cast<std::uint8_t>(config.mask_fill[1]),
                            static_cast<std::uint8_t>(config.mask_fill[2])};
    const auto rows = dice::correlation_study(gw, cases, config.seed, fill);

    Json out_rows = Json::array();
    std::string csv = "metric,policy,human_dimension,pearson,spearman,kendall,samples,excluded\n";
    for (const auto& row : rows) {
        Json j{{"metric", row.metric},
               {"policy", row.policy},
               {"human_dimension", row.human_dimension},
               {"excluded", row.excluded}};
        char line[256];
        if (row.report) {
            j["pearson"] = row.report->pearson;
            j["spearman"] = row.report->spearman;
            j["kendall"] = row.report->kendall;
            j["samples"] = row.report->sample_count;
            std::snprintf(line, sizeof(line), "%s,%s,%s,%.6f,%.6f,%.6f,%zu,%zu\n",
                          row.metric.c_str(), row.policy.c_str(), row.human_dimension.c_str(),
                          row.report->pearson, row.report->spearman, row.report->kendall,
                          row.report->sample_count, row.excluded);
        } else {
            j["error"] = row.error;
            std::snprintf(line, sizeof(line), "%s,%s,%s,error: %s,,,,%zu\n", row.metric.c_str(),
                          row.policy.c_str(), row.human_dimension.c_str(), row.error.c_str(),
                          row.excluded);
        }
        out_rows.push_back(std::move(j));
        csv += line;
    }

    const std::string out = output_path(config, o, "correlations.json");
    dice::write_file_atomic(out, Json{{"rows", out_rows}}.dump(2) + "\n");
    dice::write_file_atomic(out + ".csv", csv);
    write_summary(out, config, "correlate", ds.hash,
                  Json{{"metrics", Json{{"rows", out_rows}}}});
    std::printf("%s", csv.c_str());
    return kExitOk;
}

int cmd_report(const std::string& run_dir, const std::string& out_override) {
    std::vector<fs::path> summaries;
    if (fs::is_directory(run_dir))
        for (const auto& entry : fs::recursive_directory_iterator(run_dir))
            if (entry.is_regular_file() &&
                entry.path().filename().string().ends_with(".summary.json"))
                summaries.push_back(entry.path());
    std::sort(summaries.begin(), summaries.end());
    if (summaries.empty()) throw std::invalid_argument("no runs found");

    std::string dataset_hash;
    Json runs = Json::array();
    std::string text = "run report (tool " + std::string(kToolVersion) + ")\n";
    for (const auto& path : summaries) {
        const Json s = Json::parse(dice::read_file(path.string()));
        const std::string hash = s.value("dataset_hash", "");
        if (dataset_hash.empty()) dataset_hash = hash;
        if (hash != dataset_hash)
            throw std::invalid_argument("mismatched dataset hashes across runs: " + dataset_hash +
                                        " vs " + hash + " (" + path.filename().string() + ")");
        runs.push_back(Json{{"summary", path.filename().string()}, {"contents", s}});
        text += "\n== " + path.filename().string() + " ==\n";
        text += "command: " + s.value("command", "?") + "\n";
        if (s.contains("metrics")) text += "metrics: " + s.at("metrics").dump() + "\n";
        for (const auto& [key, value] : s.items())
            if (key != "config" && key != "metrics" && key != "command")
                text += key + ": " + value.dump() + "\n";
    }

    const std::string out =
        out_override.empty() ? (fs::path(run_dir) / "report.json").string() : out_override;
    dice::write_file_atomic(out, Json{{"dataset_hash", dataset_hash},
                                      {"tool_version", kToolVersion},
                                      {"runs", runs}}
                                         .dump(2) +
                                     "\n");
    dice::write_file_atomic(out + ".txt", text);
    std::printf("consolidated %zu runs -> %s\n", summaries.size(), out.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reference-free evaluation harness for instruction-based image editing"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    Overrides o;
    app.add_option("--config", o.config_path, "JSON config file")->envname("DICE_CONFIG");
    app.add_option("--out", o.out, "Output file path");
    app.add_option("--set", o.pending, "Override a config key (key=value), repeatable");

    std::string detections_path, verdicts_path, gt_verdicts_path, run_dir;
    bool on_gt = false;
    std::vector<std::string> model_specs;

    auto* mine = app.add_subcommand("mine-pairs", "Mine similar image pairs and label them");
    auto* stage2 = app.add_subcommand("build-stage2", "Plan synthetic edit operations");
    auto* detect = app.add_subcommand("detect", "Run difference detection over the dataset");
    auto* coherence = app.add_subcommand("coherence", "Assess coherence of differences");
    coherence->add_option("--detections", detections_path, "Detections JSONL");
    coherence->add_flag("--on-gt", on_gt, "Assess ground-truth differences instead");
    auto* eval_detect = app.add_subcommand("eval-detect", "Score detections against GT");
    eval_detect->add_option("--detections", detections_path, "Detections JSONL");
    auto* eval_pipeline =
        app.add_subcommand("eval-pipeline", "Coherence accuracy and coherence AP");
    eval_pipeline->add_option("--detections", detections_path, "Detections JSONL");
    eval_pipeline->add_option("--verdicts", verdicts_path, "Verdicts JSONL over detections");
    eval_pipeline->add_option("--gt-verdicts", gt_verdicts_path,
                              "Verdicts JSONL over ground-truth areas");
    auto* rank = app.add_subcommand("rank", "Rank editing models on the three axes");
    rank->add_option("--model", model_specs,
                     "name=detections.jsonl,verdicts.jsonl (repeatable)");
    auto* correlate = app.add_subcommand("correlate", "Correlate metrics with human ratings");
    correlate->add_option("--detections", detections_path, "Detections JSONL");
    correlate->add_option("--verdicts", verdicts_path, "Verdicts JSONL");
    auto* report = app.add_subcommand("report", "Consolidate run summaries");
    report->add_option("--run-dir", run_dir, "Directory containing run outputs")->required();

    // global options may appear after the subcommand name
    for (CLI::App* sub : {mine, stage2, detect, coherence, eval_detect, eval_pipeline, rank,
                          correlate, report})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (report->parsed()) return cmd_report(run_dir, o.out);
        const RunConfig config = load_config(o);
        if (mine->parsed()) return cmd_mine_pairs(config, o);
        if (stage2->parsed()) return cmd_build_stage2(config, o);
        if (detect->parsed()) return cmd_detect(config, o);
        if (coherence->parsed()) return cmd_coherence(config, o, detections_path, on_gt);
        if (eval_detect->parsed()) return cmd_eval_detect(config, o, detections_path);
        if (eval_pipeline->parsed())
            return cmd_eval_pipeline(config, o, detections_path, verdicts_path,
                                     gt_verdicts_path);
        if (rank->parsed()) return cmd_rank(config, o, model_specs);
        if (correlate->parsed()) return cmd_correlate(config, o, detections_path, verdicts_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitConfig;
}
