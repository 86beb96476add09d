#include "dice/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "dice/rng.hpp"

namespace dice {

namespace {

std::set<std::string> class_set(const std::vector<AnnotatedObject>& objects) {
    std::set<std::string> s;
    for (const auto& o : objects) s.insert(o.class_name);
    return s;
}

std::size_t symmetric_difference_size(const std::set<std::string>& a,
                                      const std::set<std::string>& b) {
    std::size_t n = 0;
    for (const auto& c : a)
        if (!b.count(c)) ++n;
    for (const auto& c : b)
        if (!a.count(c)) ++n;
    return n;
}

bool shares_class(const std::set<std::string>& a, const std::set<std::string>& b) {
    for (const auto& c : a)
        if (b.count(c)) return true;
    return false;
}

double overlap_over_smaller(const NormalizedBBox& a, const NormalizedBBox& b) {
    return intersection_area(a, b) / std::min(a.area(), b.area());
}

}  // namespace

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("embedding dimension mismatch");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
}

std::vector<Stage1Pair> mine_pairs(const std::vector<AnnotatedImage>& corpus,
                                   const MiningParams& params) {
    std::vector<const AnnotatedImage*> sorted;
    for (const auto& img : corpus) {
        if (!img.embedding)
            throw std::invalid_argument("image lacks embedding: " + img.image_id);
        const double norm = std::sqrt(cosine_similarity(*img.embedding, *img.embedding));
        if (std::abs(norm - 1.0) > 1e-6)
            throw std::invalid_argument("embedding is not unit-norm: " + img.image_id);
        sorted.push_back(&img);
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const AnnotatedImage* a, const AnnotatedImage* b) {
                  return a->image_id < b->image_id;
              });

    std::vector<Stage1Pair> pairs;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const auto classes_i = class_set(sorted[i]->objects);
        for (std::size_t j = i + 1; j < sorted.size(); ++j) {
            const double cos = cosine_similarity(*sorted[i]->embedding, *sorted[j]->embedding);
            if (!(cos > params.sim_threshold)) continue;
            const auto classes_j = class_set(sorted[j]->objects);
            if (!shares_class(classes_i, classes_j)) continue;
            if (symmetric_difference_size(classes_i, classes_j) >=
                static_cast<std::size_t>(params.max_class_diff))
                continue;
            pairs.push_back({sorted[i]->image_id, sorted[j]->image_id, cos, {}});
        }
    }
    return pairs;
}

std::vector<AnnotatedObject> filter_small(const std::vector<AnnotatedObject>& objects,
                                          int min_side_px, int width, int height) {
    std::vector<AnnotatedObject> kept;
    for (const auto& o : objects) {
        const double w = o.bbox.width() * width;
        const double h = o.bbox.height() * height;
        if (w >= min_side_px && h >= min_side_px) kept.push_back(o);
    }
    return kept;
}

std::vector<GroundTruthDifference> label_pair(const AnnotatedImage& a, const AnnotatedImage& b,
                                              const LabelParams& params) {
    const auto objs_a = filter_small(a.objects, params.min_side_px, a.width, a.height);
    const auto objs_b = filter_small(b.objects, params.min_side_px, b.width, b.height);

    // EDIT pass: different class names at IoU above threshold; both consumed.
    std::vector<bool> consumed_a(objs_a.size(), false), consumed_b(objs_b.size(), false);
    std::vector<GroundTruthDifference> edits;
    for (std::size_t i = 0; i < objs_a.size(); ++i) {
        double best_iou = 0.0;
        std::ptrdiff_t best = -1;
        for (std::size_t j = 0; j < objs_b.size(); ++j) {
            if (consumed_b[j] || objs_b[j].class_name == objs_a[i].class_name) continue;
            const double v = iou(objs_a[i].bbox, objs_b[j].bbox);
            if (v >= params.edit_iou_threshold && v > best_iou) {
                best_iou = v;
                best = static_cast<std::ptrdiff_t>(j);
            }
        }
        if (best >= 0) {
            consumed_a[i] = true;
            consumed_b[static_cast<std::size_t>(best)] = true;
            const auto& tgt = objs_b[static_cast<std::size_t>(best)];
            edits.push_back({EditCommand::Edit, tgt.class_name, tgt.bbox, std::nullopt});
        }
    }

    std::set<std::string> remaining_a, remaining_b;
    for (std::size_t i = 0; i < objs_a.size(); ++i)
        if (!consumed_a[i]) remaining_a.insert(objs_a[i].class_name);
    for (std::size_t j = 0; j < objs_b.size(); ++j)
        if (!consumed_b[j]) remaining_b.insert(objs_b[j].class_name);

    std::vector<GroundTruthDifference> labels;
    for (std::size_t i = 0; i < objs_a.size(); ++i) {
        if (consumed_a[i] || remaining_b.count(objs_a[i].class_name)) continue;
        if (params.verifier && params.verifier(b, objs_a[i].class_name)) continue;
        labels.push_back({EditCommand::Remove, objs_a[i].class_name, objs_a[i].bbox, std::nullopt});
    }
    for (std::size_t j = 0; j < objs_b.size(); ++j) {
        if (consumed_b[j] || remaining_a.count(objs_b[j].class_name)) continue;
        if (params.verifier && params.verifier(a, objs_b[j].class_name)) continue;
        labels.push_back({EditCommand::Add, objs_b[j].class_name, objs_b[j].bbox, std::nullopt});
    }
    labels.insert(labels.end(), edits.begin(), edits.end());
    return labels;
}

Stage2Manifest build_stage2_manifest(const std::vector<AnnotatedImage>& corpus,
                                     std::uint64_t seed, const Stage2Params& params) {
    const double total = params.balance.add + params.balance.remove + params.balance.edit +
                         params.balance.unchanged;
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("op balance proportions must sum to 1");

    std::vector<const AnnotatedImage*> sorted;
    for (const auto& img : corpus) sorted.push_back(&img);
    std::sort(sorted.begin(), sorted.end(),
              [](const AnnotatedImage* a, const AnnotatedImage* b) {
                  return a->image_id < b->image_id;
              });

    Stage2Manifest manifest;
    manifest.seed = seed;
    manifest.params = params;
    Rng rng(seed);
    const std::vector<double> op_weights = {params.balance.add, params.balance.remove,
                                            params.balance.edit};

    for (const AnnotatedImage* img : sorted) {
        Stage2Record rec;
        rec.image_id = img->image_id;

        std::vector<std::size_t> eligible;
        for (std::size_t i = 0; i < img->objects.size(); ++i)
            if (img->objects[i].bbox.area() >= params.min_area_frac) eligible.push_back(i);

        const bool unchanged = rng.bernoulli(params.balance.unchanged);
        if (!unchanged && !eligible.empty()) {
            rng.shuffle(eligible);
            std::vector<std::size_t> picked;
            for (std::size_t idx : eligible) {
                if (picked.size() >= static_cast<std::size_t>(params.max_objects)) break;
                bool ok = true;
                for (std::size_t p : picked) {
                    if (overlap_over_smaller(img->objects[idx].bbox, img->objects[p].bbox) >
                        params.max_overlap) {
                        ok = false;
                        break;
                    }
                }
                if (ok) picked.push_back(idx);
            }
            for (std::size_t idx : picked) {
                const AnnotatedObject& obj = img->objects[idx];
                Stage2Operation op{EditCommand::Add, obj.class_name,  obj.bbox,
                                   obj.mask_ref,     std::nullopt,    std::nullopt,
                                   params.inpaint,   ""};
                switch (rng.weighted_choice(op_weights)) {
                    case 0:
                        op.op = EditCommand::Add;
                        op.which_side = "original";  // region inpainted away on the original
                        break;
                    case 1:
                        op.op = EditCommand::Remove;
                        op.which_side = "edited";
                        break;
                    default:
                        op.op = EditCommand::Edit;
                        op.which_side = "edited";
                        op.edit_kind = rng.bernoulli(params.color_change_frac)
                                           ? "color_change"
                                           : "substitution";
                        break;
                }
                rec.operations.push_back(std::move(op));
            }
        }
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

void plan_augmentation(Stage2Manifest& manifest, double apply_probability) {
    if (apply_probability < 0.0 || apply_probability > 1.0)
        throw std::invalid_argument("apply_probability must be in [0, 1]");
    manifest.params.apply_probability = apply_probability;
    Rng rng(manifest.seed ^ 0x9e3779b97f4a7c15ULL);  // separate stream from sampling
    for (Stage2Record& rec : manifest.records) {
        if (rng.bernoulli(apply_probability)) {
            rec.jpeg_quality = manifest.params.jpeg_qualities[rng.uniform_int(
                manifest.params.jpeg_qualities.size())];
        } else {
            rec.jpeg_quality.reset();
        }
    }
}

std::vector<std::string> validate_stage2(const Stage2Manifest& manifest,
                                         const std::vector<AnnotatedImage>& corpus) {
    std::map<std::string, const AnnotatedImage*> by_id;
    for (const auto& img : corpus) by_id[img.image_id] = &img;

    std::vector<std::string> issues;
    for (const Stage2Record& rec : manifest.records) {
        if (!by_id.count(rec.image_id)) {
            issues.push_back(rec.image_id + ": not in corpus");
            continue;
        }
        if (rec.operations.size() > static_cast<std::size_t>(manifest.params.max_objects))
            issues.push_back(rec.image_id + ": more than max operations");
        for (std::size_t i = 0; i < rec.operations.size(); ++i) {
            const auto& op = rec.operations[i];
            if (op.bbox.area() < manifest.params.min_area_frac)
                issues.push_back(rec.image_id + ": target below minimum area");
            if (op.op == EditCommand::Edit && !op.edit_kind)
                issues.push_back(rec.image_id + ": EDIT without edit_kind");
            for (std::size_t j = i + 1; j < rec.operations.size(); ++j) {
                if (overlap_over_smaller(op.bbox, rec.operations[j].bbox) >
                    manifest.params.max_overlap)
                    issues.push_back(rec.image_id + ": overlapping targets");
            }
        }
    }
    return issues;
}

}  // namespace dice
