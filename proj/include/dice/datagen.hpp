#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dice/types.hpp"

namespace dice {

struct AnnotatedObject {
    std::string class_name;
    NormalizedBBox bbox;
    std::optional<std::string> mask_ref;
};

struct AnnotatedImage {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<AnnotatedObject> objects;
    std::optional<std::vector<double>> embedding;  // unit vector when present
};

struct Stage1Pair {
    std::string image_a;
    std::string image_b;
    double cosine_similarity = 0.0;
    std::vector<GroundTruthDifference> labels;
};

struct MiningParams {
    double sim_threshold = 0.6;
    int max_class_diff = 15;
};

// Optional hook standing in for an external open-vocabulary detector that
// double-checks claimed absences. The default accepts every label.
using AbsenceVerifier =
    std::function<bool(const AnnotatedImage& image, const std::string& class_name)>;

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// All unordered pairs (lexicographic by image id) passing the three filters:
// cosine above threshold, at least one shared class, fewer than
// max_class_diff differing classes. Labels are left empty.
std::vector<Stage1Pair> mine_pairs(const std::vector<AnnotatedImage>& corpus,
                                   const MiningParams& params = {});

std::vector<AnnotatedObject> filter_small(const std::vector<AnnotatedObject>& objects,
                                          int min_side_px, int width, int height);

struct LabelParams {
    double edit_iou_threshold = 0.5;
    int min_side_px = 16;
    AbsenceVerifier verifier;  // optional
};

// Set-difference labels for one mined pair: REMOVE for a-only classes, ADD
// for b-only classes (per instance), EDIT for cross-image object pairs of
// different class with IoU above threshold (anchored at b's box; both
// objects consumed).
std::vector<GroundTruthDifference> label_pair(const AnnotatedImage& a, const AnnotatedImage& b,
                                              const LabelParams& params = {});

struct InpaintParams {
    int steps = 100;
    double guidance = 4.0;
};

struct Stage2Operation {
    EditCommand op;
    std::string target_class;
    NormalizedBBox bbox;
    std::optional<std::string> mask_ref;
    std::optional<std::string> edit_kind;  // color_change | substitution (EDIT only)
    std::optional<std::string> substitution_target;  // filled by an external service
    InpaintParams inpaint;
    std::string which_side;  // original | edited
};

struct Stage2Record {
    std::string image_id;
    std::vector<Stage2Operation> operations;  // empty => unchanged image
    std::optional<int> jpeg_quality;          // set by plan_augmentation
};

struct OpBalance {
    double add = 0.268;
    double remove = 0.268;
    double edit = 0.268;
    double unchanged = 0.196;  // mirrors the 19k/97k unchanged share
};

struct Stage2Params {
    OpBalance balance;
    double min_area_frac = 0.03;
    double max_overlap = 0.05;  // intersection over the smaller box
    int max_objects = 4;
    double color_change_frac = 0.30;
    InpaintParams inpaint;
    std::vector<int> jpeg_qualities = {15, 50};
    double apply_probability = 0.5;
};

struct Stage2Manifest {
    std::uint64_t seed = 0;
    Stage2Params params;
    std::vector<Stage2Record> records;
};

Stage2Manifest build_stage2_manifest(const std::vector<AnnotatedImage>& corpus,
                                     std::uint64_t seed, const Stage2Params& params = {});

// Draws the per-record JPEG augmentation decision; deterministic in
// (manifest.seed, apply_probability).
void plan_augmentation(Stage2Manifest& manifest, double apply_probability);

// Post-hoc validation of the manifest constraints; returns human-readable
// violations (empty when valid).
std::vector<std::string> validate_stage2(const Stage2Manifest& manifest,
                                         const std::vector<AnnotatedImage>& corpus);

}  // namespace dice
