#pragma once

#include <map>
#include <string>
#include <vector>

#include "dice/types.hpp"

namespace dice {

// Greedy matching result at a single IoU threshold. Predictions are listed
// in evaluation order (non-increasing confidence, stable).
struct MatchResult {
    std::vector<double> confidences;
    std::vector<bool> true_positive;
    std::vector<bool> gt_matched;
};

MatchResult match_detections(const std::vector<Difference>& preds,
                             const std::vector<GroundTruthDifference>& gts, double iou_threshold,
                             bool class_aware);

// 101-point interpolated AP over a single ranked TP/FP list.
double average_precision(const MatchResult& match, int num_gts);

enum class APMode { ClassAgnostic, ClassAware };

struct APReport {
    double ap = 0.0;
    double ap50 = 0.0;
    double ap75 = 0.0;
    double ap_m = 0.0;
    double ap_l = 0.0;
    std::map<EditCommand, double> per_class;  // class-aware mode only
    APMode mode = APMode::ClassAgnostic;
};

struct DetectionCase {
    std::vector<Difference> preds;
    EditCase edit_case;  // must carry ground_truth
};

// Table-1 metric suite. PR curves are pooled globally across cases into a
// single ranked list; AP averages IoU thresholds 0.50:0.05:0.95; size
// buckets restrict ground truths to pixel areas [32^2, 96^2) and [96^2, inf).
APReport evaluate_detection(const std::vector<DetectionCase>& cases, APMode mode);

double coherence_accuracy(const std::vector<GroundTruthDifference>& gts,
                          const std::vector<CoherenceVerdict>& verdicts);

struct CoherenceCase {
    std::vector<Difference> preds;
    std::vector<CoherenceVerdict> verdicts;  // aligned with preds
    EditCase edit_case;
};

// Two-category AP (coherent / non-coherent) over detected areas.
APReport evaluate_coherence_ap(const std::vector<CoherenceCase>& cases);

inline const std::vector<double>& coco_iou_thresholds() {
    static const std::vector<double> t = {0.50, 0.55, 0.60, 0.65, 0.70,
                                          0.75, 0.80, 0.85, 0.90, 0.95};
    return t;
}

}  // namespace dice
