#include "dice/detmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dice {

namespace {

constexpr double kAreaM = 32.0 * 32.0;
constexpr double kAreaL = 96.0 * 96.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct DetItem {
    NormalizedBBox box;
    int category;  // EditCommand ordinal or coherence flag; -1 unused
    double conf;
    double parea;  // pixel area
};

struct GtItem {
    NormalizedBBox box;
    int category;
    double parea;
};

struct RankedEntry {
    double conf;
    bool tp;
};

// Greedy per-case matching at one threshold within one category slice.
// Predictions already sorted by descending confidence. When an area range is
// active, ground truths outside the range are excluded and unmatched
// predictions whose own area is outside the range are ignored (not FP).
void evaluate_case_slice(const std::vector<const DetItem*>& preds,
                         const std::vector<const GtItem*>& gts, double thr, double area_lo,
                         double area_hi, std::vector<RankedEntry>& out, int& num_gts) {
    std::vector<const GtItem*> in_range;
    for (const GtItem* g : gts)
        if (g->parea >= area_lo && g->parea < area_hi) in_range.push_back(g);
    num_gts += static_cast<int>(in_range.size());

    std::vector<bool> matched(in_range.size(), false);
    const bool restricted = area_lo > 0.0 || area_hi < kInf;
    for (const DetItem* p : preds) {
        double best_iou = 0.0;
        std::ptrdiff_t best = -1;
        for (std::size_t g = 0; g < in_range.size(); ++g) {
            if (matched[g]) continue;
            const double v = iou(p->box, in_range[g]->box);
            if (v >= thr && v > best_iou) {
                best_iou = v;
                best = static_cast<std::ptrdiff_t>(g);
            }
        }
        if (best >= 0) {
            matched[static_cast<std::size_t>(best)] = true;
            out.push_back({p->conf, true});
        } else if (restricted && (p->parea < area_lo || p->parea >= area_hi)) {
            // ignored: out-of-bucket prediction with no in-bucket match
        } else {
            out.push_back({p->conf, false});
        }
    }
}

double ap_from_entries(std::vector<RankedEntry> entries, int num_gts) {
    if (num_gts == 0) return entries.empty() ? 1.0 : 0.0;
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RankedEntry& a, const RankedEntry& b) { return a.conf > b.conf; });
    std::vector<double> precision(entries.size()), recall(entries.size());
    int tp = 0, fp = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        entries[i].tp ? ++tp : ++fp;
        precision[i] = static_cast<double>(tp) / (tp + fp);
        recall[i] = static_cast<double>(tp) / num_gts;
    }
    // interpolate: precision at each point becomes max precision to the right
    for (std::size_t i = precision.size(); i-- > 1;)
        precision[i - 1] = std::max(precision[i - 1], precision[i]);

    double sum = 0.0;
    std::size_t j = 0;
    for (int r = 0; r <= 100; ++r) {
        const double target = r / 100.0;
        while (j < recall.size() && recall[j] < target) ++j;
        if (j < recall.size()) sum += precision[j];
    }
    return sum / 101.0;
}

class Evaluator {
  public:
    Evaluator(std::vector<std::vector<DetItem>> preds, std::vector<std::vector<GtItem>> gts)
        : preds_(std::move(preds)), gts_(std::move(gts)) {
        // evaluation order: stable sort by descending confidence per case
        for (auto& case_preds : preds_) {
            std::stable_sort(
                case_preds.begin(), case_preds.end(),
                [](const DetItem& a, const DetItem& b) { return a.conf > b.conf; });
        }
    }

    // Pooled AP at one threshold; category < 0 means class-agnostic.
    double ap_at(double thr, int category, double area_lo, double area_hi) const {
        std::vector<RankedEntry> entries;
        int num_gts = 0;
        for (std::size_t c = 0; c < preds_.size(); ++c) {
            std::vector<const DetItem*> p;
            for (const DetItem& d : preds_[c])
                if (category < 0 || d.category == category) p.push_back(&d);
            std::vector<const GtItem*> g;
            for (const GtItem& gt : gts_[c])
                if (category < 0 || gt.category == category) g.push_back(&gt);
            evaluate_case_slice(p, g, thr, area_lo, area_hi, entries, num_gts);
        }
        return ap_from_entries(std::move(entries), num_gts);
    }

    double ap_mean(int category, double area_lo, double area_hi) const {
        double s = 0.0;
        for (double t : coco_iou_thresholds()) s += ap_at(t, category, area_lo, area_hi);
        return s / coco_iou_thresholds().size();
    }

    bool category_present(int category) const {
        for (const auto& v : preds_)
            for (const auto& d : v)
                if (d.category == category) return true;
        for (const auto& v : gts_)
            for (const auto& g : v)
                if (g.category == category) return true;
        return false;
    }

    APReport report(APMode mode, const std::vector<int>& categories) const {
        APReport r;
        r.mode = mode;
        if (mode == APMode::ClassAgnostic) {
            r.ap = ap_mean(-1, 0.0, kInf);
            r.ap50 = ap_at(0.50, -1, 0.0, kInf);
            r.ap75 = ap_at(0.75, -1, 0.0, kInf);
            r.ap_m = ap_mean(-1, kAreaM, kAreaL);
            r.ap_l = ap_mean(-1, kAreaL, kInf);
            return r;
        }
        std::vector<int> present;
        for (int c : categories)
            if (category_present(c)) present.push_back(c);
        if (present.empty()) {
            r.ap = r.ap50 = r.ap75 = r.ap_m = r.ap_l = 1.0;  // vacuously empty input
            return r;
        }
        double ap = 0, ap50 = 0, ap75 = 0, apm = 0, apl = 0;
        for (int c : present) {
            const double c_ap = ap_mean(c, 0.0, kInf);
            r.per_class[static_cast<EditCommand>(c)] = c_ap;
            ap += c_ap;
            ap50 += ap_at(0.50, c, 0.0, kInf);
            ap75 += ap_at(0.75, c, 0.0, kInf);
            apm += ap_mean(c, kAreaM, kAreaL);
            apl += ap_mean(c, kAreaL, kInf);
        }
        const double n = static_cast<double>(present.size());
        r.ap = ap / n;
        r.ap50 = ap50 / n;
        r.ap75 = ap75 / n;
        r.ap_m = apm / n;
        r.ap_l = apl / n;
        return r;
    }

  private:
    std::vector<std::vector<DetItem>> preds_;
    std::vector<std::vector<GtItem>> gts_;
};

}  // namespace

MatchResult match_detections(const std::vector<Difference>& preds,
                             const std::vector<GroundTruthDifference>& gts, double iou_threshold,
                             bool class_aware) {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
        throw std::invalid_argument("iou_threshold must be in (0, 1]");
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return preds[a].confidence > preds[b].confidence;
    });

    MatchResult result;
    result.gt_matched.assign(gts.size(), false);
    for (std::size_t idx : order) {
        const Difference& p = preds[idx];
        double best_iou = 0.0;
        std::ptrdiff_t best = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (result.gt_matched[g]) continue;
            if (class_aware && gts[g].command != p.command) continue;
            const double v = iou(p.bbox, gts[g].bbox);
            if (v >= iou_threshold && v > best_iou) {
                best_iou = v;
                best = static_cast<std::ptrdiff_t>(g);
            }
        }
        result.confidences.push_back(p.confidence);
        result.true_positive.push_back(best >= 0);
        if (best >= 0) result.gt_matched[static_cast<std::size_t>(best)] = true;
    }
    return result;
}

double average_precision(const MatchResult& match, int num_gts) {
    if (num_gts < 0) throw std::invalid_argument("num_gts must be >= 0");
    std::vector<RankedEntry> entries;
    entries.reserve(match.confidences.size());
    for (std::size_t i = 0; i < match.confidences.size(); ++i)
        entries.push_back({match.confidences[i], match.true_positive[i]});
    return ap_from_entries(std::move(entries), num_gts);
}

APReport evaluate_detection(const std::vector<DetectionCase>& cases, APMode mode) {
    std::vector<std::vector<DetItem>> preds;
    std::vector<std::vector<GtItem>> gts;
    for (const DetectionCase& c : cases) {
        if (!c.edit_case.ground_truth)
            throw std::invalid_argument("case lacks ground truth: " + c.edit_case.case_id);
        const int w = c.edit_case.width, h = c.edit_case.height;
        std::vector<DetItem> p;
        for (const Difference& d : c.preds)
            p.push_back({d.bbox, static_cast<int>(d.command), d.confidence,
                         pixel_area(d.bbox, w, h)});
        std::vector<GtItem> g;
        for (const GroundTruthDifference& gt : *c.edit_case.ground_truth)
            g.push_back({gt.bbox, static_cast<int>(gt.command), pixel_area(gt.bbox, w, h)});
        preds.push_back(std::move(p));
        gts.push_back(std::move(g));
    }
    Evaluator ev(std::move(preds), std::move(gts));
    return ev.report(mode, {static_cast<int>(EditCommand::Add), static_cast<int>(EditCommand::Remove),
                            static_cast<int>(EditCommand::Edit)});
}

double coherence_accuracy(const std::vector<GroundTruthDifference>& gts,
                          const std::vector<CoherenceVerdict>& verdicts) {
    if (gts.size() != verdicts.size())
        throw std::invalid_argument("verdicts must align one-to-one with ground truths");
    if (gts.empty()) throw std::invalid_argument("coherence_accuracy over empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gts.size(); ++i) {
        if (!gts[i].coherent)
            throw std::invalid_argument("ground truth lacks coherence label");
        if (*gts[i].coherent == verdicts[i].decision) ++correct;
    }
    return static_cast<double>(correct) / gts.size();
}

APReport evaluate_coherence_ap(const std::vector<CoherenceCase>& cases) {
    std::vector<std::vector<DetItem>> preds;
    std::vector<std::vector<GtItem>> gts;
    for (const CoherenceCase& c : cases) {
        if (!c.edit_case.ground_truth)
            throw std::invalid_argument("case lacks ground truth: " + c.edit_case.case_id);
        if (c.verdicts.size() != c.preds.size())
            throw std::invalid_argument("verdicts must align with predictions: " +
                                        c.edit_case.case_id);
        const int w = c.edit_case.width, h = c.edit_case.height;
        std::vector<DetItem> p;
        for (std::size_t i = 0; i < c.preds.size(); ++i)
            p.push_back({c.preds[i].bbox, c.verdicts[i].decision ? 1 : 0,
                         c.preds[i].confidence, pixel_area(c.preds[i].bbox, w, h)});
        std::vector<GtItem> g;
        for (const GroundTruthDifference& gt : *c.edit_case.ground_truth) {
            if (!gt.coherent)
                throw std::invalid_argument("ground truth lacks coherence label: " +
                                            c.edit_case.case_id);
            g.push_back({gt.bbox, *gt.coherent ? 1 : 0, pixel_area(gt.bbox, w, h)});
        }
        preds.push_back(std::move(p));
        gts.push_back(std::move(g));
    }
    Evaluator ev(std::move(preds), std::move(gts));
    APReport r = ev.report(APMode::ClassAware, {0, 1});
    r.per_class.clear();  // categories are coherence flags, not commands
    return r;
}

}  // namespace dice
