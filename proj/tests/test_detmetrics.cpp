#include <doctest.h>

#include <cmath>

#include "dice/detmetrics.hpp"
#include "dice/rng.hpp"
#include "oracles/ap_oracle.hpp"

using namespace dice;

namespace {

NormalizedBBox random_box(Rng& rng) {
    const double x0 = rng.uniform() * 0.7, y0 = rng.uniform() * 0.7;
    const double w = 0.02 + rng.uniform() * (1.0 - x0 - 0.02);
    const double h = 0.02 + rng.uniform() * (1.0 - y0 - 0.02);
    return {x0, y0, std::min(x0 + w, 1.0), std::min(y0 + h, 1.0)};
}

// Boxes biased to overlap an anchor, so matches at varied IoU actually occur.
NormalizedBBox jittered(Rng& rng, const NormalizedBBox& b) {
    const double dx = (rng.uniform() - 0.5) * 0.2 * b.width();
    const double dy = (rng.uniform() - 0.5) * 0.2 * b.height();
    const double x0 = std::clamp(b.x_min() + dx, 0.0, 0.98);
    const double y0 = std::clamp(b.y_min() + dy, 0.0, 0.98);
    const double x1 = std::clamp(b.x_max() + dx, x0 + 0.01, 1.0);
    const double y1 = std::clamp(b.y_max() + dy, y0 + 0.01, 1.0);
    return {x0, y0, x1, y1};
}

struct Fixture {
    std::vector<DetectionCase> cases;
    std::vector<oracle::Case> mirror;
};

Fixture random_fixture(Rng& rng, int n_cases, int max_gts, int max_preds) {
    Fixture f;
    for (int c = 0; c < n_cases; ++c) {
        DetectionCase dc;
        oracle::Case oc;
        dc.edit_case.case_id = "case_" + std::to_string(c);
        dc.edit_case.width = 300 + static_cast<int>(rng.uniform_int(400));
        dc.edit_case.height = 200 + static_cast<int>(rng.uniform_int(400));
        std::vector<GroundTruthDifference> gts;
        const std::size_t n_gt = rng.uniform_int(max_gts + 1);
        for (std::size_t i = 0; i < n_gt; ++i) {
            const auto box = random_box(rng);
            const auto cmd = kAllCommands[rng.uniform_int(3)];
            gts.push_back({cmd, "obj", box, std::nullopt});
            oc.gts.push_back({box, static_cast<int>(cmd),
                              pixel_area(box, dc.edit_case.width, dc.edit_case.height)});
        }
        const std::size_t n_pred = rng.uniform_int(max_preds + 1);
        for (std::size_t i = 0; i < n_pred; ++i) {
            NormalizedBBox box = n_gt > 0 && rng.bernoulli(0.7)
                                     ? jittered(rng, gts[rng.uniform_int(n_gt)].bbox)
                                     : random_box(rng);
            const auto cmd = kAllCommands[rng.uniform_int(3)];
            const double conf = rng.bernoulli(0.15) ? 0.5 : rng.uniform();  // some ties
            dc.preds.push_back({cmd, "obj", box, conf, false});
            oc.preds.push_back({box, static_cast<int>(cmd), conf,
                                pixel_area(box, dc.edit_case.width, dc.edit_case.height)});
        }
        dc.edit_case.ground_truth = gts;
        f.cases.push_back(std::move(dc));
        f.mirror.push_back(std::move(oc));
    }
    return f;
}

const std::vector<int> kCommandCats = {static_cast<int>(EditCommand::Add),
                                       static_cast<int>(EditCommand::Remove),
                                       static_cast<int>(EditCommand::Edit)};

}  // namespace

TEST_CASE("match_detections basics") {
    const NormalizedBBox gt_box(0.1, 0.1, 0.5, 0.5);
    const std::vector<GroundTruthDifference> gts = {
        {EditCommand::Add, "dog", gt_box, std::nullopt}};

    SUBCASE("single high-IoU prediction is a TP") {
        const std::vector<Difference> preds = {
            {EditCommand::Add, "dog", NormalizedBBox(0.1, 0.1, 0.5, 0.48), 0.9, false}};
        const auto m = match_detections(preds, gts, 0.5, false);
        CHECK(m.true_positive == std::vector<bool>{true});
        CHECK(m.gt_matched == std::vector<bool>{true});
    }
    SUBCASE("class mismatch under class-aware matching is a FP") {
        const std::vector<Difference> preds = {{EditCommand::Remove, "dog", gt_box, 0.9, false}};
        CHECK(match_detections(preds, gts, 0.5, true).true_positive == std::vector<bool>{false});
        CHECK(match_detections(preds, gts, 0.5, false).true_positive == std::vector<bool>{true});
    }
    SUBCASE("higher-confidence prediction wins a contested GT") {
        // conf 0.9 at IoU ~0.6, conf 0.8 at IoU ~0.8: greedy-by-confidence
        // gives the TP to the first
        const std::vector<Difference> preds = {
            {EditCommand::Add, "dog", NormalizedBBox(0.1, 0.1, 0.5, 0.34), 0.9, false},
            {EditCommand::Add, "dog", NormalizedBBox(0.1, 0.1, 0.5, 0.42), 0.8, false}};
        CHECK(iou(preds[0].bbox, gt_box) > 0.5);
        CHECK(iou(preds[1].bbox, gt_box) > 0.5);
        const auto m = match_detections(preds, gts, 0.5, false);
        CHECK(m.confidences == std::vector<double>{0.9, 0.8});
        CHECK(m.true_positive == std::vector<bool>{true, false});
    }
    SUBCASE("duplicates: exactly one TP") {
        const std::vector<Difference> preds = {{EditCommand::Add, "dog", gt_box, 0.9, false},
                                               {EditCommand::Add, "dog", gt_box, 0.8, false},
                                               {EditCommand::Add, "dog", gt_box, 0.7, false}};
        for (double thr : coco_iou_thresholds()) {
            const auto m = match_detections(preds, gts, thr, false);
            int tps = 0;
            for (bool t : m.true_positive) tps += t;
            CHECK(tps == 1);
        }
    }
}

TEST_CASE("average_precision spot values") {
    SUBCASE("perfect single detection") {
        MatchResult m{{1.0}, {true}, {true}};
        CHECK(average_precision(m, 1) == doctest::Approx(1.0));
    }
    SUBCASE("zero predictions with ground truth") {
        CHECK(average_precision(MatchResult{}, 3) == 0.0);
    }
    SUBCASE("both empty: conventional 1") {
        CHECK(average_precision(MatchResult{}, 0) == 1.0);
    }
}

TEST_CASE("single prediction at IoU exactly 0.6 gives 10-threshold AP 0.3") {
    DetectionCase dc;
    dc.edit_case.case_id = "c0";
    dc.edit_case.width = 100;
    dc.edit_case.height = 100;
    dc.edit_case.ground_truth = {
        {EditCommand::Add, "x", NormalizedBBox(0, 0, 1, 0.6), std::nullopt}};
    dc.preds = {{EditCommand::Add, "x", NormalizedBBox(0, 0, 1, 1), 1.0, false}};
    CHECK(iou(dc.preds[0].bbox, (*dc.edit_case.ground_truth)[0].bbox) == 0.6);
    const auto r = evaluate_detection({dc}, APMode::ClassAgnostic);
    CHECK(r.ap == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(r.ap50 == doctest::Approx(1.0));
    CHECK(r.ap75 == 0.0);
}

TEST_CASE("perfect detections give AP = AP50 = AP75 = 1") {
    Rng rng(5);
    std::vector<DetectionCase> cases;
    for (int c = 0; c < 4; ++c) {
        DetectionCase dc;
        dc.edit_case.case_id = "c" + std::to_string(c);
        dc.edit_case.width = 640;
        dc.edit_case.height = 480;
        std::vector<GroundTruthDifference> gts;
        for (int i = 0; i < 3; ++i) {
            const auto box = random_box(rng);
            const auto cmd = kAllCommands[rng.uniform_int(3)];
            gts.push_back({cmd, "o", box, std::nullopt});
            dc.preds.push_back({cmd, "o", box, 1.0, false});
        }
        dc.edit_case.ground_truth = gts;
        cases.push_back(std::move(dc));
    }
    for (APMode mode : {APMode::ClassAgnostic, APMode::ClassAware}) {
        const auto r = evaluate_detection(cases, mode);
        CHECK(r.ap == doctest::Approx(1.0));
        CHECK(r.ap50 == doctest::Approx(1.0));
        CHECK(r.ap75 == doctest::Approx(1.0));
    }
}

TEST_CASE("per-class AP is 0 for disjoint class assignment") {
    DetectionCase dc;
    dc.edit_case.case_id = "c0";
    dc.edit_case.width = 100;
    dc.edit_case.height = 100;
    const NormalizedBBox b(0.2, 0.2, 0.8, 0.8);
    dc.edit_case.ground_truth = {{EditCommand::Add, "x", b, std::nullopt}};
    dc.preds = {{EditCommand::Remove, "x", b, 1.0, false}};
    const auto r = evaluate_detection({dc}, APMode::ClassAware);
    CHECK(r.per_class.at(EditCommand::Add) == 0.0);
    CHECK(r.per_class.at(EditCommand::Remove) == 0.0);
    CHECK(r.ap == 0.0);
}

TEST_CASE("engine equals brute-force oracle on randomized fixtures") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto f = random_fixture(rng, 1 + static_cast<int>(rng.uniform_int(4)), 5, 7);

        const auto ag = evaluate_detection(f.cases, APMode::ClassAgnostic);
        const double inf = std::numeric_limits<double>::infinity();
        CHECK(ag.ap == doctest::Approx(oracle::ap_mean(f.mirror, -1, 0, inf)).epsilon(1e-9));
        CHECK(ag.ap50 == doctest::Approx(oracle::ap_at(f.mirror, 0.50, -1, 0, inf)).epsilon(1e-9));
        CHECK(ag.ap75 == doctest::Approx(oracle::ap_at(f.mirror, 0.75, -1, 0, inf)).epsilon(1e-9));
        CHECK(ag.ap_m ==
              doctest::Approx(oracle::ap_mean(f.mirror, -1, 32. * 32, 96. * 96)).epsilon(1e-9));
        CHECK(ag.ap_l == doctest::Approx(oracle::ap_mean(f.mirror, -1, 96. * 96, inf)).epsilon(1e-9));

        const auto cw = evaluate_detection(f.cases, APMode::ClassAware);
        CHECK(cw.ap ==
              doctest::Approx(oracle::ap_mean_over_categories(f.mirror, kCommandCats, 0, inf))
                  .epsilon(1e-9));
        CHECK(cw.ap50 == doctest::Approx(oracle::ap_mean_over_categories(f.mirror, kCommandCats,
                                                                         0, inf, 0.50))
                             .epsilon(1e-9));
    }
}

TEST_CASE("AP invariant under strictly monotone confidence transforms") {
    Rng rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        auto f = random_fixture(rng, 3, 5, 7);
        const auto base = evaluate_detection(f.cases, APMode::ClassAgnostic);
        for (auto& c : f.cases)
            for (auto& p : c.preds) p.confidence = p.confidence / (2.0 - p.confidence);
        const auto scaled = evaluate_detection(f.cases, APMode::ClassAgnostic);
        CHECK(scaled.ap == doctest::Approx(base.ap).epsilon(1e-12));
        CHECK(scaled.ap50 == doctest::Approx(base.ap50).epsilon(1e-12));
    }
}

TEST_CASE("adding a low-confidence false positive never increases AP") {
    Rng rng(321);
    for (int trial = 0; trial < 30; ++trial) {
        auto f = random_fixture(rng, 2, 4, 5);
        const auto base = evaluate_detection(f.cases, APMode::ClassAgnostic);
        // disjoint far-corner box below every existing confidence
        f.cases[0].preds.push_back(
            {EditCommand::Add, "noise", NormalizedBBox(0.99, 0.99, 1.0, 1.0), 1e-6, false});
        const auto with_fp = evaluate_detection(f.cases, APMode::ClassAgnostic);
        CHECK(with_fp.ap <= base.ap + 1e-12);
    }
}

// Class constraints can only shrink each prediction's match options. On
// fixtures where every prediction overlaps at most one ground truth the
// pooled class-constrained AP is bounded by the class-agnostic AP.
TEST_CASE("class constraint cannot beat agnostic matching (restricted fixtures)") {
    Rng rng(555);
    for (int trial = 0; trial < 50; ++trial) {
        oracle::Case oc;
        const int n_gt = 1 + static_cast<int>(rng.uniform_int(4));
        for (int i = 0; i < n_gt; ++i) {
            // widely separated small boxes: one potential match per pred
            const double x0 = 0.25 * i, y0 = 0.0;
            oc.gts.push_back({NormalizedBBox(x0 + 0.02, y0 + 0.02, x0 + 0.2, 0.2),
                              static_cast<int>(rng.uniform_int(3)), 10000});
        }
        const int n_pred = static_cast<int>(rng.uniform_int(7));
        for (int i = 0; i < n_pred; ++i) {
            const int g = static_cast<int>(rng.uniform_int(n_gt));
            const auto& gb = oc.gts[g].box;
            const double shrink = rng.uniform() * 0.1;
            oc.preds.push_back({NormalizedBBox(gb.x_min(), gb.y_min(), gb.x_max() - shrink,
                                               gb.y_max() - shrink),
                                static_cast<int>(rng.uniform_int(3)), rng.uniform(), 10000});
        }
        for (double thr : oracle::thresholds()) {
            const double inf = std::numeric_limits<double>::infinity();
            const double agnostic = oracle::ap_at({oc}, thr, -1, 0, inf);

            // pooled class-constrained list: match within each category, keep
            // one global ranked list and the full GT count
            std::vector<oracle::Entry> entries;
            std::vector<bool> taken(oc.gts.size(), false);
            std::vector<std::size_t> order(oc.preds.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return oc.preds[a].conf > oc.preds[b].conf;
            });
            int rank = 0;
            for (std::size_t pi : order) {
                const auto& p = oc.preds[pi];
                int best = -1;
                double best_iou = 0.0;
                for (std::size_t g = 0; g < oc.gts.size(); ++g) {
                    if (taken[g] || oc.gts[g].category != p.category) continue;
                    const double v = oracle::box_iou(p.box, oc.gts[g].box);
                    if (v >= thr && v > best_iou) {
                        best_iou = v;
                        best = static_cast<int>(g);
                    }
                }
                if (best >= 0) taken[static_cast<std::size_t>(best)] = true;
                entries.push_back({p.conf, best >= 0, 0, rank++});
            }
            int tp = 0;
            std::vector<double> prec(entries.size()), rec(entries.size());
            for (std::size_t i = 0; i < entries.size(); ++i) {
                if (entries[i].tp) ++tp;
                prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
                rec[i] = oc.gts.empty() ? 0.0 : static_cast<double>(tp) / oc.gts.size();
            }
            double sum = 0.0;
            for (int r = 0; r <= 100; ++r) {
                double best_p = 0.0;
                for (std::size_t i = 0; i < entries.size(); ++i)
                    if (rec[i] >= r / 100.0) best_p = std::max(best_p, prec[i]);
                sum += best_p;
            }
            const double constrained = entries.empty() ? 1.0 : sum / 101.0;
            if (!entries.empty()) CHECK(agnostic >= constrained - 1e-12);
        }
    }
}

TEST_CASE("coherence_accuracy") {
    std::vector<GroundTruthDifference> gts;
    std::vector<CoherenceVerdict> verdicts;
    for (int i = 0; i < 13; ++i) {
        gts.push_back({EditCommand::Add, "o", NormalizedBBox(0.1, 0.1, 0.5, 0.5), i % 2 == 0});
        verdicts.push_back({i % 2 == 0, "", false});
    }
    CHECK(coherence_accuracy(gts, verdicts) == doctest::Approx(1.0));

    // flip two verdicts: 11/13
    verdicts[0].decision = !verdicts[0].decision;
    verdicts[5].decision = !verdicts[5].decision;
    CHECK(coherence_accuracy(gts, verdicts) == doctest::Approx(11.0 / 13.0));

    for (auto& v : verdicts) v.decision = !*gts[&v - verdicts.data()].coherent;
    CHECK(coherence_accuracy(gts, verdicts) == 0.0);

    verdicts.pop_back();
    CHECK_THROWS_AS(coherence_accuracy(gts, verdicts), std::invalid_argument);
}

TEST_CASE("coherence AP over detected areas") {
    Rng rng(42);
    SUBCASE("detector output equals GT and verdicts equal flags: AP 1") {
        std::vector<CoherenceCase> cases;
        for (int c = 0; c < 3; ++c) {
            CoherenceCase cc;
            cc.edit_case.case_id = "c" + std::to_string(c);
            cc.edit_case.width = 200;
            cc.edit_case.height = 200;
            std::vector<GroundTruthDifference> gts;
            for (int i = 0; i < 2; ++i) {
                const auto box = random_box(rng);
                const bool coherent = rng.bernoulli(0.5);
                gts.push_back({EditCommand::Add, "o", box, coherent});
                cc.preds.push_back({EditCommand::Add, "o", box, 1.0, false});
                cc.verdicts.push_back({coherent, "", false});
            }
            cc.edit_case.ground_truth = gts;
            cases.push_back(std::move(cc));
        }
        const auto r = evaluate_coherence_ap(cases);
        CHECK(r.ap == doctest::Approx(1.0));
        CHECK(r.ap50 == doctest::Approx(1.0));
        CHECK(r.ap75 == doctest::Approx(1.0));

        // flipping every verdict sends AP to 0
        for (auto& cc : cases)
            for (auto& v : cc.verdicts) v.decision = !v.decision;
        const auto flipped = evaluate_coherence_ap(cases);
        CHECK(flipped.ap == 0.0);
    }
    SUBCASE("mixed fixture equals two-category oracle") {
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<CoherenceCase> cases;
            std::vector<oracle::Case> mirror;
            for (int c = 0; c < 3; ++c) {
                CoherenceCase cc;
                oracle::Case oc;
                cc.edit_case.case_id = "c" + std::to_string(c);
                cc.edit_case.width = 300;
                cc.edit_case.height = 300;
                std::vector<GroundTruthDifference> gts;
                const std::size_t n_gt = rng.uniform_int(4);
                for (std::size_t i = 0; i < n_gt; ++i) {
                    const auto box = random_box(rng);
                    const bool coherent = rng.bernoulli(0.5);
                    gts.push_back({EditCommand::Add, "o", box, coherent});
                    oc.gts.push_back({box, coherent ? 1 : 0, pixel_area(box, 300, 300)});
                }
                const std::size_t n_pred = rng.uniform_int(5);
                for (std::size_t i = 0; i < n_pred; ++i) {
                    const NormalizedBBox box = n_gt > 0 && rng.bernoulli(0.7)
                                                   ? jittered(rng, gts[rng.uniform_int(n_gt)].bbox)
                                                   : random_box(rng);
                    const double conf = rng.uniform();
                    const bool decision = rng.bernoulli(0.5);
                    cc.preds.push_back({EditCommand::Add, "o", box, conf, false});
                    cc.verdicts.push_back({decision, "", false});
                    oc.preds.push_back({box, decision ? 1 : 0, conf, pixel_area(box, 300, 300)});
                }
                cc.edit_case.ground_truth = gts;
                cases.push_back(std::move(cc));
                mirror.push_back(std::move(oc));
            }
            const auto r = evaluate_coherence_ap(cases);
            CHECK(r.ap == doctest::Approx(oracle::ap_mean_over_categories(mirror, {0, 1}, 0,
                                                                          1e300))
                              .epsilon(1e-9));
            CHECK(r.ap50 == doctest::Approx(oracle::ap_mean_over_categories(mirror, {0, 1}, 0,
                                                                            1e300, 0.50))
                                .epsilon(1e-9));
        }
    }
}
