#include <doctest.h>

#include <cmath>

#include "dice/evalcomp.hpp"
#include "dice/image_io.hpp"
#include "dice/mock_server.hpp"
#include "dice/rng.hpp"

using namespace dice;

namespace {

std::shared_ptr<ScriptedBackend> mock_backend() {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->embedder = [](const std::string& kind, const std::string& payload) {
        if (kind == "image") {
            const std::vector<std::uint8_t> bytes(payload.begin(), payload.end());
            return mock_image_embedding(decode_image(bytes));
        }
        return mock_text_embedding(payload);
    };
    return backend;
}

Gateway mock_gateway(Rgb orig_color, Rgb edit_color, int w = 100, int h = 100) {
    Gateway gw(mock_backend());
    gw.load = [=](const std::string& path) {
        return Image(w, h, path == "orig" ? orig_color : edit_color);
    };
    return gw;
}

EditCase make_case(const std::string& id = "case_1") {
    EditCase c;
    c.case_id = id;
    c.original_image = "orig";
    c.edited_image = "edit";
    c.prompt = "edit something";
    c.width = 100;
    c.height = 100;
    return c;
}

double cosine4(std::array<double, 4> a, std::array<double, 4> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < 4; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

NormalizedBBox random_box(Rng& rng) {
    const double x0 = rng.uniform() * 0.8, y0 = rng.uniform() * 0.8;
    return {x0, y0, x0 + 0.05 + rng.uniform() * (1.0 - x0 - 0.05),
            y0 + 0.05 + rng.uniform() * (1.0 - y0 - 0.05)};
}

const CoherenceVerdict kYes{true, "", false};
const CoherenceVerdict kNo{false, "", false};

}  // namespace

TEST_CASE("mask selection and identity") {
    const std::vector<Difference> diffs = {
        {EditCommand::Add, "a", NormalizedBBox(0.1, 0.1, 0.4, 0.4)},
        {EditCommand::Remove, "b", NormalizedBBox(0.5, 0.5, 0.9, 0.9)}};
    const std::vector<CoherenceVerdict> verdicts = {kYes, kNo};
    const Image img(64, 64, Rgb{30, 60, 90});

    SUBCASE("policy none masks nothing, bit-exact") {
        const auto boxes = select_mask_boxes(diffs, verdicts, {MaskPolicyKind::None}, "c");
        CHECK(boxes.empty());
        CHECK(apply_mask(img, boxes, kBlack) == img);
    }
    SUBCASE("coherent policy with zero coherent verdicts equals none") {
        const auto boxes = select_mask_boxes(
            diffs, {kNo, kNo}, {MaskPolicyKind::CoherentDifferences}, "c");
        CHECK(apply_mask(img, boxes, kBlack) == img);
    }
    SUBCASE("policy splits by verdict") {
        const auto coherent = select_mask_boxes(
            diffs, verdicts, {MaskPolicyKind::CoherentDifferences}, "c");
        REQUIRE(coherent.size() == 1);
        CHECK(coherent[0] == diffs[0].bbox);
        const auto non = select_mask_boxes(
            diffs, verdicts, {MaskPolicyKind::NonCoherentDifferences}, "c");
        REQUIRE(non.size() == 1);
        CHECK(non[0] == diffs[1].bbox);
        CHECK(select_mask_boxes(diffs, verdicts, {MaskPolicyKind::AllDifferences}, "c").size() ==
              2);
    }
    SUBCASE("verdict misalignment is an error") {
        CHECK_THROWS_AS(
            select_mask_boxes(diffs, {kYes}, {MaskPolicyKind::CoherentDifferences}, "c"),
            std::invalid_argument);
    }
    SUBCASE("random areas keep sizes, are deterministic and in range") {
        MaskPolicy policy{MaskPolicyKind::RandomAreas, kBlack, 99};
        const auto b1 = select_mask_boxes(diffs, verdicts, policy, "case_a");
        const auto b2 = select_mask_boxes(diffs, verdicts, policy, "case_a");
        REQUIRE(b1.size() == 2);
        CHECK(b1[0] == b2[0]);
        CHECK(b1[1] == b2[1]);
        for (std::size_t i = 0; i < b1.size(); ++i) {
            CHECK(b1[i].width() == doctest::Approx(diffs[i].bbox.width()));
            CHECK(b1[i].height() == doctest::Approx(diffs[i].bbox.height()));
            CHECK(b1[i].x_max() <= 1.0);
            CHECK(b1[i].y_max() <= 1.0);
        }
        // a different case id draws different placements
        const auto b3 = select_mask_boxes(diffs, verdicts, policy, "case_b");
        CHECK(b1[0] != b3[0]);
    }
}

TEST_CASE("clip_i") {
    SUBCASE("identical images, policy none, score 1") {
        auto gw = mock_gateway({120, 10, 10}, {120, 10, 10});
        CHECK(clip_i(gw, make_case(), {}, {}, {MaskPolicyKind::None}) ==
              doctest::Approx(1.0));
    }
    SUBCASE("coherent policy with no coherent diffs equals policy none") {
        auto gw = mock_gateway({200, 100, 50}, {100, 150, 200});
        const std::vector<Difference> diffs = {
            {EditCommand::Add, "a", NormalizedBBox(0.0, 0.0, 0.5, 0.5)}};
        const double with_policy = clip_i(gw, make_case(), diffs, {kNo},
                                          {MaskPolicyKind::CoherentDifferences});
        const double without = clip_i(gw, make_case(), diffs, {kNo}, {MaskPolicyKind::None});
        CHECK(with_policy == without);
    }
    SUBCASE("masked score equals the hand-computed mean-pixel cosine") {
        // 100x100 flat images; box [0,0,0.5,0.5] blacks out exactly 2500 of
        // 10000 pixels, scaling each mean by 0.75
        auto gw = mock_gateway({200, 100, 50}, {100, 150, 200});
        const std::vector<Difference> diffs = {
            {EditCommand::Edit, "a", NormalizedBBox(0.0, 0.0, 0.5, 0.5)}};
        const double got = clip_i(gw, make_case(), diffs, {kYes},
                                  {MaskPolicyKind::CoherentDifferences});
        const double expect = cosine4(
            {0.75 * 200 / 255, 0.75 * 100 / 255, 0.75 * 50 / 255, 1.0},
            {0.75 * 100 / 255, 0.75 * 150 / 255, 0.75 * 200 / 255, 1.0});
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("clip_t") {
    auto gw = mock_gateway({10, 20, 30}, {90, 80, 70});
    const std::string caption = "a stretch of empty beach";

    SUBCASE("zero differences: every policy equals unmasked") {
        const double none = clip_t(gw, make_case(), {}, {}, caption, {MaskPolicyKind::None});
        for (auto kind : {MaskPolicyKind::AllDifferences, MaskPolicyKind::CoherentDifferences,
                          MaskPolicyKind::NonCoherentDifferences, MaskPolicyKind::RandomAreas})
            CHECK(clip_t(gw, make_case(), {}, {}, caption, {kind}) == none);
        CHECK(none >= -1.0);
        CHECK(none <= 1.0);
    }
    SUBCASE("full-image mask stays finite and bounded") {
        const std::vector<Difference> diffs = {
            {EditCommand::Edit, "x", NormalizedBBox(0.0, 0.0, 1.0, 1.0)}};
        const double v =
            clip_t(gw, make_case(), diffs, {kYes}, caption, {MaskPolicyKind::AllDifferences});
        CHECK(std::isfinite(v));
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("union_area") {
    SUBCASE("inclusion-exclusion on overlapping pair") {
        const NormalizedBBox a(0.0, 0.0, 0.5, 0.5), b(0.25, 0.25, 0.75, 0.75);
        CHECK(union_area({a, b}) == doctest::Approx(0.25 + 0.25 - 0.0625).epsilon(1e-12));
        CHECK(union_area({a}) == doctest::Approx(0.25));
        CHECK(union_area({}) == 0.0);
        CHECK(union_area({a, a, a}) == doctest::Approx(0.25));
    }
    SUBCASE("matches the pixel-grid oracle within 0.2 percentage points") {
        Rng rng(123);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<NormalizedBBox> boxes;
            const std::size_t n = 1 + rng.uniform_int(5);
            for (std::size_t i = 0; i < n; ++i) boxes.push_back(random_box(rng));

            std::size_t covered = 0;
            for (int px = 0; px < 1000; ++px)
                for (int py = 0; py < 1000; ++py) {
                    const double cx = (px + 0.5) / 1000.0, cy = (py + 0.5) / 1000.0;
                    for (const auto& b : boxes)
                        if (cx >= b.x_min() && cx < b.x_max() && cy >= b.y_min() &&
                            cy < b.y_max()) {
                            ++covered;
                            break;
                        }
                }
            const double oracle = covered / 1e6;
            const double got = union_area(boxes);
            CHECK(got <= 1.0 + 1e-12);
            CHECK(std::abs(got - oracle) < 0.002);
        }
    }
}

TEST_CASE("ranking_axes") {
    const NormalizedBBox small(0.1, 0.1, 0.5, 0.5);          // area 0.16
    const NormalizedBBox big_a(0.0, 0.0, 0.5, 0.5);          // union with big_b: 0.4375
    const NormalizedBBox big_b(0.25, 0.25, 0.75, 0.75);

    std::vector<CaseRun> runs;
    runs.push_back({make_case("c1"), {{EditCommand::Add, "x", small}}, {kYes}});
    runs.push_back({make_case("c2"), {{EditCommand::Add, "x", small}}, {kNo}});
    runs.push_back({make_case("c3"), {}, {}});
    runs.push_back({make_case("c4"),
                    {{EditCommand::Edit, "x", small},
                     {EditCommand::Add, "y", big_a},
                     {EditCommand::Remove, "z", big_b}},
                    {kYes, kNo, kNo}});

    SUBCASE("hand-computed fixture") {
        const auto report = ranking_axes(runs);
        CHECK(report.correct_edits_pct == doctest::Approx(50.0));
        CHECK(report.no_visual_change_pct == doctest::Approx(25.0));
        // (0 + 0.16 + 0 + 0.4375) / 4 * 100
        CHECK(report.unwanted_edit_area_pct == doctest::Approx(14.9375).epsilon(1e-12));
    }
    SUBCASE("all-empty detections") {
        std::vector<CaseRun> empty = {{make_case("c1"), {}, {}}, {make_case("c2"), {}, {}}};
        const auto report = ranking_axes(empty);
        CHECK(report.correct_edits_pct == 0.0);
        CHECK(report.unwanted_edit_area_pct == 0.0);
        CHECK(report.no_visual_change_pct == 100.0);
    }
    SUBCASE("permutation invariance") {
        auto shuffled = runs;
        std::swap(shuffled[0], shuffled[3]);
        std::swap(shuffled[1], shuffled[2]);
        const auto a = ranking_axes(runs);
        const auto b = ranking_axes(shuffled);
        CHECK(a.correct_edits_pct == b.correct_edits_pct);
        CHECK(a.unwanted_edit_area_pct == b.unwanted_edit_area_pct);
        CHECK(a.no_visual_change_pct == b.no_visual_change_pct);
    }
    SUBCASE("confidence floor drops low-confidence differences") {
        std::vector<CaseRun> low = {{make_case("c1"),
                                     {{EditCommand::Add, "x", small, 0.4, false}},
                                     {kYes}}};
        const auto report = ranking_axes(low, 0.5);
        CHECK(report.correct_edits_pct == 0.0);
        CHECK(report.no_visual_change_pct == 100.0);
    }
    SUBCASE("ranking_table enforces identical case sets") {
        std::map<std::string, std::vector<CaseRun>> models;
        models["m1"] = runs;
        models["m2"] = runs;
        const auto table = ranking_table(models);
        CHECK(table.at("m1").correct_edits_pct == table.at("m2").correct_edits_pct);

        models["m2"].pop_back();
        CHECK_THROWS_AS(ranking_table(models), std::invalid_argument);
    }
}

TEST_CASE("correlate") {
    SUBCASE("perfect monotone linear") {
        const std::vector<double> x = {1, 2, 3, 4, 5};
        const std::vector<double> y = {3, 5, 7, 9, 11};
        const auto r = correlate(x, y);
        CHECK(r.pearson == doctest::Approx(1.0));
        CHECK(r.spearman == doctest::Approx(1.0));
        CHECK(r.kendall == doctest::Approx(1.0));
        CHECK(r.sample_count == 5);
    }
    SUBCASE("perfect inverse") {
        const std::vector<double> x = {1, 2, 3, 4};
        const std::vector<double> y = {-1, -2, -3, -4};
        const auto r = correlate(x, y);
        CHECK(r.pearson == doctest::Approx(-1.0));
        CHECK(r.spearman == doctest::Approx(-1.0));
        CHECK(r.kendall == doctest::Approx(-1.0));
    }
    SUBCASE("rank fixture: spearman 0.7, kendall tau-b 0.6") {
        const std::vector<double> x = {1, 2, 3, 4, 5};
        const std::vector<double> y = {2, 3, 1, 4, 5};
        const auto r = correlate(x, y);
        CHECK(r.spearman == doctest::Approx(0.7).epsilon(1e-12));
        CHECK(r.kendall == doctest::Approx(0.6).epsilon(1e-12));
    }
    SUBCASE("errors") {
        CHECK_THROWS_WITH(correlate({1, 1, 1}, {1, 2, 3}), "undefined correlation");
        CHECK_THROWS_WITH(correlate({1, 2, 3}, {5, 5, 5}), "undefined correlation");
        CHECK_THROWS_AS(correlate({1, 2}, {1, 2}), std::invalid_argument);
        CHECK_THROWS_AS(correlate({1, 2, 3}, {1, 2}), std::invalid_argument);
    }
    SUBCASE("invariance properties (1000 trials)") {
        Rng rng(77);
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t n = 4 + rng.uniform_int(8);
            std::vector<double> x, y;
            for (std::size_t i = 0; i < n; ++i) {
                x.push_back(rng.uniform());
                y.push_back(rng.uniform());
            }
            const auto base = correlate(x, y);

            // positive affine transform preserves all three
            std::vector<double> ax;
            for (double v : x) ax.push_back(2.5 * v + 7.0);
            const auto affine = correlate(ax, y);
            CHECK(affine.pearson == doctest::Approx(base.pearson).epsilon(1e-9));
            CHECK(affine.spearman == doctest::Approx(base.spearman).epsilon(1e-9));
            CHECK(affine.kendall == doctest::Approx(base.kendall).epsilon(1e-9));

            // strictly monotone transform preserves the rank coefficients
            std::vector<double> mx;
            for (double v : x) mx.push_back(std::exp(3.0 * v) + v * v * v);
            const auto mono = correlate(mx, y);
            CHECK(mono.spearman == doctest::Approx(base.spearman).epsilon(1e-9));
            CHECK(mono.kendall == doctest::Approx(base.kendall).epsilon(1e-9));
        }
    }
}

TEST_CASE("correlation_study") {
    auto backend = mock_backend();
    Gateway gw(backend);
    // distinct flat images per case id so metric scores vary
    gw.load = [](const std::string& path) {
        Image img(50, 50, Rgb{40, 40, 40});
        if (!path.empty()) {
            const auto v = static_cast<std::uint8_t>(37 + 53 * (path.back() - '0') + path.size());
            img = Image(50, 50, Rgb{v, static_cast<std::uint8_t>(255 - v), 128});
        }
        return img;
    };

    std::vector<StudyCase> cases;
    for (int i = 0; i < 6; ++i) {
        EditCase c;
        c.case_id = "s" + std::to_string(i);
        c.original_image = "o" + std::to_string(i);
        c.edited_image = "e" + std::to_string(i);
        c.prompt = "edit " + std::to_string(i);
        c.width = c.height = 50;
        c.human_ratings = HumanRatings{1 + i % 5, 5 - i % 5};
        StudyCase sc;
        sc.run.edit_case = c;
        sc.run.diffs = {{EditCommand::Edit, "thing",
                         NormalizedBBox(0.1 * (i + 1) - 0.05, 0.1, 0.1 * (i + 1) + 0.2, 0.6)}};
        sc.run.verdicts = {i % 2 == 0 ? kYes : kNo};
        sc.target_caption = "target caption " + std::to_string(i);
        cases.push_back(std::move(sc));
    }

    SUBCASE("eight rows with the expected labels") {
        const auto rows = correlation_study(gw, cases, 5);
        REQUIRE(rows.size() == 8);
        for (int i = 0; i < 4; ++i) {
            CHECK(rows[i].metric == "CLIP-I");
            CHECK(rows[i].human_dimension == "background_preservation");
        }
        for (int i = 4; i < 8; ++i) {
            CHECK(rows[i].metric == "CLIP-T");
            CHECK(rows[i].human_dimension == "prompt_adherence");
        }
        CHECK(rows[0].policy == "none");
        CHECK(rows[1].policy == "random_areas");
        CHECK(rows[2].policy == "all_differences");
        CHECK(rows[3].policy == "coherent_differences");
        CHECK(rows[7].policy == "non_coherent_differences");
        for (const auto& row : rows) {
            REQUIRE(row.report.has_value());
            CHECK(row.report->sample_count == 6);
            CHECK(row.excluded == 0);
            CHECK(std::abs(row.report->pearson) <= 1.0 + 1e-12);
        }
        // deterministic rerun
        const auto rerun = correlation_study(gw, cases, 5);
        for (std::size_t i = 0; i < rows.size(); ++i)
            CHECK(rows[i].report->pearson == rerun[i].report->pearson);
    }
    SUBCASE("missing ratings are excluded and counted") {
        cases[2].run.edit_case.human_ratings.reset();
        const auto rows = correlation_study(gw, cases, 5);
        for (const auto& row : rows) {
            CHECK(row.excluded == 1);
            REQUIRE(row.report.has_value());
            CHECK(row.report->sample_count == 5);
        }
    }
    SUBCASE("constant metric scores flag undefined correlation") {
        // identical images for every case: CLIP-I is constant 1.0
        gw.load = [](const std::string&) { return Image(50, 50, Rgb{40, 40, 40}); };
        const auto rows = correlation_study(gw, cases, 5);
        CHECK_FALSE(rows[0].report.has_value());
        CHECK(rows[0].error == "undefined correlation");
    }
}
