#include "dice/evalcomp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dice/rng.hpp"
#include "dice/util.hpp"

namespace dice {

std::string to_string(MaskPolicyKind kind) {
    switch (kind) {
        case MaskPolicyKind::None: return "none";
        case MaskPolicyKind::CoherentDifferences: return "coherent_differences";
        case MaskPolicyKind::NonCoherentDifferences: return "non_coherent_differences";
        case MaskPolicyKind::AllDifferences: return "all_differences";
        case MaskPolicyKind::RandomAreas: return "random_areas";
    }
    throw std::logic_error("bad mask policy");
}

namespace {

std::uint64_t case_seed(std::uint64_t seed, const std::string& case_id) {
    // stable across platforms: fold the first 16 hex digits of the id hash
    const std::string hex = sha256_hex(case_id).substr(0, 16);
    return seed ^ std::stoull(hex, nullptr, 16);
}

NormalizedBBox relocate(const NormalizedBBox& b, Rng& rng) {
    const double w = b.width(), h = b.height();
    const double x0 = rng.uniform() * (1.0 - w);
    const double y0 = rng.uniform() * (1.0 - h);
    return {x0, y0, x0 + w, y0 + h};
}

}  // namespace

std::vector<NormalizedBBox> select_mask_boxes(const std::vector<Difference>& diffs,
                                              const std::vector<CoherenceVerdict>& verdicts,
                                              const MaskPolicy& policy,
                                              const std::string& case_id) {
    const bool needs_verdicts = policy.kind == MaskPolicyKind::CoherentDifferences ||
                                policy.kind == MaskPolicyKind::NonCoherentDifferences;
    if (needs_verdicts && verdicts.size() != diffs.size())
        throw std::invalid_argument("verdicts are not aligned with differences");

    std::vector<NormalizedBBox> boxes;
    switch (policy.kind) {
        case MaskPolicyKind::None:
            break;
        case MaskPolicyKind::AllDifferences:
            for (const auto& d : diffs) boxes.push_back(d.bbox);
            break;
        case MaskPolicyKind::CoherentDifferences:
            for (std::size_t i = 0; i < diffs.size(); ++i)
                if (verdicts[i].decision) boxes.push_back(diffs[i].bbox);
            break;
        case MaskPolicyKind::NonCoherentDifferences:
            for (std::size_t i = 0; i < diffs.size(); ++i)
                if (!verdicts[i].decision) boxes.push_back(diffs[i].bbox);
            break;
        case MaskPolicyKind::RandomAreas: {
            Rng rng(case_seed(policy.seed, case_id));
            for (const auto& d : diffs) boxes.push_back(relocate(d.bbox, rng));
            break;
        }
    }
    return boxes;
}

Image apply_mask(const Image& img, const std::vector<NormalizedBBox>& boxes, Rgb fill) {
    Image out = img;
    for (const auto& b : boxes) out = fill_region(out, b, fill);
    return out;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
}

}  // namespace

double clip_i(Gateway& gw, const EditCase& c, const std::vector<Difference>& diffs,
              const std::vector<CoherenceVerdict>& verdicts, const MaskPolicy& policy) {
    const auto boxes = select_mask_boxes(diffs, verdicts, policy, c.case_id);
    const Image original = apply_mask(gw.load(c.original_image), boxes, policy.fill);
    const Image edited = apply_mask(gw.load(c.edited_image), boxes, policy.fill);
    return cosine(gw.embed_image(original), gw.embed_image(edited));
}

double clip_t(Gateway& gw, const EditCase& c, const std::vector<Difference>& diffs,
              const std::vector<CoherenceVerdict>& verdicts,
              const std::string& target_caption, const MaskPolicy& policy) {
    const auto boxes = select_mask_boxes(diffs, verdicts, policy, c.case_id);
    const Image edited = apply_mask(gw.load(c.edited_image), boxes, policy.fill);
    return cosine(gw.embed_image(edited), gw.embed_text(target_caption));
}

double union_area(const std::vector<NormalizedBBox>& boxes) {
    if (boxes.empty()) return 0.0;
    // sweep over x strips bounded by box edges; inside a strip the covered
    // y length is a 1-D interval union
    std::vector<double> xs;
    for (const auto& b : boxes) {
        xs.push_back(b.x_min());
        xs.push_back(b.x_max());
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    double area = 0.0;
    for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
        const double x0 = xs[s], x1 = xs[s + 1];
        std::vector<std::pair<double, double>> spans;
        for (const auto& b : boxes)
            if (b.x_min() <= x0 && b.x_max() >= x1) spans.emplace_back(b.y_min(), b.y_max());
        if (spans.empty()) continue;
        std::sort(spans.begin(), spans.end());
        double covered = 0.0, lo = spans[0].first, hi = spans[0].second;
        for (std::size_t i = 1; i < spans.size(); ++i) {
            if (spans[i].first > hi) {
                covered += hi - lo;
                lo = spans[i].first;
                hi = spans[i].second;
            } else {
                hi = std::max(hi, spans[i].second);
            }
        }
        covered += hi - lo;
        area += covered * (x1 - x0);
    }
    return area;
}

RankingReport ranking_axes(const std::vector<CaseRun>& runs, double confidence_floor) {
    if (runs.empty()) throw std::invalid_argument("no cases to rank");
    std::size_t correct = 0, no_change = 0;
    double area_sum = 0.0;
    for (const CaseRun& run : runs) {
        if (run.verdicts.size() != run.diffs.size())
            throw std::invalid_argument("verdicts are not aligned with differences");
        std::size_t kept = 0;
        bool any_coherent = false;
        std::vector<NormalizedBBox> non_coherent;
        for (std::size_t i = 0; i < run.diffs.size(); ++i) {
            if (run.diffs[i].confidence < confidence_floor) continue;
            ++kept;
            if (run.verdicts[i].decision)
                any_coherent = true;
            else
                non_coherent.push_back(run.diffs[i].bbox);
        }
        if (any_coherent) ++correct;
        if (kept == 0) ++no_change;
        area_sum += union_area(non_coherent);
    }
    const double n = static_cast<double>(runs.size());
    return {100.0 * correct / n, 100.0 * area_sum / n, 100.0 * no_change / n};
}

std::map<std::string, RankingReport> ranking_table(
    const std::map<std::string, std::vector<CaseRun>>& model_runs, double confidence_floor) {
    std::optional<std::set<std::string>> reference;
    for (const auto& [model, runs] : model_runs) {
        std::set<std::string> ids;
        for (const auto& run : runs) ids.insert(run.edit_case.case_id);
        if (reference && ids != *reference)
            throw std::invalid_argument("model " + model +
                                        " was evaluated on a different case set");
        reference = std::move(ids);
    }
    std::map<std::string, RankingReport> table;
    for (const auto& [model, runs] : model_runs)
        table[model] = ranking_axes(runs, confidence_floor);
    return table;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("undefined correlation");
    return sxy / std::sqrt(sxx * syy);
}

double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0, ties_both = 0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0.0 && dy == 0.0)
                ++ties_both;
            else if (dx == 0.0)
                ++ties_x;
            else if (dy == 0.0)
                ++ties_y;
            else if ((dx > 0.0) == (dy > 0.0))
                ++concordant;
            else
                ++discordant;
        }
    const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
    const double denom_x = static_cast<double>(n0 - ties_x - ties_both);
    const double denom_y = static_cast<double>(n0 - ties_y - ties_both);
    if (denom_x <= 0.0 || denom_y <= 0.0)
        throw std::invalid_argument("undefined correlation");
    return static_cast<double>(concordant - discordant) / std::sqrt(denom_x * denom_y);
}

}  // namespace

CorrelationReport correlate(const std::vector<double>& metric_scores,
                            const std::vector<double>& human_scores) {
    if (metric_scores.size() != human_scores.size())
        throw std::invalid_argument("score lists differ in length");
    if (metric_scores.size() < 3)
        throw std::invalid_argument("need at least 3 samples to correlate");
    CorrelationReport report;
    report.sample_count = metric_scores.size();
    report.pearson = pearson(metric_scores, human_scores);
    report.spearman = pearson(average_ranks(metric_scores), average_ranks(human_scores));
    report.kendall = kendall_tau_b(metric_scores, human_scores);
    return report;
}

std::vector<CorrelationRow> correlation_study(Gateway& gw, const std::vector<StudyCase>& cases,
                                              std::uint64_t seed, Rgb fill) {
    struct RowSpec {
        const char* metric;
        MaskPolicyKind kind;
        const char* dimension;
    };
    const RowSpec specs[] = {
        {"CLIP-I", MaskPolicyKind::None, "background_preservation"},
        {"CLIP-I", MaskPolicyKind::RandomAreas, "background_preservation"},
        {"CLIP-I", MaskPolicyKind::AllDifferences, "background_preservation"},
        {"CLIP-I", MaskPolicyKind::CoherentDifferences, "background_preservation"},
        {"CLIP-T", MaskPolicyKind::None, "prompt_adherence"},
        {"CLIP-T", MaskPolicyKind::RandomAreas, "prompt_adherence"},
        {"CLIP-T", MaskPolicyKind::AllDifferences, "prompt_adherence"},
        {"CLIP-T", MaskPolicyKind::NonCoherentDifferences, "prompt_adherence"},
    };

    std::vector<CorrelationRow> rows;
    for (const RowSpec& spec : specs) {
        CorrelationRow row;
        row.metric = spec.metric;
        row.policy = to_string(spec.kind);
        row.human_dimension = spec.dimension;
        const MaskPolicy policy{spec.kind, fill, seed};

        std::vector<double> metric_scores, human_scores;
        for (const StudyCase& sc : cases) {
            const auto& c = sc.run.edit_case;
            if (!c.human_ratings) {
                ++row.excluded;
                continue;
            }
            if (std::string(spec.metric) == "CLIP-I") {
                metric_scores.push_back(clip_i(gw, c, sc.run.diffs, sc.run.verdicts, policy));
                human_scores.push_back(c.human_ratings->background_preservation);
            } else {
                metric_scores.push_back(clip_t(gw, c, sc.run.diffs, sc.run.verdicts,
                                               sc.target_caption, policy));
                human_scores.push_back(c.human_ratings->prompt_adherence);
            }
        }
        try {
            row.report = correlate(metric_scores, human_scores);
        } catch (const std::invalid_argument& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace dice
