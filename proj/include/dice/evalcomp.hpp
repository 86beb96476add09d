#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dice/gateway.hpp"
#include "dice/image.hpp"
#include "dice/types.hpp"

namespace dice {

enum class MaskPolicyKind {
    None,
    CoherentDifferences,
    NonCoherentDifferences,
    AllDifferences,
    RandomAreas,
};

struct MaskPolicy {
    MaskPolicyKind kind = MaskPolicyKind::None;
    Rgb fill = kBlack;
    std::uint64_t seed = 0;  // used by RandomAreas only
};

std::string to_string(MaskPolicyKind kind);

// Boxes the policy selects for masking. RandomAreas keeps each detected
// box's size but relocates it uniformly; deterministic in (seed, case_id).
std::vector<NormalizedBBox> select_mask_boxes(const std::vector<Difference>& diffs,
                                              const std::vector<CoherenceVerdict>& verdicts,
                                              const MaskPolicy& policy,
                                              const std::string& case_id);

Image apply_mask(const Image& img, const std::vector<NormalizedBBox>& boxes, Rgb fill);

// Masked CLIP-I: fills the selected regions on BOTH images, embeds each and
// returns the cosine similarity.
double clip_i(Gateway& gw, const EditCase& c, const std::vector<Difference>& diffs,
              const std::vector<CoherenceVerdict>& verdicts, const MaskPolicy& policy);

// Masked CLIP-T: fills the selected regions on the edited image only and
// compares it against the target caption.
double clip_t(Gateway& gw, const EditCase& c, const std::vector<Difference>& diffs,
              const std::vector<CoherenceVerdict>& verdicts,
              const std::string& target_caption, const MaskPolicy& policy);

// Exact area of the union of normalized boxes, in [0, 1].
double union_area(const std::vector<NormalizedBBox>& boxes);

struct CaseRun {
    EditCase edit_case;
    std::vector<Difference> diffs;
    std::vector<CoherenceVerdict> verdicts;  // aligned with diffs
};

struct RankingReport {
    double correct_edits_pct = 0.0;
    double unwanted_edit_area_pct = 0.0;
    double no_visual_change_pct = 0.0;
};

RankingReport ranking_axes(const std::vector<CaseRun>& runs, double confidence_floor = 0.0);

// Per-model table; every model must cover the identical case-id set.
std::map<std::string, RankingReport> ranking_table(
    const std::map<std::string, std::vector<CaseRun>>& model_runs,
    double confidence_floor = 0.0);

struct CorrelationReport {
    double pearson = 0.0;
    double spearman = 0.0;
    double kendall = 0.0;
    std::size_t sample_count = 0;
};

// Pearson product-moment, Spearman (Pearson on average ranks) and Kendall
// tau-b. Throws "undefined correlation" on zero variance.
CorrelationReport correlate(const std::vector<double>& metric_scores,
                            const std::vector<double>& human_scores);

struct StudyCase {
    CaseRun run;
    std::string target_caption;
};

struct CorrelationRow {
    std::string metric;           // CLIP-I | CLIP-T
    std::string policy;
    std::string human_dimension;  // background_preservation | prompt_adherence
    std::optional<CorrelationReport> report;
    std::string error;            // set when the row is undefined
    std::size_t excluded = 0;     // cases dropped for missing ratings
};

// The eight-row study: CLIP-I under {none, random_areas, all_differences,
// coherent_differences} against background preservation, CLIP-T under
// {none, random_areas, all_differences, non_coherent_differences} against
// prompt adherence.
std::vector<CorrelationRow> correlation_study(Gateway& gw, const std::vector<StudyCase>& cases,
                                              std::uint64_t seed, Rgb fill = kBlack);

}  // namespace dice
