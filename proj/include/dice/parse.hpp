#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dice/types.hpp"

namespace dice {

// One token of a model completion with its log-probability and the top-K
// alternative tokens at the same position (sorted descending by logprob).
struct TokenLogprob {
    std::string token_text;
    double logprob = 0.0;
    std::vector<std::pair<std::string, double>> top_alternatives;
};

struct MalformedLine {
    std::string line;
    std::string reason;  // unknown-command | bad-coordinates | out-of-range |
                         // degenerate-box | empty-subject
};

struct ParseReport {
    std::vector<Difference> differences;
    std::vector<MalformedLine> malformed_lines;
    std::string raw_text;
    // Byte offset of each difference's command word in raw_text, aligned with
    // `differences`. Used by attach_confidence to locate the command token.
    std::vector<std::size_t> command_offsets;
};

// Parses the detector's structured completion. Total: never throws on any
// input; lines that do not match the grammar are recorded as malformed.
ParseReport parse_differences(const std::string& raw_text);

// Computes per-difference confidence as the probability of the chosen
// command's first token renormalized over the three commands' first tokens
// at the same position. Falls back to 1.0 (flagged) when the token cannot
// be located.
ParseReport attach_confidence(ParseReport report, const std::vector<TokenLogprob>& tokens);

// Canonical one-line-per-difference text: "COMMAND: subject, [a, b, c, d]"
// with 2-decimal coordinates.
std::string serialize_differences(const std::vector<Difference>& diffs);
std::string serialize_difference(const Difference& d);

}  // namespace dice
