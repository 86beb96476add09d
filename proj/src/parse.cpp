#include "dice/parse.hpp"

#include <cmath>
#include <cstdio>
#include <optional>

#include "dice/util.hpp"

namespace dice {

namespace {

constexpr double kClampTolerance = 0.01;

struct LineView {
    std::size_t offset;  // byte offset of line start in raw_text
    std::string_view text;
};

std::vector<LineView> split_lines(const std::string& text) {
    std::vector<LineView> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        lines.push_back({start, std::string_view(text).substr(start, end - start)});
        if (end == text.size()) break;
        start = end + 1;
    }
    return lines;
}

// Index of the opening bracket of the trailing coordinate list; npos when
// the line has none. Both "[a, b, c, d]" and "(a, b, c, d)" are accepted.
std::size_t find_coord_open(std::string_view tail) {
    const std::size_t open_sq = tail.rfind('[');
    const std::size_t open_par = tail.rfind('(');
    if (open_sq == std::string_view::npos) return open_par;
    if (open_par == std::string_view::npos) return open_sq;
    return std::max(open_sq, open_par);
}

std::optional<std::array<double, 4>> parse_coords(std::string_view tail, std::size_t open) {
    if (open == std::string_view::npos) return std::nullopt;
    const std::size_t close = tail.find(tail[open] == '[' ? ']' : ')', open);
    if (close == std::string_view::npos) return std::nullopt;
    std::string inner(tail.substr(open + 1, close - open - 1));

    std::array<double, 4> coords{};
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        std::size_t next = inner.find(',', pos);
        std::string piece =
            inner.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        const auto t = trim(piece);
        if (t.empty()) return std::nullopt;
        char* endp = nullptr;
        const std::string num(t);
        coords[i] = std::strtod(num.c_str(), &endp);
        if (endp != num.c_str() + num.size()) return std::nullopt;
        if (i < 3) {
            if (next == std::string::npos) return std::nullopt;
            pos = next + 1;
        } else if (next != std::string::npos) {
            return std::nullopt;  // more than four coordinates
        }
    }
    return coords;
}

std::string_view strip_decoration(std::string_view s) {
    s = trim(s);
    while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '"')) {
        s.remove_prefix(1);
        s = trim(s);
    }
    while (!s.empty() && s.back() == '"') {
        s.remove_suffix(1);
        s = trim(s);
    }
    return s;
}

std::string normalize_token(std::string_view tok) {
    std::string out;
    for (char c : tok) {
        if (std::isalpha(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        else if (!out.empty())
            break;  // stop at first non-letter after the word started
    }
    return out;
}

// An alternative token counts as the first token of command `c` when its
// alphabetic core is a prefix of the command name (tokenizers may split the
// word) or extends it (e.g. "REMOVE:").
bool token_matches_command(const std::string& norm, EditCommand c) {
    if (norm.empty()) return false;
    const std::string_view name = to_string(c);
    if (norm.size() <= name.size()) return name.substr(0, norm.size()) == norm;
    return std::string_view(norm).substr(0, name.size()) == name;
}

}  // namespace

ParseReport parse_differences(const std::string& raw_text) {
    ParseReport report;
    report.raw_text = raw_text;
    for (const LineView& lv : split_lines(raw_text)) {
        const std::string_view stripped = strip_decoration(lv.text);
        if (stripped.empty()) continue;
        const std::string line(trim(lv.text));

        const std::size_t colon = stripped.find(':');
        const auto cmd = colon == std::string_view::npos
                             ? std::nullopt
                             : command_from_string(std::string(trim(stripped.substr(0, colon))));
        if (!cmd) {
            report.malformed_lines.push_back({line, "unknown-command"});
            continue;
        }

        const std::string_view tail = stripped.substr(colon + 1);
        const std::size_t bracket = find_coord_open(tail);
        const auto coords = parse_coords(tail, bracket);
        if (!coords) {
            report.malformed_lines.push_back({line, "bad-coordinates"});
            continue;
        }

        std::array<double, 4> c = *coords;
        bool out_of_range = false;
        for (double& v : c) {
            if (v < -kClampTolerance || v > 1.0 + kClampTolerance) out_of_range = true;
            v = std::min(1.0, std::max(0.0, v));
        }
        if (out_of_range) {
            report.malformed_lines.push_back({line, "out-of-range"});
            continue;
        }
        if (!(c[0] < c[2]) || !(c[1] < c[3])) {
            report.malformed_lines.push_back({line, "degenerate-box"});
            continue;
        }

        std::string_view subject = trim(tail.substr(0, bracket));
        while (!subject.empty() && subject.back() == ',') {
            subject.remove_suffix(1);
            subject = trim(subject);
        }
        if (subject.empty()) {
            report.malformed_lines.push_back({line, "empty-subject"});
            continue;
        }

        report.differences.push_back(
            {*cmd, std::string(subject), NormalizedBBox(c[0], c[1], c[2], c[3]), 1.0, false});
        // offset of the command word start within raw_text
        const std::size_t word_start =
            lv.offset + static_cast<std::size_t>(stripped.data() - lv.text.data()) +
            (trim(stripped.substr(0, colon)).data() - stripped.data());
        report.command_offsets.push_back(word_start);
    }
    return report;
}

ParseReport attach_confidence(ParseReport report, const std::vector<TokenLogprob>& tokens) {
    // Map byte offsets to token positions.
    std::vector<std::size_t> token_start(tokens.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        token_start[i] = pos;
        pos += tokens[i].token_text.size();
    }

    for (std::size_t d = 0; d < report.differences.size(); ++d) {
        Difference& diff = report.differences[d];
        const std::size_t want = report.command_offsets[d];

        std::ptrdiff_t tok = -1;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const std::size_t end = token_start[i] + tokens[i].token_text.size();
            if (want >= token_start[i] && want < end) {
                tok = static_cast<std::ptrdiff_t>(i);
                break;
            }
        }
        if (tok < 0) {
            diff.confidence = 1.0;
            diff.confidence_fallback = true;
            continue;
        }

        // Highest-probability alternative matching each command.
        double chosen_p = -1.0;
        double total = 0.0;
        for (EditCommand c : kAllCommands) {
            double best = -1.0;
            for (const auto& [text, lp] : tokens[static_cast<std::size_t>(tok)].top_alternatives) {
                if (token_matches_command(normalize_token(text), c)) {
                    best = std::max(best, std::exp(lp));
                }
            }
            if (best >= 0.0) {
                total += best;
                if (c == diff.command) chosen_p = best;
            }
        }
        if (chosen_p < 0.0 || total <= 0.0) {
            diff.confidence = 1.0;
            diff.confidence_fallback = true;
        } else {
            diff.confidence = chosen_p / total;
            diff.confidence_fallback = false;
        }
    }
    return report;
}

std::string serialize_difference(const Difference& d) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "[%.2f, %.2f, %.2f, %.2f]", d.bbox.x_min(), d.bbox.y_min(),
                  d.bbox.x_max(), d.bbox.y_max());
    return std::string(to_string(d.command)) + ": " + d.subject + ", " + buf;
}

std::string serialize_differences(const std::vector<Difference>& diffs) {
    std::string out;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        if (i) out.push_back('\n');
        out += serialize_difference(diffs[i]);
    }
    return out;
}

}  // namespace dice
