#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dice {

// Edit operation emitted by the difference detector.
enum class EditCommand { Add, Remove, Edit };

inline const char* to_string(EditCommand c) {
    switch (c) {
        case EditCommand::Add: return "ADD";
        case EditCommand::Remove: return "REMOVE";
        case EditCommand::Edit: return "EDIT";
    }
    throw std::logic_error("bad EditCommand");
}

inline std::optional<EditCommand> command_from_string(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    if (s == "ADD") return EditCommand::Add;
    if (s == "REMOVE") return EditCommand::Remove;
    if (s == "EDIT") return EditCommand::Edit;
    return std::nullopt;
}

inline constexpr EditCommand kAllCommands[] = {EditCommand::Add, EditCommand::Remove,
                                               EditCommand::Edit};

// Axis-aligned box in unit coordinates. Degenerate (zero width or height)
// boxes are rejected at construction so downstream area ratios never divide
// by zero.
class NormalizedBBox {
  public:
    NormalizedBBox(double x_min, double y_min, double x_max, double y_max)
        : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
        if (!(x_min >= 0.0 && x_min < x_max && x_max <= 1.0) ||
            !(y_min >= 0.0 && y_min < y_max && y_max <= 1.0)) {
            throw std::invalid_argument("invalid normalized bbox");
        }
    }

    double x_min() const { return x_min_; }
    double y_min() const { return y_min_; }
    double x_max() const { return x_max_; }
    double y_max() const { return y_max_; }

    double width() const { return x_max_ - x_min_; }
    double height() const { return y_max_ - y_min_; }
    double area() const { return width() * height(); }

    bool operator==(const NormalizedBBox& o) const {
        return x_min_ == o.x_min_ && y_min_ == o.y_min_ && x_max_ == o.x_max_ &&
               y_max_ == o.y_max_;
    }

  private:
    double x_min_, y_min_, x_max_, y_max_;
};

inline double intersection_area(const NormalizedBBox& a, const NormalizedBBox& b) {
    const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
    const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

inline double iou(const NormalizedBBox& a, const NormalizedBBox& b) {
    const double inter = intersection_area(a, b);
    if (inter == 0.0) return 0.0;
    return inter / (a.area() + b.area() - inter);
}

inline double pixel_area(const NormalizedBBox& b, int width, int height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be > 0");
    return b.width() * width * b.height() * height;
}

// One detected object-level change.
struct Difference {
    EditCommand command;
    std::string subject;
    NormalizedBBox bbox;
    double confidence = 1.0;
    // Set when the command token could not be located in the logprob stream
    // and confidence fell back to 1.0.
    bool confidence_fallback = false;
};

struct GroundTruthDifference {
    EditCommand command;
    std::string subject;
    NormalizedBBox bbox;
    // Membership in the ideal edited image; mandatory for coherence
    // evaluation, absent on stage-1 training labels.
    std::optional<bool> coherent;
};

struct HumanRatings {
    int prompt_adherence = 0;        // 1-5
    int background_preservation = 0; // 1-5
};

// One evaluation unit: original/edited image pair plus the edit prompt.
struct EditCase {
    std::string case_id;
    std::string original_image;
    std::string edited_image;
    std::string prompt;
    int width = 0;
    int height = 0;
    std::optional<std::vector<GroundTruthDifference>> ground_truth;
    std::optional<HumanRatings> human_ratings;
};

struct CoherenceVerdict {
    bool decision = false;
    std::string rationale;
    bool flagged_unparseable = false;
};

}  // namespace dice
