#pragma once

#include <string>

namespace dice::prompts {

// System prompt for the difference-detection call. The edit prompt is never
// part of this request.
inline constexpr const char* kDifferenceSystem =
    "You are a system that detects differences between two images.\n"
    "\n"
    "- Extract the elements that are changed in the second image with respect to the first "
    "one.\n"
    "- Create a new entry for each distinct change.\n"
    "- For each entry, use the following format:\n"
    "\"<CHANGE_COMMAND>: <CHANGED_ELEMENT>, (<BOUNDING_BOX>)\"\n"
    "\n"
    "CHANGE_COMMAND:\n"
    "- ADD: If a new element appears in the second image that was not present in the first.\n"
    "- REMOVE: If an element from the first image is missing in the second.\n"
    "- EDIT: If an element in the second image is different but in the same location as an "
    "element in the first image.\n"
    "\n"
    "CHANGED_ELEMENT: Describe the element that has changed.\n"
    "\n"
    "BOUNDING_BOX: Use normalized coordinates [x0, y0, x1, y1] for the changed element "
    "position in the second image, where (x0, y0) is the top-left corner, and (x1, y1) is "
    "the bottom-right corner. The coordinates should be scaled between 0 and 1, with 0 "
    "representing one edge of the image and 1 representing the opposite edge.";

inline constexpr const char* kCoherenceSystem =
    "You are evaluating if a specific change detected by an AI vision model matches the "
    "request in the original edit prompt.\n"
    "\n"
    "## Task\n"
    "Determine if the detected change, as described and bounded by the provided colored "
    "bbox, matches the request in the original edit prompt.\n"
    "A match is valid only if the localized detected change is 100% compatible with the "
    "requested prompt.\n"
    "Any unwanted modification of the original image (even small) should avoid a match.\n"
    "\n"
    "## Context\n"
    "- The original image and the edited image are provided, in this order. The edited "
    "image is the original with some changes applied. Focus only on the area specified by "
    "the bbox in the detected change.\n"
    "- Another AI model has detected a change in the image, including its bbox.\n"
    "    - ADD: An object is only added in the edited image (on the background).\n"
    "    - EDIT: An object is substituted with another one in the edited image.\n"
    "    - REMOVE: An object is removed in the edited image.\n"
    "- Be strict: An EDIT means that an object has been removed and substituted with "
    "another one, ensure nothing was removed unless explicitly stated in the prompt. If an "
    "object has been removed unexpectedly, then you should say NO.\n"
    "\n"
    "## Example Response\n"
    "- Reasoning: <REASONING>\n"
    "- Decision: \"YES\" or \"NO\"";

// User prompt; {SUBSTITUTE_PROMPT} and {SUBSTITUTE_CHANGE} are filled per call.
inline constexpr const char* kCoherenceUserTemplate =
    "## Instructions\n"
    "1. The original edit prompt is: {SUBSTITUTE_PROMPT}\n"
    "2. The detected change to evaluate is: {SUBSTITUTE_CHANGE}\n"
    "3. Use only the text and the observations from the specified bbox area (colored) in "
    "both the original and edited images to decide if the specific detected change aligns "
    "with the original edit prompt.";

inline constexpr const char* kCaptionSystem =
    "You describe images. Reply with a single detailed caption of the image and nothing "
    "else.";

inline constexpr const char* kComposeSystem =
    "You rewrite image captions. Given the caption of an image and an editing instruction, "
    "reply with the caption of the ideal edited image and nothing else.";

inline constexpr const char* kComposeUserTemplate =
    "Caption: {SUBSTITUTE_CAPTION}\nEdit instruction: {SUBSTITUTE_PROMPT}";

// Replaces every occurrence of `key` in `tmpl` with `value`.
std::string fill(std::string tmpl, const std::string& key, const std::string& value);

}  // namespace dice::prompts
