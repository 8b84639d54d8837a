#pragma once

#include <string>
#include <string_view>

namespace refocus {

inline constexpr std::string_view kLayoutTemplateVersion = "layout-v1";

// {PROMPT} and {MARGIN_PERCENT} are substituted at render time.
inline constexpr std::string_view kLayoutTemplate = R"(You are a layout planner for a text-to-image model.
Read the image prompt and list every object it asks for, one entry per instance
(for "three cats" emit three "cat" entries). For each object give:
  - "label": a short noun naming the object,
  - "description": the phrase from the prompt describing that object, including its attributes,
  - "box": its bounding box [x_min, y_min, x_max, y_max] in normalized image coordinates,
    each number between 0 and 1, with the origin at the top-left corner.

Constraints:
  1. Shrink every box by a margin of {MARGIN_PERCENT}% of its width and height on each side,
     so objects are not cut off at the image border and overlap stays small.
  2. No box may lie completely inside another box; objects must not completely overlap.
  3. Respect counts and spatial relations stated in the prompt (left of, right of, above, below).

Answer with exactly one JSON document and nothing else, using this schema:
{"objects": [{"label": string, "description": string, "box": [x_min, y_min, x_max, y_max]}]}

Prompt: {PROMPT}
)";

inline std::string render_layout_instruction(std::string_view prompt, double delta) {
  std::string text(kLayoutTemplate);
  auto substitute = [&text](std::string_view key, const std::string& value) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
      text.replace(pos, key.size(), value);
    }
  };
  const int percent_tenths = static_cast<int>(delta * 1000.0 + 0.5);
  std::string percent = std::to_string(percent_tenths / 10);
  if (percent_tenths % 10 != 0) percent += "." + std::to_string(percent_tenths % 10);
  substitute("{MARGIN_PERCENT}", percent);
  substitute("{PROMPT}", std::string(prompt));
  return text;
}

}  // namespace refocus
