#pragma once

// Layout wire schema:
//   {"objects": [{"label": str, "description": str, "box": [x_min, y_min, x_max, y_max]}]}

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "refocus/error.hpp"
#include "refocus/geometry.hpp"

namespace refocus {

using json = nlohmann::json;

inline json layout_to_json(const Layout& layout) {
  json objects = json::array();
  for (const auto& obj : layout.objects) {
    objects.push_back({{"label", obj.label},
                       {"description", obj.description},
                       {"box", {obj.box.x_min, obj.box.y_min, obj.box.x_max, obj.box.y_max}}});
  }
  return json{{"objects", std::move(objects)}};
}

inline std::string serialize_layout(const Layout& layout, int indent = -1) { return layout_to_json(layout).dump(indent); }

/// Reads one schema document. Coordinates are clamped to [0,1]; a missing or empty
/// description falls back to the label.
inline Layout layout_from_json(const json& doc, std::string prompt = {}) {
  if (!doc.is_object() || !doc.contains("objects")) {
    throw Error(ErrorCode::ParseFailed, "layout document has no \"objects\" member");
  }
  const auto& objects = doc.at("objects");
  if (!objects.is_array()) throw Error(ErrorCode::ParseFailed, "\"objects\" is not an array");

  Layout layout;
  layout.source_prompt = std::move(prompt);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& item = objects[i];
    const auto where = "object " + std::to_string(i);
    if (!item.is_object()) throw Error(ErrorCode::ParseFailed, where + " is not an object");
    if (!item.contains("label") || !item["label"].is_string()) {
      throw Error(ErrorCode::ParseFailed, where + " lacks a string \"label\"");
    }
    ObjectSpec spec;
    spec.label = item["label"].get<std::string>();
    if (spec.label.empty()) throw Error(ErrorCode::ParseFailed, where + " has an empty label");
    if (item.contains("description") && !item["description"].is_null()) {
      if (!item["description"].is_string()) throw Error(ErrorCode::ParseFailed, where + " has a non-string description");
      spec.description = item["description"].get<std::string>();
    }
    if (spec.description.empty()) spec.description = spec.label;

    if (!item.contains("box")) throw Error(ErrorCode::ParseFailed, where + " lacks a \"box\"");
    const auto& box = item["box"];
    if (!box.is_array() || box.size() != 4) {
      throw Error(ErrorCode::CoordinateError, where + " box must be a 4-element array");
    }
    double c[4];
    for (std::size_t k = 0; k < 4; ++k) {
      if (!box[k].is_number()) throw Error(ErrorCode::CoordinateError, where + " box has a non-numeric coordinate");
      c[k] = std::clamp(box[k].get<double>(), 0.0, 1.0);
    }
    spec.box = {c[0], c[1], c[2], c[3]};
    layout.objects.push_back(std::move(spec));
  }
  return layout;
}

namespace detail {

// Index one past the brace that closes the object opened at `open`, honoring string literals.
inline std::optional<std::size_t> matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Extracts the first structured layout block from provider text. Surrounding prose and
/// code fences are ignored.
inline Layout parse_layout_response(std::string_view raw, std::string prompt = {}) {
  bool saw_json_object = false;
  for (std::size_t pos = raw.find('{'); pos != std::string_view::npos; pos = raw.find('{', pos + 1)) {
    const auto end = detail::matching_brace(raw, pos);
    if (!end) continue;
    auto doc = json::parse(raw.substr(pos, *end - pos), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) continue;
    saw_json_object = true;
    if (!doc.contains("objects")) continue;
    return layout_from_json(doc, std::move(prompt));
  }
  throw Error(ErrorCode::ParseFailed, saw_json_object ? "structured block does not match the layout schema"
                                                      : "no structured layout block in provider response");
}

}  // namespace refocus
