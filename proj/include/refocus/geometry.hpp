#pragma once

// Object layouts: normalized boxes, validation, margin shrink and overlap repair.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refocus/error.hpp"

namespace refocus {

/// Smallest admissible box side, as a fraction of the image side.
inline constexpr double kMinBoxExtent = 0.01;
/// Upper bound (exclusive) on the shrink margin accepted by shrink_box.
inline constexpr double kMaxShrinkDelta = 0.25;
/// Margin range a layout provider is instructed to respect.
inline constexpr double kRecommendedDeltaMin = 0.02;
inline constexpr double kRecommendedDeltaMax = 0.04;
inline constexpr int kMaxRepairPasses = 8;
/// Linear scale applied to a container box when translation cannot break containment.
inline constexpr double kRepairShrinkFactor = 0.9;

namespace detail {
// Absorbs float noise in extent checks (0.11 - 0.10 < 0.01 in binary64).
inline constexpr double kExtentSlack = 1e-12;
}  // namespace detail

struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 1.0;
  double y_max = 1.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  std::pair<double, double> center() const noexcept { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }

  bool in_frame() const noexcept {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) && std::isfinite(y_max) &&
           x_min >= 0.0 && y_min >= 0.0 && x_max <= 1.0 && y_max <= 1.0;
  }
  bool well_ordered() const noexcept { return x_min < x_max && y_min < y_max; }
  bool large_enough() const noexcept {
    return width() >= kMinBoxExtent - detail::kExtentSlack && height() >= kMinBoxExtent - detail::kExtentSlack;
  }
  bool is_valid() const noexcept { return in_frame() && well_ordered() && large_enough(); }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// True when `outer` contains `inner` (boundaries may touch). Equal boxes contain each other.
inline bool contains(const BBox& outer, const BBox& inner) noexcept {
  return outer.x_min <= inner.x_min && outer.y_min <= inner.y_min && inner.x_max <= outer.x_max &&
         inner.y_max <= outer.y_max;
}

/// The "complete overlap" relation: containment in either direction.
inline bool completely_overlaps(const BBox& a, const BBox& b) noexcept { return contains(a, b) || contains(b, a); }

struct ObjectSpec {
  std::string label;
  std::string description;
  BBox box;

  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct Layout {
  std::vector<ObjectSpec> objects;
  std::string source_prompt;

  std::size_t size() const noexcept { return objects.size(); }
  bool empty() const noexcept { return objects.empty(); }

  friend bool operator==(const Layout&, const Layout&) = default;
};

enum class ViolationKind { OutOfRange, InvertedExtent, TooSmall, CompleteOverlap, EmptyLabel, EmptyDescription };

constexpr std::string_view to_string(ViolationKind kind) noexcept {
  switch (kind) {
    case ViolationKind::OutOfRange: return "OutOfRange";
    case ViolationKind::InvertedExtent: return "InvertedExtent";
    case ViolationKind::TooSmall: return "TooSmall";
    case ViolationKind::CompleteOverlap: return "CompleteOverlap";
    case ViolationKind::EmptyLabel: return "EmptyLabel";
    case ViolationKind::EmptyDescription: return "EmptyDescription";
  }
  return "Unknown";
}

struct Violation {
  ViolationKind kind;
  std::size_t index;
  // Second object of a CompleteOverlap pair.
  std::optional<std::size_t> other;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Checks every box invariant and the pairwise no-containment rule.
/// Pairs involving an inverted or out-of-frame box are not checked for overlap.
inline std::vector<Violation> validate_layout(const Layout& layout) {
  std::vector<Violation> out;
  const auto& objs = layout.objects;
  std::vector<bool> well_formed(objs.size(), false);
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const auto& obj = objs[i];
    if (obj.label.empty()) out.push_back({ViolationKind::EmptyLabel, i, std::nullopt});
    if (obj.description.empty()) out.push_back({ViolationKind::EmptyDescription, i, std::nullopt});
    if (!obj.box.in_frame()) {
      out.push_back({ViolationKind::OutOfRange, i, std::nullopt});
    } else if (!obj.box.well_ordered()) {
      out.push_back({ViolationKind::InvertedExtent, i, std::nullopt});
    } else {
      well_formed[i] = true;
      if (!obj.box.large_enough()) out.push_back({ViolationKind::TooSmall, i, std::nullopt});
    }
  }
  for (std::size_t i = 0; i < objs.size(); ++i) {
    if (!well_formed[i]) continue;
    for (std::size_t j = i + 1; j < objs.size(); ++j) {
      if (well_formed[j] && completely_overlaps(objs[i].box, objs[j].box)) {
        out.push_back({ViolationKind::CompleteOverlap, i, j});
      }
    }
  }
  return out;
}

inline bool is_valid_layout(const Layout& layout) { return validate_layout(layout).empty(); }

namespace detail {

inline BBox inset(const BBox& box, double delta) noexcept {
  const double dx = delta * box.width();
  const double dy = delta * box.height();
  return {box.x_min + dx, box.y_min + dy, box.x_max - dx, box.y_max - dy};
}

// Moves the box (size kept) so that it lies inside [0,1]^2. Assumes each side <= 1.
inline BBox shift_into_frame(BBox box) noexcept {
  if (box.x_min < 0.0) {
    box.x_max -= box.x_min;
    box.x_min = 0.0;
  }
  if (box.x_max > 1.0) {
    box.x_min -= box.x_max - 1.0;
    box.x_max = 1.0;
  }
  if (box.y_min < 0.0) {
    box.y_max -= box.y_min;
    box.y_min = 0.0;
  }
  if (box.y_max > 1.0) {
    box.y_min -= box.y_max - 1.0;
    box.y_max = 1.0;
  }
  box.x_min = std::max(box.x_min, 0.0);
  box.y_min = std::max(box.y_min, 0.0);
  return box;
}

inline BBox widen_to_min_extent(BBox box) noexcept {
  const auto [cx, cy] = box.center();
  if (box.width() < kMinBoxExtent - kExtentSlack) {
    box.x_min = cx - 0.5 * kMinBoxExtent;
    box.x_max = cx + 0.5 * kMinBoxExtent;
  }
  if (box.height() < kMinBoxExtent - kExtentSlack) {
    box.y_min = cy - 0.5 * kMinBoxExtent;
    box.y_max = cy + 0.5 * kMinBoxExtent;
  }
  return shift_into_frame(box);
}

inline BBox scale_about_center(const BBox& box, double factor) noexcept {
  const auto [cx, cy] = box.center();
  const double hw = 0.5 * std::max(box.width() * factor, kMinBoxExtent);
  const double hh = 0.5 * std::max(box.height() * factor, kMinBoxExtent);
  return {cx - hw, cy - hh, cx + hw, cy + hh};
}

inline BBox translated(const BBox& box, double dx, double dy) noexcept {
  return {box.x_min + dx, box.y_min + dy, box.x_max + dx, box.y_max + dy};
}

// Smallest translation along (dx, dy) that pushes `inner` past one edge of `outer`
// by `margin`. Returns nullopt for a zero direction.
inline std::optional<double> escape_distance(const BBox& inner, const BBox& outer, double dx, double dy,
                                             double margin) noexcept {
  std::optional<double> best;
  auto consider = [&](double t) {
    if (t >= 0.0 && (!best || t < *best)) best = t;
  };
  if (dx > 0.0) consider((outer.x_max + margin - inner.x_max) / dx);
  if (dx < 0.0) consider((outer.x_min - margin - inner.x_min) / dx);
  if (dy > 0.0) consider((outer.y_max + margin - inner.y_max) / dy);
  if (dy < 0.0) consider((outer.y_min - margin - inner.y_min) / dy);
  return best;
}

inline std::size_t containment_count(const BBox& box, const std::vector<ObjectSpec>& objects, std::size_t self) {
  std::size_t n = 0;
  for (std::size_t k = 0; k < objects.size(); ++k) {
    if (k != self && completely_overlaps(box, objects[k].box)) ++n;
  }
  return n;
}

// New position for objects[inner] that breaks its containment with objects[outer]. Candidates, in
// order: the minimal translation along the center-to-center vector, the minimal translation along
// each axis (most room between `outer` and the frame first), then a grid of positions over the
// frame ordered by distance from the current one. The first candidate in complete-overlap
// relation with no other box wins; failing that, the first one that at least escapes `outer`.
inline std::optional<BBox> escape_by_translation(const std::vector<ObjectSpec>& objects, std::size_t inner,
                                                 std::size_t outer) {
  const BBox& in = objects[inner].box;
  const BBox& out = objects[outer].box;
  std::vector<BBox> candidates;

  const auto [ix, iy] = in.center();
  const auto [ox, oy] = out.center();
  std::vector<std::array<double, 2>> directions;
  const double vx = ix - ox;
  const double vy = iy - oy;
  const double norm = std::hypot(vx, vy);
  if (norm > 1e-12) directions.push_back({vx / norm, vy / norm});
  std::array<std::pair<double, std::array<double, 2>>, 4> axes = {{
      {1.0 - out.x_max, {1.0, 0.0}},
      {out.x_min, {-1.0, 0.0}},
      {1.0 - out.y_max, {0.0, 1.0}},
      {out.y_min, {0.0, -1.0}},
  }};
  std::stable_sort(axes.begin(), axes.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [room, dir] : axes) {
    if (room > 0.0) directions.push_back(dir);
  }
  for (const auto& d : directions) {
    if (const auto t = escape_distance(in, out, d[0], d[1], kMinBoxExtent)) {
      candidates.push_back(shift_into_frame(translated(in, *t * d[0], *t * d[1])));
    }
  }

  constexpr int kGrid = 24;
  std::vector<std::pair<double, BBox>> grid;
  const double free_x = std::max(0.0, 1.0 - in.width());
  const double free_y = std::max(0.0, 1.0 - in.height());
  for (int gx = 0; gx <= kGrid; ++gx) {
    for (int gy = 0; gy <= kGrid; ++gy) {
      const double x = free_x * gx / kGrid;
      const double y = free_y * gy / kGrid;
      const BBox b{x, y, x + in.width(), y + in.height()};
      grid.emplace_back(std::hypot(x - in.x_min, y - in.y_min), shift_into_frame(b));
    }
  }
  std::stable_sort(grid.begin(), grid.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [dist, b] : grid) candidates.push_back(b);

  std::optional<BBox> fallback;
  for (const auto& c : candidates) {
    if (completely_overlaps(c, out)) continue;
    if (containment_count(c, objects, inner) == 0) return c;
    if (!fallback) fallback = c;
  }
  return fallback;
}

}  // namespace detail

/// Insets every side by `delta` times the box's own width/height. Keeps the center.
inline BBox shrink_box(const BBox& box, double delta) {
  if (!(delta >= 0.0 && delta < kMaxShrinkDelta)) {
    throw Error(ErrorCode::InvalidArgument, "shrink margin must lie in [0, 0.25), got " + std::to_string(delta));
  }
  if (!box.is_valid()) throw Error(ErrorCode::InvalidArgument, "shrink_box requires a valid box");
  return detail::inset(box, delta);
}

inline bool delta_in_recommended_range(double delta) noexcept {
  return delta >= kRecommendedDeltaMin && delta <= kRecommendedDeltaMax;
}

/// Repairs a layout without applying the margin shrink: coordinates are clamped to the frame,
/// sub-minimum extents are widened about their center, and contained boxes are translated out of
/// their container (the container is scaled down by 10% when the frame blocks every direction).
/// A valid layout is returned unchanged.
inline Layout repair_layout(Layout layout) {
  for (std::size_t i = 0; i < layout.objects.size(); ++i) {
    auto& obj = layout.objects[i];
    if (obj.label.empty()) throw Error(ErrorCode::RepairFailed, "object " + std::to_string(i) + " has an empty label");
    if (obj.description.empty()) obj.description = obj.label;
    auto& b = obj.box;
    if (!std::isfinite(b.x_min) || !std::isfinite(b.y_min) || !std::isfinite(b.x_max) || !std::isfinite(b.y_max)) {
      throw Error(ErrorCode::RepairFailed, "object " + std::to_string(i) + " has a non-finite coordinate");
    }
    if (b.x_min > b.x_max || b.y_min > b.y_max) {
      throw Error(ErrorCode::RepairFailed, "object " + std::to_string(i) + " has an inverted extent");
    }
    if (!b.in_frame()) {
      b = {std::clamp(b.x_min, 0.0, 1.0), std::clamp(b.y_min, 0.0, 1.0), std::clamp(b.x_max, 0.0, 1.0),
           std::clamp(b.y_max, 0.0, 1.0)};
    }
    if (!b.large_enough()) b = detail::widen_to_min_extent(b);
  }

  auto& objs = layout.objects;
  for (int pass = 0; pass < kMaxRepairPasses; ++pass) {
    bool changed = false;
    for (std::size_t i = 0; i < objs.size(); ++i) {
      for (std::size_t j = i + 1; j < objs.size(); ++j) {
        if (!completely_overlaps(objs[i].box, objs[j].box)) continue;
        // Equal boxes: the later object moves.
        const bool j_inside = contains(objs[i].box, objs[j].box);
        const std::size_t inner = j_inside ? j : i;
        const std::size_t outer = j_inside ? i : j;
        if (auto moved = detail::escape_by_translation(objs, inner, outer)) {
          objs[inner].box = *moved;
        } else {
          objs[outer].box = detail::scale_about_center(objs[outer].box, kRepairShrinkFactor);
        }
        changed = true;
      }
    }
    if (!changed) break;
  }

  if (auto violations = validate_layout(layout); !violations.empty()) {
    const auto& v = violations.front();
    throw Error(ErrorCode::RepairFailed, "layout still violates " + std::string(to_string(v.kind)) + " at object " +
                                             std::to_string(v.index) + " after " + std::to_string(kMaxRepairPasses) +
                                             " repair passes");
  }
  return layout;
}

/// Shrinks every box by `delta`, then repairs complete overlaps. Object order and labels are kept.
inline Layout regularize_layout(const Layout& layout, double delta) {
  if (!(delta >= 0.0 && delta < kMaxShrinkDelta)) {
    throw Error(ErrorCode::InvalidArgument, "shrink margin must lie in [0, 0.25), got " + std::to_string(delta));
  }
  Layout shrunk = layout;
  for (std::size_t i = 0; i < shrunk.objects.size(); ++i) {
    auto& b = shrunk.objects[i].box;
    if (!std::isfinite(b.x_min) || !std::isfinite(b.y_min) || !std::isfinite(b.x_max) || !std::isfinite(b.y_max) ||
        b.x_min > b.x_max || b.y_min > b.y_max) {
      throw Error(ErrorCode::RepairFailed, "object " + std::to_string(i) + " has a malformed box");
    }
    b = {std::clamp(b.x_min, 0.0, 1.0), std::clamp(b.y_min, 0.0, 1.0), std::clamp(b.x_max, 0.0, 1.0),
         std::clamp(b.y_max, 0.0, 1.0)};
    b = detail::inset(b, delta);
  }
  return repair_layout(std::move(shrunk));
}

}  // namespace refocus
