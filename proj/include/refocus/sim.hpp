#pragma once

// Deterministic simulation backends.
//
// The generator draws every layout object as a solid rectangle in the object's palette color,
// displaced from its intended box by seeded Gaussian noise of scale sigma_place and dropped
// entirely with probability `dropout`. Inside an object's intended region only that object (or
// background) is visible, so an object's crop depends on its own placement alone when intended
// regions are disjoint. The refiner scales every placement offset by (1 - strength) and clears
// each dropout with probability `strength`. The oracle embedder maps text to the basis vectors of
// the nouns it mentions and an image to its color-occupancy histogram, with background on a
// dedicated axis, so cosine similarities can be computed by hand.

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "refocus/backends.hpp"
#include "refocus/error.hpp"
#include "refocus/geometry.hpp"
#include "refocus/image.hpp"
#include "refocus/layout_io.hpp"
#include "refocus/seeding.hpp"

namespace refocus::sim {

struct Noun {
  std::string_view singular;
  std::string_view plural;
  Rgb color;
};

inline constexpr Rgb kBackground{236, 236, 236};

// Colors are pairwise distinct and distinct from kBackground.
inline constexpr std::array<Noun, 32> kVocabulary{{
    {"giraffe", "giraffes", {214, 160, 40}},  {"zebra", "zebras", {30, 30, 30}},
    {"chair", "chairs", {140, 80, 30}},       {"elephant", "elephants", {128, 60, 160}},
    {"ball", "balls", {200, 40, 40}},         {"sign", "signs", {240, 200, 0}},
    {"dog", "dogs", {160, 110, 70}},          {"cat", "cats", {90, 90, 90}},
    {"car", "cars", {20, 70, 200}},           {"bench", "benches", {100, 60, 20}},
    {"bicycle", "bicycles", {0, 150, 150}},   {"bird", "birds", {60, 180, 240}},
    {"boat", "boats", {250, 250, 250}},       {"bottle", "bottles", {0, 120, 60}},
    {"bowl", "bowls", {230, 120, 180}},       {"clock", "clocks", {180, 180, 60}},
    {"cup", "cups", {250, 140, 0}},           {"horse", "horses", {110, 40, 10}},
    {"kite", "kites", {255, 0, 128}},         {"laptop", "laptops", {70, 70, 110}},
    {"umbrella", "umbrellas", {40, 0, 90}},   {"vase", "vases", {0, 90, 130}},
    {"apple", "apples", {220, 0, 0}},         {"banana", "bananas", {255, 225, 53}},
    {"book", "books", {150, 0, 30}},          {"bear", "bears", {80, 45, 15}},
    {"cake", "cakes", {250, 200, 200}},       {"couch", "couches", {120, 120, 0}},
    {"pizza", "pizzas", {230, 90, 40}},       {"sheep", "sheep", {200, 200, 180}},
    {"train", "trains", {0, 0, 0}},           {"truck", "trucks", {50, 150, 50}},
}};

/// Embedding dimension of the oracle embedder: one axis per noun plus background.
inline constexpr std::size_t kEmbeddingDim = kVocabulary.size() + 1;
inline constexpr std::size_t kBackgroundAxis = kVocabulary.size();

inline std::optional<std::size_t> noun_index(std::string_view word) noexcept {
  for (std::size_t i = 0; i < kVocabulary.size(); ++i) {
    if (word == kVocabulary[i].singular || word == kVocabulary[i].plural) return i;
  }
  return std::nullopt;
}

inline std::optional<std::size_t> noun_for_color(Rgb color) noexcept {
  for (std::size_t i = 0; i < kVocabulary.size(); ++i) {
    if (kVocabulary[i].color == color) return i;
  }
  return std::nullopt;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

// ---------------------------------------------------------------------------------------------
// Seeded randomness from mt19937_64, which is fully specified, so results do not depend on the
// standard library's distribution implementations.

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

inline std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------------------------

struct SimParams {
  double sigma_place = 0.08;
  double dropout = 0.15;
};

struct SceneObject {
  BBox intended;
  // Absent iff dropped.
  std::optional<PixelRect> rendered;
  Rgb color;
  bool dropped = false;
  // Latent placement offset in normalized units; kept while dropped so a cleared dropout
  // reappears where the object would have been.
  double offset_x = 0.0;
  double offset_y = 0.0;
};

struct SceneDescriptor {
  std::vector<SceneObject> objects;
  double sigma_place = 0.0;
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
};

inline Rgb color_for_label(std::string_view label) {
  for (const auto& word : tokenize(label)) {
    if (auto idx = noun_index(word)) return kVocabulary[*idx].color;
  }
  // Unknown labels still get a stable, non-palette color.
  const auto h = fnv1a(label);
  Rgb c{static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8), static_cast<std::uint8_t>(h >> 16)};
  if (c == kBackground || noun_for_color(c)) c.b ^= 1;
  return c;
}

/// Integer pixel shift of a rect, clamped so the rect stays inside the frame.
inline PixelRect place_rect(const PixelRect& region, double offset_x, double offset_y, int width, int height) {
  int dx = static_cast<int>(std::lround(offset_x * width));
  int dy = static_cast<int>(std::lround(offset_y * height));
  dx = std::clamp(dx, -region.x0, width - region.x1);
  dy = std::clamp(dy, -region.y0, height - region.y1);
  return {region.x0 + dx, region.y0 + dy, region.x1 + dx, region.y1 + dy};
}

inline void fill(Raster& image, const PixelRect& rect, Rgb color) {
  for (int y = rect.y0; y < rect.y1; ++y)
    for (int x = rect.x0; x < rect.x1; ++x) image.set(x, y, color);
}

inline PixelRect intersect(const PixelRect& a, const PixelRect& b) noexcept {
  PixelRect r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  if (r.x1 < r.x0) r.x1 = r.x0;
  if (r.y1 < r.y0) r.y1 = r.y0;
  return r;
}

inline void update_rendered(SceneDescriptor& scene) {
  for (auto& obj : scene.objects) {
    if (obj.dropped) {
      obj.rendered.reset();
    } else {
      const auto region = box_to_pixels(obj.intended, scene.width, scene.height);
      obj.rendered = place_rect(region, obj.offset_x, obj.offset_y, scene.width, scene.height);
    }
  }
}

/// Rasterizes a scene. Outside every intended region the last object covering a pixel wins;
/// inside intended regions only the owning objects are drawn.
inline Raster render(const SceneDescriptor& scene) {
  Raster image(scene.width, scene.height, kBackground);
  for (const auto& obj : scene.objects) {
    if (obj.rendered) fill(image, *obj.rendered, obj.color);
  }
  std::vector<PixelRect> regions;
  regions.reserve(scene.objects.size());
  for (const auto& obj : scene.objects) {
    regions.push_back(box_to_pixels(obj.intended, scene.width, scene.height));
    fill(image, regions.back(), kBackground);
  }
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& obj = scene.objects[i];
    if (obj.rendered) fill(image, intersect(regions[i], *obj.rendered), obj.color);
  }
  return image;
}

/// Oracle image embedding: fraction of pixels per palette color, background and unknown
/// colors on the background axis.
inline std::vector<double> occupancy(const Raster& image) {
  std::vector<double> counts(kEmbeddingDim, 0.0);
  std::unordered_map<std::uint32_t, std::size_t> axis_of;
  for (std::size_t i = 0; i < kVocabulary.size(); ++i) axis_of.emplace(kVocabulary[i].color.packed(), i);
  const auto bytes = image.bytes();
  std::uint32_t last_color = kBackground.packed();
  std::size_t last_axis = kBackgroundAxis;
  for (std::size_t i = 0; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t c = (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8) | bytes[i + 2];
    if (c != last_color) {
      last_color = c;
      const auto it = axis_of.find(c);
      last_axis = it == axis_of.end() ? kBackgroundAxis : it->second;
    }
    counts[last_axis] += 1.0;
  }
  const double total = static_cast<double>(bytes.size() / 3);
  for (auto& v : counts) v /= total;
  return counts;
}

inline std::vector<double> text_vector(std::string_view text) {
  std::vector<double> v(kEmbeddingDim, 0.0);
  bool any = false;
  for (const auto& word : tokenize(text)) {
    if (auto idx = noun_index(word)) {
      v[*idx] = 1.0;
      any = true;
    }
  }
  if (!any) v[kBackgroundAxis] = 1.0;
  return v;
}

// ---------------------------------------------------------------------------------------------
// Mock layout provider content.

namespace detail {

inline const std::map<std::string_view, int>& number_words() {
  static const std::map<std::string_view, int> words{{"a", 1},     {"an", 1},    {"one", 1},   {"two", 2},
                                                     {"three", 3}, {"four", 4},  {"five", 5},  {"six", 6},
                                                     {"seven", 7}, {"eight", 8}, {"1", 1},     {"2", 2},
                                                     {"3", 3},     {"4", 4},     {"5", 5},     {"6", 6},
                                                     {"7", 7},     {"8", 8}};
  return words;
}

inline bool is_stop_word(std::string_view w) {
  static const std::set<std::string_view> stop{"a",   "an",    "the",  "of",   "and",  "photo", "picture", "image",
                                               "with", "left", "right", "above", "below", "on",   "in",     "to",
                                               "next", "near", "is",   "are",  "there", "sports", "traffic"};
  return stop.contains(w);
}

struct Mention {
  std::size_t noun;
  int count;
  std::vector<std::string> adjectives;
};

inline std::vector<Mention> find_mentions(std::string_view prompt) {
  const auto words = tokenize(prompt);
  std::vector<Mention> out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto idx = noun_index(words[i]);
    if (!idx) continue;
    Mention m{*idx, 1, {}};
    std::size_t j = i;
    while (j > 0) {
      const auto& w = words[j - 1];
      if (number_words().contains(w)) {
        m.count = number_words().at(w);
        break;
      }
      if (noun_index(w) || w == "and" || w == "of" || w == "left" || w == "right" || w == "above" || w == "below") break;
      if (!is_stop_word(w)) m.adjectives.insert(m.adjectives.begin(), w);
      --j;
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace detail

/// Layout the mock provider proposes for prompts without a canned entry: mentioned objects,
/// expanded by their counts (at most 8), placed in a padded grid in mention order. "right of"
/// and "below" reverse the order; "above"/"below" stack vertically.
inline Layout synthesize_layout(std::string_view prompt) {
  Layout layout;
  layout.source_prompt = std::string(prompt);
  std::vector<ObjectSpec> objects;
  for (const auto& m : detail::find_mentions(prompt)) {
    std::string description = "a";
    for (const auto& adj : m.adjectives) description += " " + adj;
    description += " ";
    description += kVocabulary[m.noun].singular;
    for (int c = 0; c < m.count && objects.size() < 8; ++c) {
      objects.push_back({std::string(kVocabulary[m.noun].singular), description, {}});
    }
  }
  const std::string lower = [&] {
    std::string s(prompt);
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
  }();
  const bool vertical = lower.find("above") != std::string::npos || lower.find("below") != std::string::npos;
  const bool reversed = lower.find("right of") != std::string::npos || lower.find("below") != std::string::npos;

  const int n = static_cast<int>(objects.size());
  if (n == 0) return layout;
  int cols = n <= 4 ? n : (n + 1) / 2;
  int rows = n <= 4 ? 1 : 2;
  if (vertical) std::swap(cols, rows);
  const double cw = 1.0 / cols;
  const double ch = 1.0 / rows;
  const double pad = 0.08;
  for (int i = 0; i < n; ++i) {
    const int slot = reversed ? n - 1 - i : i;
    const int col = vertical ? slot / rows : slot % cols;
    const int row = vertical ? slot % rows : slot / cols;
    auto& obj = objects[i];
    obj.box = {col * cw + pad * cw, row * ch + (rows == 1 ? 0.2 : pad) * ch, (col + 1) * cw - pad * cw,
               (row + 1) * ch - (rows == 1 ? 0.15 : pad) * ch};
  }
  layout.objects = std::move(objects);
  return layout;
}

/// Hand-placed layouts for showcase prompts, keyed by the FNV-1a hash of the lowercased prompt.
inline const std::map<std::uint64_t, std::string_view>& canned_layouts() {
  static const std::map<std::uint64_t, std::string_view> table{
      {fnv1a("a photo of four giraffes"),
       R"({"objects":[{"label":"giraffe","description":"a giraffe","box":[0.04,0.12,0.24,0.9]},)"
       R"({"label":"giraffe","description":"a giraffe","box":[0.28,0.08,0.48,0.88]},)"
       R"({"label":"giraffe","description":"a giraffe","box":[0.52,0.1,0.72,0.92]},)"
       R"({"label":"giraffe","description":"a giraffe","box":[0.76,0.14,0.96,0.9]}]})"},
      {fnv1a("a photo of a chair left of a zebra"),
       R"({"objects":[{"label":"chair","description":"a chair","box":[0.06,0.4,0.38,0.9]},)"
       R"({"label":"zebra","description":"a zebra","box":[0.5,0.22,0.95,0.88]}]})"},
      {fnv1a("a purple elephant and a brown sports ball"),
       R"({"objects":[{"label":"elephant","description":"a purple elephant","box":[0.05,0.15,0.6,0.85]},)"
       R"({"label":"ball","description":"a brown sports ball","box":[0.68,0.55,0.92,0.8]}]})"},
      {fnv1a("four traffic signs"),
       R"({"objects":[{"label":"sign","description":"a traffic sign","box":[0.05,0.05,0.45,0.45]},)"
       R"({"label":"sign","description":"a traffic sign","box":[0.55,0.05,0.95,0.45]},)"
       R"({"label":"sign","description":"a traffic sign","box":[0.05,0.55,0.45,0.95]},)"
       R"({"label":"sign","description":"a traffic sign","box":[0.55,0.55,0.95,0.95]}]})"},
  };
  return table;
}

// ---------------------------------------------------------------------------------------------

/// Failure injection for tests.
struct SimFaults {
  std::set<std::uint64_t> generate_failures;
  std::set<std::uint64_t> refine_failures;
  // The first n layout proposals return text without a layout block.
  int malformed_layouts = 0;
  bool embed_image_fails = false;
};

struct CallCounters {
  std::atomic<long> propose{0};
  std::atomic<long> generate{0};
  std::atomic<long> refine{0};
  std::atomic<long> embed_image{0};
  std::atomic<long> embed_text{0};
};

/// Owns the simulation world shared by the four mock backends: parameters, fault injection,
/// call counters and the registry mapping rendered images back to their scene descriptors.
class Studio : public std::enable_shared_from_this<Studio> {
 public:
  static std::shared_ptr<Studio> create(SimParams params = {}, SimFaults faults = {}) {
    return std::shared_ptr<Studio>(new Studio(params, std::move(faults)));
  }

  Backends backends();

  const SimParams& params() const noexcept { return params_; }
  const CallCounters& counters() const noexcept { return counters_; }
  CallCounters& counters() noexcept { return counters_; }

  /// Scene descriptor behind an image produced by this studio.
  std::optional<SceneDescriptor> scene_of(const Raster& image) const {
    std::lock_guard lock(mutex_);
    const auto it = registry_.find(fingerprint(image));
    if (it == registry_.end()) return std::nullopt;
    return it->second;
  }

  SceneDescriptor draft_scene(const GenerateRequest& request) const {
    SceneDescriptor scene;
    scene.sigma_place = params_.sigma_place;
    scene.seed = request.seed;
    scene.width = request.width;
    scene.height = request.height;
    for (std::size_t i = 0; i < request.layout.size(); ++i) {
      const auto& spec = request.layout.objects[i];
      Stream rng(mix_seed(request.seed, i));
      SceneObject obj;
      obj.intended = spec.box;
      obj.color = color_for_label(spec.label);
      obj.offset_x = params_.sigma_place * rng.normal();
      obj.offset_y = params_.sigma_place * rng.normal();
      obj.dropped = rng.uniform() < params_.dropout;
      scene.objects.push_back(obj);
    }
    update_rendered(scene);
    return scene;
  }

  SceneDescriptor refined_scene(const SceneDescriptor& parent, std::uint64_t seed, double strength) const {
    SceneDescriptor child = parent;
    child.seed = seed;
    child.sigma_place = parent.sigma_place * (1.0 - strength);
    for (std::size_t i = 0; i < child.objects.size(); ++i) {
      auto& obj = child.objects[i];
      Stream rng(mix_seed(seed, i));
      obj.offset_x *= 1.0 - strength;
      obj.offset_y *= 1.0 - strength;
      if (obj.dropped && rng.uniform() < strength) obj.dropped = false;
    }
    update_rendered(child);
    return child;
  }

  Raster publish(const SceneDescriptor& scene) {
    Raster image = render(scene);
    const auto key = fingerprint(image);
    std::lock_guard lock(mutex_);
    auto [it, inserted] = registry_.emplace(key, scene);
    // Distinct latent states can rasterize identically; keep the lowest seed so lookups do
    // not depend on call order.
    if (!inserted && scene.seed < it->second.seed) it->second = scene;
    return image;
  }

  std::string propose_text(const std::string& prompt) {
    if (prompt.empty()) throw Error(ErrorCode::InvalidArgument, "layout prompt must be non-empty");
    const long call = counters_.propose.fetch_add(1);
    if (call < faults_.malformed_layouts) return "I cannot produce a layout.";
    std::string key = prompt;
    for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    std::string body;
    if (const auto it = canned_layouts().find(fnv1a(key)); it != canned_layouts().end()) {
      body = std::string(it->second);
    } else {
      body = serialize_layout(synthesize_layout(prompt));
    }
    return "Here is the layout for your prompt.\n```json\n" + body + "\n```\n";
  }

  Raster generate_image(const GenerateRequest& request) {
    counters_.generate.fetch_add(1);
    if (faults_.generate_failures.contains(request.seed)) {
      throw Error(ErrorCode::GenerationFailed, "simulated failure for seed " + std::to_string(request.seed));
    }
    if (request.width < 1 || request.height < 1) throw Error(ErrorCode::GenerationFailed, "bad image size");
    return publish(draft_scene(request));
  }

  Raster refine_image(const RefineRequest& request) {
    counters_.refine.fetch_add(1);
    if (!(request.strength > 0.0 && request.strength < 1.0)) {
      throw Error(ErrorCode::RefinerFailed, "strength must lie in (0, 1)");
    }
    if (faults_.refine_failures.contains(request.seed)) {
      throw Error(ErrorCode::RefinerFailed, "simulated failure for seed " + std::to_string(request.seed));
    }
    const auto parent = scene_of(request.image);
    if (!parent) throw Error(ErrorCode::RefinerFailed, "image was not produced by this simulation");
    return publish(refined_scene(*parent, request.seed, request.strength));
  }

  Embedding embed_image(const Raster& image) {
    counters_.embed_image.fetch_add(1);
    if (faults_.embed_image_fails) throw Error(ErrorCode::EmbedderFailed, "simulated embedder failure");
    if (image.empty()) throw Error(ErrorCode::EmbedderFailed, "cannot embed an empty image");
    return Embedding(occupancy(image));
  }

  Embedding embed_text(std::string_view text) {
    counters_.embed_text.fetch_add(1);
    return Embedding(text_vector(text));
  }

 private:
  Studio(SimParams params, SimFaults faults) : params_(params), faults_(std::move(faults)) {}

  SimParams params_;
  SimFaults faults_;
  CallCounters counters_;
  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, SceneDescriptor> registry_;
};

namespace detail {

class SimLayoutProvider final : public LayoutProvider {
 public:
  explicit SimLayoutProvider(std::shared_ptr<Studio> studio) : studio_(std::move(studio)) {}
  std::string propose(const std::string& prompt) override { return studio_->propose_text(prompt); }

 private:
  std::shared_ptr<Studio> studio_;
};

class SimGenerator final : public ImageGenerator {
 public:
  explicit SimGenerator(std::shared_ptr<Studio> studio) : studio_(std::move(studio)) {}
  Raster generate(const GenerateRequest& request) override { return studio_->generate_image(request); }

 private:
  std::shared_ptr<Studio> studio_;
};

class SimRefiner final : public ImageRefiner {
 public:
  explicit SimRefiner(std::shared_ptr<Studio> studio) : studio_(std::move(studio)) {}
  Raster refine(const RefineRequest& request) override { return studio_->refine_image(request); }

 private:
  std::shared_ptr<Studio> studio_;
};

class SimEmbedder final : public EmbeddingProvider {
 public:
  explicit SimEmbedder(std::shared_ptr<Studio> studio) : studio_(std::move(studio)) {}
  Embedding embed_image(const Raster& image) override { return studio_->embed_image(image); }
  Embedding embed_text(std::string_view text) override { return studio_->embed_text(text); }

 private:
  std::shared_ptr<Studio> studio_;
};

}  // namespace detail

inline Backends Studio::backends() {
  auto self = shared_from_this();
  return {std::make_shared<detail::SimLayoutProvider>(self), std::make_shared<detail::SimGenerator>(self),
          std::make_shared<detail::SimRefiner>(self), std::make_shared<detail::SimEmbedder>(self)};
}

}  // namespace refocus::sim
