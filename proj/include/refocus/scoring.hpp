#pragma once

// Scene, object and hybrid preference scores plus deterministic top-K re-ranking.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "refocus/backends.hpp"
#include "refocus/error.hpp"
#include "refocus/geometry.hpp"
#include "refocus/image.hpp"

namespace refocus {

/// Cosine similarity, clamped to [-1, 1].
inline double similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "embedding dims differ: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  const auto& x = a.values();
  const auto& y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    na += x[i] * x[i];
    nb += y[i] * y[i];
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline double scene_score(const Embedding& image_emb, const Embedding& prompt_emb) {
  return similarity(image_emb, prompt_emb);
}

struct HybridScore {
  double scene = 0.0;
  // Absent when the layout has no objects.
  std::optional<double> object;
  double lambda_used = 1.0;
  double combined = 0.0;

  friend bool operator==(const HybridScore&, const HybridScore&) = default;
};

inline HybridScore hybrid_score(double scene, std::optional<double> object, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::LambdaOutOfRange, "lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  if (!object) return {scene, std::nullopt, 1.0, scene};
  return {scene, object, lambda, lambda * scene + (1.0 - lambda) * *object};
}

/// Mean crop-to-description similarity, given description embeddings computed up front
/// (one per layout object, in layout order). Returns nullopt for an empty layout.
inline std::optional<double> object_score(const Raster& image, const Layout& layout,
                                          std::span<const Embedding> description_embeddings,
                                          EmbeddingProvider& embedder) {
  if (layout.empty()) return std::nullopt;
  if (description_embeddings.size() != layout.size()) {
    throw Error(ErrorCode::InvalidArgument, "one description embedding is needed per layout object");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    Embedding crop_emb;
    try {
      crop_emb = embedder.embed_image(crop_region(image, layout.objects[i].box));
    } catch (const Error& e) {
      throw Error(ErrorCode::EmbedderFailed, "object " + std::to_string(i) + ": " + e.message());
    }
    sum += similarity(crop_emb, description_embeddings[i]);
  }
  return sum / static_cast<double>(layout.size());
}

inline std::optional<double> object_score(const Raster& image, const Layout& layout, EmbeddingProvider& embedder) {
  std::vector<Embedding> descriptions;
  descriptions.reserve(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    try {
      descriptions.push_back(embedder.embed_text(layout.objects[i].description));
    } catch (const Error& e) {
      throw Error(ErrorCode::EmbedderFailed, "object " + std::to_string(i) + ": " + e.message());
    }
  }
  return object_score(image, layout, descriptions, embedder);
}

struct Candidate {
  std::string id;
  Raster image;
  std::uint64_t seed = 0;
  int round = 0;
  std::optional<std::string> parent_id;
  std::optional<HybridScore> score;
};

inline std::string candidate_id(int round, std::uint64_t seed) {
  return "r" + std::to_string(round) + "_s" + std::to_string(seed);
}

template <class T>
concept Rankable = requires(const T& c) {
  { c.score } -> std::convertible_to<std::optional<HybridScore>>;
  { c.round } -> std::convertible_to<int>;
  { c.seed } -> std::convertible_to<std::uint64_t>;
};

/// Strict ranking order: higher combined score, then lower round, then lower seed.
/// Callers needing insertion order as the last key must use a stable algorithm.
template <Rankable T>
bool ranks_before(const T& a, const T& b) noexcept {
  if (a.score->combined != b.score->combined) return a.score->combined > b.score->combined;
  if (a.round != b.round) return a.round < b.round;
  return a.seed < b.seed;
}

/// Returns the best min(k_keep, n) candidates in ranking order. The input is not modified.
template <Rankable T>
std::vector<T> rerank_top_k(std::span<const T> candidates, std::size_t k_keep) {
  if (k_keep == 0) throw Error(ErrorCode::InvalidArgument, "k_keep must be at least 1");
  for (const auto& c : candidates) {
    if (!c.score) throw Error(ErrorCode::UnscoredCandidate, "re-ranking needs every candidate scored");
  }
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ranks_before(candidates[a], candidates[b]); });
  order.resize(std::min(k_keep, order.size()));
  std::vector<T> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(candidates[i]);
  return out;
}

template <Rankable T>
std::vector<T> rerank_top_k(const std::vector<T>& candidates, std::size_t k_keep) {
  return rerank_top_k(std::span<const T>(candidates), k_keep);
}

}  // namespace refocus
