#pragma once

// The four pluggable services the pipeline talks to.

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refocus/error.hpp"
#include "refocus/geometry.hpp"
#include "refocus/image.hpp"

namespace refocus {

/// Fixed-length, nonzero real vector produced by an EmbeddingProvider.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error(ErrorCode::EmbedderFailed, "embedding has zero dimension");
    double sq = 0.0;
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error(ErrorCode::EmbedderFailed, "embedding has a non-finite component");
      sq += v * v;
    }
    if (!(sq > 0.0)) throw Error(ErrorCode::EmbedderFailed, "embedding is the zero vector");
  }

  std::size_t dim() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
};

class LayoutProvider {
 public:
  virtual ~LayoutProvider() = default;
  /// Raw provider text, expected to carry one layout document.
  virtual std::string propose(const std::string& prompt) = 0;
};

struct GenerateRequest {
  std::string prompt;
  Layout layout;
  std::uint64_t seed = 0;
  int steps = 50;
  double guidance = 7.5;
  int width = 512;
  int height = 512;
};

class ImageGenerator {
 public:
  virtual ~ImageGenerator() = default;
  virtual Raster generate(const GenerateRequest& request) = 0;
};

struct RefineRequest {
  Raster image;
  std::string prompt;
  std::uint64_t seed = 0;
  double strength = 0.5;
  double guidance = 0.0;
};

class ImageRefiner {
 public:
  virtual ~ImageRefiner() = default;
  virtual Raster refine(const RefineRequest& request) = 0;
};

/// Must tolerate concurrent calls.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Embedding embed_image(const Raster& image) = 0;
  virtual Embedding embed_text(std::string_view text) = 0;
};

struct Backends {
  std::shared_ptr<LayoutProvider> layout;
  std::shared_ptr<ImageGenerator> generator;
  std::shared_ptr<ImageRefiner> refiner;
  std::shared_ptr<EmbeddingProvider> embedder;

  bool complete() const noexcept { return layout && generator && refiner && embedder; }
};

}  // namespace refocus
