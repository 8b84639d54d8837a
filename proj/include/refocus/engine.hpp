#pragma once

// Pipeline orchestration: layout grounding, best-of-N drafts, and the re-rank/refine loop.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "refocus/backends.hpp"
#include "refocus/codec.hpp"
#include "refocus/config.hpp"
#include "refocus/error.hpp"
#include "refocus/geometry.hpp"
#include "refocus/layout_io.hpp"
#include "refocus/manifest.hpp"
#include "refocus/scoring.hpp"
#include "refocus/seeding.hpp"

namespace refocus {

inline constexpr int kMinCandidateSide = 64;

namespace detail {

template <class T>
struct Outcome {
  std::optional<T> value;
  std::exception_ptr error;
};

// Runs fn(0..n-1) on up to `parallelism` threads; results come back in index order.
template <class T, class Fn>
std::vector<Outcome<T>> parallel_map(std::size_t n, int parallelism, Fn&& fn) {
  std::vector<Outcome<T>> out(n);
  auto run_one = [&](std::size_t i) {
    try {
      out[i].value.emplace(fn(i));
    } catch (...) {
      out[i].error = std::current_exception();
    }
  };
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(parallelism, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_one(i);
      });
    }
  }
  return out;
}

inline std::pair<std::string, std::string> describe(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const Error& e) {
    return {std::string(to_string(e.code())), e.message()};
  } catch (const std::exception& e) {
    return {"Exception", e.what()};
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

/// Text embeddings computed once per run and the embedder used for images.
class Scorer {
 public:
  Scorer(EmbeddingProvider& embedder, const std::string& prompt, Layout layout, double lambda)
      : embedder_(&embedder), layout_(std::move(layout)), lambda_(lambda), prompt_embedding_(embedder.embed_text(prompt)) {
    descriptions_.reserve(layout_.size());
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      try {
        descriptions_.push_back(embedder.embed_text(layout_.objects[i].description));
      } catch (const Error& e) {
        throw Error(ErrorCode::EmbedderFailed, "object " + std::to_string(i) + ": " + e.message());
      }
    }
  }

  /// One image embedding for the scene plus one per layout object.
  HybridScore score(const Raster& image) const {
    const double scene = scene_score(embedder_->embed_image(image), prompt_embedding_);
    const auto object = object_score(image, layout_, descriptions_, *embedder_);
    return hybrid_score(scene, object, lambda_);
  }

  const Layout& layout() const noexcept { return layout_; }

 private:
  EmbeddingProvider* embedder_;
  Layout layout_;
  double lambda_;
  Embedding prompt_embedding_;
  std::vector<Embedding> descriptions_;
};

/// Scores every candidate in place, concurrently up to `parallelism`. Embedder failures abort.
inline void score_all(std::span<Candidate> candidates, const Scorer& scorer, int parallelism) {
  auto results = detail::parallel_map<HybridScore>(candidates.size(), parallelism,
                                                   [&](std::size_t i) { return scorer.score(candidates[i].image); });
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (results[i].error) std::rethrow_exception(results[i].error);
    candidates[i].score = *results[i].value;
  }
}

/// N layout-grounded drafts at round 0 with seeds base_seed..base_seed+N-1. Failed seeds are
/// skipped and appended to `failures`; throws AllGenerationFailed if none succeed.
inline std::vector<Candidate> generate_drafts(const std::string& prompt, const Layout& layout,
                                              const PipelineConfig& config, ImageGenerator& generator,
                                              std::vector<FailureRecord>* failures = nullptr) {
  const auto n = static_cast<std::size_t>(config.n_drafts);
  auto results = detail::parallel_map<Raster>(n, config.parallelism, [&](std::size_t i) {
    GenerateRequest req{prompt,        layout,       draft_seed(config.base_seed, i), config.gen_steps,
                        config.gen_guidance, config.width, config.height};
    Raster image = generator.generate(req);
    if (image.width() < kMinCandidateSide || image.height() < kMinCandidateSide) {
      throw Error(ErrorCode::GenerationFailed, "generator returned a " + std::to_string(image.width()) + "x" +
                                                   std::to_string(image.height()) + " image");
    }
    return image;
  });
  std::vector<Candidate> drafts;
  std::string last_error;
  for (std::size_t i = 0; i < n; ++i) {
    const auto seed = draft_seed(config.base_seed, i);
    if (results[i].error) {
      auto [code, message] = detail::describe(results[i].error);
      last_error = code + ": " + message;
      if (failures) failures->push_back({"generate", 0, seed, code, message});
      continue;
    }
    drafts.push_back({candidate_id(0, seed), std::move(*results[i].value), seed, 0, std::nullopt, std::nullopt});
  }
  if (drafts.empty()) {
    throw Error(ErrorCode::AllGenerationFailed, "all " + std::to_string(n) + " drafts failed; last: " + last_error);
  }
  return drafts;
}

/// M refinement variants of the kept set; variant j refines kept[j mod |kept|]. Failed variants
/// are skipped and recorded, so the result may be shorter than M (or empty).
inline std::vector<Candidate> refine_round(std::span<const Candidate> kept, const std::string& prompt,
                                           const PipelineConfig& config, int round_index, ImageRefiner& refiner,
                                           std::vector<FailureRecord>* failures = nullptr) {
  if (kept.empty()) throw Error(ErrorCode::InvalidArgument, "refine_round needs at least one kept candidate");
  if (round_index < 1) throw Error(ErrorCode::InvalidArgument, "refinement rounds are numbered from 1");
  const auto m = static_cast<std::size_t>(config.m_variants);
  auto results = detail::parallel_map<Raster>(m, config.parallelism, [&](std::size_t j) {
    const auto& parent = kept[j % kept.size()];
    RefineRequest req{parent.image, prompt, refine_seed(config.base_seed, round_index, j), config.alpha_refine,
                      config.refine_guidance};
    return refiner.refine(req);
  });
  std::vector<Candidate> produced;
  for (std::size_t j = 0; j < m; ++j) {
    const auto seed = refine_seed(config.base_seed, round_index, j);
    const auto& parent = kept[j % kept.size()];
    if (results[j].error) {
      auto [code, message] = detail::describe(results[j].error);
      if (failures) failures->push_back({"refine", round_index, seed, code, message});
      continue;
    }
    produced.push_back(
        {candidate_id(round_index, seed), std::move(*results[j].value), seed, round_index, parent.id, std::nullopt});
  }
  return produced;
}

struct RunResult {
  RunManifest manifest;
  // Every candidate of the run, in creation order, with its image.
  std::vector<Candidate> candidates;
};

inline std::string image_relpath(const std::string& id) { return "images/" + id + ".png"; }

inline CandidateRecord to_record(const Candidate& c) {
  return {c.id, c.seed, c.round, c.parent_id, c.score, image_relpath(c.id)};
}

/// Layout phase: propose, parse, regularize; retried on any failure up to retry_budget times.
inline Layout ground_layout(const std::string& prompt, const PipelineConfig& config, LayoutProvider& provider,
                            RunManifest& manifest) {
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config.retry_budget; ++attempt) {
    manifest.layout_attempts = attempt + 1;
    std::string raw;
    try {
      raw = provider.propose(prompt);
      manifest.raw_layout_response = raw;
      return regularize_layout(parse_layout_response(raw, prompt), config.delta);
    } catch (const Error& e) {
      last_error = std::string(to_string(e.code())) + ": " + e.message();
      manifest.failures.push_back({"layout", 0, std::nullopt, std::string(to_string(e.code())), e.message()});
    }
  }
  throw Error(ErrorCode::LayoutPhaseFailed,
              "no usable layout after " + std::to_string(config.retry_budget + 1) + " attempts; last: " + last_error);
}

/// Writes images/<id>.png for every candidate and manifest.json into `out_dir`.
inline void persist_run(const RunResult& result, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create output directory " + out_dir.string() + ": " + ec.message());
  for (const auto& c : result.candidates) {
    const auto png = encode_png(c.image);
    std::ofstream out(out_dir / image_relpath(c.id), std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write image for " + c.id);
    out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
  }
  save_manifest(result.manifest, out_dir / "manifest.json");
}

/// Runs all three phases and returns the manifest plus every candidate image. Persists to
/// `out_dir` when given.
inline RunResult run_pipeline(const std::string& prompt, const PipelineConfig& config, const Backends& backends,
                              const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  using clock = std::chrono::steady_clock;
  validate(config);
  if (!backends.complete()) throw Error(ErrorCode::ConfigError, "all four backends must be configured");
  if (prompt.empty()) throw Error(ErrorCode::InvalidArgument, "prompt must be non-empty");

  const auto run_start = clock::now();
  RunResult result;
  auto& manifest = result.manifest;
  manifest.prompt = prompt;
  manifest.config = config;
  if (!delta_in_recommended_range(config.delta)) {
    manifest.warnings.push_back("delta " + format_real(config.delta) + " is outside the recommended [0.02, 0.04]");
  }

  auto phase_start = clock::now();
  manifest.layout = ground_layout(prompt, config, *backends.layout, manifest);
  manifest.timings.layout_s = detail::seconds_since(phase_start);

  phase_start = clock::now();
  Scorer scorer(*backends.embedder, prompt, manifest.layout, config.lambda);
  std::vector<Candidate> pool = generate_drafts(prompt, manifest.layout, config, *backends.generator, &manifest.failures);
  score_all(pool, scorer, config.parallelism);
  result.candidates = pool;
  {
    RoundRecord rec;
    rec.round_index = 0;
    for (const auto& c : pool) rec.produced_candidate_ids.push_back(c.id);
    const auto best = rerank_top_k(pool, 1).front();
    rec.best_score = *best.score;
    rec.best_candidate_id = best.id;
    manifest.rounds.push_back(std::move(rec));
  }
  manifest.timings.drafts_s = detail::seconds_since(phase_start);

  phase_start = clock::now();
  for (int r = 1; r <= config.rounds; ++r) {
    RoundRecord rec;
    rec.round_index = r;
    for (const auto& c : pool) rec.input_candidate_ids.push_back(c.id);
    auto kept = rerank_top_k(pool, static_cast<std::size_t>(config.k_keep));
    for (const auto& c : kept) rec.kept_candidate_ids.push_back(c.id);

    auto produced = refine_round(kept, prompt, config, r, *backends.refiner, &manifest.failures);
    score_all(produced, scorer, config.parallelism);
    for (const auto& c : produced) {
      rec.produced_candidate_ids.push_back(c.id);
      result.candidates.push_back(c);
    }

    std::vector<Candidate> next;
    if (config.incumbent_retention || produced.empty()) next = kept;
    next.insert(next.end(), produced.begin(), produced.end());

    std::vector<Candidate> contenders = kept;
    contenders.insert(contenders.end(), produced.begin(), produced.end());
    const auto best = rerank_top_k(contenders, 1).front();
    rec.best_score = *best.score;
    rec.best_candidate_id = best.id;
    manifest.rounds.push_back(std::move(rec));
    pool = std::move(next);
  }
  manifest.timings.refinement_s = detail::seconds_since(phase_start);

  for (const auto& c : result.candidates) manifest.candidates.push_back(to_record(c));
  manifest.final_candidate_id = select_final(manifest).id;
  manifest.timings.total_s = detail::seconds_since(run_start);

  if (out_dir) persist_run(result, *out_dir);
  return result;
}

}  // namespace refocus
