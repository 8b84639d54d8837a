#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "refocus/error.hpp"
#include "refocus/geometry.hpp"

namespace refocus {

using json = nlohmann::json;

/// Every pipeline knob. Defaults: N=4 drafts, 50 steps at guidance 7.5, one refinement
/// pass per variant at guidance 0.0 and strength 0.5, two rounds, K=1, M=4, lambda=0.5.
struct PipelineConfig {
  int n_drafts = 4;
  int k_keep = 1;
  int m_variants = 4;
  double lambda = 0.5;
  double delta = 0.02;
  int rounds = 2;
  double alpha_refine = 0.5;
  int gen_steps = 50;
  double gen_guidance = 7.5;
  double refine_guidance = 0.0;
  std::uint64_t base_seed = 0;
  int retry_budget = 3;
  int width = 512;
  int height = 512;
  int parallelism = 1;
  // Keep the re-ranked incumbents eligible in later rounds.
  bool incumbent_retention = true;

  std::string backend = "sim";
  std::string layout_url;
  std::string generate_url;
  std::string refine_url;
  std::string embed_url;
  double timeout_s = 120.0;
  double sim_sigma_place = 0.08;
  double sim_dropout = 0.15;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

inline void validate(const PipelineConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
  if (c.n_drafts < 1) fail("n_drafts must be at least 1");
  if (c.k_keep < 1) fail("k_keep must be at least 1");
  if (c.k_keep > c.n_drafts) fail("k_keep must not exceed n_drafts");
  if (c.m_variants < 1) fail("m_variants must be at least 1");
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) fail("lambda must lie in [0, 1]");
  if (!(c.delta >= 0.0 && c.delta < kMaxShrinkDelta)) fail("delta must lie in [0, 0.25)");
  if (c.rounds < 0) fail("rounds must be non-negative");
  if (!(c.alpha_refine > 0.0 && c.alpha_refine < 1.0)) fail("alpha_refine must lie in (0, 1)");
  if (c.gen_steps < 1) fail("gen_steps must be at least 1");
  if (c.retry_budget < 0) fail("retry_budget must be non-negative");
  if (c.width < 64 || c.height < 64) fail("image width and height must be at least 64");
  if (c.parallelism < 1) fail("parallelism must be at least 1");
  if (c.backend != "sim" && c.backend != "http") fail("backend must be \"sim\" or \"http\"");
  if (!(c.timeout_s > 0.0)) fail("timeout_s must be positive");
  if (!(c.sim_sigma_place >= 0.0)) fail("sim_sigma_place must be non-negative");
  if (!(c.sim_dropout >= 0.0 && c.sim_dropout <= 1.0)) fail("sim_dropout must lie in [0, 1]");
}

inline json config_to_json(const PipelineConfig& c) {
  return json{{"n_drafts", c.n_drafts},
              {"k_keep", c.k_keep},
              {"m_variants", c.m_variants},
              {"lambda", c.lambda},
              {"delta", c.delta},
              {"rounds", c.rounds},
              {"alpha_refine", c.alpha_refine},
              {"gen_steps", c.gen_steps},
              {"gen_guidance", c.gen_guidance},
              {"refine_guidance", c.refine_guidance},
              {"base_seed", c.base_seed},
              {"retry_budget", c.retry_budget},
              {"width", c.width},
              {"height", c.height},
              {"parallelism", c.parallelism},
              {"incumbent_retention", c.incumbent_retention},
              {"backend", c.backend},
              {"layout_url", c.layout_url},
              {"generate_url", c.generate_url},
              {"refine_url", c.refine_url},
              {"embed_url", c.embed_url},
              {"timeout_s", c.timeout_s},
              {"sim_sigma_place", c.sim_sigma_place},
              {"sim_dropout", c.sim_dropout}};
}

/// Overlays the fields present in `doc` onto `base`. Unknown keys and mistyped values are
/// ConfigErrors. The result is not validated.
inline PipelineConfig apply_config_json(PipelineConfig base, const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "config document must be an object");
  for (const auto& [key, value] : doc.items()) {
    auto need = [&](bool ok, const char* type) {
      if (!ok) throw Error(ErrorCode::ConfigError, "config field \"" + key + "\" must be " + type);
    };
    auto as_int = [&](int& field) {
      need(value.is_number_integer(), "an integer");
      field = value.get<int>();
    };
    auto as_real = [&](double& field) {
      need(value.is_number(), "a number");
      field = value.get<double>();
    };
    auto as_string = [&](std::string& field) {
      need(value.is_string(), "a string");
      field = value.get<std::string>();
    };
    if (key == "n_drafts") as_int(base.n_drafts);
    else if (key == "k_keep") as_int(base.k_keep);
    else if (key == "m_variants") as_int(base.m_variants);
    else if (key == "lambda") as_real(base.lambda);
    else if (key == "delta") as_real(base.delta);
    else if (key == "rounds") as_int(base.rounds);
    else if (key == "alpha_refine") as_real(base.alpha_refine);
    else if (key == "gen_steps") as_int(base.gen_steps);
    else if (key == "gen_guidance") as_real(base.gen_guidance);
    else if (key == "refine_guidance") as_real(base.refine_guidance);
    else if (key == "base_seed") {
      need(value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0),
           "a non-negative integer");
      base.base_seed = value.get<std::uint64_t>();
    }
    else if (key == "retry_budget") as_int(base.retry_budget);
    else if (key == "width") as_int(base.width);
    else if (key == "height") as_int(base.height);
    else if (key == "parallelism") as_int(base.parallelism);
    else if (key == "incumbent_retention") {
      need(value.is_boolean(), "a boolean");
      base.incumbent_retention = value.get<bool>();
    }
    else if (key == "backend") as_string(base.backend);
    else if (key == "layout_url") as_string(base.layout_url);
    else if (key == "generate_url") as_string(base.generate_url);
    else if (key == "refine_url") as_string(base.refine_url);
    else if (key == "embed_url") as_string(base.embed_url);
    else if (key == "timeout_s") as_real(base.timeout_s);
    else if (key == "sim_sigma_place") as_real(base.sim_sigma_place);
    else if (key == "sim_dropout") as_real(base.sim_dropout);
    else throw Error(ErrorCode::ConfigError, "unknown config field \"" + key + "\"");
  }
  return base;
}

inline PipelineConfig config_from_json(const json& doc) {
  auto c = apply_config_json(PipelineConfig{}, doc);
  validate(c);
  return c;
}

/// Values given on the command line; unset fields fall through to the config file, then to the
/// built-in defaults.
struct ConfigOverrides {
  std::optional<int> n_drafts;
  std::optional<int> k_keep;
  std::optional<int> m_variants;
  std::optional<int> rounds;
  std::optional<double> lambda;
  std::optional<double> delta;
  std::optional<double> alpha_refine;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallelism;
  std::optional<std::string> backend;
  std::optional<std::string> endpoint_url;
  std::optional<std::string> layout_url;
  std::optional<std::string> generate_url;
  std::optional<std::string> refine_url;
  std::optional<std::string> embed_url;
};

/// Flags > config file > defaults. A shared endpoint URL fills every per-backend URL not given
/// explicitly on the command line.
inline PipelineConfig resolve_config(const std::optional<json>& file, const ConfigOverrides& flags) {
  PipelineConfig c;
  if (file) c = apply_config_json(c, *file);
  auto take = [](auto& field, const auto& opt) {
    if (opt) field = *opt;
  };
  take(c.n_drafts, flags.n_drafts);
  take(c.k_keep, flags.k_keep);
  take(c.m_variants, flags.m_variants);
  take(c.rounds, flags.rounds);
  take(c.lambda, flags.lambda);
  take(c.delta, flags.delta);
  take(c.alpha_refine, flags.alpha_refine);
  take(c.base_seed, flags.seed);
  take(c.parallelism, flags.parallelism);
  take(c.backend, flags.backend);
  if (flags.endpoint_url) {
    c.layout_url = c.generate_url = c.refine_url = c.embed_url = *flags.endpoint_url;
  }
  take(c.layout_url, flags.layout_url);
  take(c.generate_url, flags.generate_url);
  take(c.refine_url, flags.refine_url);
  take(c.embed_url, flags.embed_url);
  validate(c);
  return c;
}

}  // namespace refocus
