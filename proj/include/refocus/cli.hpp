#pragma once

// `refocus` command line: run | rerank | regularize | inspect.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "refocus/config.hpp"
#include "refocus/engine.hpp"
#include "refocus/error.hpp"
#include "refocus/geometry.hpp"
#include "refocus/http_backends.hpp"
#include "refocus/layout_io.hpp"
#include "refocus/manifest.hpp"
#include "refocus/sim.hpp"

namespace refocus::cli {

struct RunArgs {
  std::string prompt;
  std::optional<std::string> config_path;
  std::string out_dir = "refocus_out";
  ConfigOverrides flags;
};

inline std::optional<json> load_config_file(const std::optional<std::string>& path) {
  if (!path) return std::nullopt;
  std::ifstream in(*path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + *path);
  auto doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw Error(ErrorCode::ConfigError, "config file " + *path + " is not valid JSON");
  return doc;
}

inline Backends make_backends(const PipelineConfig& config) {
  if (config.backend == "http") return http::make_http_backends(config);
  return sim::Studio::create({config.sim_sigma_place, config.sim_dropout})->backends();
}

inline int cmd_run(const RunArgs& args, std::ostream& out) {
  const auto file = load_config_file(args.config_path);
  auto config = resolve_config(file, args.flags);
  if (!args.flags.seed && !(file && file->contains("base_seed"))) {
    std::random_device entropy;
    config.base_seed = (std::uint64_t{entropy()} << 32) | entropy();
  }
  const std::filesystem::path out_dir(args.out_dir);
  const auto result = run_pipeline(args.prompt, config, make_backends(config), out_dir);
  const auto& m = result.manifest;

  auto ranked = rerank_top_k(m.candidates, m.candidates.size());
  out << format_candidate_table(ranked);
  const auto* final_record = m.find(m.final_candidate_id);
  out << "final\t" << m.final_candidate_id << '\t' << (out_dir / final_record->image_path).string() << '\t'
      << format_real(final_record->score->combined) << '\n';
  out << "manifest\t" << (out_dir / "manifest.json").string() << '\n';
  return 0;
}

inline int cmd_regularize(const std::string& layout_path, double delta, std::ostream& out) {
  std::ifstream in(layout_path);
  if (!in) throw Error(ErrorCode::ParseFailed, "cannot read layout file " + layout_path);
  std::stringstream text;
  text << in.rdbuf();
  const auto layout = parse_layout_response(text.str());
  out << serialize_layout(regularize_layout(layout, delta)) << '\n';
  return 0;
}

inline int cmd_rerank(const std::string& manifest_path, std::optional<double> lambda, std::optional<std::size_t> top,
                      std::ostream& out) {
  const auto manifest = load_manifest(manifest_path);
  const double l = lambda.value_or(manifest.config.lambda);
  if (!(l >= 0.0 && l <= 1.0)) throw Error(ErrorCode::ConfigError, "lambda must lie in [0, 1]");
  const auto rescored = rescore(manifest.candidates, l);
  if (rescored.empty()) throw Error(ErrorCode::EmptyRun, "manifest has no candidates");
  out << format_candidate_table(rerank_top_k(rescored, top.value_or(rescored.size())));
  return 0;
}

inline int cmd_inspect(const std::string& manifest_path, std::ostream& out) {
  out << format_candidate_table(load_manifest(manifest_path).candidates);
  return 0;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Layout-grounded best-of-N generation with iterative re-rank/refine"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline for one prompt");
  run_cmd->add_option("--prompt", run.prompt, "Text prompt")->required();
  run_cmd->add_option("--config", run.config_path, "JSON config file (PipelineConfig field names)");
  run_cmd->add_option("--out-dir", run.out_dir, "Output directory for manifest.json and images/");
  run_cmd->add_option("--backend", run.flags.backend, "sim | http");
  run_cmd->add_option("--endpoint-url", run.flags.endpoint_url, "Base URL used for every HTTP backend");
  run_cmd->add_option("--layout-url", run.flags.layout_url, "Base URL of the layout backend");
  run_cmd->add_option("--generate-url", run.flags.generate_url, "Base URL of the generator backend");
  run_cmd->add_option("--refine-url", run.flags.refine_url, "Base URL of the refiner backend");
  run_cmd->add_option("--embed-url", run.flags.embed_url, "Base URL of the embedder backend");
  run_cmd->add_option("--n-drafts", run.flags.n_drafts, "Number of drafts N");
  run_cmd->add_option("--k-keep", run.flags.k_keep, "Candidates kept per round K");
  run_cmd->add_option("--m-variants", run.flags.m_variants, "Refinement variants per round M");
  run_cmd->add_option("--rounds", run.flags.rounds, "Refinement rounds R");
  run_cmd->add_option("--lambda", run.flags.lambda, "Scene weight in the hybrid score");
  run_cmd->add_option("--delta", run.flags.delta, "Box shrink margin");
  run_cmd->add_option("--alpha-refine", run.flags.alpha_refine, "Refinement denoising strength");
  run_cmd->add_option("--seed", run.flags.seed, "Base seed (sampled from entropy when omitted)");
  run_cmd->add_option("--parallelism", run.flags.parallelism, "Concurrent backend calls per phase");

  std::string layout_path;
  double delta = 0.02;
  auto* reg_cmd = app.add_subcommand("regularize", "Shrink and repair a layout document");
  reg_cmd->add_option("layout", layout_path, "Layout file (wire schema, prose tolerated)")->required();
  reg_cmd->add_option("--delta", delta, "Box shrink margin");

  std::string manifest_path;
  std::optional<double> lambda;
  std::optional<std::size_t> top;
  auto* rerank_cmd = app.add_subcommand("rerank", "Re-rank a finished run under a different lambda");
  rerank_cmd->add_option("manifest", manifest_path, "Path to manifest.json")->required();
  rerank_cmd->add_option("--lambda", lambda, "Scene weight in the hybrid score");
  rerank_cmd->add_option("--top", top, "Only print the best N candidates");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print the candidate/score table of a run");
  inspect_cmd->add_option("manifest", inspect_path, "Path to manifest.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << "error: " << to_string(ErrorCode::ConfigError) << ": " << e.what() << '\n';
    return exit_code_for(ErrorCode::ConfigError);
  }

  try {
    if (*run_cmd) return cmd_run(run, out);
    if (*reg_cmd) return cmd_regularize(layout_path, delta, out);
    if (*rerank_cmd) return cmd_rerank(manifest_path, lambda, top, out);
    if (*inspect_cmd) return cmd_inspect(inspect_path, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.message() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: Exception: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"refocus"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace refocus::cli
