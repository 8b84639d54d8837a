#pragma once

// Persisted record of one pipeline run (manifest.json) and its tabular views.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "refocus/config.hpp"
#include "refocus/error.hpp"
#include "refocus/geometry.hpp"
#include "refocus/layout_io.hpp"
#include "refocus/scoring.hpp"

namespace refocus {

inline constexpr int kManifestSchemaVersion = 1;

struct CandidateRecord {
  std::string id;
  std::uint64_t seed = 0;
  int round = 0;
  std::optional<std::string> parent_id;
  std::optional<HybridScore> score;
  std::string image_path;

  friend bool operator==(const CandidateRecord&, const CandidateRecord&) = default;
};

struct RoundRecord {
  int round_index = 0;
  std::vector<std::string> input_candidate_ids;
  std::vector<std::string> kept_candidate_ids;
  std::vector<std::string> produced_candidate_ids;
  HybridScore best_score;
  std::string best_candidate_id;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

/// A skipped backend call or rejected layout attempt.
struct FailureRecord {
  std::string phase;  // layout | generate | refine
  int round = 0;
  std::optional<std::uint64_t> seed;
  std::string code;
  std::string message;

  friend bool operator==(const FailureRecord&, const FailureRecord&) = default;
};

struct PhaseTimings {
  double layout_s = 0.0;
  double drafts_s = 0.0;
  double refinement_s = 0.0;
  double total_s = 0.0;
};

struct RunManifest {
  int schema_version = kManifestSchemaVersion;
  std::string prompt;
  std::string raw_layout_response;
  int layout_attempts = 0;
  Layout layout;
  PipelineConfig config;
  std::vector<CandidateRecord> candidates;
  std::vector<RoundRecord> rounds;
  std::vector<FailureRecord> failures;
  std::vector<std::string> warnings;
  std::string final_candidate_id;
  PhaseTimings timings;

  const CandidateRecord* find(const std::string& id) const {
    for (const auto& c : candidates)
      if (c.id == id) return &c;
    return nullptr;
  }
};

// ------------------------------------------------------------------ JSON

inline json score_to_json(const HybridScore& s) {
  return json{{"scene", s.scene},
              {"object", s.object ? json(*s.object) : json(nullptr)},
              {"lambda_used", s.lambda_used},
              {"combined", s.combined}};
}

inline HybridScore score_from_json(const json& j) {
  HybridScore s;
  s.scene = j.at("scene").get<double>();
  if (!j.at("object").is_null()) s.object = j.at("object").get<double>();
  s.lambda_used = j.at("lambda_used").get<double>();
  s.combined = j.at("combined").get<double>();
  return s;
}

inline json manifest_to_json(const RunManifest& m) {
  json candidates = json::array();
  for (const auto& c : m.candidates) {
    candidates.push_back({{"id", c.id},
                          {"seed", c.seed},
                          {"round", c.round},
                          {"parent_id", c.parent_id ? json(*c.parent_id) : json(nullptr)},
                          {"score", c.score ? score_to_json(*c.score) : json(nullptr)},
                          {"image_path", c.image_path}});
  }
  json rounds = json::array();
  for (const auto& r : m.rounds) {
    rounds.push_back({{"round_index", r.round_index},
                      {"input_candidate_ids", r.input_candidate_ids},
                      {"kept_candidate_ids", r.kept_candidate_ids},
                      {"produced_candidate_ids", r.produced_candidate_ids},
                      {"best_candidate_id", r.best_candidate_id},
                      {"best_score", score_to_json(r.best_score)}});
  }
  json failures = json::array();
  for (const auto& f : m.failures) {
    failures.push_back({{"phase", f.phase},
                        {"round", f.round},
                        {"seed", f.seed ? json(*f.seed) : json(nullptr)},
                        {"code", f.code},
                        {"message", f.message}});
  }
  return json{{"schema_version", m.schema_version},
              {"prompt", m.prompt},
              {"raw_layout_response", m.raw_layout_response},
              {"layout_attempts", m.layout_attempts},
              {"layout", layout_to_json(m.layout)},
              {"config", config_to_json(m.config)},
              {"candidates", std::move(candidates)},
              {"rounds", std::move(rounds)},
              {"failures", std::move(failures)},
              {"warnings", m.warnings},
              {"final_candidate_id", m.final_candidate_id},
              {"timings",
               {{"layout_s", m.timings.layout_s},
                {"drafts_s", m.timings.drafts_s},
                {"refinement_s", m.timings.refinement_s},
                {"total_s", m.timings.total_s}}}};
}

inline RunManifest manifest_from_json(const json& j) {
  try {
    RunManifest m;
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kManifestSchemaVersion) {
      throw Error(ErrorCode::ManifestError, "unsupported manifest schema version " + std::to_string(m.schema_version));
    }
    m.prompt = j.at("prompt").get<std::string>();
    m.raw_layout_response = j.at("raw_layout_response").get<std::string>();
    m.layout_attempts = j.at("layout_attempts").get<int>();
    m.layout = layout_from_json(j.at("layout"), m.prompt);
    m.config = apply_config_json(PipelineConfig{}, j.at("config"));
    for (const auto& c : j.at("candidates")) {
      CandidateRecord r;
      r.id = c.at("id").get<std::string>();
      r.seed = c.at("seed").get<std::uint64_t>();
      r.round = c.at("round").get<int>();
      if (!c.at("parent_id").is_null()) r.parent_id = c.at("parent_id").get<std::string>();
      if (!c.at("score").is_null()) r.score = score_from_json(c.at("score"));
      r.image_path = c.at("image_path").get<std::string>();
      m.candidates.push_back(std::move(r));
    }
    for (const auto& r : j.at("rounds")) {
      RoundRecord rec;
      rec.round_index = r.at("round_index").get<int>();
      rec.input_candidate_ids = r.at("input_candidate_ids").get<std::vector<std::string>>();
      rec.kept_candidate_ids = r.at("kept_candidate_ids").get<std::vector<std::string>>();
      rec.produced_candidate_ids = r.at("produced_candidate_ids").get<std::vector<std::string>>();
      rec.best_candidate_id = r.at("best_candidate_id").get<std::string>();
      rec.best_score = score_from_json(r.at("best_score"));
      m.rounds.push_back(std::move(rec));
    }
    for (const auto& f : j.at("failures")) {
      FailureRecord rec;
      rec.phase = f.at("phase").get<std::string>();
      rec.round = f.at("round").get<int>();
      if (!f.at("seed").is_null()) rec.seed = f.at("seed").get<std::uint64_t>();
      rec.code = f.at("code").get<std::string>();
      rec.message = f.at("message").get<std::string>();
      m.failures.push_back(std::move(rec));
    }
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    m.final_candidate_id = j.at("final_candidate_id").get<std::string>();
    const auto& t = j.at("timings");
    m.timings = {t.at("layout_s").get<double>(), t.at("drafts_s").get<double>(), t.at("refinement_s").get<double>(),
                 t.at("total_s").get<double>()};
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestError, std::string("malformed manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ManifestError) throw;
    throw Error(ErrorCode::ManifestError, e.message());
  }
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ManifestError, "cannot open manifest " + path.string());
  auto doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw Error(ErrorCode::ManifestError, "manifest is not valid JSON: " + path.string());
  return manifest_from_json(doc);
}

inline void save_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write manifest " + path.string());
  out << manifest_to_json(manifest).dump(2) << '\n';
}

// ------------------------------------------------------------------ selection

/// Argmax of combined score under the re-ranking tie-break.
inline CandidateRecord select_final(const RunManifest& manifest) {
  std::vector<CandidateRecord> scored;
  for (const auto& c : manifest.candidates)
    if (c.score) scored.push_back(c);
  if (scored.empty()) throw Error(ErrorCode::EmptyRun, "manifest has no scored candidate");
  return rerank_top_k(scored, 1).front();
}

/// Recombines cached scene/object scores under a different lambda. No backend is touched.
inline std::vector<CandidateRecord> rescore(std::vector<CandidateRecord> records, double lambda) {
  for (auto& r : records) {
    if (!r.score) throw Error(ErrorCode::ManifestError, "candidate " + r.id + " has no score");
    r.score = hybrid_score(r.score->scene, r.score->object, lambda);
  }
  return records;
}

// ------------------------------------------------------------------ candidate table

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kTableHeader = "id\tround\tseed\tparent\tscene\tobject\tlambda\tcombined";

/// Tab-separated candidate/score table, full precision so it parses back exactly.
inline std::string format_candidate_table(const std::vector<CandidateRecord>& records) {
  std::ostringstream out;
  out << kTableHeader << '\n';
  for (const auto& r : records) {
    out << r.id << '\t' << r.round << '\t' << r.seed << '\t' << r.parent_id.value_or("-") << '\t';
    if (r.score) {
      out << format_real(r.score->scene) << '\t' << (r.score->object ? format_real(*r.score->object) : "-") << '\t'
          << format_real(r.score->lambda_used) << '\t' << format_real(r.score->combined);
    } else {
      out << "-\t-\t-\t-";
    }
    out << '\n';
  }
  return out.str();
}

inline std::vector<CandidateRecord> parse_candidate_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTableHeader) {
    throw Error(ErrorCode::ManifestError, "candidate table header missing");
  }
  std::vector<CandidateRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, '\t');) cells.push_back(cell);
    if (cells.size() != 8) throw Error(ErrorCode::ManifestError, "candidate table row has " + std::to_string(cells.size()) + " cells");
    try {
      CandidateRecord r;
      r.id = cells[0];
      r.round = std::stoi(cells[1]);
      r.seed = std::stoull(cells[2]);
      if (cells[3] != "-") r.parent_id = cells[3];
      if (cells[4] != "-") {
        HybridScore s;
        s.scene = std::stod(cells[4]);
        if (cells[5] != "-") s.object = std::stod(cells[5]);
        s.lambda_used = std::stod(cells[6]);
        s.combined = std::stod(cells[7]);
        r.score = s;
      }
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ManifestError, "unparseable candidate table row: " + line);
    }
  }
  return out;
}

}  // namespace refocus
