#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "refocus/cli.hpp"
#include "refocus/http_backends.hpp"
#include "refocus/scoring.hpp"
#include "sim_http_server.hpp"

namespace refocus {
namespace {

using testing_support::SimHttpServer;

constexpr const char* kPrompt = "a photo of a chair left of a zebra";

http::BackendEndpoint endpoint(const std::string& url, int retries = 2) {
  return {url, 5.0, retries, std::nullopt};
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::InvalidArgument;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("refocus_it_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(HttpAdapters, MatchTheSimulationBackendsInProcess) {
  SimHttpServer server;
  auto local = sim::Studio::create()->backends();
  http::HttpLayoutProvider layout(endpoint(server.url()), 0.02);
  http::HttpGenerator generator(endpoint(server.url()));
  http::HttpRefiner refiner(endpoint(server.url()));
  http::HttpEmbedder embedder(endpoint(server.url()));

  const auto raw = layout.propose(kPrompt);
  EXPECT_EQ(raw, local.layout->propose(kPrompt));
  EXPECT_EQ(server.last_layout_request().at("template_version"), kLayoutTemplateVersion);
  const auto l = parse_layout_response(raw, kPrompt);

  const GenerateRequest gen{kPrompt, l, 5, 50, 7.5, 96, 80};
  const auto image = generator.generate(gen);
  EXPECT_EQ(image, local.generator->generate(gen));

  const auto child = refiner.refine({image, kPrompt, 9, 0.5, 0.0});
  EXPECT_EQ(child, local.refiner->refine({image, kPrompt, 9, 0.5, 0.0}));

  EXPECT_EQ(embedder.embed_text("a zebra"), local.embedder->embed_text("a zebra"));
  EXPECT_EQ(embedder.embed_image(child), local.embedder->embed_image(child));
}

TEST(HttpAdapters, RetryServerErrorsWithinBudget) {
  SimHttpServer server;
  http::HttpEmbedder embedder(endpoint(server.url(), 2));
  server.fail_next(2, 503);
  EXPECT_NO_THROW(embedder.embed_text("a dog"));
  EXPECT_EQ(server.requests("/embed"), 3);

  server.fail_next(3, 500);
  EXPECT_EQ(code_of([&] { embedder.embed_text("a dog"); }), ErrorCode::EmbedderFailed);
  EXPECT_EQ(server.requests("/embed"), 6);
}

TEST(HttpAdapters, ClientErrorsAreNotRetried) {
  SimHttpServer server;
  http::HttpRefiner refiner(endpoint(server.url(), 3));
  const Raster image(64, 64, sim::kBackground);
  try {
    refiner.refine({image, "p", 1, 0.5, 0.0});
    FAIL();
  } catch (const Error& e) {
    // The sim has never seen this image: a backend fault (500), retried.
    EXPECT_EQ(e.code(), ErrorCode::RefinerUnavailable);
  }
  EXPECT_EQ(server.requests("/refine"), 4);
  try {
    refiner.refine({image, "p", 1, 1.5, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RefinerFailed);
    EXPECT_NE(e.message().find("HTTP 422"), std::string::npos);
  }
  EXPECT_EQ(server.requests("/refine"), 5);
}

TEST(HttpAdapters, TransportErrorSurfacesAfterRetries) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  http::HttpGenerator generator(endpoint("http://127.0.0.1:" + std::to_string(port), 2));
  try {
    generator.generate({"p", {}, 1, 50, 7.5, 64, 64});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GeneratorUnavailable);
    EXPECT_NE(e.message().find("transport error"), std::string::npos);
    EXPECT_NE(e.message().find("after 3 attempts"), std::string::npos);
  }
}

TEST(HttpAdapters, BearerTokenFromEnvironment) {
  SimHttpServer server;
  ::setenv(http::kAuthTokenEnv, "s3cret", 1);
  PipelineConfig c;
  c.layout_url = c.generate_url = c.refine_url = c.embed_url = server.url();
  auto backends = http::make_http_backends(c);
  ::unsetenv(http::kAuthTokenEnv);
  backends.embedder->embed_text("a cat");
  EXPECT_EQ(server.last_authorization(), "Bearer s3cret");

  auto anonymous = http::make_http_backends(c);
  anonymous.embedder->embed_text("a cat");
  EXPECT_EQ(server.last_authorization(), "");
}

TEST(HttpAdapters, UrlPrefixAndMissingUrls) {
  EXPECT_EQ(http::split_base_url("http://h:1/api/v1/"), (std::pair<std::string, std::string>{"http://h:1", "/api/v1"}));
  EXPECT_EQ(http::split_base_url("http://h:1"), (std::pair<std::string, std::string>{"http://h:1", ""}));
  EXPECT_EQ(code_of([] { http::split_base_url("h:1"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { http::make_http_backends(PipelineConfig{}); }), ErrorCode::ConfigError);
}

TEST(HttpPipeline, SmallRunOverTheWireMatchesLocalRun) {
  SimHttpServer server;
  PipelineConfig c;
  c.n_drafts = 2;
  c.rounds = 1;
  c.width = c.height = 96;
  c.base_seed = 3;
  c.parallelism = 2;
  c.backend = "http";
  c.layout_url = c.generate_url = c.refine_url = c.embed_url = server.url();
  const auto remote = run_pipeline(kPrompt, c, http::make_http_backends(c));
  const auto local = run_pipeline(kPrompt, c, sim::Studio::create()->backends());
  EXPECT_EQ(remote.manifest.candidates, local.manifest.candidates);
  EXPECT_EQ(remote.manifest.final_candidate_id, local.manifest.final_candidate_id);
  EXPECT_EQ(server.requests("/generate"), 2);
  EXPECT_EQ(server.requests("/refine"), 4);
}

// ------------------------------------------------------------------ command line

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

TEST(Cli, RunWritesManifestAndPrintsFinal) {
  const auto dir = scratch_dir("run");
  const auto r = cli({"run", "--prompt", kPrompt, "--backend", "sim", "--n-drafts", "4", "--rounds", "2", "--seed",
                      "5", "--out-dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  const auto m = load_manifest(dir / "manifest.json");
  EXPECT_EQ(m.config.base_seed, 5u);
  EXPECT_NE(r.out.find("final\t" + m.final_candidate_id), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / image_relpath(m.final_candidate_id)));
}

TEST(Cli, OmittedSeedIsSampledAndRecorded) {
  const auto dir = scratch_dir("entropy");
  ASSERT_EQ(cli({"run", "--prompt", kPrompt, "--rounds", "0", "--out-dir", dir.string()}).code, 0);
  const auto m = load_manifest(dir / "manifest.json");
  // Drafts are seeded base_seed + i, so a zero-round run ties the final seed to the sampled one.
  EXPECT_LT(m.find(m.final_candidate_id)->seed - m.config.base_seed, 4u);
}

TEST(Cli, MissingConfigFileIsAConfigError) {
  const auto r = cli({"run", "--prompt", kPrompt, "--config", "/nonexistent/refocus.json"});
  EXPECT_EQ(r.code, exit_code_for(ErrorCode::ConfigError));
  EXPECT_NE(r.err.find("/nonexistent/refocus.json"), std::string::npos);
  EXPECT_NE(r.err.find("ConfigError"), std::string::npos);
}

TEST(Cli, LambdaOutOfRangeIsAConfigError) {
  const auto r = cli({"run", "--prompt", kPrompt, "--lambda", "1.5"});
  EXPECT_EQ(r.code, exit_code_for(ErrorCode::ConfigError));
  EXPECT_NE(r.err.find("lambda"), std::string::npos);
}

TEST(Cli, ConfigFileIsReadAndFlagsWin) {
  const auto dir = scratch_dir("config");
  std::ofstream(dir / "c.json") << R"({"n_drafts": 3, "rounds": 0, "base_seed": 8, "width": 64, "height": 64})";
  ASSERT_EQ(cli({"run", "--prompt", kPrompt, "--config", (dir / "c.json").string(), "--n-drafts", "2", "--out-dir",
                 (dir / "out").string()})
                .code,
            0);
  const auto m = load_manifest(dir / "out" / "manifest.json");
  EXPECT_EQ(m.config.n_drafts, 2);
  EXPECT_EQ(m.config.base_seed, 8u);
  EXPECT_EQ(m.candidates.size(), 2u);
}

TEST(Cli, UnknownSubcommandOrFlagIsAConfigError) {
  EXPECT_EQ(cli({"frobnicate"}).code, exit_code_for(ErrorCode::ConfigError));
  EXPECT_EQ(cli({"run", "--prompt", "x", "--bogus"}).code, exit_code_for(ErrorCode::ConfigError));
  EXPECT_EQ(cli({}).code, exit_code_for(ErrorCode::ConfigError));
}

TEST(Cli, RegularizeValidAndContainedLayouts) {
  const auto dir = scratch_dir("regularize");
  std::ofstream(dir / "ok.json")
      << R"(Sure: {"objects":[{"label":"dog","description":"a dog","box":[0,0,0.5,0.5]}]} done)";
  auto r = cli({"regularize", (dir / "ok.json").string(), "--delta", "0.04"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto l = parse_layout_response(r.out);
  EXPECT_EQ(l.objects[0].box, shrink_box({0, 0, 0.5, 0.5}, 0.04));

  std::ofstream(dir / "nested.json") << R"({"objects":[{"label":"a","box":[0.1,0.1,0.9,0.9]},)"
                                        R"({"label":"b","box":[0.3,0.3,0.5,0.5]}]})";
  r = cli({"regularize", (dir / "nested.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  l = parse_layout_response(r.out);
  EXPECT_EQ(l.size(), 2u);
  EXPECT_TRUE(validate_layout(l).empty());

  std::ofstream(dir / "bad.json") << "no layout here";
  r = cli({"regularize", (dir / "bad.json").string()});
  EXPECT_EQ(r.code, exit_code_for(ErrorCode::ParseFailed));
  EXPECT_NE(r.err.find("ParseFailed"), std::string::npos);
}

class CliOnStoredRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new std::filesystem::path(scratch_dir("stored"));
    ASSERT_EQ(cli({"run", "--prompt", "a purple elephant and a brown sports ball", "--seed", "13", "--k-keep", "2",
                   "--out-dir", dir_->string()})
                  .code,
              0);
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string manifest() { return (*dir_ / "manifest.json").string(); }
  static std::filesystem::path* dir_;
};
std::filesystem::path* CliOnStoredRun::dir_ = nullptr;

TEST_F(CliOnStoredRun, InspectRoundTripsTheCandidateTable) {
  const auto r = cli({"inspect", manifest()});
  ASSERT_EQ(r.code, 0);
  auto want = load_manifest(manifest()).candidates;
  for (auto& c : want) c.image_path.clear();
  EXPECT_TRUE(parse_candidate_table(r.out) == want);
}

TEST_F(CliOnStoredRun, RerankOrdersByTheRequestedWeight) {
  const auto stored = load_manifest(manifest());
  for (const std::string lambda : {"1", "0", "0.5"}) {
    const auto r = cli({"rerank", manifest(), "--lambda", lambda});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = parse_candidate_table(r.out);
    ASSERT_EQ(rows.size(), stored.candidates.size());
    const double l = std::stod(lambda);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto* c = stored.find(rows[i].id);
      EXPECT_EQ(rows[i].score->combined, l * c->score->scene + (1 - l) * *c->score->object);
      if (i == 0) continue;
      if (l == 1.0) {
        EXPECT_GE(rows[i - 1].score->scene, rows[i].score->scene);
      }
      if (l == 0.0) {
        EXPECT_GE(*rows[i - 1].score->object, *rows[i].score->object);
      }
      EXPECT_GE(rows[i - 1].score->combined, rows[i].score->combined);
    }
  }
  EXPECT_EQ(parse_candidate_table(cli({"rerank", manifest(), "--top", "2"}).out).size(), 2u);
  EXPECT_EQ(cli({"rerank", manifest(), "--lambda", "2"}).code, exit_code_for(ErrorCode::ConfigError));
  EXPECT_EQ(cli({"rerank", "/nonexistent.json"}).code, exit_code_for(ErrorCode::ManifestError));
}

TEST(Cli, HttpBackendRun) {
  SimHttpServer server;
  const auto dir = scratch_dir("http");
  const auto r = cli({"run", "--prompt", kPrompt, "--backend", "http", "--endpoint-url", server.url(), "--n-drafts",
                      "2", "--k-keep", "1", "--rounds", "1", "--seed", "2", "--out-dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = load_manifest(dir / "manifest.json");
  EXPECT_EQ(m.candidates.size(), 6u);
  EXPECT_EQ(m.config.backend, "http");
}

}  // namespace
}  // namespace refocus
