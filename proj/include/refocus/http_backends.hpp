#pragma once

// HTTP adapters for the four backends. Wire protocol (all POST, JSON bodies):
//   /layout   {prompt, template_version, instruction}              -> {raw}
//   /generate {prompt, layout, seed, steps, guidance, width, height} -> {png_base64}
//   /refine   {png_base64, prompt, seed, strength, guidance}         -> {png_base64}
//   /embed    {png_base64} | {text}                                  -> {values, dim}
// Errors come back as {code, message}; 4xx is a caller bug, 5xx a retryable backend fault.

#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "refocus/backends.hpp"
#include "refocus/codec.hpp"
#include "refocus/config.hpp"
#include "refocus/error.hpp"
#include "refocus/instruction.hpp"
#include "refocus/layout_io.hpp"

namespace refocus::http {

using json = nlohmann::json;

inline constexpr const char* kAuthTokenEnv = "REFOCUS_API_TOKEN";

struct BackendEndpoint {
  std::string base_url;
  double timeout_s = 120.0;
  int retry_budget = 3;
  std::optional<std::string> auth_token;

  static std::optional<std::string> token_from_env() {
    if (const char* v = std::getenv(kAuthTokenEnv); v && *v) return std::string(v);
    return std::nullopt;
  }
};

/// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

/// POSTs a JSON body, retrying transport errors and 5xx responses up to retry_budget times.
/// 4xx responses raise `rejected` immediately; exhausted retries raise `unavailable` carrying
/// the last transport error verbatim.
inline json post_json(const BackendEndpoint& endpoint, std::string_view route, const json& body,
                      ErrorCode unavailable, ErrorCode rejected) {
  const auto [origin, prefix] = split_base_url(endpoint.base_url);
  const std::string path = prefix + std::string(route);
  const std::string payload = body.dump();
  const auto secs = static_cast<time_t>(endpoint.timeout_s);
  const auto usecs = static_cast<time_t>((endpoint.timeout_s - static_cast<double>(secs)) * 1e6);
  std::string last_error;
  for (int attempt = 0; attempt <= endpoint.retry_budget; ++attempt) {
    httplib::Client client(origin);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (endpoint.auth_token) headers.emplace("Authorization", "Bearer " + *endpoint.auth_token);
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "POST " + path + ": transport error: " + httplib::to_string(res.error());
      continue;
    }
    auto doc = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (res->status >= 200 && res->status < 300) {
      if (doc.is_discarded() || !doc.is_object()) throw Error(rejected, "POST " + path + ": response is not a JSON object");
      return doc;
    }
    std::string detail = "HTTP " + std::to_string(res->status);
    if (!doc.is_discarded() && doc.is_object()) {
      detail += " " + doc.value("code", std::string{}) + ": " + doc.value("message", std::string{});
    }
    if (res->status >= 400 && res->status < 500) throw Error(rejected, "POST " + path + ": " + detail);
    last_error = "POST " + path + ": " + detail;
  }
  throw Error(unavailable, last_error + " (after " + std::to_string(endpoint.retry_budget + 1) + " attempts)");
}

namespace detail {

inline const json& require(const json& doc, const char* key, ErrorCode code) {
  if (!doc.contains(key)) throw Error(code, std::string("response lacks \"") + key + "\"");
  return doc.at(key);
}

inline Raster image_field(const json& doc, ErrorCode code) {
  const auto& field = require(doc, "png_base64", code);
  if (!field.is_string()) throw Error(code, "png_base64 is not a string");
  try {
    return decode_png_base64(field.get<std::string>());
  } catch (const Error& e) {
    throw Error(code, e.message());
  }
}

}  // namespace detail

class HttpLayoutProvider final : public LayoutProvider {
 public:
  HttpLayoutProvider(BackendEndpoint endpoint, double delta) : endpoint_(std::move(endpoint)), delta_(delta) {}

  std::string propose(const std::string& prompt) override {
    if (prompt.empty()) throw Error(ErrorCode::InvalidArgument, "layout prompt must be non-empty");
    const json body{{"prompt", prompt},
                    {"template_version", kLayoutTemplateVersion},
                    {"instruction", render_layout_instruction(prompt, delta_)}};
    const auto doc = post_json(endpoint_, "/layout", body, ErrorCode::LayoutPhaseFailed, ErrorCode::LayoutPhaseFailed);
    const auto& raw = detail::require(doc, "raw", ErrorCode::ParseFailed);
    if (!raw.is_string()) throw Error(ErrorCode::ParseFailed, "\"raw\" is not a string");
    return raw.get<std::string>();
  }

 private:
  BackendEndpoint endpoint_;
  double delta_;
};

class HttpGenerator final : public ImageGenerator {
 public:
  explicit HttpGenerator(BackendEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  Raster generate(const GenerateRequest& r) override {
    const json body{{"prompt", r.prompt}, {"layout", layout_to_json(r.layout)}, {"seed", r.seed},
                    {"steps", r.steps},   {"guidance", r.guidance},          {"width", r.width},
                    {"height", r.height}};
    const auto doc = post_json(endpoint_, "/generate", body, ErrorCode::GeneratorUnavailable, ErrorCode::GenerationFailed);
    return detail::image_field(doc, ErrorCode::GenerationFailed);
  }

 private:
  BackendEndpoint endpoint_;
};

class HttpRefiner final : public ImageRefiner {
 public:
  explicit HttpRefiner(BackendEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  Raster refine(const RefineRequest& r) override {
    const json body{{"png_base64", encode_png_base64(r.image)},
                    {"prompt", r.prompt},
                    {"seed", r.seed},
                    {"strength", r.strength},
                    {"guidance", r.guidance}};
    const auto doc = post_json(endpoint_, "/refine", body, ErrorCode::RefinerUnavailable, ErrorCode::RefinerFailed);
    return detail::image_field(doc, ErrorCode::RefinerFailed);
  }

 private:
  BackendEndpoint endpoint_;
};

class HttpEmbedder final : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(BackendEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  Embedding embed_image(const Raster& image) override { return embed(json{{"png_base64", encode_png_base64(image)}}); }
  Embedding embed_text(std::string_view text) override { return embed(json{{"text", std::string(text)}}); }

 private:
  Embedding embed(const json& body) {
    const auto doc = post_json(endpoint_, "/embed", body, ErrorCode::EmbedderFailed, ErrorCode::EmbedderFailed);
    const auto& values = detail::require(doc, "values", ErrorCode::EmbedderFailed);
    const auto& dim = detail::require(doc, "dim", ErrorCode::EmbedderFailed);
    if (!values.is_array() || !dim.is_number_integer() || dim.get<std::size_t>() != values.size()) {
      throw Error(ErrorCode::EmbedderFailed, "embedding response has inconsistent values/dim");
    }
    std::vector<double> v;
    v.reserve(values.size());
    for (const auto& x : values) {
      if (!x.is_number()) throw Error(ErrorCode::EmbedderFailed, "embedding component is not a number");
      v.push_back(x.get<double>());
    }
    return Embedding(std::move(v));
  }

  BackendEndpoint endpoint_;
};

/// Builds the four HTTP adapters from a config. Every per-backend URL must be set.
inline Backends make_http_backends(const PipelineConfig& config) {
  auto endpoint = [&](const std::string& url, const char* which) {
    if (url.empty()) throw Error(ErrorCode::ConfigError, std::string("no endpoint URL for the ") + which + " backend");
    return BackendEndpoint{url, config.timeout_s, config.retry_budget, BackendEndpoint::token_from_env()};
  };
  return {std::make_shared<HttpLayoutProvider>(endpoint(config.layout_url, "layout"), config.delta),
          std::make_shared<HttpGenerator>(endpoint(config.generate_url, "generate")),
          std::make_shared<HttpRefiner>(endpoint(config.refine_url, "refine")),
          std::make_shared<HttpEmbedder>(endpoint(config.embed_url, "embed"))};
}

}  // namespace refocus::http
