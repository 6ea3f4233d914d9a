// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cstdlib>

#include <httplib.h>

#include "curb/digest.hpp"
#include "curb/judgeclient.hpp"

namespace curb {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix, no trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto slash = url.find('/', host_start);
  SplitUrl out;
  out.origin = url.substr(0, slash);
  out.prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

}  // namespace

json HttpTransport::build_body(const BackendConfig& backend, const JudgeRequest& request) {
  const std::string data_url =
      "data:" + request.image.media_type + ";base64," + base64_encode(request.image.bytes);
  json body = {
      {"model", backend.model_id},
      {"temperature", backend.temperature},
      {"max_tokens", backend.max_output_tokens},
      {"messages",
       json::array({{{"role", "user"},
                     {"content", json::array({{{"type", "text"}, {"text", request.prompt.text}},
                                              {{"type", "image_url"}, {"image_url", {{"url", data_url}}}}})}}})},
  };
  if (backend.top_p) body["top_p"] = *backend.top_p;
  return body;
}

Completion HttpTransport::parse_body(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw AttemptFailure{AttemptFailure::Class::kRetryable, 200, std::string("unparseable response body: ") + e.what()};
  }
  Completion c;
  c.raw_body = body;
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) {
      c.raw_text = content.get<std::string>();
    } else if (content.is_array()) {
      for (const auto& part : content) {
        if (part.value("type", "") == "text") c.raw_text += part.value("text", "");
      }
    }
  } catch (const json::exception&) {
    throw AttemptFailure{AttemptFailure::Class::kRetryable, 200, "response has no choices[0].message.content"};
  }
  if (j.contains("usage") && j["usage"].is_object()) {
    c.token_counts = TokenCounts{j["usage"].value("prompt_tokens", 0), j["usage"].value("completion_tokens", 0)};
  }
  return c;
}

Completion HttpTransport::send(const BackendConfig& backend, const JudgeRequest& request) {
  const SplitUrl url = split_url(backend.base_url);
  httplib::Client cli(url.origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(backend.timeout_s));
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);

  httplib::Headers headers;
  if (const char* key = std::getenv(backend.api_key_env().c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string payload = build_body(backend, request).dump();
  const auto start = std::chrono::steady_clock::now();
  auto res = cli.Post(url.prefix + backend.path, headers, payload, "application/json");
  if (!res) {
    const auto err = res.error();
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && elapsed >= 0.9 * backend.timeout_s);
    throw AttemptFailure{timed_out ? AttemptFailure::Class::kTimeout : AttemptFailure::Class::kRetryable, 0,
                         "http error: " + httplib::to_string(err)};
  }
  if (res->status == 429 || res->status >= 500) {
    throw AttemptFailure{AttemptFailure::Class::kRetryable, res->status, "http status " + std::to_string(res->status)};
  }
  if (res->status < 200 || res->status >= 300) {
    throw AttemptFailure{AttemptFailure::Class::kFatal, res->status,
                         "http status " + std::to_string(res->status) + ": " + res->body.substr(0, 200)};
  }
  return parse_body(res->body);
}

}  // namespace curb
