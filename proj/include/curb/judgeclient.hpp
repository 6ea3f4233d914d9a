// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "curb/errors.hpp"
#include "curb/promptkit.hpp"

namespace curb {

struct RetryPolicy {
  int max_attempts = 3;
  double backoff_base_s = 1.0;
};

struct BackendConfig {
  std::string model_id;
  std::string kind = "http";  // "http" or "mock"
  std::string base_url;
  std::string path = "/chat/completions";
  std::string api_key_ref;  // environment variable name; empty -> JUDGE_API_KEY_<MODEL>
  double temperature = 0.0;
  std::optional<double> top_p;
  int max_output_tokens = 1024;
  int max_concurrency = 4;
  int requests_per_minute = 60;
  double timeout_s = 60.0;
  RetryPolicy retry;
  std::string cache_dir;  // empty disables the response cache
  nlohmann::json mock;    // script for kind == "mock"

  void validate() const;
  std::string api_key_env() const;

  static BackendConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

inline constexpr std::size_t kMaxImageBytes = 20u * 1024u * 1024u;
inline constexpr int kMinImageDimension = 300;

struct ImagePayload {
  std::string bytes;
  std::string media_type;  // image/png, image/jpeg
};

struct ImageDimensions {
  int width = 0;
  int height = 0;
};

/// Reads width/height from PNG or JPEG headers without decoding pixels.
std::optional<ImageDimensions> probe_image_dimensions(std::string_view bytes);
std::optional<std::string> sniff_media_type(std::string_view bytes);
/// Throws JudgeRequestError when the payload is empty, oversized, of an
/// unsupported type, or smaller than kMinImageDimension on either side.
void validate_image(const ImagePayload& image);
ImagePayload load_image_file(const std::string& path);

struct JudgeRequest {
  std::string image_id;
  ImagePayload image;
  PromptText prompt;
  int run_nonce = 0;
};

struct TokenCounts {
  int prompt = 0;
  int completion = 0;
};

struct JudgeResponse {
  std::string raw_text;
  std::string model_id;
  double latency_s = 0.0;
  std::optional<TokenCounts> token_counts;
  bool from_cache = false;
  int attempts = 0;
  std::string raw_body;
};

struct Provenance {
  std::string model_id;
  std::string image_id;
  int run_nonce = 0;
  int attempts = 0;
  std::string detail;

  std::string describe() const;
};

class JudgeError : public Error {
 public:
  JudgeError(std::string kind, const std::string& message, Provenance p)
      : Error(std::move(kind), message + " [" + p.describe() + "]"), provenance_(std::move(p)) {}
  const Provenance& provenance() const noexcept { return provenance_; }

 private:
  Provenance provenance_;
};

class TransportError : public JudgeError {
 public:
  TransportError(const std::string& m, Provenance p) : JudgeError("transport", m, std::move(p)) {}
};

class JudgeRequestError : public JudgeError {
 public:
  JudgeRequestError(const std::string& m, Provenance p, int status = 0)
      : JudgeError("request", m, std::move(p)), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class TimeoutError : public JudgeError {
 public:
  TimeoutError(const std::string& m, Provenance p) : JudgeError("timeout", m, std::move(p)) {}
};

class ScriptError : public JudgeError {
 public:
  ScriptError(const std::string& m, Provenance p) : JudgeError("script", m, std::move(p)) {}
};

// ---------------------------------------------------------------------------
// Transports
// ---------------------------------------------------------------------------

struct Completion {
  std::string raw_text;
  std::string raw_body;
  std::optional<TokenCounts> token_counts;
};

/// One failed attempt as seen by a transport. The client decides whether to retry.
struct AttemptFailure {
  enum class Class { kRetryable, kTimeout, kFatal };
  Class cls;
  int status = 0;
  std::string message;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// Returns the completion or throws AttemptFailure.
  virtual Completion send(const BackendConfig& backend, const JudgeRequest& request) = 0;
};

/// Chat-completions JSON over HTTP(S): one user message carrying text and a
/// base64 data-URL image.
class HttpTransport : public Transport {
 public:
  Completion send(const BackendConfig& backend, const JudgeRequest& request) override;

  static nlohmann::json build_body(const BackendConfig& backend, const JudgeRequest& request);
  static Completion parse_body(const std::string& body);
};

/// One scripted reply. A status other than 200 is reported as that HTTP status.
struct MockReply {
  std::string text;
  int status = 200;
};

/// Deterministic scripted judge backend.
class MockJudge : public Transport {
 public:
  using Fn = std::function<MockReply(const JudgeRequest&)>;

  static std::shared_ptr<MockJudge> ordered(std::vector<MockReply> script);
  static std::shared_ptr<MockJudge> ordered(const std::vector<std::string>& texts);
  /// Keys are "image_id" or "image_id#run_nonce"; the nonce-specific key wins.
  static std::shared_ptr<MockJudge> keyed(std::map<std::string, std::string> script,
                                          std::optional<std::string> fallback = std::nullopt);
  static std::shared_ptr<MockJudge> function(Fn fn);
  /// Builds from the `mock` JSON block of a backend config.
  static std::shared_ptr<MockJudge> from_json(const nlohmann::json& j);

  Completion send(const BackendConfig& backend, const JudgeRequest& request) override;

  void set_call_delay(std::chrono::milliseconds d) { delay_ = d; }
  /// Invoked with the 0-based call number before the reply is produced.
  void set_call_hook(std::function<void(int)> hook) { hook_ = std::move(hook); }

  int calls() const { return calls_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }

 private:
  MockJudge() = default;

  MockReply next(const JudgeRequest& request, int call_no);

  std::mutex mu_;
  std::vector<MockReply> ordered_;
  std::size_t cursor_ = 0;
  std::map<std::string, std::string> keyed_;
  std::optional<std::string> fallback_;
  Fn fn_;
  enum class Mode { kOrdered, kKeyed, kFunction } mode_ = Mode::kOrdered;

  std::chrono::milliseconds delay_{0};
  std::function<void(int)> hook_;
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

/// Content-addressed response cache: <dir>/<key[0:2]>/<key>.json.
class ResponseCache {
 public:
  explicit ResponseCache(std::string dir);
  std::optional<JudgeResponse> get(const std::string& key) const;
  void put(const std::string& key, const JudgeResponse& response) const;

 private:
  std::string dir_;
};

std::string cache_key(const BackendConfig& backend, const JudgeRequest& request);

/// Token bucket refilled at requests_per_minute / 60 per second.
class RateLimiter {
 public:
  RateLimiter(int requests_per_minute, int burst);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  std::mutex mu_;
  double rate_per_s_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
};

class JudgeClient {
 public:
  using Sleeper = std::function<void(std::chrono::duration<double>)>;

  JudgeClient(BackendConfig backend, std::shared_ptr<Transport> transport);

  JudgeResponse assess(const JudgeRequest& request);

  const BackendConfig& backend() const { return backend_; }
  /// Replaces real sleeping between retries (tests).
  void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }
  int transport_calls() const { return transport_calls_.load(); }
  std::vector<double> backoff_history() const;

 private:
  BackendConfig backend_;
  std::shared_ptr<Transport> transport_;
  std::optional<ResponseCache> cache_;
  RateLimiter limiter_;
  std::counting_semaphore<> slots_;
  Sleeper sleeper_;
  std::atomic<int> transport_calls_{0};
  mutable std::mutex history_mu_;
  std::vector<double> backoffs_;
};

/// HTTP transport for kind "http", MockJudge::from_json for kind "mock".
std::shared_ptr<JudgeClient> make_client(const BackendConfig& backend);

}  // namespace curb
