// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include "curb/judgeclient.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "curb/digest.hpp"

namespace curb {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// BackendConfig
// ---------------------------------------------------------------------------

void BackendConfig::validate() const {
  std::vector<std::string> v;
  if (model_id.empty()) v.push_back("backend model_id must be non-empty");
  if (kind != "http" && kind != "mock") v.push_back("backend kind must be 'http' or 'mock'");
  if (kind == "http" && base_url.empty()) v.push_back("http backend '" + model_id + "' needs base_url");
  if (!(temperature >= 0.0)) v.push_back("temperature must be >= 0");
  if (top_p && !(*top_p > 0.0 && *top_p <= 1.0)) v.push_back("top_p must be in (0, 1]");
  if (max_output_tokens < 1) v.push_back("max_output_tokens must be >= 1");
  if (max_concurrency < 1) v.push_back("max_concurrency must be >= 1");
  if (requests_per_minute < 1) v.push_back("requests_per_minute must be >= 1");
  if (!(timeout_s > 0.0)) v.push_back("timeout must be > 0");
  if (retry.max_attempts < 1) v.push_back("retry.max_attempts must be >= 1");
  if (!(retry.backoff_base_s >= 0.0)) v.push_back("retry.backoff_base must be >= 0");
  if (!v.empty()) throw ValidationError(std::move(v));
}

std::string BackendConfig::api_key_env() const {
  if (!api_key_ref.empty()) return api_key_ref;
  std::string out = "JUDGE_API_KEY_";
  for (unsigned char c : model_id) {
    out.push_back(std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_');
  }
  return out;
}

BackendConfig BackendConfig::from_json(const json& j) {
  BackendConfig b;
  b.model_id = j.value("model_id", "");
  b.kind = j.value("kind", "http");
  b.base_url = j.value("base_url", "");
  b.path = j.value("path", b.path);
  b.api_key_ref = j.value("api_key_ref", "");
  b.temperature = j.value("temperature", b.temperature);
  if (j.contains("top_p") && !j["top_p"].is_null()) b.top_p = j["top_p"].get<double>();
  b.max_output_tokens = j.value("max_output_tokens", b.max_output_tokens);
  b.max_concurrency = j.value("max_concurrency", b.max_concurrency);
  b.requests_per_minute = j.value("requests_per_minute", b.requests_per_minute);
  b.timeout_s = j.value("timeout_s", b.timeout_s);
  if (j.contains("retry")) {
    b.retry.max_attempts = j["retry"].value("max_attempts", b.retry.max_attempts);
    b.retry.backoff_base_s = j["retry"].value("backoff_base_s", b.retry.backoff_base_s);
  }
  b.cache_dir = j.value("cache_dir", "");
  if (j.contains("mock")) b.mock = j["mock"];
  b.validate();
  return b;
}

json BackendConfig::to_json() const {
  json j = {{"model_id", model_id},
            {"kind", kind},
            {"base_url", base_url},
            {"path", path},
            {"api_key_ref", api_key_env()},
            {"temperature", temperature},
            {"max_output_tokens", max_output_tokens},
            {"max_concurrency", max_concurrency},
            {"requests_per_minute", requests_per_minute},
            {"timeout_s", timeout_s},
            {"retry", {{"max_attempts", retry.max_attempts}, {"backoff_base_s", retry.backoff_base_s}}}};
  j["top_p"] = top_p ? json(*top_p) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

namespace {

std::uint32_t be32(std::string_view b, std::size_t off) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3]));
}

std::uint16_t be16(std::string_view b, std::size_t off) {
  return static_cast<std::uint16_t>((static_cast<unsigned char>(b[off]) << 8) |
                                    static_cast<unsigned char>(b[off + 1]));
}

constexpr std::string_view kPngSig("\x89PNG\r\n\x1a\n", 8);

}  // namespace

std::optional<std::string> sniff_media_type(std::string_view bytes) {
  if (bytes.substr(0, 8) == kPngSig) return "image/png";
  if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
      static_cast<unsigned char>(bytes[1]) == 0xD8 && static_cast<unsigned char>(bytes[2]) == 0xFF) {
    return "image/jpeg";
  }
  return std::nullopt;
}

std::optional<ImageDimensions> probe_image_dimensions(std::string_view bytes) {
  const auto type = sniff_media_type(bytes);
  if (!type) return std::nullopt;
  if (*type == "image/png") {
    if (bytes.size() < 24 || bytes.substr(12, 4) != "IHDR") return std::nullopt;
    return ImageDimensions{static_cast<int>(be32(bytes, 16)), static_cast<int>(be32(bytes, 20))};
  }
  std::size_t pos = 2;
  while (pos + 4 <= bytes.size()) {
    if (static_cast<unsigned char>(bytes[pos]) != 0xFF) return std::nullopt;
    const unsigned char marker = static_cast<unsigned char>(bytes[pos + 1]);
    if (marker == 0xFF) {
      ++pos;
      continue;
    }
    if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
      pos += 2;
      continue;
    }
    const std::uint16_t len = be16(bytes, pos + 2);
    const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 &&
                     marker != 0xCC;
    if (sof) {
      if (pos + 9 > bytes.size()) return std::nullopt;
      return ImageDimensions{be16(bytes, pos + 7), be16(bytes, pos + 5)};
    }
    pos += 2 + len;
  }
  return std::nullopt;
}

void validate_image(const ImagePayload& image) {
  Provenance p;
  if (image.bytes.empty()) throw JudgeRequestError("image payload is empty", p);
  if (image.bytes.size() > kMaxImageBytes) {
    throw JudgeRequestError("image exceeds " + std::to_string(kMaxImageBytes) + " bytes", p);
  }
  const auto type = sniff_media_type(image.bytes);
  if (!type) throw JudgeRequestError("unsupported image type (expected PNG or JPEG)", p);
  const auto dims = probe_image_dimensions(image.bytes);
  if (!dims) throw JudgeRequestError("cannot read image dimensions", p);
  if (dims->width < kMinImageDimension || dims->height < kMinImageDimension) {
    throw JudgeRequestError("image " + std::to_string(dims->width) + "x" + std::to_string(dims->height) +
                                " is below the " + std::to_string(kMinImageDimension) + " px minimum",
                            p);
  }
}

ImagePayload load_image_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw JudgeRequestError("cannot read image file: " + path, Provenance{});
  std::stringstream ss;
  ss << in.rdbuf();
  ImagePayload img;
  img.bytes = ss.str();
  img.media_type = sniff_media_type(img.bytes).value_or("application/octet-stream");
  return img;
}

std::string Provenance::describe() const {
  std::string out = "model=" + model_id + " image=" + image_id + " nonce=" + std::to_string(run_nonce) +
                    " attempts=" + std::to_string(attempts);
  if (!detail.empty()) out += " " + detail;
  return out;
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

std::string cache_key(const BackendConfig& backend, const JudgeRequest& request) {
  char temp[64];
  std::snprintf(temp, sizeof temp, "%.17g", backend.temperature);
  const std::string nonce = std::to_string(request.run_nonce);
  const std::string image_digest = sha256_hex(request.image.bytes);
  return sha256_fields({"curb-cache-v1", backend.model_id, request.prompt.text, image_digest, temp, nonce});
}

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::optional<JudgeResponse> ResponseCache::get(const std::string& key) const {
  const fs::path p = fs::path(dir_) / key.substr(0, 2) / (key + ".json");
  std::ifstream in(p);
  if (!in) return std::nullopt;
  try {
    json j = json::parse(in);
    JudgeResponse r;
    r.raw_text = j.at("raw_text").get<std::string>();
    r.raw_body = j.value("raw_body", "");
    r.model_id = j.at("model_id").get<std::string>();
    r.latency_s = j.value("latency_s", 0.0);
    if (j.contains("token_counts") && j["token_counts"].is_object()) {
      r.token_counts = TokenCounts{j["token_counts"].value("prompt", 0), j["token_counts"].value("completion", 0)};
    }
    r.from_cache = true;
    return r;
  } catch (const json::exception&) {
    return std::nullopt;  // unreadable entries behave as misses
  }
}

void ResponseCache::put(const std::string& key, const JudgeResponse& r) const {
  const fs::path dir = fs::path(dir_) / key.substr(0, 2);
  fs::create_directories(dir);
  json j = {{"key", key},
            {"raw_text", r.raw_text},
            {"raw_body", r.raw_body},
            {"model_id", r.model_id},
            {"latency_s", r.latency_s},
            {"stored_at", utc_timestamp_now()}};
  if (r.token_counts) j["token_counts"] = {{"prompt", r.token_counts->prompt}, {"completion", r.token_counts->completion}};
  const fs::path tmp = dir / (key + ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump();
    if (!out) throw StoreError("cannot write cache entry " + tmp.string());
  }
  fs::rename(tmp, dir / (key + ".json"));
}

// ---------------------------------------------------------------------------
// Rate limiter
// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(int requests_per_minute, int burst)
    : rate_per_s_(requests_per_minute / 60.0),
      capacity_(std::max(1, burst)),
      tokens_(capacity_),
      last_(Clock::now()) {}

void RateLimiter::acquire() {
  double wait_s = 0.0;
  {
    std::lock_guard lock(mu_);
    const auto now = Clock::now();
    tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_per_s_);
    last_ = now;
    tokens_ -= 1.0;
    if (tokens_ < 0.0) wait_s = -tokens_ / rate_per_s_;
  }
  if (wait_s > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

JudgeClient::JudgeClient(BackendConfig backend, std::shared_ptr<Transport> transport)
    : backend_((backend.validate(), std::move(backend))),
      transport_(std::move(transport)),
      limiter_(backend_.requests_per_minute, std::min(backend_.max_concurrency, backend_.requests_per_minute)),
      slots_(backend_.max_concurrency),
      sleeper_([](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); }) {
  if (!backend_.cache_dir.empty()) cache_.emplace(backend_.cache_dir);
}

std::vector<double> JudgeClient::backoff_history() const {
  std::lock_guard lock(history_mu_);
  return backoffs_;
}

JudgeResponse JudgeClient::assess(const JudgeRequest& request) {
  Provenance prov{backend_.model_id, request.image_id, request.run_nonce, 0, {}};
  if (request.run_nonce < 0) throw JudgeRequestError("run_nonce must be >= 0", prov);
  try {
    validate_image(request.image);
  } catch (const JudgeRequestError& e) {
    throw JudgeRequestError(e.what(), prov);
  }

  std::string key;
  if (cache_) {
    key = cache_key(backend_, request);
    if (auto hit = cache_->get(key)) return *hit;
  }

  slots_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{slots_};

  AttemptFailure last{AttemptFailure::Class::kRetryable, 0, "no attempt made"};
  for (int attempt = 1; attempt <= backend_.retry.max_attempts; ++attempt) {
    prov.attempts = attempt;
    limiter_.acquire();
    const auto start = std::chrono::steady_clock::now();
    try {
      transport_calls_.fetch_add(1);
      Completion c = transport_->send(backend_, request);
      JudgeResponse r;
      r.raw_text = std::move(c.raw_text);
      r.raw_body = std::move(c.raw_body);
      r.token_counts = c.token_counts;
      r.model_id = backend_.model_id;
      r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      r.attempts = attempt;
      if (cache_) cache_->put(key, r);
      return r;
    } catch (const AttemptFailure& f) {
      last = f;
      prov.detail = f.status ? "status=" + std::to_string(f.status) : f.message;
      if (f.cls == AttemptFailure::Class::kFatal) {
        throw JudgeRequestError("non-retryable failure: " + f.message, prov, f.status);
      }
    }
    if (attempt < backend_.retry.max_attempts) {
      const double delay = backend_.retry.backoff_base_s * std::pow(2.0, attempt - 1);
      {
        std::lock_guard lock(history_mu_);
        backoffs_.push_back(delay);
      }
      sleeper_(std::chrono::duration<double>(delay));
    }
  }
  if (last.cls == AttemptFailure::Class::kTimeout) {
    throw TimeoutError("timed out after " + std::to_string(prov.attempts) + " attempts", prov);
  }
  throw TransportError("retries exhausted: " + last.message, prov);
}

std::shared_ptr<JudgeClient> make_client(const BackendConfig& backend) {
  backend.validate();
  std::shared_ptr<Transport> t;
  if (backend.kind == "mock") {
    t = MockJudge::from_json(backend.mock);
  } else {
    t = std::make_shared<HttpTransport>();
  }
  return std::make_shared<JudgeClient>(backend, std::move(t));
}

}  // namespace curb
