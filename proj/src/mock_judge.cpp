// Copyright 2026 The Curbside Authors
// SPDX-License-Identifier: Apache-2.0

#include <thread>

#include "curb/judgeclient.hpp"

namespace curb {

using nlohmann::json;

std::shared_ptr<MockJudge> MockJudge::ordered(std::vector<MockReply> script) {
  if (script.empty()) throw ScriptError("mock script must be non-empty", Provenance{});
  std::shared_ptr<MockJudge> m(new MockJudge());
  m->mode_ = Mode::kOrdered;
  m->ordered_ = std::move(script);
  return m;
}

std::shared_ptr<MockJudge> MockJudge::ordered(const std::vector<std::string>& texts) {
  std::vector<MockReply> replies;
  replies.reserve(texts.size());
  for (const auto& t : texts) replies.push_back({t, 200});
  return ordered(std::move(replies));
}

std::shared_ptr<MockJudge> MockJudge::keyed(std::map<std::string, std::string> script,
                                            std::optional<std::string> fallback) {
  if (script.empty() && !fallback) throw ScriptError("mock script must be non-empty", Provenance{});
  std::shared_ptr<MockJudge> m(new MockJudge());
  m->mode_ = Mode::kKeyed;
  m->keyed_ = std::move(script);
  m->fallback_ = std::move(fallback);
  return m;
}

std::shared_ptr<MockJudge> MockJudge::function(Fn fn) {
  if (!fn) throw ScriptError("mock function must be callable", Provenance{});
  std::shared_ptr<MockJudge> m(new MockJudge());
  m->mode_ = Mode::kFunction;
  m->fn_ = std::move(fn);
  return m;
}

std::shared_ptr<MockJudge> MockJudge::from_json(const json& j) {
  if (j.contains("responses")) {
    std::vector<MockReply> replies;
    for (const auto& r : j["responses"]) {
      if (r.is_string()) {
        replies.push_back({r.get<std::string>(), 200});
      } else {
        replies.push_back({r.value("text", ""), r.value("status", 200)});
      }
    }
    return ordered(std::move(replies));
  }
  if (j.contains("by_image") || j.contains("fallback")) {
    std::map<std::string, std::string> script;
    if (j.contains("by_image")) {
      for (const auto& [k, v] : j["by_image"].items()) script[k] = v.get<std::string>();
    }
    std::optional<std::string> fb;
    if (j.contains("fallback")) fb = j["fallback"].get<std::string>();
    return keyed(std::move(script), std::move(fb));
  }
  throw ScriptError("mock block needs 'responses', 'by_image' or 'fallback'", Provenance{});
}

MockReply MockJudge::next(const JudgeRequest& request, int call_no) {
  Provenance prov{"mock", request.image_id, request.run_nonce, 0, "call=" + std::to_string(call_no)};
  switch (mode_) {
    case Mode::kOrdered: {
      std::lock_guard lock(mu_);
      if (cursor_ >= ordered_.size()) throw ScriptError("mock script exhausted", prov);
      return ordered_[cursor_++];
    }
    case Mode::kKeyed: {
      if (auto it = keyed_.find(request.image_id + "#" + std::to_string(request.run_nonce)); it != keyed_.end()) {
        return {it->second, 200};
      }
      if (auto it = keyed_.find(request.image_id); it != keyed_.end()) return {it->second, 200};
      if (fallback_) return {*fallback_, 200};
      throw ScriptError("mock script has no entry for image '" + request.image_id + "'", prov);
    }
    case Mode::kFunction: return fn_(request);
  }
  throw ScriptError("unreachable mock mode", prov);
}

Completion MockJudge::send(const BackendConfig&, const JudgeRequest& request) {
  const int call_no = calls_.fetch_add(1);
  const int now = in_flight_.fetch_add(1) + 1;
  int prev = max_in_flight_.load();
  while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
  }
  struct Leave {
    std::atomic<int>& n;
    ~Leave() { n.fetch_sub(1); }
  } leave{in_flight_};

  if (hook_) hook_(call_no);
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  MockReply r = next(request, call_no);
  if (r.status != 200) {
    const auto cls = (r.status == 429 || r.status >= 500) ? AttemptFailure::Class::kRetryable
                                                          : AttemptFailure::Class::kFatal;
    throw AttemptFailure{cls, r.status, "mock status " + std::to_string(r.status)};
  }
  return Completion{r.text, json({{"mock", true}, {"text", r.text}}).dump(), std::nullopt};
}

}  // namespace curb
