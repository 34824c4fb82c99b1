#pragma once

#include <memory>
#include <string>

#include "persim/backend.hpp"

namespace persim {

struct HttpBackendConfig {
  std::string endpoint;  // scheme://host[:port][/path-prefix]
  std::string model_id;
  double requests_per_second = 4.0;
  int max_retries = 3;       // total attempts per HTTP call
  double base_delay = 1.0;   // first backoff, doubles per retry
  double timeout_seconds = 120.0;
  // When the provider cannot return completion logprobs for echoed prompts,
  // fall back to chat-completion first-token top logprobs (cheaper but
  // biased: candidates missing from the top-k are floored, see README).
  bool first_token_fallback = false;
  std::string api_key_env = "PERSONA_SIM_API_KEY";
};

// Scores candidates against an OpenAI-style HTTP provider.
//
// Primary path: POST {endpoint}/v1/completions once per candidate with
// echo=true, logprobs set, max_tokens=0; the candidate's score is the sum of
// token log-probabilities over the candidate suffix.
// Fallback path: POST {endpoint}/v1/chat/completions once per prompt with
// logprobs + top_logprobs and read the first generated token's distribution.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config, RateLimiter::ClockFn clock = {},
                       RateLimiter::SleepFn sleep = {});
  ~HttpBackend() override;

  ScoreResult score(const ScoreRequest& req) override;
  const std::string& model_id() const override;
  const std::string& id() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace persim
