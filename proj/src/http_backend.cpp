#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "persim/http_backend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "persim/errors.hpp"
#include "persim/util.hpp"

namespace persim {

using nlohmann::json;

namespace {

// Log-probability assigned to candidates absent from the provider's top-k in
// fallback mode. Finite so the distribution stays well-defined.
constexpr double kFallbackFloor = -100.0;

std::string body_snippet(const std::string& body) {
  std::string s = trim(body);
  if (s.size() > 200) s = s.substr(0, 200) + "...";
  return s;
}

bool mentions_capability_gap(const std::string& body) {
  std::string lower;
  lower.reserve(body.size());
  for (char c : body) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower.find("logprob") != std::string::npos || lower.find("echo") != std::string::npos;
}

}  // namespace

struct HttpBackend::Impl {
  HttpBackendConfig config;
  std::string base_url;
  std::string path_prefix;
  std::string api_key;
  std::string backend_id = "http";
  RateLimiter limiter;
  RateLimiter::SleepFn retry_sleep;
  std::mutex http_mu;  // httplib clients are not safe for concurrent requests
  std::unique_ptr<httplib::Client> client;

  Impl(HttpBackendConfig cfg, RateLimiter::ClockFn clock, RateLimiter::SleepFn sleep)
      : config(std::move(cfg)),
        limiter(config.requests_per_second, std::move(clock), sleep),
        retry_sleep(sleep ? std::move(sleep)
                          : RateLimiter::SleepFn([](double s) {
                              if (s > 0) {
                                std::this_thread::sleep_for(std::chrono::duration<double>(s));
                              }
                            })) {
    if (config.endpoint.empty()) throw ConfigError("http backend: empty endpoint");
    if (config.model_id.empty()) throw ConfigError("http backend: empty model id");
    // Split scheme://authority from any path prefix.
    const std::size_t scheme = config.endpoint.find("://");
    if (scheme == std::string::npos) {
      throw ConfigError("http backend: endpoint must include a scheme: " + config.endpoint);
    }
    const std::size_t path = config.endpoint.find('/', scheme + 3);
    if (path == std::string::npos) {
      base_url = config.endpoint;
    } else {
      base_url = config.endpoint.substr(0, path);
      path_prefix = config.endpoint.substr(path);
      while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
    }
    if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
      api_key = key;
    }
    client = std::make_unique<httplib::Client>(base_url);
    client->set_connection_timeout(std::chrono::duration<double>(config.timeout_seconds));
    client->set_read_timeout(std::chrono::duration<double>(config.timeout_seconds));
    client->set_write_timeout(std::chrono::duration<double>(config.timeout_seconds));
  }

  json post(const std::string& path, const json& payload) {
    limiter.acquire();
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    httplib::Result res = [&] {
      std::lock_guard<std::mutex> lk(http_mu);
      return client->Post(path_prefix + path, headers, payload.dump(), "application/json");
    }();
    if (!res) {
      throw BackendError("http backend: transport failure calling " + base_url + path_prefix +
                             path + ": " + httplib::to_string(res.error()),
                         /*retryable=*/true);
    }
    if (res->status == 401 || res->status == 403) {
      throw ConfigError("http backend: authentication rejected (HTTP " +
                        std::to_string(res->status) + "); set " + config.api_key_env);
    }
    if (res->status == 429 || res->status >= 500) {
      throw BackendError("http backend: HTTP " + std::to_string(res->status) + ": " +
                             body_snippet(res->body),
                         /*retryable=*/true);
    }
    if (res->status >= 400) {
      if (mentions_capability_gap(res->body)) {
        throw ConfigError(
            "http backend: provider rejected the request (HTTP " + std::to_string(res->status) +
            ": " + body_snippet(res->body) +
            "); it likely cannot score echoed completions -- use the mock backend or enable "
            "first_token_fallback");
      }
      throw BackendError("http backend: HTTP " + std::to_string(res->status) + ": " +
                             body_snippet(res->body),
                         /*retryable=*/false);
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw BackendError(std::string("http backend: malformed JSON response: ") + e.what(),
                         /*retryable=*/true);
    }
  }

  json post_with_retries(const std::string& path, const json& payload) {
    // with_retries carries ScoreResult, so wrap the JSON in a side channel.
    json out;
    auto call = [&]() -> ScoreResult {
      out = post(path, payload);
      return {};
    };
    with_retries(call, config.max_retries, retry_sleep, config.base_delay);
    return out;
  }

  // Sum of token log-probabilities over the suffix starting at prefix_len.
  double completion_score(const json& response, std::size_t prefix_len) {
    try {
      const json& choice = response.at("choices").at(0);
      if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
        throw ConfigError(
            "http backend: provider returned no logprobs for an echoed completion -- use the "
            "mock backend or enable first_token_fallback");
      }
      const json& lp = choice.at("logprobs");
      const json& token_logprobs = lp.at("token_logprobs");
      const json& offsets = lp.at("text_offset");
      if (token_logprobs.size() != offsets.size()) {
        throw BackendError("http backend: token_logprobs/text_offset length mismatch",
                           /*retryable=*/false);
      }
      double total = 0.0;
      bool any = false;
      for (std::size_t i = 0; i < offsets.size(); ++i) {
        if (offsets[i].get<std::size_t>() < prefix_len) continue;
        if (token_logprobs[i].is_null()) continue;
        total += token_logprobs[i].get<double>();
        any = true;
      }
      if (!any) {
        throw BackendError("http backend: no scored tokens beyond the prompt prefix",
                           /*retryable=*/false);
      }
      return total;
    } catch (const json::exception& e) {
      throw BackendError(std::string("http backend: unexpected completions payload: ") + e.what(),
                         /*retryable=*/true);
    }
  }

  ScoreResult score_via_completions(const ScoreRequest& req) {
    // The separating space belongs to the candidate side of the boundary so
    // that a merged " 3"-style token is counted with the candidate.
    const std::string prefix = req.bundle.system_text + "\n\n" + req.bundle.user_text;
    ScoreResult out;
    out.logprobs.reserve(req.candidates.size());
    for (const std::string& candidate : req.candidates) {
      json payload{{"model", req.model_id},
                   {"prompt", prefix + " " + candidate},
                   {"max_tokens", 0},
                   {"echo", true},
                   {"logprobs", 0},
                   {"temperature", 0}};
      for (const auto& [k, v] : req.decode_params) payload[k] = v;
      const json response = post_with_retries("/v1/completions", payload);
      out.logprobs.push_back(completion_score(response, prefix.size()));
    }
    out.backend_id = backend_id;
    return out;
  }

  ScoreResult score_via_first_token(const ScoreRequest& req) {
    json payload{{"model", req.model_id},
                 {"messages",
                  json::array({json{{"role", "system"}, {"content", req.bundle.system_text}},
                               json{{"role", "user"}, {"content", req.bundle.user_text}}})},
                 {"max_tokens", 1},
                 {"logprobs", true},
                 {"top_logprobs", 20},
                 {"temperature", 0}};
    for (const auto& [k, v] : req.decode_params) payload[k] = v;
    const json response = post_with_retries("/v1/chat/completions", payload);
    try {
      const json& choice = response.at("choices").at(0);
      if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
        throw ConfigError("http backend: provider returned no chat logprobs; cannot score");
      }
      const json& top = choice.at("logprobs").at("content").at(0).at("top_logprobs");
      std::map<std::string, double> by_token;
      for (const json& entry : top) {
        const std::string token = trim(entry.at("token").get<std::string>());
        const double lp = entry.at("logprob").get<double>();
        auto it = by_token.find(token);
        if (it == by_token.end() || lp > it->second) by_token[token] = lp;
      }
      ScoreResult out;
      out.logprobs.reserve(req.candidates.size());
      for (const std::string& candidate : req.candidates) {
        auto it = by_token.find(candidate);
        out.logprobs.push_back(it == by_token.end() ? kFallbackFloor : it->second);
      }
      out.backend_id = backend_id + "-first-token";
      return out;
    } catch (const json::exception& e) {
      throw BackendError(std::string("http backend: unexpected chat payload: ") + e.what(),
                         /*retryable=*/true);
    }
  }
};

HttpBackend::HttpBackend(HttpBackendConfig config, RateLimiter::ClockFn clock,
                         RateLimiter::SleepFn sleep)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(clock), std::move(sleep))) {}

HttpBackend::~HttpBackend() = default;

ScoreResult HttpBackend::score(const ScoreRequest& req) {
  validate_request(req);
  if (impl_->config.first_token_fallback) {
    return impl_->score_via_first_token(req);
  }
  return impl_->score_via_completions(req);
}

const std::string& HttpBackend::model_id() const { return impl_->config.model_id; }

const std::string& HttpBackend::id() const { return impl_->backend_id; }

}  // namespace persim
