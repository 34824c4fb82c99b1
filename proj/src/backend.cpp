#include "persim/backend.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <thread>

#include "persim/errors.hpp"
#include "persim/util.hpp"

namespace persim {

void validate_request(const ScoreRequest& req) {
  if (req.candidates.empty()) throw ValidationError("score request with no candidates");
  std::set<std::string> seen;
  for (const std::string& c : req.candidates) {
    if (!seen.insert(c).second) throw ValidationError("duplicate candidate completion: \"" + c + "\"");
  }
  if (req.model_id.empty()) throw ValidationError("score request with empty model id");
}

ScoreRequest make_request(const PromptBundle& bundle, const std::string& model_id,
                          std::map<std::string, double> decode_params) {
  ScoreRequest req;
  req.bundle = bundle;
  req.candidates.reserve(bundle.admissible_options.size());
  for (int k : bundle.admissible_options) req.candidates.push_back(std::to_string(k));
  req.model_id = model_id;
  req.decode_params = std::move(decode_params);
  validate_request(req);
  return req;
}

ResponseDistribution to_distribution(const ScoreRequest& req, const ScoreResult& res,
                                     const QuestionSpec& q) {
  const std::vector<int> options = q.options();
  if (req.bundle.question_id != q.id) {
    throw ValidationError("result for question " + req.bundle.question_id +
                          " interpreted against question " + q.id);
  }
  if (req.candidates.size() != options.size()) {
    throw ValidationError("question " + q.id + ": " + std::to_string(req.candidates.size()) +
                          " candidates for " + std::to_string(options.size()) + " options");
  }
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (req.candidates[i] != std::to_string(options[i])) {
      throw ValidationError("question " + q.id + ": candidate \"" + req.candidates[i] +
                            "\" does not match option " + std::to_string(options[i]));
    }
  }
  if (res.logprobs.size() != req.candidates.size()) {
    throw ValidationError("question " + q.id + ": backend returned " +
                          std::to_string(res.logprobs.size()) + " scores for " +
                          std::to_string(req.candidates.size()) + " candidates");
  }
  for (double lp : res.logprobs) {
    if (std::isnan(lp)) throw ValidationError("question " + q.id + ": NaN log-probability");
  }
  return ResponseDistribution::make(q.id, options, softmax(res.logprobs));
}

ScoreResult mock_score(const MockWorld& world, const ScoreRequest& req) {
  validate_request(req);
  if (!world.planted_mean) throw ConfigError("mock world has no planted_mean rule");
  if (world.gamma < 0.0) throw ConfigError("mock gamma must be non-negative");
  const std::vector<int>& options = req.bundle.admissible_options;
  if (options.empty()) throw ValidationError("mock scoring needs admissible options");
  if (req.candidates.size() != options.size()) {
    throw ValidationError("mock scoring: candidate/option count mismatch");
  }
  const double mu = world.planted_mean(req.bundle.persona_profile, req.bundle.question_id,
                                       options.front(), options.back());
  std::vector<double> logits;
  logits.reserve(options.size());
  for (int k : options) logits.push_back(-world.gamma * std::abs(static_cast<double>(k) - mu));
  // Report genuine log-probabilities, as a provider would.
  const double lse = log_sum_exp(logits);
  ScoreResult res;
  res.logprobs.reserve(logits.size());
  for (double l : logits) res.logprobs.push_back(l - lse);
  res.backend_id = "mock";
  return res;
}

MockBackend::MockBackend(MockWorld world, std::string model)
    : world_(std::move(world)), model_(std::move(model)) {}

ScoreResult MockBackend::score(const ScoreRequest& req) {
  {
    std::lock_guard<std::mutex> lk(mu_);
    ++calls_;
  }
  return mock_score(world_, req);
}

std::uint64_t MockBackend::calls() const {
  std::lock_guard<std::mutex> lk(mu_);
  return calls_;
}

MockWorld::MeanFn make_profile_mean_rule(const SurveyDataset& ds) {
  // Normalized answer positions keep mixed scales commensurable: an item
  // answered at its maximum contributes 1 regardless of the item's range.
  std::map<std::string, std::pair<int, int>> scales;
  for (const QuestionSpec& q : ds.questions()) scales[q.id] = {q.scale_min, q.scale_max};
  return [scales](const std::map<std::string, int>& profile, const std::string& question_id,
                  int scale_min, int scale_max) {
    (void)question_id;
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& [item, option] : profile) {
      auto it = scales.find(item);
      if (it == scales.end()) continue;
      const auto [lo, hi] = it->second;
      if (hi <= lo) continue;
      total += static_cast<double>(option - lo) / static_cast<double>(hi - lo);
      ++n;
    }
    if (n == 0) return 0.5 * (static_cast<double>(scale_min) + static_cast<double>(scale_max));
    const double position = total / static_cast<double>(n);
    return static_cast<double>(scale_min) + position * static_cast<double>(scale_max - scale_min);
  };
}

MockWorld::MeanFn make_midpoint_rule() {
  return [](const std::map<std::string, int>&, const std::string&, int scale_min, int scale_max) {
    return 0.5 * (static_cast<double>(scale_min) + static_cast<double>(scale_max));
  };
}

namespace {

double steady_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

void real_sleep(double seconds) {
  if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

}  // namespace

RateLimiter::RateLimiter(double requests_per_second, ClockFn clock, SleepFn sleep)
    : min_interval_(requests_per_second > 0 ? 1.0 / requests_per_second : 0.0),
      clock_(clock ? std::move(clock) : ClockFn(steady_seconds)),
      sleep_(sleep ? std::move(sleep) : SleepFn(real_sleep)) {}

void RateLimiter::acquire() {
  if (min_interval_ <= 0) return;
  double wait = 0.0;
  {
    std::lock_guard<std::mutex> lk(mu_);
    const double now = clock_();
    const double slot = std::max(now, next_slot_);
    next_slot_ = slot + min_interval_;
    wait = slot - now;
  }
  if (wait > 0) sleep_(wait);
}

ScoreResult with_retries(const std::function<ScoreResult()>& call, int max_attempts,
                         const RateLimiter::SleepFn& sleep, double base_delay) {
  if (max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  double delay = base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return call();
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= max_attempts) {
        throw BackendError(std::string(e.what()) + " (after " + std::to_string(attempt) +
                               " attempt" + (attempt == 1 ? "" : "s") + ")",
                           e.retryable(), attempt);
      }
      if (sleep) sleep(delay);
      delay *= 2.0;
    }
  }
}

}  // namespace persim
