#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "persim/dataset.hpp"
#include "persim/distribution.hpp"
#include "persim/prompt.hpp"

namespace persim {

// One scoring call: the prompt plus the candidate completions (the string
// forms of the admissible responses) to be ranked by log-probability.
struct ScoreRequest {
  PromptBundle bundle;
  std::vector<std::string> candidates;
  std::string model_id;
  std::map<std::string, double> decode_params;
};

struct ScoreResult {
  std::vector<double> logprobs;  // aligned with request candidates
  std::string backend_id;
  bool cached = false;
};

// Throws ValidationError on empty or duplicated candidate lists.
void validate_request(const ScoreRequest& req);

// Builds the canonical request for one prompt: candidates are the decimal
// forms of the bundle's admissible options, in ascending order.
ScoreRequest make_request(const PromptBundle& bundle, const std::string& model_id,
                          std::map<std::string, double> decode_params = {});

class Backend {
 public:
  virtual ~Backend() = default;
  // Scores every candidate; must be safe to call from multiple threads.
  virtual ScoreResult score(const ScoreRequest& req) = 0;
  virtual const std::string& model_id() const = 0;
  virtual const std::string& id() const = 0;
};

// exp-normalizes result.logprobs over the bundle's admissible options.
// Pre: candidates are exactly the string forms of q.options().
ResponseDistribution to_distribution(const ScoreRequest& req, const ScoreResult& res,
                                     const QuestionSpec& q);

// Deterministic offline world: candidate k gets logit -gamma * |k - mu| where
// mu = planted_mean(profile, question, scale). gamma -> 0 gives uniform
// responses, large gamma a point mass at the nearest option.
struct MockWorld {
  using MeanFn = std::function<double(const std::map<std::string, int>& profile,
                                      const std::string& question_id, int scale_min,
                                      int scale_max)>;
  MeanFn planted_mean;
  double gamma = 1.0;
};

ScoreResult mock_score(const MockWorld& world, const ScoreRequest& req);

class MockBackend : public Backend {
 public:
  explicit MockBackend(MockWorld world, std::string model = "mock");
  ScoreResult score(const ScoreRequest& req) override;
  const std::string& model_id() const override { return model_; }
  const std::string& id() const override { return id_; }
  std::uint64_t calls() const;

 private:
  MockWorld world_;
  std::string model_;
  std::string id_ = "mock";
  mutable std::mutex mu_;
  std::uint64_t calls_ = 0;
};

// Planted mean = question midpoint shifted by the persona's normalized mean
// answer position (personas with high answers get high means). Falls back to
// the midpoint for empty profiles. Items missing from `ds` are skipped.
MockWorld::MeanFn make_profile_mean_rule(const SurveyDataset& ds);
// Planted mean = scale midpoint for everyone.
MockWorld::MeanFn make_midpoint_rule();

// Spaces grants so that no more than requests_per_second calls start per
// second. Clock and sleep are injectable for tests; both use seconds.
class RateLimiter {
 public:
  using ClockFn = std::function<double()>;
  using SleepFn = std::function<void(double)>;

  explicit RateLimiter(double requests_per_second, ClockFn clock = {}, SleepFn sleep = {});
  void acquire();

 private:
  double min_interval_;
  ClockFn clock_;
  SleepFn sleep_;
  std::mutex mu_;
  double next_slot_ = 0.0;
};

// Runs `call`, retrying on retryable BackendError with exponential backoff
// (base_delay, 2x per attempt). Exhaustion rethrows with the attempt count.
ScoreResult with_retries(const std::function<ScoreResult()>& call, int max_attempts,
                         const RateLimiter::SleepFn& sleep, double base_delay = 1.0);

}  // namespace persim
