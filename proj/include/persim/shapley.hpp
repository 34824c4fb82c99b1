#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "persim/backend.hpp"
#include "persim/persona.hpp"
#include "persim/prompt.hpp"
#include "persim/simulate.hpp"

namespace persim {

using ItemSet = std::set<std::string>;
using CoalitionValueFn = std::function<double(const ItemSet&)>;

enum class ShapleyMode { Exact, Permutation };

struct ShapleyResult {
  std::map<std::string, double> phi;
  ShapleyMode mode = ShapleyMode::Exact;
  int permutations = 0;  // 0 for exact
  double v_empty = 0.0;
  double v_full = 0.0;
};

// Shapley attribution of v over the items. Exact mode enumerates all 2^m
// coalitions (m <= 12); permutation mode averages marginal contributions
// over seeded random orderings, memoizing v by coalition. Sums of phi match
// v(full) - v(empty) exactly (up to rounding) in exact mode.
ShapleyResult shapley_values(const std::vector<std::string>& items, const CoalitionValueFn& v,
                             ShapleyMode mode, int permutations = 0, std::uint64_t seed = 0);

// Pipeline value function: v(S) = mean MAE of the item-restricted population
// across the test questions. Negative phi marks items whose presence lowers
// the error. The paired design resimulates the same sampled personas for
// every coalition; values are memoized, so repeated subsets cost nothing.
class CoalitionEvaluator {
 public:
  CoalitionEvaluator(Population base_population, std::vector<QuestionSpec> test_questions,
                     std::map<std::string, double> human_means, GuidanceTemplate guidance,
                     Mode mode, Backend& backend, int workers = 1);

  double operator()(const ItemSet& subset) const;
  std::size_t evaluations() const;  // distinct coalitions simulated so far

 private:
  Population base_population_;
  std::vector<QuestionSpec> test_questions_;
  std::map<std::string, double> human_means_;
  GuidanceTemplate guidance_;
  Mode mode_;
  Backend& backend_;
  int workers_;
  mutable std::mutex mu_;
  mutable std::map<std::string, double> memo_;
};

}  // namespace persim
