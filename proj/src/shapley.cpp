#include "persim/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "persim/errors.hpp"
#include "persim/evaluate.hpp"
#include "persim/util.hpp"

namespace persim {

namespace {

ItemSet mask_to_set(const std::vector<std::string>& items, std::uint64_t mask) {
  ItemSet s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (mask & (1ull << i)) s.insert(items[i]);
  }
  return s;
}

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return c;
}

ShapleyResult shapley_exact(const std::vector<std::string>& items, const CoalitionValueFn& v) {
  const int m = static_cast<int>(items.size());
  const std::uint64_t full = (1ull << m) - 1;
  std::vector<double> value(static_cast<std::size_t>(full) + 1, 0.0);
  for (std::uint64_t mask = 0; mask <= full; ++mask) {
    value[mask] = v(mask_to_set(items, mask));
  }
  // weight of a coalition of size s (excluding the entering item):
  // s! (m-1-s)! / m! = 1 / (m * C(m-1, s)), exact in doubles for m <= 12.
  std::vector<double> weight(static_cast<std::size_t>(m), 0.0);
  for (int s = 0; s < m; ++s) {
    weight[static_cast<std::size_t>(s)] = 1.0 / (static_cast<double>(m) * binomial(m - 1, s));
  }
  ShapleyResult out;
  out.mode = ShapleyMode::Exact;
  out.v_empty = value[0];
  out.v_full = value[full];
  for (int i = 0; i < m; ++i) {
    const std::uint64_t bit = 1ull << i;
    double phi = 0.0;
    for (std::uint64_t mask = 0; mask <= full; ++mask) {
      if (mask & bit) continue;
      const int s = std::popcount(mask);
      phi += weight[static_cast<std::size_t>(s)] * (value[mask | bit] - value[mask]);
    }
    out.phi[items[static_cast<std::size_t>(i)]] = phi;
  }
  return out;
}

ShapleyResult shapley_permutation(const std::vector<std::string>& items, const CoalitionValueFn& v,
                                  int permutations, std::uint64_t seed) {
  const std::size_t m = items.size();
  std::map<std::uint64_t, double> memo;
  const auto eval = [&](std::uint64_t mask) {
    auto it = memo.find(mask);
    if (it != memo.end()) return it->second;
    const double val = v(mask_to_set(items, mask));
    memo.emplace(mask, val);
    return val;
  };
  ShapleyResult out;
  out.mode = ShapleyMode::Permutation;
  out.permutations = permutations;
  out.v_empty = eval(0);
  out.v_full = eval((1ull << m) - 1);
  std::vector<double> phi(m, 0.0);
  std::vector<std::size_t> order(m);
  Rng rng(seed);
  for (int p = 0; p < permutations; ++p) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::uint64_t mask = 0;
    double prev = out.v_empty;
    for (std::size_t i : order) {
      mask |= 1ull << i;
      const double cur = eval(mask);
      phi[i] += cur - prev;
      prev = cur;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    out.phi[items[i]] = phi[i] / static_cast<double>(permutations);
  }
  return out;
}

}  // namespace

ShapleyResult shapley_values(const std::vector<std::string>& items, const CoalitionValueFn& v,
                             ShapleyMode mode, int permutations, std::uint64_t seed) {
  if (items.empty()) throw ValidationError("shapley_values: no items");
  std::set<std::string> unique(items.begin(), items.end());
  if (unique.size() != items.size()) throw ValidationError("shapley_values: duplicate items");
  if (!v) throw ValidationError("shapley_values: no value function");
  if (mode == ShapleyMode::Exact) {
    if (items.size() > 12) {
      throw DomainError("shapley_values: exact mode supports at most 12 items (got " +
                        std::to_string(items.size()) + "); use permutation mode");
    }
    return shapley_exact(items, v);
  }
  if (items.size() > 63) {
    throw DomainError("shapley_values: permutation mode supports at most 63 items");
  }
  if (permutations < 1) {
    throw DomainError("shapley_values: permutation mode needs a positive sample count");
  }
  return shapley_permutation(items, v, permutations, seed);
}

CoalitionEvaluator::CoalitionEvaluator(Population base_population,
                                       std::vector<QuestionSpec> test_questions,
                                       std::map<std::string, double> human_means,
                                       GuidanceTemplate guidance, Mode mode, Backend& backend,
                                       int workers)
    : base_population_(std::move(base_population)),
      test_questions_(std::move(test_questions)),
      human_means_(std::move(human_means)),
      guidance_(std::move(guidance)),
      mode_(mode),
      backend_(backend),
      workers_(workers) {
  if (test_questions_.empty()) {
    throw ValidationError("coalition evaluator: no test questions");
  }
  for (const QuestionSpec& q : test_questions_) {
    if (!human_means_.count(q.id)) {
      throw ValidationError("coalition evaluator: no human mean for " + q.id);
    }
  }
}

double CoalitionEvaluator::operator()(const ItemSet& subset) const {
  const std::string key = join(std::vector<std::string>(subset.begin(), subset.end()), "|");
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  const Population restricted = item_subset_population(base_population_, subset);
  double total = 0.0;
  for (const QuestionSpec& q : test_questions_) {
    const PopulationPrediction pred =
        simulate_population(restricted, q, guidance_, mode_, backend_, workers_);
    total += mae(pred.expected_response, human_means_.at(q.id), q);
  }
  const double val = total / static_cast<double>(test_questions_.size());
  std::lock_guard<std::mutex> lk(mu_);
  memo_.emplace(key, val);
  return val;
}

std::size_t CoalitionEvaluator::evaluations() const {
  std::lock_guard<std::mutex> lk(mu_);
  return memo_.size();
}

}  // namespace persim
