// Shapley attribution: the classical axioms on synthetic games, exact mode
// against an all-orderings oracle, permutation-mode sampling, and the
// population/pipeline value function.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "persim/backend.hpp"
#include "persim/errors.hpp"
#include "persim/persona.hpp"
#include "persim/shapley.hpp"

#include "support.hpp"

using namespace persim;

namespace {

// ---------------------------------------------------------------------------
// Oracle: the textbook definition. Average the marginal contribution of each
// item over every one of the m! orderings. Usable for m <= 6.
std::map<std::string, double> oracle_shapley(const std::vector<std::string>& items,
                                             const CoalitionValueFn& v) {
  const std::size_t m = items.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::map<std::string, double> phi;
  for (const std::string& it : items) phi[it] = 0.0;
  double n_orders = 0.0;
  std::sort(order.begin(), order.end());
  do {
    ItemSet built;
    double prev = v({});
    for (std::size_t idx : order) {
      built.insert(items[idx]);
      const double cur = v(built);
      phi[items[idx]] += cur - prev;
      prev = cur;
    }
    n_orders += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& [k, val] : phi) val /= n_orders;
  return phi;
}

// Deterministic pseudo-random coalition value derived from the subset mask.
double hashed_value(const std::vector<std::string>& items, const ItemSet& s) {
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (s.count(items[i])) mask |= 1ull << i;
  }
  std::uint64_t z = mask + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return static_cast<double>(z % 10007) / 10007.0;
}

std::vector<std::string> named_items(std::size_t m) {
  std::vector<std::string> items;
  for (std::size_t i = 0; i < m; ++i) items.push_back("item" + std::to_string(i));
  return items;
}

// Counts distinct value-function invocations.
struct CountingGame {
  CoalitionValueFn inner;
  mutable std::size_t calls = 0;
  double operator()(const ItemSet& s) const {
    ++calls;
    return inner(s);
  }
};

// Mock pipeline fixture: two persona items on different scales.
struct PipelineFixture {
  SurveyDataset ds;
  DescriptorCatalog catalog;
  Population population;

  PipelineFixture()
      : ds(make_dataset()), catalog(make_catalog()),
        population(sample_population(ds, "Testland", {"Q164", "Q45"}, catalog, 20, 7, Mode::Value,
                                     /*include_nationality=*/true)) {}

  static SurveyDataset make_dataset() {
    std::vector<QuestionSpec> questions{support::q4(), support::q_scale("Q45", 1, 3),
                                        support::q_scale("Q164", 1, 10)};
    std::vector<Respondent> respondents;
    for (int i = 0; i < 24; ++i) {
      Respondent r;
      r.id = "R" + std::to_string(i + 1);
      r.country = "Testland";
      r.answers["Q45"] = 1 + i % 3;
      r.answers["Q164"] = 1 + (i * 7) % 10;
      respondents.push_back(std::move(r));
    }
    return SurveyDataset(std::move(questions), std::move(respondents));
  }

  static DescriptorCatalog make_catalog() {
    std::map<std::string, std::map<int, std::string>> entries;
    for (int k = 1; k <= 3; ++k) entries["Q45"][k] = "You answer " + std::to_string(k) + ".";
    for (int k = 1; k <= 10; ++k) entries["Q164"][k] = "You weigh " + std::to_string(k) + ".";
    return DescriptorCatalog(entries, "shapley-test catalog");
  }
};

GuidanceTemplate plain_guidance() { return {"plain", "Respond as people from {country} do."}; }

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic games

TEST_CASE("a single item receives its full marginal value") {
  const auto v = [](const ItemSet& s) { return s.empty() ? 0.40 : 0.15; };
  const ShapleyResult r = shapley_values({"only"}, v, ShapleyMode::Exact);
  CHECK(r.phi.at("only") == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK(r.v_empty == 0.40);
  CHECK(r.v_full == 0.15);
  CHECK(r.permutations == 0);
}

TEST_CASE("additive games attribute exactly their per-item contributions") {
  const std::map<std::string, double> c{{"a", -0.02}, {"b", 0.01}, {"c", 0.005}};
  const auto v = [&](const ItemSet& s) {
    double total = 0.30;  // baseline error with no persona information
    for (const std::string& item : s) total += c.at(item);
    return total;
  };
  const ShapleyResult r = shapley_values({"a", "b", "c"}, v, ShapleyMode::Exact);
  for (const auto& [item, want] : c) {
    CHECK(r.phi.at(item) == doctest::Approx(want).epsilon(1e-15));
  }
  double sum = 0.0;
  for (const auto& [item, phi] : r.phi) sum += phi;
  CHECK(sum == doctest::Approx(r.v_full - r.v_empty).epsilon(1e-15));
}

TEST_CASE("symmetric items receive identical attribution") {
  // v depends only on coalition size, so every item is exchangeable.
  const auto v = [](const ItemSet& s) { return 1.0 / (1.0 + static_cast<double>(s.size())); };
  const ShapleyResult r = shapley_values(named_items(5), v, ShapleyMode::Exact);
  const double first = r.phi.at("item0");
  for (const auto& [item, phi] : r.phi) CHECK(phi == doctest::Approx(first).epsilon(1e-14));
}

TEST_CASE("dummy items receive zero") {
  // "ghost" never alters the value; its Shapley share must vanish.
  const auto v = [&](const ItemSet& s) {
    ItemSet without = s;
    without.erase("ghost");
    return hashed_value({"a", "b", "c", "d"}, without);
  };
  const ShapleyResult r = shapley_values({"a", "b", "c", "d", "ghost"}, v, ShapleyMode::Exact);
  CHECK(std::abs(r.phi.at("ghost")) <= 1e-12);
}

TEST_CASE("efficiency holds on arbitrary games") {
  const std::vector<std::string> items = named_items(7);
  const auto v = [&](const ItemSet& s) { return hashed_value(items, s); };
  const ShapleyResult r = shapley_values(items, v, ShapleyMode::Exact);
  double sum = 0.0;
  for (const auto& [item, phi] : r.phi) sum += phi;
  CHECK(sum == doctest::Approx(r.v_full - r.v_empty).epsilon(1e-12));
}

TEST_CASE("exact mode reproduces the all-orderings definition") {
  for (std::size_t m : {2u, 3u, 4u, 5u, 6u}) {
    const std::vector<std::string> items = named_items(m);
    const auto v = [&](const ItemSet& s) { return hashed_value(items, s) + 0.03 * s.size(); };
    const ShapleyResult got = shapley_values(items, v, ShapleyMode::Exact);
    const std::map<std::string, double> want = oracle_shapley(items, v);
    for (const auto& [item, phi] : want) {
      CHECK(got.phi.at(item) == doctest::Approx(phi).epsilon(1e-12));
    }
  }
}

TEST_CASE("exact mode handles the documented 12-item ceiling") {
  const std::vector<std::string> items = named_items(12);
  const auto v = [](const ItemSet& s) { return static_cast<double>(s.size() % 3); };
  const ShapleyResult r = shapley_values(items, v, ShapleyMode::Exact);  // 4096 coalitions
  double sum = 0.0;
  for (const auto& [item, phi] : r.phi) sum += phi;
  CHECK(sum == doctest::Approx(r.v_full - r.v_empty).epsilon(1e-9));

  const std::vector<std::string> too_many = named_items(13);
  try {
    shapley_values(too_many, v, ShapleyMode::Exact);
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("12") != std::string::npos);
    CHECK(msg.find("13") != std::string::npos);
    CHECK(msg.find("permutation") != std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Permutation mode

TEST_CASE("permutation sampling converges to the exact values") {
  const std::vector<std::string> items = named_items(8);
  const auto v = [&](const ItemSet& s) { return hashed_value(items, s); };
  const ShapleyResult exact = shapley_values(items, v, ShapleyMode::Exact);
  const ShapleyResult sampled =
      shapley_values(items, v, ShapleyMode::Permutation, /*permutations=*/4000, /*seed=*/99);
  CHECK(sampled.mode == ShapleyMode::Permutation);
  CHECK(sampled.permutations == 4000);
  for (const auto& [item, phi] : exact.phi) {
    // Marginals lie in [-1, 1]; 4000 samples put the Monte Carlo standard
    // error well under 0.01.
    CHECK(std::abs(sampled.phi.at(item) - phi) < 0.03);
  }
  // Efficiency holds per permutation, hence for the average as well.
  double sum = 0.0;
  for (const auto& [item, phi] : sampled.phi) sum += phi;
  CHECK(sum == doctest::Approx(sampled.v_full - sampled.v_empty).epsilon(1e-9));
}

TEST_CASE("permutation mode is deterministic in the seed") {
  const std::vector<std::string> items = named_items(6);
  const auto v = [&](const ItemSet& s) { return hashed_value(items, s); };
  const ShapleyResult a = shapley_values(items, v, ShapleyMode::Permutation, 50, 1234);
  const ShapleyResult b = shapley_values(items, v, ShapleyMode::Permutation, 50, 1234);
  CHECK(a.phi == b.phi);
  const ShapleyResult c = shapley_values(items, v, ShapleyMode::Permutation, 50, 1235);
  CHECK(a.phi != c.phi);
}

TEST_CASE("permutation mode memoizes coalition values") {
  const std::vector<std::string> items = named_items(6);
  CountingGame game{[&](const ItemSet& s) { return hashed_value(items, s); }};
  const auto v = [&](const ItemSet& s) { return game(s); };
  shapley_values(items, v, ShapleyMode::Permutation, 500, 7);
  // 500 orderings over 6 items touch at most all 64 subsets; without the
  // memo this would be 500 * 6 + 2 calls.
  CHECK(game.calls <= 64);
  CHECK(game.calls >= 8);
}

TEST_CASE("argument validation covers both modes") {
  const auto v = [](const ItemSet& s) { return static_cast<double>(s.size()); };
  CHECK_THROWS_AS(shapley_values({}, v, ShapleyMode::Exact), ValidationError);
  CHECK_THROWS_AS(shapley_values({"a", "a"}, v, ShapleyMode::Exact), ValidationError);
  CHECK_THROWS_AS(shapley_values({"a"}, CoalitionValueFn{}, ShapleyMode::Exact), ValidationError);
  CHECK_THROWS_AS(shapley_values({"a", "b"}, v, ShapleyMode::Permutation, 0), DomainError);
  CHECK_THROWS_AS(shapley_values(named_items(64), v, ShapleyMode::Permutation, 10), DomainError);
  CHECK_NOTHROW(shapley_values({"a", "b"}, v, ShapleyMode::Permutation, 1));
}

// ---------------------------------------------------------------------------
// Pipeline value function

TEST_CASE("coalition evaluator memoizes by subset") {
  PipelineFixture fx;
  MockWorld world;
  world.planted_mean = make_profile_mean_rule(fx.ds);
  MockBackend backend(world);
  CoalitionEvaluator v(fx.population, {support::q4()}, {{"Q6", 2.3}}, plain_guidance(),
                       Mode::Value, backend);

  const double empty = v({});
  CHECK(v.evaluations() == 1);
  const std::uint64_t calls_after_empty = backend.calls();
  CHECK(v({}) == empty);
  CHECK(v.evaluations() == 1);
  CHECK(backend.calls() == calls_after_empty);  // served from the memo

  const double full = v({"Q45", "Q164"});
  CHECK(v.evaluations() == 2);
  CHECK(v({"Q45"}) != full);  // different subset, different simulation
  CHECK(v.evaluations() == 3);

  // Empty coalition: every persona collapses to the scale midpoint 2.5.
  CHECK(empty == doctest::Approx(std::abs(2.5 - 2.3) / 3.0).epsilon(1e-12));
}

TEST_CASE("an item the mock world ignores is a Shapley dummy") {
  PipelineFixture fx;
  MockWorld world;
  // Planted means react to Q45 only; Q164 is pure noise in the persona.
  world.planted_mean = [](const std::map<std::string, int>& profile, const std::string&,
                          int scale_min, int scale_max) {
    auto it = profile.find("Q45");
    if (it == profile.end()) {
      return 0.5 * (static_cast<double>(scale_min) + static_cast<double>(scale_max));
    }
    const double position = (static_cast<double>(it->second) - 1.0) / 2.0;
    return static_cast<double>(scale_min) +
           position * static_cast<double>(scale_max - scale_min);
  };
  MockBackend backend(world);
  CoalitionEvaluator v(fx.population, {support::q4()}, {{"Q6", 2.1}}, plain_guidance(),
                       Mode::Value, backend);
  const ShapleyResult r =
      shapley_values({"Q45", "Q164"}, [&](const ItemSet& s) { return v(s); }, ShapleyMode::Exact);
  CHECK(std::abs(r.phi.at("Q164")) <= 1e-12);
  CHECK(r.phi.at("Q45") == doctest::Approx(r.v_full - r.v_empty).epsilon(1e-12));
  CHECK(v.evaluations() == 4);  // all four subsets of two items
}

TEST_CASE("pipeline attribution satisfies efficiency with memoized reuse") {
  PipelineFixture fx;
  MockWorld world;
  world.planted_mean = make_profile_mean_rule(fx.ds);
  MockBackend backend(world);
  CoalitionEvaluator v(fx.population, {support::q4(), support::q_scale("Q47", 1, 5)},
                       {{"Q6", 2.4}, {"Q47", 3.3}}, plain_guidance(), Mode::Value, backend);
  const auto fn = [&](const ItemSet& s) { return v(s); };
  const ShapleyResult r = shapley_values({"Q45", "Q164"}, fn, ShapleyMode::Exact);
  double sum = 0.0;
  for (const auto& [item, phi] : r.phi) sum += phi;
  CHECK(sum == doctest::Approx(r.v_full - r.v_empty).epsilon(1e-12));

  // Re-running attribution costs no new simulations.
  const std::uint64_t calls = backend.calls();
  shapley_values({"Q45", "Q164"}, fn, ShapleyMode::Exact);
  CHECK(backend.calls() == calls);
  CHECK(v.evaluations() == 4);
}

TEST_CASE("coalition evaluator validates its inputs") {
  PipelineFixture fx;
  MockWorld world;
  world.planted_mean = make_profile_mean_rule(fx.ds);
  MockBackend backend(world);
  CHECK_THROWS_AS(CoalitionEvaluator(fx.population, {}, {}, plain_guidance(), Mode::Value,
                                     backend),
                  ValidationError);
  CHECK_THROWS_AS(CoalitionEvaluator(fx.population, {support::q4()}, {{"Q47", 2.0}},
                                     plain_guidance(), Mode::Value, backend),
                  ValidationError);
}
