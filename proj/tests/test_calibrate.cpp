// Calibration: temperature scaling, mean-preserving exponential tilting, and
// leave-one-question-out temperature selection.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "persim/calibrate.hpp"
#include "persim/errors.hpp"
#include "persim/evaluate.hpp"

#include "support.hpp"

using namespace persim;

namespace {

// ---------------------------------------------------------------------------
// Oracles, written and frozen before running the implementation.

// Reference scaling: naive powers, no log-space tricks.
std::vector<double> oracle_scale(const std::vector<double>& p, double T) {
  std::vector<double> w(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (w[i] = std::pow(p[i], 1.0 / T));
  for (double& x : w) x /= s;
  return w;
}

double oracle_mean(const std::vector<double>& p, const std::vector<int>& opts) {
  double m = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) m += p[i] * opts[i];
  return m;
}

// Reference tilt: fixed-width bisection on beta over [-60, 60].
std::pair<double, std::vector<double>> oracle_tilt(const std::vector<double>& p,
                                                   const std::vector<int>& opts, double T) {
  const double target = oracle_mean(p, opts);
  const auto q_of = [&](double beta) {
    std::vector<double> w(p.size(), 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] > 0.0) s += (w[i] = std::pow(p[i], 1.0 / T) * std::exp(beta * opts[i]));
    }
    for (double& x : w) x /= s;
    return w;
  };
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    (oracle_mean(q_of(mid), opts) < target ? lo : hi) = mid;
  }
  const double beta = 0.5 * (lo + hi);
  return {beta, q_of(beta)};
}

// Frozen outputs of the oracles above for two pinned cases.
//   case A: p = (0.7, 0.2, 0.1) on 1..3 at T = 2
const double kBetaA = -0.5271938211750045;
const std::vector<double> kTiltA = {0.6909934606810223, 0.21801307863795502,
                                    0.09099346068102256};
const std::vector<double> kScaleA = {0.5228793830078697, 0.27949078654617093,
                                     0.19762983044595936};
//   case B: p = (0.1, 0.2, 0.3, 0.4) on 1..4 at T = 4
const double kBetaB = 0.3140307935268464;
const std::vector<double> kTiltB = {0.11465028576457101, 0.18664419249467887, 0.2827607577169295,
                                    0.41594476402382063};

ResponseDistribution d3(const std::vector<double>& p) { return support::dist("Q45", 1, p); }
ResponseDistribution d4(const std::vector<double>& p) { return support::dist("Q6", 1, p); }

// Random strictly positive distribution over `k` options starting at 1.
ResponseDistribution random_dist(std::mt19937_64& rng, std::size_t k, const std::string& id) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> p(k);
  double s = 0.0;
  for (double& x : p) s += (x = u(rng));
  for (double& x : p) x /= s;
  return support::dist(id, 1, p);
}

}  // namespace

// ---------------------------------------------------------------------------
// Temperature scaling

TEST_CASE("scaling at T = 1 is the identity") {
  const ResponseDistribution d = d4({0.1, 0.2, 0.3, 0.4});
  const ResponseDistribution s = temperature_scale(d, 1.0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(s.probs()[i] == doctest::Approx(d.probs()[i]).epsilon(1e-14));
  }
}

TEST_CASE("scaling matches the frozen hand-computed case") {
  const ResponseDistribution s = temperature_scale(d3({0.7, 0.2, 0.1}), 2.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(s.probs()[i] == doctest::Approx(kScaleA[i]).epsilon(1e-12));
  }
}

TEST_CASE("scaling matches the oracle across random cases") {
  std::mt19937_64 rng(20240811);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng() % 9;
    const ResponseDistribution d = random_dist(rng, k, "Qx");
    const double T = std::exp(std::uniform_real_distribution<double>(-2.3, 4.6)(rng));
    const ResponseDistribution s = temperature_scale(d, T);
    const std::vector<double> want = oracle_scale(d.probs(), T);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(s.probs()[i] == doctest::Approx(want[i]).epsilon(1e-11));
    }
  }
}

TEST_CASE("large T flattens toward uniform, small T sharpens toward the mode") {
  const ResponseDistribution d = d4({0.1, 0.2, 0.3, 0.4});
  const ResponseDistribution flat = temperature_scale(d, 1e6);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(flat.probs()[i] == doctest::Approx(0.25).epsilon(1e-4));
  }
  CHECK(expected_response(flat) == doctest::Approx(2.5).epsilon(1e-4));

  const ResponseDistribution sharp = temperature_scale(d, 1e-3);
  CHECK(sharp.prob_of(4) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("scaling preserves zero support exactly") {
  const ResponseDistribution d = d4({0.5, 0.0, 0.25, 0.25});
  for (double T : {0.2, 1.0, 3.0, 50.0}) {
    const ResponseDistribution s = temperature_scale(d, T);
    CHECK(s.probs()[1] == 0.0);
    CHECK(s.prob_of(2) == 0.0);
  }
}

TEST_CASE("scaling rejects non-positive or non-finite temperatures") {
  const ResponseDistribution d = d3({0.3, 0.4, 0.3});
  CHECK_THROWS_AS(temperature_scale(d, 0.0), DomainError);
  CHECK_THROWS_AS(temperature_scale(d, -2.0), DomainError);
  CHECK_THROWS_AS(temperature_scale(d, std::numeric_limits<double>::infinity()), DomainError);
}

TEST_CASE("on a peaked family, variance grows with T") {
  // Unimodal softmax-shaped inputs: raising T must spread mass outward.
  std::vector<double> logits{-2.4, -0.4, -1.6, -3.6};  // peak at option 2 (mu ~ 2.2)
  std::vector<double> p(4);
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i) s += (p[i] = std::exp(logits[i]));
  for (double& x : p) x /= s;
  const ResponseDistribution d = d4(p);
  double prev = -1.0;
  for (double T : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    const double v = response_variance(temperature_scale(d, T));
    CHECK(v > prev);
    prev = v;
  }
}

// ---------------------------------------------------------------------------
// Mean-preserving tilt

TEST_CASE("tilt at T = 1 is an exact no-op with beta = 0") {
  const ResponseDistribution d = d4({0.1, 0.2, 0.3, 0.4});
  const TiltResult r = tilt_mean_preserving(d, 1.0);
  CHECK(r.beta == 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(r.dist.probs()[i] - d.probs()[i]) <= 1e-12);
  }
}

TEST_CASE("tilt matches the frozen oracle cases") {
  const TiltResult a = tilt_mean_preserving(d3({0.7, 0.2, 0.1}), 2.0);
  CHECK(a.beta == doctest::Approx(kBetaA).epsilon(1e-9));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.dist.probs()[i] == doctest::Approx(kTiltA[i]).epsilon(1e-9));
  }
  const TiltResult b = tilt_mean_preserving(d4({0.1, 0.2, 0.3, 0.4}), 4.0);
  CHECK(b.beta == doctest::Approx(kBetaB).epsilon(1e-9));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(b.dist.probs()[i] == doctest::Approx(kTiltB[i]).epsilon(1e-9));
  }
}

TEST_CASE("tilt preserves the mean across random cases and extreme T") {
  std::mt19937_64 rng(7011);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + rng() % 9;
    const ResponseDistribution d = random_dist(rng, k, "Qx");
    // Log-uniform T over [0.1, 100], the full supported range.
    const double T = std::exp(std::uniform_real_distribution<double>(std::log(0.1),
                                                                     std::log(100.0))(rng));
    const TiltResult r = tilt_mean_preserving(d, T);
    CHECK(std::abs(expected_response(r.dist) - expected_response(d)) <= 1e-9);
    double total = 0.0;
    for (double p : r.dist.probs()) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("tilt output has the exponential-family form it claims") {
  // q_k must be proportional to p_k^(1/T) * exp(beta * r_k); the ratio is
  // constant on the support. This is the defining KKT condition of the
  // KL-minimal mean-preserving adjustment.
  std::mt19937_64 rng(9942);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 3 + rng() % 6;
    const ResponseDistribution d = random_dist(rng, k, "Qx");
    const double T = std::exp(std::uniform_real_distribution<double>(-1.6, 2.8)(rng));
    const TiltResult r = tilt_mean_preserving(d, T);
    double ref = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double base = std::pow(d.probs()[i], 1.0 / T) *
                          std::exp(r.beta * d.options()[i]);
      const double ratio = r.dist.probs()[i] / base;
      if (i == 0) {
        ref = ratio;
      } else {
        CHECK(ratio == doctest::Approx(ref).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("tilting a uniform distribution is a fixed point") {
  const ResponseDistribution u = d4({0.25, 0.25, 0.25, 0.25});
  for (double T : {0.3, 2.0, 9.0}) {
    const TiltResult r = tilt_mean_preserving(u, T);
    CHECK(std::abs(r.beta) <= 1e-9);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(r.dist.probs()[i] == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
}

TEST_CASE("point masses pass through the tilt untouched") {
  const ResponseDistribution pm = d4({0.0, 0.0, 1.0, 0.0});
  for (double T : {0.2, 1.0, 40.0}) {
    const TiltResult r = tilt_mean_preserving(pm, T);
    CHECK(r.beta == 0.0);
    CHECK(r.dist.probs() == pm.probs());
  }
}

TEST_CASE("tilt preserves zero support exactly") {
  const ResponseDistribution d = d4({0.6, 0.0, 0.1, 0.3});
  const TiltResult r = tilt_mean_preserving(d, 3.0);
  CHECK(r.dist.prob_of(2) == 0.0);
  CHECK(std::abs(expected_response(r.dist) - expected_response(d)) <= 1e-9);
}

TEST_CASE("tilt rejects bad temperatures") {
  const ResponseDistribution d = d3({0.3, 0.4, 0.3});
  CHECK_THROWS_AS(tilt_mean_preserving(d, 0.0), DomainError);
  CHECK_THROWS_AS(tilt_mean_preserving(d, -1.0), DomainError);
}

TEST_CASE("tilted distribution is KL-closest to the scaled one on a grid") {
  // Among grid distributions with (approximately) the right mean, none may
  // beat the tilt's KL divergence to the plain temperature-scaled base by
  // more than the grid spacing allows.
  const double step = 0.01;
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 5; ++trial) {
    const ResponseDistribution d = random_dist(rng, 3, "Q45");
    const double T = (trial % 2 == 0) ? 3.0 : 0.5;
    const ResponseDistribution base = temperature_scale(d, T);
    const TiltResult r = tilt_mean_preserving(d, T);
    const double target = expected_response(d);

    const auto kl = [&](const std::vector<double>& q) {
      double s = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        if (q[i] > 0.0) s += q[i] * std::log(q[i] / base.probs()[i]);
      }
      return s;
    };
    const double kl_tilt = kl(r.dist.probs());

    double best_grid = std::numeric_limits<double>::infinity();
    for (double a = 0.0; a <= 1.0 + 1e-12; a += step) {
      for (double b = 0.0; a + b <= 1.0 + 1e-12; b += step) {
        const std::vector<double> q{a, b, 1.0 - a - b};
        const double m = q[0] * 1 + q[1] * 2 + q[2] * 3;
        if (std::abs(m - target) > step) continue;  // feasibility up to grid resolution
        best_grid = std::min(best_grid, kl(q));
      }
    }
    REQUIRE(std::isfinite(best_grid));
    // The grid minimum can undercut slightly by violating the constraint
    // within its resolution; allow that much slack and no more.
    const double slack = step * (1.0 + std::abs(r.beta)) * 2.0;
    CHECK(kl_tilt <= best_grid + slack);
  }
}

// ---------------------------------------------------------------------------
// LOO temperature selection

TEST_CASE("default grid spans 0.25..16 in 21 log-spaced steps") {
  const std::vector<double> grid = default_temperature_grid();
  REQUIRE(grid.size() == 21);
  CHECK(grid.front() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(grid.back() == doctest::Approx(16.0).epsilon(1e-12));
  const double step = std::log(grid[1]) - std::log(grid[0]);
  CHECK(step == doctest::Approx(std::log(64.0) / 20.0).epsilon(1e-12));
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(std::log(grid[i]) - std::log(grid[i - 1]) == doctest::Approx(step).epsilon(1e-9));
  }
}

TEST_CASE("LOO recovers a planted temperature") {
  // Humans are the predictions tilted at T* = 3; every fold must land on the
  // grid point nearest 3 (within one log step).
  std::mt19937_64 rng(404);
  std::vector<CalibrationCase> cases;
  for (int qi = 0; qi < 6; ++qi) {
    const std::string id = "Q" + std::to_string(qi + 1);
    for (int c = 0; c < 3; ++c) {
      CalibrationCase cc;
      cc.question_id = id;
      cc.pred = random_dist(rng, 5, id);
      cc.human = tilt_mean_preserving(cc.pred, 3.0).dist;
      cases.push_back(std::move(cc));
    }
  }
  const CalibrationFit fit =
      fit_temperature_loo(cases, default_temperature_grid(), LooCriterion::Wasserstein);
  REQUIRE(fit.per_question_T.size() == 6);
  const double log_step = std::log(64.0) / 20.0;
  for (const auto& [q, T] : fit.per_question_T) {
    CHECK(std::abs(std::log(T) - std::log(3.0)) <= log_step + 1e-9);
  }
  CHECK(fit.criterion == "wasserstein");
  REQUIRE(fit.folds.size() == 6);
  for (const CalibrationFold& fold : fit.folds) {
    CHECK(fit.per_question_T.at(fold.held_out_question) == fold.chosen_T);
    CHECK(fold.train_criterion >= 0.0);
  }
}

TEST_CASE("LOO with matching humans picks T = 1 when available") {
  std::mt19937_64 rng(555);
  std::vector<CalibrationCase> cases;
  for (int qi = 0; qi < 4; ++qi) {
    CalibrationCase cc;
    cc.question_id = "Q" + std::to_string(qi + 1);
    cc.pred = random_dist(rng, 4, cc.question_id);
    cc.human = cc.pred;
    cases.push_back(std::move(cc));
  }
  const CalibrationFit fit =
      fit_temperature_loo(cases, {0.5, 1.0, 2.0}, LooCriterion::Wasserstein);
  for (const auto& [q, T] : fit.per_question_T) CHECK(T == 1.0);
}

TEST_CASE("criterion ties break toward the temperature closest to 1") {
  // Uniform predictions are fixed points of both adjustments, so every grid
  // temperature scores identically and the tie-break decides.
  std::vector<CalibrationCase> cases;
  for (int qi = 0; qi < 3; ++qi) {
    CalibrationCase cc;
    cc.question_id = "Q" + std::to_string(qi + 1);
    cc.pred = d4({0.25, 0.25, 0.25, 0.25});
    cc.human = d4({0.1, 0.4, 0.4, 0.1});
    cases.push_back(std::move(cc));
  }
  const CalibrationFit fit =
      fit_temperature_loo(cases, {0.25, 0.5, 3.0, 8.0}, LooCriterion::Wasserstein);
  // |log 0.5| < |log 3| < |log 0.25| < |log 8|.
  for (const auto& [q, T] : fit.per_question_T) CHECK(T == 0.5);
}

TEST_CASE("variance-gap criterion also recovers a planted temperature") {
  std::mt19937_64 rng(8181);
  std::vector<CalibrationCase> cases;
  for (int qi = 0; qi < 5; ++qi) {
    CalibrationCase cc;
    cc.question_id = "Q" + std::to_string(qi + 1);
    cc.pred = random_dist(rng, 6, cc.question_id);
    cc.human = tilt_mean_preserving(cc.pred, 3.0).dist;
    cases.push_back(std::move(cc));
  }
  const CalibrationFit fit =
      fit_temperature_loo(cases, default_temperature_grid(), LooCriterion::VarianceGap);
  const double log_step = std::log(64.0) / 20.0;
  for (const auto& [q, T] : fit.per_question_T) {
    CHECK(std::abs(std::log(T) - std::log(3.0)) <= log_step + 1e-9);
  }
  CHECK(fit.criterion == "variance_gap");
}

TEST_CASE("a singleton grid forces its only temperature") {
  std::mt19937_64 rng(12);
  std::vector<CalibrationCase> cases;
  for (int qi = 0; qi < 3; ++qi) {
    CalibrationCase cc;
    cc.question_id = "Q" + std::to_string(qi + 1);
    cc.pred = random_dist(rng, 4, cc.question_id);
    cc.human = random_dist(rng, 4, cc.question_id);
    cases.push_back(std::move(cc));
  }
  const CalibrationFit fit = fit_temperature_loo(cases, {2.5}, LooCriterion::Wasserstein);
  for (const auto& [q, T] : fit.per_question_T) CHECK(T == 2.5);
}

TEST_CASE("LOO validation: grid and fold requirements") {
  std::mt19937_64 rng(3);
  std::vector<CalibrationCase> one;
  CalibrationCase cc;
  cc.question_id = "Q1";
  cc.pred = random_dist(rng, 4, "Q1");
  cc.human = cc.pred;
  one.push_back(cc);
  CHECK_THROWS_AS(fit_temperature_loo(one, {1.0, 2.0}, LooCriterion::Wasserstein),
                  ValidationError);
  CalibrationCase cc2 = cc;
  cc2.question_id = "Q2";
  one.push_back(cc2);
  CHECK_THROWS_AS(fit_temperature_loo(one, {}, LooCriterion::Wasserstein), DomainError);
  CHECK_THROWS_AS(fit_temperature_loo(one, {1.0, -2.0}, LooCriterion::Wasserstein), DomainError);
  CHECK_NOTHROW(fit_temperature_loo(one, {1.0, 2.0}, LooCriterion::Wasserstein));
}

TEST_CASE("criterion names parse and reject unknowns") {
  CHECK(parse_loo_criterion("wasserstein") == LooCriterion::Wasserstein);
  CHECK(parse_loo_criterion("variance_gap") == LooCriterion::VarianceGap);
  CHECK_THROWS_AS(parse_loo_criterion("mae"), ConfigError);
}

// ---------------------------------------------------------------------------
// Temperature sweep

TEST_CASE("tilted mean error is constant across the sweep; scaled is not") {
  std::mt19937_64 rng(60);
  std::vector<CalibrationCase> cases;
  for (int qi = 0; qi < 4; ++qi) {
    CalibrationCase cc;
    cc.question_id = "Q" + std::to_string(qi + 1);
    // Off-center predictions so plain scaling moves the mean.
    std::vector<double> p{0.55, 0.25, 0.12, 0.08};
    std::rotate(p.begin(), p.begin() + qi % 2, p.end());
    cc.pred = d4(p);
    cc.human = random_dist(rng, 4, cc.question_id);
    cases.push_back(std::move(cc));
  }
  const std::vector<double> temps{0.25, 0.7, 1.0, 2.3, 16.0};
  const std::vector<TemperatureSweepRow> rows = temperature_sweep(cases, temps);
  REQUIRE(rows.size() == temps.size() * 2);

  double tilt_ref = -1.0;
  double scale_spread_lo = 1e300, scale_spread_hi = -1e300;
  for (const TemperatureSweepRow& row : rows) {
    CHECK((row.method == "scale" || row.method == "tilt"));
    if (row.method == "tilt") {
      if (tilt_ref < 0) tilt_ref = row.mae;
      CHECK(std::abs(row.mae - tilt_ref) <= 1e-9);
    } else {
      scale_spread_lo = std::min(scale_spread_lo, row.mae);
      scale_spread_hi = std::max(scale_spread_hi, row.mae);
    }
  }
  CHECK(scale_spread_hi - scale_spread_lo > 1e-3);
}

TEST_CASE("at huge T plain scaling predicts the scale midpoint") {
  std::vector<CalibrationCase> cases;
  CalibrationCase cc;
  cc.question_id = "Q1";
  cc.pred = d4({0.55, 0.25, 0.12, 0.08});
  cc.human = d4({0.25, 0.25, 0.25, 0.25});  // human mean = midpoint 2.5
  cases.push_back(cc);
  CalibrationCase cc2;
  cc2.question_id = "Q2";
  cc2.pred = d4({0.05, 0.1, 0.25, 0.6});
  cc2.human = d4({0.4, 0.3, 0.2, 0.1});  // human mean = 2.0
  cases.push_back(cc2);

  const std::vector<TemperatureSweepRow> rows = temperature_sweep(cases, {1e6});
  for (const TemperatureSweepRow& row : rows) {
    if (row.method != "scale") continue;
    // Expected normalized errors: |2.5-2.5|/3 = 0 and |2.5-2.0|/3 = 1/6.
    CHECK(row.mae == doctest::Approx((0.0 + 0.5 / 3.0) / 2.0).epsilon(1e-4));
  }
}

TEST_CASE("sweep validates inputs") {
  CHECK_THROWS_AS(temperature_sweep({}, {1.0}), ValidationError);
  std::vector<CalibrationCase> cases(1);
  cases[0].question_id = "Q1";
  cases[0].pred = d4({0.25, 0.25, 0.25, 0.25});
  cases[0].human = cases[0].pred;
  CHECK_THROWS_AS(temperature_sweep(cases, {}), DomainError);
}
