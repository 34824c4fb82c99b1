#include "persim/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "persim/errors.hpp"
#include "persim/evaluate.hpp"
#include "persim/util.hpp"

namespace persim {

namespace {

// Distribution with logits log(p_k)/T + beta*r_k on the support of d; zero
// probabilities stay exactly zero.
ResponseDistribution scaled_tilted(const ResponseDistribution& d, double T, double beta) {
  std::vector<std::size_t> support;
  std::vector<double> logits;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.probs()[i] > 0.0) {
      support.push_back(i);
      logits.push_back(std::log(d.probs()[i]) / T +
                       beta * static_cast<double>(d.options()[i]));
    }
  }
  const std::vector<double> on_support = softmax(logits);
  std::vector<double> probs(d.size(), 0.0);
  for (std::size_t j = 0; j < support.size(); ++j) probs[support[j]] = on_support[j];
  return ResponseDistribution::make(d.question_id(), d.options(), std::move(probs));
}

}  // namespace

ResponseDistribution temperature_scale(const ResponseDistribution& d, double T) {
  if (!(T > 0.0) || !std::isfinite(T)) {
    throw DomainError("temperature_scale: T must be positive and finite, got " + format_double(T));
  }
  return scaled_tilted(d, T, 0.0);
}

TiltResult tilt_mean_preserving(const ResponseDistribution& d, double T) {
  if (!(T > 0.0) || !std::isfinite(T)) {
    throw DomainError("tilt_mean_preserving: T must be positive and finite, got " +
                      format_double(T));
  }
  const double target = expected_response(d);
  std::size_t support = 0;
  for (double p : d.probs()) {
    if (p > 0.0) ++support;
  }
  if (support == 1) return {d, 0.0};  // point mass: nothing to spread

  constexpr double kTol = 1e-12;
  const auto residual = [&](double beta) {
    return expected_response(scaled_tilted(d, T, beta)) - target;
  };

  // residual is strictly increasing in beta. Probing 0 first makes T = 1 an
  // exact no-op instead of a numerically recovered one.
  double f0 = residual(0.0);
  if (std::abs(f0) <= kTol) return {scaled_tilted(d, T, 0.0), 0.0};

  double lo, hi, flo, fhi;
  if (f0 > 0.0) {
    hi = 0.0;
    fhi = f0;
    lo = -1.0;
    flo = residual(lo);
    for (int i = 0; flo > 0.0; ++i) {
      if (i >= 200) throw InfeasibleError("tilt_mean_preserving: cannot bracket beta below");
      hi = lo;
      fhi = flo;
      lo *= 2.0;
      flo = residual(lo);
    }
  } else {
    lo = 0.0;
    flo = f0;
    hi = 1.0;
    fhi = residual(hi);
    for (int i = 0; fhi < 0.0; ++i) {
      if (i >= 200) throw InfeasibleError("tilt_mean_preserving: cannot bracket beta above");
      lo = hi;
      flo = fhi;
      hi *= 2.0;
      fhi = residual(hi);
    }
  }
  (void)flo;
  (void)fhi;

  double beta = 0.5 * (lo + hi);
  for (int i = 0; i < 200; ++i) {
    beta = 0.5 * (lo + hi);
    const double f = residual(beta);
    if (std::abs(f) <= kTol) break;
    if (f > 0.0) {
      hi = beta;
    } else {
      lo = beta;
    }
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(lo) + std::abs(hi))) break;
  }
  ResponseDistribution q = scaled_tilted(d, T, beta);
  if (std::abs(expected_response(q) - target) > 1e-9) {
    throw InfeasibleError("tilt_mean_preserving: residual " +
                          format_double(expected_response(q) - target) +
                          " exceeds tolerance at T = " + format_double(T));
  }
  return {std::move(q), beta};
}

LooCriterion parse_loo_criterion(const std::string& name) {
  if (name == "wasserstein") return LooCriterion::Wasserstein;
  if (name == "variance_gap") return LooCriterion::VarianceGap;
  throw ConfigError("unknown calibration criterion: \"" + name +
                    "\" (expected wasserstein or variance_gap)");
}

namespace {

double case_criterion(const CalibrationCase& c, double T, LooCriterion criterion) {
  const ResponseDistribution tilted = tilt_mean_preserving(c.pred, T).dist;
  switch (criterion) {
    case LooCriterion::Wasserstein:
      return wasserstein1d(tilted, c.human);
    case LooCriterion::VarianceGap:
      return std::abs(normalized_variance(tilted) - normalized_variance(c.human));
  }
  throw DomainError("invalid LooCriterion");
}

}  // namespace

CalibrationFit fit_temperature_loo(const std::vector<CalibrationCase>& cases,
                                   const std::vector<double>& grid, LooCriterion criterion) {
  if (grid.empty()) throw DomainError("fit_temperature_loo: empty temperature grid");
  for (double T : grid) {
    if (!(T > 0.0) || !std::isfinite(T)) {
      throw DomainError("fit_temperature_loo: non-positive grid temperature " + format_double(T));
    }
  }
  std::set<std::string> questions;
  for (const CalibrationCase& c : cases) questions.insert(c.question_id);
  if (questions.size() < 2) {
    throw ValidationError("fit_temperature_loo: need at least two distinct questions, got " +
                          std::to_string(questions.size()));
  }

  // criterion_by_T[t][i]: criterion of grid[t] on cases[i]; each (T, case)
  // pair is evaluated once and reused across folds.
  std::vector<std::vector<double>> criterion_by_T(grid.size(),
                                                  std::vector<double>(cases.size(), 0.0));
  for (std::size_t t = 0; t < grid.size(); ++t) {
    for (std::size_t i = 0; i < cases.size(); ++i) {
      criterion_by_T[t][i] = case_criterion(cases[i], grid[t], criterion);
    }
  }

  CalibrationFit fit;
  fit.criterion = criterion == LooCriterion::Wasserstein ? "wasserstein" : "variance_gap";
  for (const std::string& held_out : questions) {
    std::vector<double> train_crit(grid.size(), 0.0);
    for (std::size_t t = 0; t < grid.size(); ++t) {
      double total = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < cases.size(); ++i) {
        if (cases[i].question_id == held_out) continue;
        total += criterion_by_T[t][i];
        ++n;
      }
      train_crit[t] = total / static_cast<double>(n);
    }
    const double min_crit = *std::min_element(train_crit.begin(), train_crit.end());
    // Near-ties (within 1e-12) break toward the temperature closest to 1.
    std::size_t best = grid.size();
    for (std::size_t t = 0; t < grid.size(); ++t) {
      if (train_crit[t] > min_crit + 1e-12) continue;
      if (best == grid.size() ||
          std::abs(std::log(grid[t])) < std::abs(std::log(grid[best]))) {
        best = t;
      }
    }
    fit.per_question_T[held_out] = grid[best];
    fit.folds.push_back({held_out, grid[best], train_crit[best]});
  }
  return fit;
}

std::vector<double> default_temperature_grid() {
  std::vector<double> grid;
  grid.reserve(21);
  const double lo = std::log(0.25);
  const double hi = std::log(16.0);
  for (int j = 0; j <= 20; ++j) {
    grid.push_back(std::exp(lo + (hi - lo) * static_cast<double>(j) / 20.0));
  }
  return grid;
}

std::vector<TemperatureSweepRow> temperature_sweep(const std::vector<CalibrationCase>& cases,
                                                   const std::vector<double>& temperatures) {
  if (cases.empty()) throw ValidationError("temperature_sweep: no cases");
  if (temperatures.empty()) throw DomainError("temperature_sweep: no temperatures");
  std::vector<TemperatureSweepRow> rows;
  rows.reserve(temperatures.size() * 2);
  for (double T : temperatures) {
    for (const std::string method : {"scale", "tilt"}) {
      double mae_total = 0.0;
      double w_total = 0.0;
      for (const CalibrationCase& c : cases) {
        const ResponseDistribution adjusted = method == std::string("scale")
                                                  ? temperature_scale(c.pred, T)
                                                  : tilt_mean_preserving(c.pred, T).dist;
        const double range = static_cast<double>(c.pred.options().back() -
                                                 c.pred.options().front());
        mae_total += std::abs(expected_response(adjusted) - expected_response(c.human)) / range;
        w_total += wasserstein1d(adjusted, c.human);
      }
      rows.push_back({T, method, mae_total / static_cast<double>(cases.size()),
                      w_total / static_cast<double>(cases.size())});
    }
  }
  return rows;
}

}  // namespace persim
