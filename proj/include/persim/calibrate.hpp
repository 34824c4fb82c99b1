#pragma once

#include <map>
#include <string>
#include <vector>

#include "persim/distribution.hpp"

namespace persim {

// p_k^(1/T), renormalized. T in (0, inf); T > 1 flattens, T < 1 sharpens,
// zero entries stay zero.
ResponseDistribution temperature_scale(const ResponseDistribution& d, double T);

struct TiltResult {
  ResponseDistribution dist;
  double beta = 0.0;
};

// Mean-preserving spread: q_k ∝ p_k^(1/T) * exp(beta * r_k) with beta chosen
// by bisection so that E[q] = E[p] (residual tolerance 1e-12).
TiltResult tilt_mean_preserving(const ResponseDistribution& d, double T);

// One (prediction, human reference) pair used for temperature fitting.
struct CalibrationCase {
  std::string question_id;  // fold label; several countries may share it
  ResponseDistribution pred;
  ResponseDistribution human;
};

enum class LooCriterion { Wasserstein, VarianceGap };
LooCriterion parse_loo_criterion(const std::string& name);

struct CalibrationFold {
  std::string held_out_question;
  double chosen_T = 1.0;
  double train_criterion = 0.0;  // mean criterion of chosen_T on the training folds
};

struct CalibrationFit {
  std::map<std::string, double> per_question_T;
  std::string criterion;
  std::vector<CalibrationFold> folds;
};

// Leave-one-question-out temperature selection over a finite grid. For each
// held-out question the temperature minimizing the mean criterion on all
// other questions' cases is chosen; criterion ties break toward the grid
// value closest to T = 1. Needs at least two distinct questions.
CalibrationFit fit_temperature_loo(const std::vector<CalibrationCase>& cases,
                                   const std::vector<double>& grid, LooCriterion criterion);

// 21 logarithmically spaced temperatures spanning [0.25, 16].
std::vector<double> default_temperature_grid();

struct TemperatureSweepRow {
  double T = 1.0;
  std::string method;  // "scale" or "tilt"
  double mae = 0.0;
  double wasserstein = 0.0;
};

// Mean normalized mean-error and Wasserstein distance across cases for both
// calibration methods at each temperature.
std::vector<TemperatureSweepRow> temperature_sweep(const std::vector<CalibrationCase>& cases,
                                                   const std::vector<double>& temperatures);

}  // namespace persim
