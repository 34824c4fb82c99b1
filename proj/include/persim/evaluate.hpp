#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "persim/dataset.hpp"
#include "persim/distribution.hpp"

namespace persim {

// |pred_mean - human_mean| / (scale_max - scale_min).
double mae(double pred_mean, double human_mean, const QuestionSpec& q);

// Var[d] divided by the scale's maximum attainable variance (the two-point
// mass on the endpoints); lies in [0, 1].
double normalized_variance(const ResponseDistribution& d);
double normalized_variance(const HumanDistribution& h, const QuestionSpec& q);

// 1-Wasserstein distance between distributions on the same consecutive
// integer grid: sum of |CDF differences| times the unit spacing.
double wasserstein1d(const ResponseDistribution& a, const ResponseDistribution& b);

// Two-sided Wilcoxon signed-rank test for paired samples. Zero differences
// are dropped; ties share midranks. Exact null enumeration up to n = 25,
// tie-corrected normal approximation with continuity correction beyond.
// Needs at least 5 non-tied pairs; all-tied input is an error (no evidence
// either way).
double wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y);

// Two-sided Mann-Whitney U test for independent samples, with midranks for
// ties. Exact enumeration when n_a + n_b <= 20, otherwise the tie-corrected
// normal approximation with continuity correction.
double mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

// Benjamini-Hochberg step-up adjustment; output order matches input order,
// values are clipped to 1 and monotone over the sorted inputs.
std::vector<double> benjamini_hochberg(const std::vector<double>& pvals);

// Linear projection of per-question scores onto a 2-D cultural map.
struct MapProjection {
  std::array<double, 2> offsets{0.0, 0.0};
  std::map<std::string, std::array<double, 2>> loadings;  // question -> (x weight, y weight)
};

MapProjection load_map_projection(const std::string& path);

// offsets + sum over profile entries of score * loading. Every profile key
// must have a loading.
std::array<double, 2> project_map(const std::map<std::string, double>& profile,
                                  const MapProjection& proj);

// One evaluation row: a (method, country, question) cell.
struct EvalCell {
  std::string method;
  std::string country;
  std::string question_id;
  double mae = 0.0;
  double pred_norm_variance = 0.0;
  double human_norm_variance = 0.0;
  double wasserstein = 0.0;
};

EvalCell evaluate_cell(const std::string& method, const std::string& country,
                       const QuestionSpec& q, const ResponseDistribution& pred,
                       const HumanDistribution& human);

}  // namespace persim
