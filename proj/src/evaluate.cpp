#include "persim/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "persim/errors.hpp"
#include "persim/util.hpp"

namespace persim {

using nlohmann::json;

double mae(double pred_mean, double human_mean, const QuestionSpec& q) {
  q.validate();
  const auto check = [&](double mean, const char* label) {
    if (mean < static_cast<double>(q.scale_min) || mean > static_cast<double>(q.scale_max)) {
      throw DomainError(std::string("mae: ") + label + " mean " + format_double(mean) +
                        " lies outside the scale of " + q.id);
    }
  };
  check(pred_mean, "predicted");
  check(human_mean, "human");
  return std::abs(pred_mean - human_mean) / static_cast<double>(q.range());
}

double normalized_variance(const ResponseDistribution& d) {
  const double range = static_cast<double>(d.options().back() - d.options().front());
  if (range <= 0.0) throw DomainError("normalized_variance: degenerate scale for " + d.question_id());
  const double max_var = 0.25 * range * range;  // two-point mass on the endpoints
  return response_variance(d) / max_var;
}

double normalized_variance(const HumanDistribution& h, const QuestionSpec& q) {
  return normalized_variance(h.to_distribution(q));
}

double wasserstein1d(const ResponseDistribution& a, const ResponseDistribution& b) {
  if (a.options() != b.options()) {
    throw DomainError("wasserstein1d: mismatched supports (" + a.question_id() + " vs " +
                      b.question_id() + ")");
  }
  double cdf_a = 0.0;
  double cdf_b = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    cdf_a += a.probs()[i];
    cdf_b += b.probs()[i];
    total += std::abs(cdf_a - cdf_b);  // unit spacing between consecutive options
  }
  return total;
}

namespace {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Doubled midranks of |values| (doubling keeps tied ranks integral).
// Returns (doubled ranks aligned with input order, tie-group sizes).
std::pair<std::vector<long>, std::vector<long>> doubled_midranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<long> doubled(n, 0);
  std::vector<long> tie_sizes;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 (0-based) share midrank (i+1 + j)/2; doubled = i+1+j.
    const long dr = static_cast<long>(i) + 1 + static_cast<long>(j);
    for (std::size_t k = i; k < j; ++k) doubled[order[k]] = dr;
    tie_sizes.push_back(static_cast<long>(j - i));
    i = j;
  }
  return {std::move(doubled), std::move(tie_sizes)};
}

double two_sided_from_tails(double p_le, double p_ge) {
  return std::min(1.0, 2.0 * std::min(p_le, p_ge));
}

}  // namespace

double wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw ValidationError("wilcoxon_signed_rank: samples of different length");
  }
  std::vector<double> abs_d;
  std::vector<int> signs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d == 0.0) continue;  // zero differences carry no information
    abs_d.push_back(std::abs(d));
    signs.push_back(d > 0 ? 1 : -1);
  }
  const std::size_t n = abs_d.size();
  if (n == 0) {
    throw ValidationError("wilcoxon_signed_rank: all differences are zero");
  }
  if (n < 5) {
    throw ValidationError("wilcoxon_signed_rank: fewer than 5 non-tied pairs (got " +
                          std::to_string(n) + ")");
  }
  const auto [doubled, tie_sizes] = doubled_midranks(abs_d);
  long w2 = 0;  // doubled signed-rank statistic W+
  for (std::size_t i = 0; i < n; ++i) {
    if (signs[i] > 0) w2 += doubled[i];
  }

  if (n <= 25) {
    // Exact null: every sign vector equally likely. Count subsets by doubled
    // rank sum with a generating-function sweep; counts stay below 2^25 and
    // are exact in doubles.
    const long max2 = std::accumulate(doubled.begin(), doubled.end(), 0L);
    std::vector<double> count(static_cast<std::size_t>(max2) + 1, 0.0);
    count[0] = 1.0;
    long reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      reach += doubled[i];
      for (long s = reach; s >= doubled[i]; --s) {
        count[static_cast<std::size_t>(s)] +=
            count[static_cast<std::size_t>(s - doubled[i])];
      }
    }
    const double total = std::ldexp(1.0, static_cast<int>(n));
    double le = 0.0;
    double ge = 0.0;
    for (long s = 0; s <= max2; ++s) {
      if (s <= w2) le += count[static_cast<std::size_t>(s)];
      if (s >= w2) ge += count[static_cast<std::size_t>(s)];
    }
    return two_sided_from_tails(le / total, ge / total);
  }

  // Tie-corrected normal approximation with continuity correction.
  const double nd = static_cast<double>(n);
  const double w_plus = static_cast<double>(w2) / 2.0;
  const double mu = nd * (nd + 1.0) / 4.0;
  double tie_term = 0.0;
  for (long t : tie_sizes) {
    const double td = static_cast<double>(t);
    tie_term += td * td * td - td;
  }
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) return 1.0;
  const double delta = w_plus - mu;
  const double z = (std::abs(delta) - 0.5) / std::sqrt(var);
  return std::min(1.0, 2.0 * normal_sf(std::max(z, 0.0)));
}

double mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw ValidationError("mann_whitney_u: empty sample");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;
  std::vector<double> pooled;
  pooled.reserve(n);
  pooled.insert(pooled.end(), a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto [doubled, tie_sizes] = doubled_midranks(pooled);
  long r2a = 0;  // doubled rank sum of sample a
  for (std::size_t i = 0; i < na; ++i) r2a += doubled[i];
  const long u2 = r2a - static_cast<long>(na) * (static_cast<long>(na) + 1);  // doubled U_a

  if (n <= 20) {
    // Exact permutation null: all C(n, na) assignments of the pooled ranks
    // (at most C(20, 10) = 184,756 combinations).
    std::vector<std::size_t> idx(na);
    std::iota(idx.begin(), idx.end(), 0);
    double le = 0.0;
    double ge = 0.0;
    double total = 0.0;
    while (true) {
      long r2 = 0;
      for (std::size_t i : idx) r2 += doubled[i];
      const long u2_perm = r2 - static_cast<long>(na) * (static_cast<long>(na) + 1);
      if (u2_perm <= u2) le += 1.0;
      if (u2_perm >= u2) ge += 1.0;
      total += 1.0;
      // next combination in lexicographic order
      std::size_t i = na;
      while (i > 0 && idx[i - 1] == n - na + i - 1) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < na; ++j) idx[j] = idx[j - 1] + 1;
    }
    return two_sided_from_tails(le / total, ge / total);
  }

  const double nad = static_cast<double>(na);
  const double nbd = static_cast<double>(nb);
  const double nd = static_cast<double>(n);
  const double u = static_cast<double>(u2) / 2.0;
  const double mu = nad * nbd / 2.0;
  double tie_term = 0.0;
  for (long t : tie_sizes) {
    const double td = static_cast<double>(t);
    tie_term += td * td * td - td;
  }
  const double var = nad * nbd / 12.0 * ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
  if (var <= 0.0) return 1.0;  // all observations tied
  const double z = (std::abs(u - mu) - 0.5) / std::sqrt(var);
  return std::min(1.0, 2.0 * normal_sf(std::max(z, 0.0)));
}

std::vector<double> benjamini_hochberg(const std::vector<double>& pvals) {
  const std::size_t m = pvals.size();
  for (double p : pvals) {
    if (!(p >= 0.0) || !(p <= 1.0)) {
      throw DomainError("benjamini_hochberg: p-value " + format_double(p) + " outside [0, 1]");
    }
  }
  if (m == 0) return {};
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pvals[i] < pvals[j]; });
  std::vector<double> adjusted(m, 0.0);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    const double raw = pvals[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1);
    running = std::min(running, std::min(raw, 1.0));
    adjusted[order[k]] = running;
  }
  return adjusted;
}

MapProjection load_map_projection(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  MapProjection proj;
  try {
    if (j.contains("offsets")) {
      proj.offsets[0] = j.at("offsets").at(0).get<double>();
      proj.offsets[1] = j.at("offsets").at(1).get<double>();
    }
    for (const auto& [qid, weights] : j.at("loadings").items()) {
      proj.loadings[qid] = {weights.at(0).get<double>(), weights.at(1).get<double>()};
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": malformed projection: " + e.what());
  }
  return proj;
}

std::array<double, 2> project_map(const std::map<std::string, double>& profile,
                                  const MapProjection& proj) {
  std::array<double, 2> point = proj.offsets;
  for (const auto& [qid, score] : profile) {
    auto it = proj.loadings.find(qid);
    if (it == proj.loadings.end()) {
      throw ValidationError("project_map: no loading for question " + qid);
    }
    point[0] += score * it->second[0];
    point[1] += score * it->second[1];
  }
  return point;
}

EvalCell evaluate_cell(const std::string& method, const std::string& country,
                       const QuestionSpec& q, const ResponseDistribution& pred,
                       const HumanDistribution& human) {
  EvalCell cell;
  cell.method = method;
  cell.country = country;
  cell.question_id = q.id;
  cell.mae = mae(expected_response(pred), human.mean(), q);
  cell.pred_norm_variance = normalized_variance(pred);
  cell.human_norm_variance = normalized_variance(human, q);
  cell.wasserstein = wasserstein1d(pred, human.to_distribution(q));
  return cell;
}

}  // namespace persim
