#include "persim/simulate.hpp"

#include <cmath>

#include "persim/errors.hpp"
#include "persim/evaluate.hpp"
#include "persim/util.hpp"

namespace persim {

ResponseDistribution ResponseDistribution::make(std::string question_id, std::vector<int> options,
                                                std::vector<double> probs) {
  if (options.empty()) throw DomainError("distribution with no options");
  if (options.size() != probs.size()) {
    throw DomainError("distribution for " + question_id + ": " + std::to_string(options.size()) +
                      " options vs " + std::to_string(probs.size()) + " probabilities");
  }
  for (std::size_t i = 1; i < options.size(); ++i) {
    if (options[i] != options[i - 1] + 1) {
      throw DomainError("distribution for " + question_id + ": options must be consecutive integers");
    }
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw DomainError("distribution for " + question_id + ": negative or non-finite probability");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("distribution for " + question_id + ": probabilities sum to " +
                      format_double(total));
  }
  ResponseDistribution d;
  d.question_id_ = std::move(question_id);
  d.options_ = std::move(options);
  d.probs_ = std::move(probs);
  return d;
}

double ResponseDistribution::prob_of(int option) const {
  if (option < options_.front() || option > options_.back()) return 0.0;
  return probs_[static_cast<std::size_t>(option - options_.front())];
}

double expected_response(const ResponseDistribution& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    s += static_cast<double>(d.options()[i]) * d.probs()[i];
  }
  return s;
}

double response_variance(const ResponseDistribution& d) {
  const double mu = expected_response(d);
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double delta = static_cast<double>(d.options()[i]) - mu;
    s += delta * delta * d.probs()[i];
  }
  return s;
}

ResponseDistribution aggregate_distributions(const std::string& question_id,
                                             const std::vector<ResponseDistribution>& dists) {
  if (dists.empty()) throw DomainError("aggregate of zero distributions for " + question_id);
  const std::vector<int>& options = dists.front().options();
  std::vector<double> mean(options.size(), 0.0);
  for (const ResponseDistribution& d : dists) {
    if (d.options() != options) {
      throw DomainError("aggregate for " + question_id + ": mismatched option grids");
    }
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += d.probs()[i];
  }
  for (double& p : mean) p /= static_cast<double>(dists.size());
  return ResponseDistribution::make(question_id, options, std::move(mean));
}

PopulationPrediction simulate_population(const Population& pop, const QuestionSpec& q,
                                         const GuidanceTemplate& guidance, Mode mode,
                                         Backend& backend, int workers) {
  if (pop.personas.empty()) {
    throw ValidationError("cannot simulate an empty population for " + q.id);
  }
  PopulationPrediction out;
  out.question_id = q.id;
  out.country = pop.country;
  out.per_persona.resize(pop.personas.size(),
                         ResponseDistribution::make(q.id, q.options(),
                                                    std::vector<double>(q.options().size(),
                                                                        1.0 / q.options().size())));
  const std::optional<std::string> country =
      pop.country.empty() ? std::nullopt : std::optional<std::string>(pop.country);
  parallel_for(pop.personas.size(), workers, [&](std::size_t i) {
    try {
      const PromptBundle bundle = render_prompt(pop.personas[i], q, guidance, mode, country);
      const ScoreRequest req = make_request(bundle, backend.model_id());
      const ScoreResult res = backend.score(req);
      out.per_persona[i] = to_distribution(req, res, q);
    } catch (const Error& e) {
      throw Error("persona " + std::to_string(i) + " (question " + q.id + "): " + e.what());
    }
  });
  out.aggregate = aggregate_distributions(q.id, out.per_persona);
  out.expected_response = expected_response(out.aggregate);
  return out;
}

std::vector<SampleSizeRow> sweep_sample_size(
    const SurveyDataset& ds, const std::string& country, const std::vector<std::string>& items,
    const DescriptorCatalog& catalog, const QuestionSpec& q, const GuidanceTemplate& guidance,
    Mode mode, bool include_nationality, Backend& backend, const std::vector<std::size_t>& ns,
    int repeats, std::uint64_t base_seed, double human_mean, int workers) {
  if (ns.empty()) throw DomainError("sweep_sample_size: empty sample-size list");
  if (repeats < 1) throw DomainError("sweep_sample_size: repeats must be positive");
  std::vector<SampleSizeRow> rows;
  rows.reserve(ns.size() * static_cast<std::size_t>(repeats));
  for (std::size_t ni = 0; ni < ns.size(); ++ni) {
    if (ns[ni] == 0) throw DomainError("sweep_sample_size: sample size 0");
    for (int rep = 0; rep < repeats; ++rep) {
      // Seeds decorrelate across both axes so repeats at different n never
      // share a resampled population.
      const std::uint64_t seed =
          base_seed + 1000003ull * static_cast<std::uint64_t>(ni) + static_cast<std::uint64_t>(rep);
      const Population pop = sample_population(ds, country, items, catalog, ns[ni], seed, mode,
                                               include_nationality);
      const PopulationPrediction pred =
          simulate_population(pop, q, guidance, mode, backend, workers);
      rows.push_back({ns[ni], rep, mae(pred.expected_response, human_mean, q)});
    }
  }
  return rows;
}

}  // namespace persim
