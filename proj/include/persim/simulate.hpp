#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "persim/backend.hpp"
#include "persim/dataset.hpp"
#include "persim/distribution.hpp"
#include "persim/persona.hpp"
#include "persim/prompt.hpp"

namespace persim {

// Simulated response of one population to one question: the per-persona
// distributions plus their elementwise average.
struct PopulationPrediction {
  std::string question_id;
  std::string country;
  std::vector<ResponseDistribution> per_persona;
  ResponseDistribution aggregate;
  double expected_response = 0.0;
};

// Mean of the per-persona probability vectors (all must share the question's
// option grid). Pre: at least one distribution.
ResponseDistribution aggregate_distributions(const std::string& question_id,
                                             const std::vector<ResponseDistribution>& dists);

// Scores every persona on q and aggregates. Backend failures abort the call;
// the rethrown error names the failing persona index.
PopulationPrediction simulate_population(const Population& pop, const QuestionSpec& q,
                                         const GuidanceTemplate& guidance, Mode mode,
                                         Backend& backend, int workers = 1);

// One point on a sample-size convergence curve.
struct SampleSizeRow {
  std::size_t n = 0;
  int repeat = 0;
  double mae = 0.0;
};

// Resimulates at each sample size `repeats` times (fresh seeds derived from
// base_seed) and records the absolute error of the predicted mean against
// human_mean, normalized by the scale range.
std::vector<SampleSizeRow> sweep_sample_size(
    const SurveyDataset& ds, const std::string& country, const std::vector<std::string>& items,
    const DescriptorCatalog& catalog, const QuestionSpec& q, const GuidanceTemplate& guidance,
    Mode mode, bool include_nationality, Backend& backend, const std::vector<std::size_t>& ns,
    int repeats, std::uint64_t base_seed, double human_mean, int workers = 1);

}  // namespace persim
