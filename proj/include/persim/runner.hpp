#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "persim/backend.hpp"
#include "persim/cache.hpp"
#include "persim/calibrate.hpp"
#include "persim/config.hpp"
#include "persim/dataset.hpp"
#include "persim/evaluate.hpp"
#include "persim/persona.hpp"
#include "persim/prompt.hpp"
#include "persim/shapley.hpp"
#include "persim/simulate.hpp"

namespace persim {

struct LoadedInputs {
  SurveyDataset ds;
  DescriptorCatalog descriptors;
  std::vector<GuidanceTemplate> guidance;
  std::map<std::string, std::string> input_digests;  // path -> sha256
};

LoadedInputs load_inputs(const RunConfig& config);

// Owns the configured backend chain; score through active().
class BackendStack {
 public:
  BackendStack(const RunConfig& config, const LoadedInputs& inputs);
  Backend& active();
  std::uint64_t backend_calls() const;  // calls that reached the real backend
  std::uint64_t cache_hits() const;

 private:
  std::unique_ptr<ScoreCache> cache_;
  std::unique_ptr<Backend> inner_;
  std::unique_ptr<CachedBackend> cached_;
};

// Countries to simulate: config.countries, or every dataset country.
std::vector<std::string> resolve_countries(const RunConfig& config, const SurveyDataset& ds);

// Questions to evaluate: the explicit eval list, or everything passing the
// missingness filter minus the persona items.
std::vector<std::string> resolve_eval_questions(const RunConfig& config, const SurveyDataset& ds);

// Creates runs/<utc-timestamp>-<config-digest>/ (or exactly out_dir).
std::string create_run_dir(const RunConfig& config, const std::optional<std::string>& out_dir);

// Writes manifest.json (config snapshot, input digests, stage timings and
// call counts, output digests). `stage` merges into any existing manifest.
void record_stage(const std::string& run_dir, const RunConfig& config,
                  const LoadedInputs& inputs, const std::string& stage, double seconds,
                  std::uint64_t backend_calls, std::uint64_t cache_hits,
                  const std::vector<std::string>& outputs);

// All population predictions of one simulation pass, country-major.
struct PredictionSet {
  std::string model_id;
  std::string mode;
  std::uint64_t sample_n = 0;
  std::uint64_t seed = 0;
  std::vector<PopulationPrediction> predictions;

  const PopulationPrediction* find(const std::string& country, const std::string& question) const;
};

PredictionSet simulate_all(const RunConfig& config, const LoadedInputs& inputs, Backend& backend);

void write_prediction_dump(const std::string& path, const PredictionSet& set);
PredictionSet read_prediction_dump(const std::string& path);

// Builds one calibration case per (country, question) cell from a dump.
std::vector<CalibrationCase> make_calibration_cases(const PredictionSet& set,
                                                    const SurveyDataset& ds);

// Fits LOO temperatures, tilts every cell with its question's temperature,
// writes calibration.csv + predictions_calibrated.jsonl into run_dir.
CalibrationFit calibrate_run(const std::string& run_dir, const RunConfig& config,
                             const SurveyDataset& ds, const PredictionSet& raw,
                             PredictionSet* calibrated_out = nullptr);

// Per-cell metrics for raw (and calibrated, when present) predictions plus
// per-country and overall aggregate rows; writes evaluation.csv.
std::vector<EvalCell> evaluate_run(const std::string& run_dir, const SurveyDataset& ds,
                                   const PredictionSet& raw, const PredictionSet* calibrated);

struct ShapleyRunRow {
  std::string country;
  std::string item;
  double phi = 0.0;
};

// Per-country Shapley attribution of the persona items; writes shapley.csv.
std::vector<ShapleyRunRow> shapley_run(const std::string& run_dir, const RunConfig& config,
                                       const LoadedInputs& inputs, Backend& backend);

// Sample-size convergence for one question per country; writes sweep_n.csv.
void sweep_n_run(const std::string& run_dir, const RunConfig& config, const LoadedInputs& inputs,
                 Backend& backend, const std::vector<std::size_t>& ns, int repeats,
                 const std::string& question_id);

// Temperature sweep over the config grid; writes temperature.csv.
void sweep_temperature_run(const std::string& run_dir, const RunConfig& config,
                           const SurveyDataset& ds, const PredictionSet& raw);

// Derived tables for plotting: mae_lines, variance_box, sample_size_curve,
// temperature_curves, map_points. Reads the run's reports, writes
// exports/<kind>.csv, and returns the written path.
std::string export_run(const std::string& run_dir, const RunConfig& config,
                       const LoadedInputs* inputs, const std::string& kind);

std::vector<double> config_temperature_grid(const RunConfig& config);

}  // namespace persim
