#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "persim/errors.hpp"
#include "persim/runner.hpp"
#include "persim/util.hpp"

namespace {

using namespace persim;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Cli {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend_kind;
  std::optional<std::string> out_dir;

  RunConfig config() const {
    RunConfig c = config_path.empty() ? default_config() : load_config(config_path);
    apply_overrides(c, {seed, backend_kind, out_dir});
    return c;
  }
};

int cmd_ingest(const Cli& cli, double max_missing_override) {
  RunConfig config = cli.config();
  if (max_missing_override >= 0.0) config.filter.max_missing_fraction = max_missing_override;
  const LoadedInputs inputs = load_inputs(config);
  const std::vector<std::string> countries = resolve_countries(config, inputs.ds);

  std::cout << "dataset: " << inputs.ds.questions().size() << " questions, "
            << inputs.ds.respondents().size() << " respondents\n";
  for (const std::string& country : countries) {
    std::cout << "  " << country << ": " << inputs.ds.respondents_in(country).size()
              << " respondents\n";
  }
  const std::vector<std::string> kept =
      filter_questions(inputs.ds, countries, config.filter.max_missing_fraction);
  std::cout << "questions with missing fraction < " << config.filter.max_missing_fraction
            << " in every country: " << kept.size() << "/" << inputs.ds.questions().size() << "\n";
  for (const std::string& qid : kept) {
    double worst = 0.0;
    for (const std::string& country : countries) {
      const auto group = inputs.ds.respondents_in(country);
      long missing = 0;
      for (const Respondent* r : group) {
        if (!r->answers.count(qid)) ++missing;
      }
      worst = std::max(worst, static_cast<double>(missing) / static_cast<double>(group.size()));
    }
    std::cout << "  " << qid << " (max missing " << format_double(worst) << ")\n";
  }
  return 0;
}

int cmd_simulate(const Cli& cli) {
  const RunConfig config = cli.config();
  const LoadedInputs inputs = load_inputs(config);
  BackendStack backend(config, inputs);
  const auto start = std::chrono::steady_clock::now();
  const PredictionSet set = simulate_all(config, inputs, backend.active());
  const std::string run_dir = create_run_dir(config, cli.out_dir);
  write_prediction_dump(run_dir + "/predictions.jsonl", set);
  record_stage(run_dir, config, inputs, "simulate", seconds_since(start),
               backend.backend_calls(), backend.cache_hits(), {"predictions.jsonl"});
  std::cout << run_dir << "\n"
            << "simulated " << set.predictions.size() << " (country, question) cells, "
            << backend.backend_calls() << " backend calls, " << backend.cache_hits()
            << " cache hits\n";
  return 0;
}

int cmd_calibrate(const Cli& cli, const std::string& run_dir) {
  const RunConfig config = cli.config();
  const LoadedInputs inputs = load_inputs(config);
  const PredictionSet raw = read_prediction_dump(run_dir + "/predictions.jsonl");
  const auto start = std::chrono::steady_clock::now();
  const CalibrationFit fit = calibrate_run(run_dir, config, inputs.ds, raw);
  record_stage(run_dir, config, inputs, "calibrate", seconds_since(start), 0, 0,
               {"calibration.csv", "predictions_calibrated.jsonl"});
  std::cout << "calibrated " << fit.per_question_T.size() << " questions ("
            << fit.criterion << " criterion)\n";
  for (const auto& [qid, T] : fit.per_question_T) {
    std::cout << "  " << qid << ": T = " << format_double(T) << "\n";
  }
  return 0;
}

int cmd_evaluate(const Cli& cli, const std::string& run_dir) {
  const RunConfig config = cli.config();
  const LoadedInputs inputs = load_inputs(config);
  const PredictionSet raw = read_prediction_dump(run_dir + "/predictions.jsonl");
  std::optional<PredictionSet> calibrated;
  if (std::filesystem::exists(run_dir + "/predictions_calibrated.jsonl")) {
    calibrated = read_prediction_dump(run_dir + "/predictions_calibrated.jsonl");
  }
  const auto start = std::chrono::steady_clock::now();
  const std::vector<EvalCell> cells =
      evaluate_run(run_dir, inputs.ds, raw, calibrated ? &*calibrated : nullptr);
  std::vector<std::string> outputs{"evaluation.csv"};
  if (calibrated) outputs.push_back("significance.csv");
  record_stage(run_dir, config, inputs, "evaluate", seconds_since(start), 0, 0, outputs);
  for (const EvalCell& cell : cells) {
    if (cell.country == "ALL") {
      std::cout << cell.method << ": mae " << format_double(cell.mae) << ", wasserstein "
                << format_double(cell.wasserstein) << "\n";
    }
  }
  return 0;
}

int cmd_shapley(const Cli& cli) {
  const RunConfig config = cli.config();
  const LoadedInputs inputs = load_inputs(config);
  BackendStack backend(config, inputs);
  const auto start = std::chrono::steady_clock::now();
  const std::string run_dir = create_run_dir(config, cli.out_dir);
  const std::vector<ShapleyRunRow> rows = shapley_run(run_dir, config, inputs, backend.active());
  record_stage(run_dir, config, inputs, "shapley", seconds_since(start),
               backend.backend_calls(), backend.cache_hits(), {"shapley.csv"});
  std::cout << run_dir << "\n";
  for (const ShapleyRunRow& row : rows) {
    if (row.country == "ALL") {
      std::cout << "  " << row.item << ": " << format_double(row.phi) << "\n";
    }
  }
  return 0;
}

int cmd_sweep_n(const Cli& cli, const std::string& ns_text, int repeats,
                const std::string& question) {
  const RunConfig config = cli.config();
  const LoadedInputs inputs = load_inputs(config);
  BackendStack backend(config, inputs);
  std::vector<std::size_t> ns;
  for (const std::string& part : split(ns_text, ',')) {
    const std::string t = trim(part);
    if (t.empty()) continue;
    ns.push_back(static_cast<std::size_t>(std::stoul(t)));
  }
  const auto start = std::chrono::steady_clock::now();
  const std::string run_dir = create_run_dir(config, cli.out_dir);
  sweep_n_run(run_dir, config, inputs, backend.active(), ns, repeats, question);
  record_stage(run_dir, config, inputs, "sweep-n", seconds_since(start),
               backend.backend_calls(), backend.cache_hits(), {"sweep_n.csv"});
  std::cout << run_dir << "\n";
  return 0;
}

int cmd_sweep_temperature(const Cli& cli, const std::string& run_dir) {
  const RunConfig config = cli.config();
  const LoadedInputs inputs = load_inputs(config);
  const PredictionSet raw = read_prediction_dump(run_dir + "/predictions.jsonl");
  const auto start = std::chrono::steady_clock::now();
  sweep_temperature_run(run_dir, config, inputs.ds, raw);
  record_stage(run_dir, config, inputs, "sweep-temperature", seconds_since(start), 0, 0,
               {"temperature.csv"});
  std::cout << run_dir << "/temperature.csv\n";
  return 0;
}

int cmd_export(const Cli& cli, const std::string& run_dir, const std::string& kind) {
  const RunConfig config = cli.config();
  std::optional<LoadedInputs> inputs;
  if (kind == "map_points") inputs = load_inputs(config);
  const std::string path = export_run(run_dir, config, inputs ? &*inputs : nullptr, kind);
  std::cout << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulates survey response distributions with value-conditioned personas"};
  app.require_subcommand(1);
  app.fallthrough();  // accept the global flags after the subcommand too

  Cli cli;
  app.add_option("--config", cli.config_path, "Run configuration JSON");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the run seed");
  std::string backend_value;
  auto* backend_opt =
      app.add_option("--backend", backend_value, "Override the backend kind (mock or http)");
  std::string out_value;
  auto* out_opt = app.add_option("--out", out_value, "Exact output run directory");

  auto* ingest = app.add_subcommand("ingest", "Load, validate, and summarize the survey data");
  double max_missing = -1.0;
  ingest->add_option("--max-missing", max_missing, "Missingness threshold override");

  auto* simulate = app.add_subcommand("simulate", "Sample personas and score every question");

  auto* calibrate = app.add_subcommand("calibrate", "Fit LOO temperatures for a finished run");
  std::string calibrate_run_dir;
  calibrate->add_option("--run", calibrate_run_dir, "Run directory with predictions.jsonl")
      ->required();

  auto* evaluate = app.add_subcommand("evaluate", "Compute metric tables for a finished run");
  std::string evaluate_run_dir;
  evaluate->add_option("--run", evaluate_run_dir, "Run directory with predictions.jsonl")
      ->required();

  auto* shapley = app.add_subcommand("shapley", "Attribute error reduction to persona items");

  auto* sweep_n = app.add_subcommand("sweep-n", "Sample-size convergence sweep");
  std::string ns_text = "5,10,25,50,100";
  sweep_n->add_option("--ns", ns_text, "Comma-separated persona sample sizes");
  int repeats = 5;
  sweep_n->add_option("--repeats", repeats, "Resampling repeats per sample size");
  std::string sweep_question;
  sweep_n->add_option("--question", sweep_question, "Question id (default: first eval question)");

  auto* sweep_t = app.add_subcommand("sweep-temperature", "Temperature sweep for a finished run");
  std::string sweep_t_run_dir;
  sweep_t->add_option("--run", sweep_t_run_dir, "Run directory with predictions.jsonl")
      ->required();

  auto* exportc = app.add_subcommand("export", "Write plot-ready tables for a finished run");
  std::string export_run_dir;
  exportc->add_option("--run", export_run_dir, "Run directory")->required();
  std::string export_kind;
  exportc
      ->add_option("--kind", export_kind,
                   "mae_lines | variance_box | sample_size_curve | temperature_curves | map_points")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (*seed_opt) cli.seed = seed_value;
  if (*backend_opt) cli.backend_kind = backend_value;
  if (*out_opt) cli.out_dir = out_value;

  try {
    if (*ingest) return cmd_ingest(cli, max_missing);
    if (*simulate) return cmd_simulate(cli);
    if (*calibrate) return cmd_calibrate(cli, calibrate_run_dir);
    if (*evaluate) return cmd_evaluate(cli, evaluate_run_dir);
    if (*shapley) return cmd_shapley(cli);
    if (*sweep_n) return cmd_sweep_n(cli, ns_text, repeats, sweep_question);
    if (*sweep_t) return cmd_sweep_temperature(cli, sweep_t_run_dir);
    if (*exportc) return cmd_export(cli, export_run_dir, export_kind);
  } catch (const persim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
