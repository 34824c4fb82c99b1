#include "persim/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "persim/errors.hpp"
#include "persim/http_backend.hpp"
#include "persim/util.hpp"

namespace persim {

namespace fs = std::filesystem;
using nlohmann::json;

LoadedInputs load_inputs(const RunConfig& config) {
  if (config.data.questions.empty() || config.data.respondents.empty()) {
    throw ConfigError("data.questions and data.respondents must be configured");
  }
  std::map<std::string, std::string> digests;
  digests[config.data.questions] = sha256_hex_file(config.data.questions);
  digests[config.data.respondents] = sha256_hex_file(config.data.respondents);

  SurveyDataset ds = load_dataset(config.data.questions, config.data.respondents);

  DescriptorCatalog descriptors;
  if (!config.data.descriptors.empty()) {
    descriptors = load_descriptor_catalog(config.data.descriptors);
    digests[config.data.descriptors] = sha256_hex_file(config.data.descriptors);
  }
  std::vector<GuidanceTemplate> guidance;
  if (!config.data.guidance.empty()) {
    guidance = load_guidance_templates(config.data.guidance);
    digests[config.data.guidance] = sha256_hex_file(config.data.guidance);
  } else {
    // Guidance-free runs still need a template object for the API.
    guidance.push_back({"none", "You are a helpful assistant."});
  }
  return {std::move(ds), std::move(descriptors), std::move(guidance), std::move(digests)};
}

BackendStack::BackendStack(const RunConfig& config, const LoadedInputs& inputs) {
  if (config.backend.kind == "mock") {
    MockWorld world;
    world.gamma = config.mock.gamma;
    world.planted_mean = config.mock.mean_rule == "midpoint"
                             ? make_midpoint_rule()
                             : make_profile_mean_rule(inputs.ds);
    inner_ = std::make_unique<MockBackend>(std::move(world), config.backend.model_id);
  } else {
    HttpBackendConfig http;
    http.endpoint = config.backend.endpoint;
    http.model_id = config.backend.model_id;
    http.requests_per_second = config.backend.requests_per_second;
    http.max_retries = config.backend.max_retries;
    http.first_token_fallback = config.backend.first_token_fallback;
    inner_ = std::make_unique<HttpBackend>(std::move(http));
  }
  if (!config.backend.cache.empty()) {
    cache_ = std::make_unique<ScoreCache>(config.backend.cache);
    cached_ = std::make_unique<CachedBackend>(*inner_, *cache_);
  }
}

Backend& BackendStack::active() { return cached_ ? static_cast<Backend&>(*cached_) : *inner_; }

std::uint64_t BackendStack::backend_calls() const {
  if (cached_) return cached_->inner_calls();
  if (auto* mock = dynamic_cast<const MockBackend*>(inner_.get())) return mock->calls();
  return 0;
}

std::uint64_t BackendStack::cache_hits() const { return cached_ ? cached_->cache_hits() : 0; }

std::vector<std::string> resolve_countries(const RunConfig& config, const SurveyDataset& ds) {
  if (!config.countries.empty()) {
    for (const std::string& c : config.countries) ds.respondents_in(c);  // validate
    return config.countries;
  }
  return ds.countries();
}

std::vector<std::string> resolve_eval_questions(const RunConfig& config, const SurveyDataset& ds) {
  if (!config.eval.questions.empty()) {
    for (const std::string& q : config.eval.questions) ds.question(q);
    return config.eval.questions;
  }
  const std::vector<std::string> countries = resolve_countries(config, ds);
  std::vector<std::string> kept =
      filter_questions(ds, countries, config.filter.max_missing_fraction);
  const std::set<std::string> persona_items(config.persona.items.begin(),
                                            config.persona.items.end());
  std::vector<std::string> out;
  out.reserve(kept.size());
  for (std::string& q : kept) {
    if (!persona_items.count(q)) out.push_back(std::move(q));
  }
  if (out.empty()) {
    throw ValidationError("no evaluation questions survive the missingness filter");
  }
  return out;
}

std::string create_run_dir(const RunConfig& config, const std::optional<std::string>& out_dir) {
  if (out_dir) {
    fs::create_directories(*out_dir);
    return *out_dir;
  }
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &utc);
  const std::string digest = sha256_hex(config.to_json().dump()).substr(0, 8);
  fs::create_directories(config.out_root);
  std::string base = config.out_root + "/" + stamp + "-" + digest;
  std::string dir = base;
  for (int i = 2; fs::exists(dir); ++i) dir = base + "-" + std::to_string(i);
  fs::create_directories(dir);
  return dir;
}

void record_stage(const std::string& run_dir, const RunConfig& config, const LoadedInputs& inputs,
                  const std::string& stage, double seconds, std::uint64_t backend_calls,
                  std::uint64_t cache_hits, const std::vector<std::string>& outputs) {
  const std::string path = run_dir + "/manifest.json";
  json manifest;
  if (fs::exists(path)) {
    try {
      manifest = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
      throw ParseError(path + ": " + e.what());
    }
  } else {
    manifest = json{{"tool", "persona_sim"},
                    {"version", "0.1.0"},
                    {"config", config.to_json()},
                    {"inputs", inputs.input_digests},
                    {"stages", json::object()},
                    {"outputs", json::object()}};
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char stamp[40];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
    manifest["created_utc"] = stamp;
  }
  manifest["stages"][stage] = json{{"seconds", seconds},
                                   {"backend_calls", backend_calls},
                                   {"cache_hits", cache_hits}};
  for (const std::string& name : outputs) {
    manifest["outputs"][name] = sha256_hex_file(run_dir + "/" + name);
  }
  write_file_atomic(path, manifest.dump(2) + "\n");
}

const PopulationPrediction* PredictionSet::find(const std::string& country,
                                               const std::string& question) const {
  for (const PopulationPrediction& p : predictions) {
    if (p.country == country && p.question_id == question) return &p;
  }
  return nullptr;
}

PredictionSet simulate_all(const RunConfig& config, const LoadedInputs& inputs, Backend& backend) {
  const Mode mode = parse_mode(config.persona.mode);
  const GuidanceTemplate& guidance = find_guidance(inputs.guidance, config.prompt.guidance_key);
  const std::vector<std::string> countries = resolve_countries(config, inputs.ds);
  const std::vector<std::string> questions = resolve_eval_questions(config, inputs.ds);

  PredictionSet out;
  out.model_id = backend.model_id();
  out.mode = config.persona.mode;
  out.sample_n = config.persona.n;
  out.seed = config.seed;
  out.predictions.reserve(countries.size() * questions.size());
  const std::uint64_t base_seed = config.persona.seed.value_or(config.seed);
  for (std::size_t ci = 0; ci < countries.size(); ++ci) {
    // Per-country seeds keep populations independent but reproducible.
    const Population pop = sample_population(
        inputs.ds, countries[ci], config.persona.items, inputs.descriptors,
        static_cast<std::size_t>(config.persona.n), base_seed + ci, mode,
        config.persona.include_nationality, config.persona.attributes);
    for (const std::string& qid : questions) {
      out.predictions.push_back(simulate_population(pop, inputs.ds.question(qid), guidance, mode,
                                                    backend, config.workers));
    }
  }
  return out;
}

void write_prediction_dump(const std::string& path, const PredictionSet& set) {
  std::ostringstream out;
  out << json{{"type", "meta"},
              {"model", set.model_id},
              {"mode", set.mode},
              {"n", set.sample_n},
              {"seed", set.seed}}
             .dump()
      << '\n';
  for (const PopulationPrediction& p : set.predictions) {
    out << json{{"type", "aggregate"},
                {"country", p.country},
                {"question", p.question_id},
                {"options", p.aggregate.options()},
                {"probs", p.aggregate.probs()},
                {"expected", p.expected_response}}
               .dump()
        << '\n';
    for (std::size_t i = 0; i < p.per_persona.size(); ++i) {
      out << json{{"type", "persona"},
                  {"country", p.country},
                  {"question", p.question_id},
                  {"index", i},
                  {"probs", p.per_persona[i].probs()}}
                 .dump()
          << '\n';
    }
  }
  write_file_atomic(path, out.str());
}

PredictionSet read_prediction_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file for reading: " + path);
  PredictionSet set;
  std::string line;
  long line_no = 0;
  PopulationPrediction* current = nullptr;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "meta") {
        set.model_id = j.at("model").get<std::string>();
        set.mode = j.at("mode").get<std::string>();
        set.sample_n = j.at("n").get<std::uint64_t>();
        set.seed = j.at("seed").get<std::uint64_t>();
      } else if (type == "aggregate") {
        PopulationPrediction p;
        p.country = j.at("country").get<std::string>();
        p.question_id = j.at("question").get<std::string>();
        p.aggregate = ResponseDistribution::make(p.question_id,
                                                 j.at("options").get<std::vector<int>>(),
                                                 j.at("probs").get<std::vector<double>>());
        p.expected_response = j.at("expected").get<double>();
        set.predictions.push_back(std::move(p));
        current = &set.predictions.back();
      } else if (type == "persona") {
        if (!current || current->country != j.at("country").get<std::string>() ||
            current->question_id != j.at("question").get<std::string>()) {
          throw ValidationError("persona record outside its aggregate block");
        }
        current->per_persona.push_back(
            ResponseDistribution::make(current->question_id, current->aggregate.options(),
                                       j.at("probs").get<std::vector<double>>()));
      } else {
        throw ValidationError("unknown record type \"" + type + "\"");
      }
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, 1, e.what());
    }
  }
  if (set.predictions.empty()) throw ValidationError(path + ": no predictions in dump");
  return set;
}

std::vector<CalibrationCase> make_calibration_cases(const PredictionSet& set,
                                                    const SurveyDataset& ds) {
  std::vector<CalibrationCase> cases;
  cases.reserve(set.predictions.size());
  for (const PopulationPrediction& p : set.predictions) {
    const QuestionSpec& q = ds.question(p.question_id);
    const HumanDistribution human = human_distribution(ds, p.question_id, p.country);
    cases.push_back({p.question_id, p.aggregate, human.to_distribution(q)});
  }
  return cases;
}

std::vector<double> config_temperature_grid(const RunConfig& config) {
  const int n = config.calibration.grid_points;
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(n));
  if (n == 1) {
    grid.push_back(config.calibration.grid_min);
    return grid;
  }
  const double lo = std::log(config.calibration.grid_min);
  const double hi = std::log(config.calibration.grid_max);
  for (int j = 0; j < n; ++j) {
    grid.push_back(std::exp(lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1)));
  }
  return grid;
}

namespace {

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> read_simple_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file for reading: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split(line, ','));
  }
  return rows;
}

}  // namespace

CalibrationFit calibrate_run(const std::string& run_dir, const RunConfig& config,
                             const SurveyDataset& ds, const PredictionSet& raw,
                             PredictionSet* calibrated_out) {
  const std::vector<CalibrationCase> cases = make_calibration_cases(raw, ds);
  const CalibrationFit fit = fit_temperature_loo(cases, config_temperature_grid(config),
                                                 parse_loo_criterion(config.calibration.criterion));

  PredictionSet calibrated;
  calibrated.model_id = raw.model_id;
  calibrated.mode = raw.mode;
  calibrated.sample_n = raw.sample_n;
  calibrated.seed = raw.seed;

  std::ostringstream csv;
  csv << "record,question,country,T,beta,criterion_value\n";
  for (const CalibrationFold& fold : fit.folds) {
    csv << "fold," << csv_cell(fold.held_out_question) << ",," << format_double(fold.chosen_T)
        << ",," << format_double(fold.train_criterion) << "\n";
  }
  for (const PopulationPrediction& p : raw.predictions) {
    const double T = fit.per_question_T.at(p.question_id);
    const TiltResult tilt = tilt_mean_preserving(p.aggregate, T);
    PopulationPrediction c;
    c.country = p.country;
    c.question_id = p.question_id;
    c.aggregate = tilt.dist;
    c.expected_response = expected_response(tilt.dist);
    // Per-persona distributions are deliberately not tilted: calibration
    // adjusts the population aggregate.
    calibrated.predictions.push_back(std::move(c));
    csv << "applied," << csv_cell(p.question_id) << "," << csv_cell(p.country) << ","
        << format_double(T) << "," << format_double(tilt.beta) << ",\n";
  }
  write_file_atomic(run_dir + "/calibration.csv", csv.str());
  write_prediction_dump(run_dir + "/predictions_calibrated.jsonl", calibrated);
  if (calibrated_out) *calibrated_out = std::move(calibrated);
  return fit;
}

std::vector<EvalCell> evaluate_run(const std::string& run_dir, const SurveyDataset& ds,
                                   const PredictionSet& raw, const PredictionSet* calibrated) {
  std::vector<std::pair<std::string, const PredictionSet*>> methods{{"raw", &raw}};
  if (calibrated) methods.emplace_back("calibrated", calibrated);

  std::vector<EvalCell> cells;
  std::ostringstream csv;
  csv << "method,country,question,mae,pred_norm_variance,human_norm_variance,wasserstein\n";
  const auto emit = [&](const EvalCell& cell) {
    csv << csv_cell(cell.method) << "," << csv_cell(cell.country) << ","
        << csv_cell(cell.question_id) << "," << format_double(cell.mae) << ","
        << format_double(cell.pred_norm_variance) << ","
        << format_double(cell.human_norm_variance) << "," << format_double(cell.wasserstein)
        << "\n";
  };
  for (const auto& [method, set] : methods) {
    std::map<std::string, std::vector<EvalCell>> by_country;
    for (const PopulationPrediction& p : set->predictions) {
      const QuestionSpec& q = ds.question(p.question_id);
      const HumanDistribution human = human_distribution(ds, p.question_id, p.country);
      EvalCell cell = evaluate_cell(method, p.country, q, p.aggregate, human);
      emit(cell);
      by_country[p.country].push_back(cell);
      cells.push_back(std::move(cell));
    }
    EvalCell overall;
    overall.method = method;
    overall.country = "ALL";
    overall.question_id = "ALL";
    std::size_t overall_n = 0;
    for (const auto& [country, rows] : by_country) {
      EvalCell agg;
      agg.method = method;
      agg.country = country;
      agg.question_id = "ALL";
      for (const EvalCell& c : rows) {
        agg.mae += c.mae;
        agg.pred_norm_variance += c.pred_norm_variance;
        agg.human_norm_variance += c.human_norm_variance;
        agg.wasserstein += c.wasserstein;
      }
      const double n = static_cast<double>(rows.size());
      agg.mae /= n;
      agg.pred_norm_variance /= n;
      agg.human_norm_variance /= n;
      agg.wasserstein /= n;
      emit(agg);
      overall.mae += agg.mae;
      overall.pred_norm_variance += agg.pred_norm_variance;
      overall.human_norm_variance += agg.human_norm_variance;
      overall.wasserstein += agg.wasserstein;
      ++overall_n;
      cells.push_back(std::move(agg));
    }
    const double n = static_cast<double>(overall_n);
    overall.mae /= n;
    overall.pred_norm_variance /= n;
    overall.human_norm_variance /= n;
    overall.wasserstein /= n;
    emit(overall);
    cells.push_back(std::move(overall));
  }
  write_file_atomic(run_dir + "/evaluation.csv", csv.str());

  // Paired method comparison per country: Wilcoxon on per-question Wasserstein
  // distances (calibration preserves means, so MAE pairs would all tie), with
  // BH correction across countries.
  if (calibrated) {
    std::ostringstream sig;
    sig << "country,n_questions,wilcoxon_p,bh_adjusted_p\n";
    std::vector<std::string> countries;
    std::vector<double> pvals;
    std::vector<std::size_t> counts;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> paired;
    for (const EvalCell& cell : cells) {
      if (cell.question_id == "ALL") continue;
      if (cell.method == "raw") paired[cell.country].first.push_back(cell.wasserstein);
      if (cell.method == "calibrated") paired[cell.country].second.push_back(cell.wasserstein);
    }
    for (const auto& [country, xy] : paired) {
      if (xy.first.size() != xy.second.size() || xy.first.size() < 2) continue;
      try {
        countries.push_back(country);
        counts.push_back(xy.first.size());
        pvals.push_back(wilcoxon_signed_rank(xy.first, xy.second));
      } catch (const ValidationError&) {
        // Too few untied pairs: calibration left this country untouched.
        countries.pop_back();
        counts.pop_back();
      }
    }
    const std::vector<double> adjusted = benjamini_hochberg(pvals);
    for (std::size_t i = 0; i < countries.size(); ++i) {
      sig << csv_cell(countries[i]) << "," << counts[i] << "," << format_double(pvals[i]) << ","
          << format_double(adjusted[i]) << "\n";
    }
    write_file_atomic(run_dir + "/significance.csv", sig.str());
  }
  return cells;
}

std::vector<ShapleyRunRow> shapley_run(const std::string& run_dir, const RunConfig& config,
                                       const LoadedInputs& inputs, Backend& backend) {
  const Mode mode = parse_mode(config.persona.mode);
  if (mode != Mode::Value && mode != Mode::Fewshot) {
    throw ConfigError("shapley attribution needs persona.mode value or fewshot");
  }
  if (config.persona.items.empty()) throw ConfigError("shapley attribution needs persona.items");
  const GuidanceTemplate& guidance = find_guidance(inputs.guidance, config.prompt.guidance_key);
  const std::vector<std::string> countries = resolve_countries(config, inputs.ds);
  std::vector<std::string> questions =
      config.shapley.questions.empty() ? resolve_eval_questions(config, inputs.ds)
                                       : config.shapley.questions;
  std::vector<QuestionSpec> test_questions;
  test_questions.reserve(questions.size());
  for (const std::string& qid : questions) test_questions.push_back(inputs.ds.question(qid));

  std::vector<ShapleyRunRow> rows;
  std::map<std::string, double> mean_phi;
  std::ostringstream csv;
  csv << "country,item,phi,mode,permutations\n";
  for (std::size_t ci = 0; ci < countries.size(); ++ci) {
    const std::string& country = countries[ci];
    const Population pop = sample_population(
        inputs.ds, country, config.persona.items, inputs.descriptors,
        static_cast<std::size_t>(config.shapley.coalition_n), config.seed + ci, mode,
        config.persona.include_nationality, config.persona.attributes);
    std::map<std::string, double> human_means;
    for (const QuestionSpec& q : test_questions) {
      human_means[q.id] = human_distribution(inputs.ds, q.id, country).mean();
    }
    const CoalitionEvaluator evaluator(pop, test_questions, human_means, guidance, mode, backend,
                                       config.workers);
    const ShapleyMode smode =
        config.shapley.mode == "exact" ? ShapleyMode::Exact : ShapleyMode::Permutation;
    const ShapleyResult result =
        shapley_values(config.persona.items, std::cref(evaluator), smode,
                       config.shapley.permutations, config.seed + 1000 + ci);
    for (const auto& [item, phi] : result.phi) {
      rows.push_back({country, item, phi});
      mean_phi[item] += phi;
      csv << csv_cell(country) << "," << csv_cell(item) << "," << format_double(phi) << ","
          << config.shapley.mode << "," << (smode == ShapleyMode::Exact ? 0 : result.permutations)
          << "\n";
    }
  }
  for (const auto& [item, total] : mean_phi) {
    const double phi = total / static_cast<double>(countries.size());
    rows.push_back({"ALL", item, phi});
    csv << "ALL," << csv_cell(item) << "," << format_double(phi) << "," << config.shapley.mode
        << ",\n";
  }
  write_file_atomic(run_dir + "/shapley.csv", csv.str());
  return rows;
}

void sweep_n_run(const std::string& run_dir, const RunConfig& config, const LoadedInputs& inputs,
                 Backend& backend, const std::vector<std::size_t>& ns, int repeats,
                 const std::string& question_id) {
  const Mode mode = parse_mode(config.persona.mode);
  const GuidanceTemplate& guidance = find_guidance(inputs.guidance, config.prompt.guidance_key);
  const std::vector<std::string> countries = resolve_countries(config, inputs.ds);
  const std::string qid =
      question_id.empty() ? resolve_eval_questions(config, inputs.ds).front() : question_id;
  const QuestionSpec& q = inputs.ds.question(qid);

  std::ostringstream csv;
  csv << "country,question,n,repeat,mae\n";
  for (std::size_t ci = 0; ci < countries.size(); ++ci) {
    const std::string& country = countries[ci];
    const double human_mean = human_distribution(inputs.ds, qid, country).mean();
    const std::vector<SampleSizeRow> rows = sweep_sample_size(
        inputs.ds, country, config.persona.items, inputs.descriptors, q, guidance, mode,
        config.persona.include_nationality, backend, ns, repeats, config.seed + 7919 * ci,
        human_mean, config.workers);
    for (const SampleSizeRow& row : rows) {
      csv << csv_cell(country) << "," << csv_cell(qid) << "," << row.n << "," << row.repeat << ","
          << format_double(row.mae) << "\n";
    }
  }
  write_file_atomic(run_dir + "/sweep_n.csv", csv.str());
}

void sweep_temperature_run(const std::string& run_dir, const RunConfig& config,
                           const SurveyDataset& ds, const PredictionSet& raw) {
  const std::vector<CalibrationCase> cases = make_calibration_cases(raw, ds);
  const std::vector<TemperatureSweepRow> rows =
      temperature_sweep(cases, config_temperature_grid(config));
  std::ostringstream csv;
  csv << "T,method,mae,wasserstein\n";
  for (const TemperatureSweepRow& row : rows) {
    csv << format_double(row.T) << "," << row.method << "," << format_double(row.mae) << ","
        << format_double(row.wasserstein) << "\n";
  }
  write_file_atomic(run_dir + "/temperature.csv", csv.str());
}

std::string export_run(const std::string& run_dir, const RunConfig& config,
                       const LoadedInputs* inputs, const std::string& kind) {
  fs::create_directories(run_dir + "/exports");
  const std::string out_path = run_dir + "/exports/" + kind + ".csv";
  std::ostringstream out;

  if (kind == "mae_lines") {
    const auto rows = read_simple_csv(run_dir + "/evaluation.csv");
    out << "method,country,mae\n";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 4 || rows[i][2] != "ALL") continue;
      out << rows[i][0] << "," << rows[i][1] << "," << rows[i][3] << "\n";
    }
  } else if (kind == "variance_box") {
    const auto rows = read_simple_csv(run_dir + "/evaluation.csv");
    out << "source,country,question,normalized_variance\n";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 7 || rows[i][2] == "ALL") continue;
      out << rows[i][0] << "," << rows[i][1] << "," << rows[i][2] << "," << rows[i][4] << "\n";
      if (rows[i][0] == "raw") {
        out << "human," << rows[i][1] << "," << rows[i][2] << "," << rows[i][5] << "\n";
      }
    }
  } else if (kind == "sample_size_curve") {
    const auto rows = read_simple_csv(run_dir + "/sweep_n.csv");
    out << "country,question,n,mean_mae,band_lo,band_hi\n";
    std::map<std::tuple<std::string, std::string, long>, std::vector<double>> groups;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 5) continue;
      groups[{rows[i][0], rows[i][1], std::stol(rows[i][2])}].push_back(std::stod(rows[i][4]));
    }
    for (const auto& [key, maes] : groups) {
      const auto& [country, question, n] = key;
      const double mean =
          std::accumulate(maes.begin(), maes.end(), 0.0) / static_cast<double>(maes.size());
      const auto [lo, hi] = std::minmax_element(maes.begin(), maes.end());
      out << country << "," << question << "," << n << "," << format_double(mean) << ","
          << format_double(*lo) << "," << format_double(*hi) << "\n";
    }
  } else if (kind == "temperature_curves") {
    const auto rows = read_simple_csv(run_dir + "/temperature.csv");
    out << "method,T,metric,value\n";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 4) continue;
      out << rows[i][1] << "," << rows[i][0] << ",mae," << rows[i][2] << "\n";
      out << rows[i][1] << "," << rows[i][0] << ",wasserstein," << rows[i][3] << "\n";
    }
  } else if (kind == "map_points") {
    if (!inputs) throw ConfigError("export map_points needs the configured input data");
    if (config.map.loadings.empty()) throw ConfigError("export map_points needs map.loadings");
    const MapProjection proj = load_map_projection(config.map.loadings);
    out << "source,country,x,y\n";
    const auto emit_points = [&](const std::string& source, const PredictionSet& set) {
      std::map<std::string, std::map<std::string, double>> by_country;
      for (const PopulationPrediction& p : set.predictions) {
        by_country[p.country][p.question_id] = p.expected_response;
      }
      for (const auto& [country, profile] : by_country) {
        const auto [x, y] = project_map(profile, proj);
        out << source << "," << country << "," << format_double(x) << "," << format_double(y)
            << "\n";
      }
    };
    const PredictionSet raw = read_prediction_dump(run_dir + "/predictions.jsonl");
    emit_points("raw", raw);
    if (fs::exists(run_dir + "/predictions_calibrated.jsonl")) {
      emit_points("calibrated", read_prediction_dump(run_dir + "/predictions_calibrated.jsonl"));
    }
    std::map<std::string, std::map<std::string, double>> human_profiles;
    for (const PopulationPrediction& p : raw.predictions) {
      human_profiles[p.country][p.question_id] =
          human_distribution(inputs->ds, p.question_id, p.country).mean();
    }
    for (const auto& [country, profile] : human_profiles) {
      const auto [x, y] = project_map(profile, proj);
      out << "human," << country << "," << format_double(x) << "," << format_double(y) << "\n";
    }
  } else {
    throw ConfigError("unknown export kind \"" + kind +
                      "\" (expected mae_lines, variance_box, sample_size_curve, "
                      "temperature_curves, map_points)");
  }
  write_file_atomic(out_path, out.str());
  return out_path;
}

}  // namespace persim
