#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "persim/persona.hpp"

namespace persim {

// Resolved run configuration. Precedence: CLI flags > config file > defaults.
// Unknown config keys are rejected so typos cannot silently fall back.
struct RunConfig {
  struct Data {
    std::string questions;    // question catalog JSON
    std::string respondents;  // respondent table CSV
    std::string descriptors;  // descriptor catalog JSON
    std::string guidance;     // guidance templates JSON
  } data;

  std::vector<std::string> countries;

  struct PersonaCfg {
    std::vector<std::string> items;
    std::string mode = "value";
    bool include_nationality = true;
    std::uint64_t n = 100;
    std::vector<std::string> attributes;  // sociodemographic mode
    // Base seed for population sampling; falls back to the global seed.
    std::optional<std::uint64_t> seed;
  } persona;

  struct PromptCfg {
    std::string guidance_key = "social_science";
  } prompt;

  struct BackendCfg {
    std::string kind = "mock";  // mock | http
    std::string model_id = "mock";
    std::string endpoint;
    std::string cache;  // empty = no cache file
    double requests_per_second = 4.0;
    int max_retries = 3;
    bool first_token_fallback = false;
  } backend;

  struct MockCfg {
    double gamma = 2.0;
    std::string mean_rule = "profile_mean";  // profile_mean | midpoint
  } mock;

  struct FilterCfg {
    double max_missing_fraction = 0.20;
  } filter;

  struct EvalCfg {
    // Explicit evaluation questions; empty = apply the missingness filter
    // and evaluate everything that passes, minus the persona items.
    std::vector<std::string> questions;
  } eval;

  struct CalibrationCfg {
    std::string criterion = "wasserstein";  // wasserstein | variance_gap
    double grid_min = 0.25;
    double grid_max = 16.0;
    int grid_points = 21;
  } calibration;

  struct ShapleyCfg {
    std::string mode = "exact";  // exact | permutation
    int permutations = 200;
    std::uint64_t coalition_n = 25;  // persona sample size per coalition
    std::vector<std::string> questions;  // test questions; empty = eval set
  } shapley;

  struct MapCfg {
    std::string loadings;  // projection JSON; required by export map_points
  } map;

  std::uint64_t seed = 0;
  int workers = 1;
  std::string out_root = "runs";

  // Full snapshot (used in manifests and for run digests).
  nlohmann::json to_json() const;
  void validate() const;  // throws ConfigError
};

RunConfig default_config();
// Defaults overlaid with the file; relative data paths are resolved against
// the config file's directory.
RunConfig load_config(const std::string& path);

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend_kind;
  std::optional<std::string> out_dir;  // exact run directory, bypasses out_root
};

void apply_overrides(RunConfig& config, const CliOverrides& overrides);

}  // namespace persim
