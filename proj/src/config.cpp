#include "persim/config.hpp"

#include <filesystem>
#include <set>

#include "persim/calibrate.hpp"
#include "persim/errors.hpp"
#include "persim/util.hpp"

namespace persim {

using nlohmann::json;

nlohmann::json RunConfig::to_json() const {
  return json{
      {"data",
       {{"questions", data.questions},
        {"respondents", data.respondents},
        {"descriptors", data.descriptors},
        {"guidance", data.guidance}}},
      {"countries", countries},
      {"persona",
       {{"items", persona.items},
        {"mode", persona.mode},
        {"include_nationality", persona.include_nationality},
        {"n", persona.n},
        {"attributes", persona.attributes},
        {"seed", persona.seed ? json(*persona.seed) : json()}}},
      {"prompt", {{"guidance_key", prompt.guidance_key}}},
      {"backend",
       {{"kind", backend.kind},
        {"model_id", backend.model_id},
        {"endpoint", backend.endpoint},
        {"cache", backend.cache},
        {"rps", backend.requests_per_second},
        {"max_retries", backend.max_retries},
        {"first_token_fallback", backend.first_token_fallback}}},
      {"mock", {{"gamma", mock.gamma}, {"mean_rule", mock.mean_rule}}},
      {"filter", {{"max_missing_fraction", filter.max_missing_fraction}}},
      {"eval", {{"questions", eval.questions}}},
      {"calibration",
       {{"criterion", calibration.criterion},
        {"grid_min", calibration.grid_min},
        {"grid_max", calibration.grid_max},
        {"grid_points", calibration.grid_points}}},
      {"shapley",
       {{"mode", shapley.mode},
        {"permutations", shapley.permutations},
        {"coalition_n", shapley.coalition_n},
        {"questions", shapley.questions}}},
      {"map", {{"loadings", map.loadings}}},
      {"seed", seed},
      {"workers", workers},
      {"out_root", out_root},
  };
}

void RunConfig::validate() const {
  parse_mode(persona.mode);
  if (backend.kind != "mock" && backend.kind != "http") {
    throw ConfigError("backend.kind must be mock or http, got \"" + backend.kind + "\"");
  }
  if (backend.kind == "http" && backend.endpoint.empty()) {
    throw ConfigError("backend.kind=http requires backend.endpoint");
  }
  if (backend.max_retries < 1) throw ConfigError("backend.max_retries must be at least 1");
  if (mock.mean_rule != "profile_mean" && mock.mean_rule != "midpoint") {
    throw ConfigError("mock.mean_rule must be profile_mean or midpoint, got \"" + mock.mean_rule +
                      "\"");
  }
  if (mock.gamma < 0.0) throw ConfigError("mock.gamma must be non-negative");
  if (!(filter.max_missing_fraction >= 0.0) || !(filter.max_missing_fraction <= 1.0)) {
    throw ConfigError("filter.max_missing_fraction must lie in [0, 1]");
  }
  parse_loo_criterion(calibration.criterion);
  if (!(calibration.grid_min > 0.0) || !(calibration.grid_max >= calibration.grid_min)) {
    throw ConfigError("calibration grid bounds must satisfy 0 < grid_min <= grid_max");
  }
  if (calibration.grid_points < 1) throw ConfigError("calibration.grid_points must be positive");
  if (shapley.mode != "exact" && shapley.mode != "permutation") {
    throw ConfigError("shapley.mode must be exact or permutation, got \"" + shapley.mode + "\"");
  }
  if (shapley.permutations < 1) throw ConfigError("shapley.permutations must be positive");
  if (workers < 1) throw ConfigError("workers must be positive");
}

RunConfig default_config() { return RunConfig{}; }

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) {
      throw ConfigError("unknown config key " + (where.empty() ? key : where + "." + key));
    }
  }
}

template <typename T>
void read_into(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key " + (where.empty() ? std::string(key) : where + "." + key) +
                      ": " + e.what());
  }
}

std::string resolve_path(const std::filesystem::path& base, const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (base / p).lexically_normal().string();
}

}  // namespace

RunConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(path + ": config must be a JSON object");

  RunConfig c = default_config();
  reject_unknown_keys(j, {"data", "countries", "persona", "prompt", "backend", "mock", "filter",
                          "eval", "calibration", "shapley", "map", "seed", "workers", "out_root"},
                      "");
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown_keys(d, {"questions", "respondents", "descriptors", "guidance"}, "data");
    read_into(d, "questions", c.data.questions, "data");
    read_into(d, "respondents", c.data.respondents, "data");
    read_into(d, "descriptors", c.data.descriptors, "data");
    read_into(d, "guidance", c.data.guidance, "data");
  }
  read_into(j, "countries", c.countries, "");
  if (j.contains("persona")) {
    const json& p = j.at("persona");
    reject_unknown_keys(p, {"items", "mode", "include_nationality", "n", "attributes", "seed"},
                        "persona");
    read_into(p, "items", c.persona.items, "persona");
    read_into(p, "mode", c.persona.mode, "persona");
    read_into(p, "include_nationality", c.persona.include_nationality, "persona");
    read_into(p, "n", c.persona.n, "persona");
    read_into(p, "attributes", c.persona.attributes, "persona");
    if (p.contains("seed") && !p.at("seed").is_null()) {
      std::uint64_t s = 0;
      read_into(p, "seed", s, "persona");
      c.persona.seed = s;
    }
  }
  if (j.contains("prompt")) {
    const json& p = j.at("prompt");
    reject_unknown_keys(p, {"guidance_key"}, "prompt");
    read_into(p, "guidance_key", c.prompt.guidance_key, "prompt");
  }
  if (j.contains("backend")) {
    const json& b = j.at("backend");
    reject_unknown_keys(
        b, {"kind", "model_id", "endpoint", "cache", "rps", "max_retries", "first_token_fallback"},
        "backend");
    read_into(b, "kind", c.backend.kind, "backend");
    read_into(b, "model_id", c.backend.model_id, "backend");
    read_into(b, "endpoint", c.backend.endpoint, "backend");
    read_into(b, "cache", c.backend.cache, "backend");
    read_into(b, "rps", c.backend.requests_per_second, "backend");
    read_into(b, "max_retries", c.backend.max_retries, "backend");
    read_into(b, "first_token_fallback", c.backend.first_token_fallback, "backend");
  }
  if (j.contains("mock")) {
    const json& m = j.at("mock");
    reject_unknown_keys(m, {"gamma", "mean_rule"}, "mock");
    read_into(m, "gamma", c.mock.gamma, "mock");
    read_into(m, "mean_rule", c.mock.mean_rule, "mock");
  }
  if (j.contains("filter")) {
    const json& f = j.at("filter");
    reject_unknown_keys(f, {"max_missing_fraction"}, "filter");
    read_into(f, "max_missing_fraction", c.filter.max_missing_fraction, "filter");
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    reject_unknown_keys(e, {"questions"}, "eval");
    read_into(e, "questions", c.eval.questions, "eval");
  }
  if (j.contains("calibration")) {
    const json& cal = j.at("calibration");
    reject_unknown_keys(cal, {"criterion", "grid_min", "grid_max", "grid_points"}, "calibration");
    read_into(cal, "criterion", c.calibration.criterion, "calibration");
    read_into(cal, "grid_min", c.calibration.grid_min, "calibration");
    read_into(cal, "grid_max", c.calibration.grid_max, "calibration");
    read_into(cal, "grid_points", c.calibration.grid_points, "calibration");
  }
  if (j.contains("shapley")) {
    const json& s = j.at("shapley");
    reject_unknown_keys(s, {"mode", "permutations", "coalition_n", "questions"}, "shapley");
    read_into(s, "mode", c.shapley.mode, "shapley");
    read_into(s, "permutations", c.shapley.permutations, "shapley");
    read_into(s, "coalition_n", c.shapley.coalition_n, "shapley");
    read_into(s, "questions", c.shapley.questions, "shapley");
  }
  if (j.contains("map")) {
    const json& m = j.at("map");
    reject_unknown_keys(m, {"loadings"}, "map");
    read_into(m, "loadings", c.map.loadings, "map");
  }
  read_into(j, "seed", c.seed, "");
  read_into(j, "workers", c.workers, "");
  read_into(j, "out_root", c.out_root, "");

  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  c.data.questions = resolve_path(base, c.data.questions);
  c.data.respondents = resolve_path(base, c.data.respondents);
  c.data.descriptors = resolve_path(base, c.data.descriptors);
  c.data.guidance = resolve_path(base, c.data.guidance);
  c.backend.cache = resolve_path(base, c.backend.cache);
  c.map.loadings = resolve_path(base, c.map.loadings);

  c.validate();
  return c;
}

void apply_overrides(RunConfig& config, const CliOverrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.backend_kind) config.backend.kind = *overrides.backend_kind;
  config.validate();
}

}  // namespace persim
