#include "persim/persona.hpp"

#include <algorithm>

#include "json.hpp"
#include "persim/errors.hpp"
#include "persim/util.hpp"

namespace persim {

using nlohmann::json;

Mode parse_mode(std::string_view name) {
  if (name == "default") return Mode::Default;
  if (name == "generic") return Mode::Generic;
  if (name == "country") return Mode::Country;
  if (name == "sociodemographic") return Mode::Sociodemographic;
  if (name == "value") return Mode::Value;
  if (name == "fewshot") return Mode::Fewshot;
  throw ConfigError("unknown persona mode: \"" + std::string(name) +
                    "\" (expected default, generic, country, sociodemographic, value, fewshot)");
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Default: return "default";
    case Mode::Generic: return "generic";
    case Mode::Country: return "country";
    case Mode::Sociodemographic: return "sociodemographic";
    case Mode::Value: return "value";
    case Mode::Fewshot: return "fewshot";
  }
  throw DomainError("invalid Mode value");
}

DescriptorCatalog::DescriptorCatalog(std::map<std::string, std::map<int, std::string>> entries,
                                     std::string provenance)
    : entries_(std::move(entries)), provenance_(std::move(provenance)) {
  for (const auto& [qid, by_option] : entries_) {
    if (by_option.empty()) throw ValidationError("descriptor catalog: no options for " + qid);
    for (const auto& [option, text] : by_option) {
      if (text.empty()) {
        throw ValidationError("descriptor catalog: empty text for " + qid + " option " +
                              std::to_string(option));
      }
      // Descriptors must read as second-person statements.
      if (text.rfind("You", 0) != 0) {
        throw ValidationError("descriptor catalog: text for " + qid + " option " +
                              std::to_string(option) + " must begin with \"You\": \"" + text +
                              "\"");
      }
    }
  }
}

const std::string* DescriptorCatalog::find(const std::string& question_id, int option) const {
  auto it = entries_.find(question_id);
  if (it == entries_.end()) return nullptr;
  auto jt = it->second.find(option);
  if (jt == it->second.end()) return nullptr;
  return &jt->second;
}

void DescriptorCatalog::check_coverage(const SurveyDataset& ds,
                                       const std::vector<std::string>& items) const {
  std::vector<std::string> gaps;
  for (const std::string& item : items) {
    const QuestionSpec& q = ds.question(item);
    for (int k : q.options()) {
      if (!find(item, k)) gaps.push_back(item + " option " + std::to_string(k));
    }
  }
  if (!gaps.empty()) {
    throw ValidationError("descriptor catalog missing entries: " + join(gaps, "; "));
  }
}

std::size_t DescriptorCatalog::size() const {
  std::size_t n = 0;
  for (const auto& [qid, by_option] : entries_) {
    (void)qid;
    n += by_option.size();
  }
  return n;
}

DescriptorCatalog load_descriptor_catalog(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("descriptors") || !j.at("descriptors").is_object()) {
    throw ParseError(path + ": expected {\"descriptors\": {question: {option: text}}}");
  }
  std::map<std::string, std::map<int, std::string>> entries;
  try {
    for (const auto& [qid, by_option] : j.at("descriptors").items()) {
      for (const auto& [key, text] : by_option.items()) {
        std::size_t used = 0;
        int option = 0;
        try {
          option = std::stoi(key, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != key.size()) {
          throw ParseError(path + ": non-integer option key \"" + key + "\" under " + qid);
        }
        entries[qid][option] = text.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": malformed descriptor entry: " + e.what());
  }
  std::string provenance;
  if (j.contains("provenance") && j.at("provenance").is_string()) {
    provenance = j.at("provenance").get<std::string>();
  }
  return DescriptorCatalog(std::move(entries), std::move(provenance));
}

std::map<std::string, int> Persona::profile() const {
  std::map<std::string, int> out;
  for (const Descriptor& d : descriptors) out[d.item] = d.option;
  for (const FewshotPair& p : fewshot_pairs) out[p.item] = p.answer;
  return out;
}

namespace {

// Sociodemographic sentence for one attribute. A few common attribute names
// get fluent phrasings; everything else falls back to a generic statement.
std::string attribute_sentence(const std::string& name, const std::string& value) {
  if (name == "age") return "You are " + value + " years old.";
  if (name == "gender" || name == "sex") return "You are " + value + ".";
  if (name == "education") return "You completed " + value + " education.";
  if (name == "income") return "You report " + value + " household income.";
  if (name == "employment") return "You are " + value + ".";
  if (name == "marital_status") return "You are " + value + ".";
  return "You report " + name + ": " + value + ".";
}

Persona build_persona_impl(const Respondent& resp, const std::vector<std::string>& items,
                           const DescriptorCatalog& catalog, const SurveyDataset& ds, Mode mode,
                           bool include_nationality,
                           const std::vector<std::string>& attribute_keys, bool allow_empty) {
  Persona p;
  p.mode = mode;
  p.source_respondent = resp.id;
  if (include_nationality) p.nationality = resp.country;

  switch (mode) {
    case Mode::Default:
    case Mode::Generic:
    case Mode::Country:
      // Persona-free modes carry no units; nothing to collect.
      break;
    case Mode::Value:
      for (const std::string& item : items) {
        auto it = resp.answers.find(item);
        if (it == resp.answers.end()) continue;  // unanswered items are skipped
        const std::string* text = catalog.find(item, it->second);
        if (!text) {
          throw ValidationError("descriptor catalog missing entry for " + item + " option " +
                                std::to_string(it->second) + " (respondent " + resp.id + ")");
        }
        p.descriptors.push_back({item, it->second, *text});
      }
      break;
    case Mode::Fewshot:
      for (const std::string& item : items) {
        auto it = resp.answers.find(item);
        if (it == resp.answers.end()) continue;
        p.fewshot_pairs.push_back({item, ds.question(item).text, it->second});
      }
      break;
    case Mode::Sociodemographic:
      for (const std::string& key : attribute_keys) {
        auto it = resp.attributes.find(key);
        if (it == resp.attributes.end()) continue;
        p.descriptors.push_back({key, 0, attribute_sentence(key, it->second)});
      }
      break;
  }

  const bool needs_units =
      mode == Mode::Value || mode == Mode::Fewshot || mode == Mode::Sociodemographic;
  if (!allow_empty && needs_units && p.empty()) {
    throw ValidationError("respondent " + resp.id + " yields an empty " +
                          std::string(to_string(mode)) + " persona");
  }
  return p;
}

}  // namespace

Persona build_persona(const Respondent& resp, const std::vector<std::string>& items,
                      const DescriptorCatalog& catalog, const SurveyDataset& ds, Mode mode,
                      bool include_nationality, const std::vector<std::string>& attribute_keys) {
  return build_persona_impl(resp, items, catalog, ds, mode, include_nationality, attribute_keys,
                            /*allow_empty=*/false);
}

Population sample_population(const SurveyDataset& ds, const std::string& country,
                             const std::vector<std::string>& items,
                             const DescriptorCatalog& catalog, std::size_t n, std::uint64_t seed,
                             Mode mode, bool include_nationality,
                             const std::vector<std::string>& attribute_keys) {
  for (const std::string& item : items) ds.question(item);  // fail fast on unknown items

  Population pop;
  pop.country = country;
  pop.seed = seed;
  pop.items = items;

  const std::vector<const Respondent*> all = ds.respondents_in(country);
  const bool needs_units =
      mode == Mode::Value || mode == Mode::Fewshot || mode == Mode::Sociodemographic;
  std::vector<const Respondent*> eligible;
  eligible.reserve(all.size());
  for (const Respondent* r : all) {
    if (!needs_units) {
      eligible.push_back(r);
      continue;
    }
    bool any = false;
    if (mode == Mode::Sociodemographic) {
      for (const std::string& key : attribute_keys) {
        if (r->attributes.count(key)) {
          any = true;
          break;
        }
      }
    } else {
      for (const std::string& item : items) {
        if (r->answers.count(item)) {
          any = true;
          break;
        }
      }
    }
    if (any) eligible.push_back(r);
  }

  if (n == 0) return pop;
  if (eligible.empty()) {
    throw ValidationError("no eligible respondents in " + country + " for mode " +
                          std::string(to_string(mode)));
  }

  Rng rng(seed);
  pop.personas.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Respondent* r = eligible[rng.uniform_index(eligible.size())];
    pop.personas.push_back(build_persona(*r, items, catalog, ds, mode, include_nationality,
                                         attribute_keys));
  }
  return pop;
}

Population item_subset_population(const Population& pop, const std::set<std::string>& item_subset) {
  const std::set<std::string> full(pop.items.begin(), pop.items.end());
  for (const std::string& item : item_subset) {
    if (!full.count(item)) {
      throw ValidationError("item_subset_population: " + item + " is not among the population's items");
    }
  }
  Population out;
  out.country = pop.country;
  out.seed = pop.seed;
  out.items.reserve(item_subset.size());
  for (const std::string& item : pop.items) {
    if (item_subset.count(item)) out.items.push_back(item);
  }
  out.personas.reserve(pop.personas.size());
  for (const Persona& p : pop.personas) {
    Persona q;
    q.mode = p.mode;
    q.source_respondent = p.source_respondent;
    q.nationality = p.nationality;
    for (const Descriptor& d : p.descriptors) {
      if (item_subset.count(d.item)) q.descriptors.push_back(d);
    }
    for (const FewshotPair& f : p.fewshot_pairs) {
      if (item_subset.count(f.item)) q.fewshot_pairs.push_back(f);
    }
    out.personas.push_back(std::move(q));
  }
  return out;
}

}  // namespace persim
