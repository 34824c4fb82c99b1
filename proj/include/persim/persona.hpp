#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "persim/dataset.hpp"

namespace persim {

// Conditioning modes, from empty persona to answer-echoing few-shot pairs.
enum class Mode {
  Default,           // plain assistant, no persona block
  Generic,           // guidance only, still no persona block
  Country,           // guidance mentions the country, empty persona
  Sociodemographic,  // persona from respondent attributes
  Value,             // persona from natural-language answer descriptors
  Fewshot,           // persona from literal Q/A pairs
};

Mode parse_mode(std::string_view name);  // throws ConfigError on unknown names
std::string_view to_string(Mode mode);

// Natural-language descriptor catalog: one second-person sentence per
// (question id, answer option). `provenance` is free-text documentation.
class DescriptorCatalog {
 public:
  DescriptorCatalog() = default;
  DescriptorCatalog(std::map<std::string, std::map<int, std::string>> entries,
                    std::string provenance);

  const std::string* find(const std::string& question_id, int option) const;
  // Throws ValidationError listing every (item, option) combination that the
  // catalog fails to cover for the given items.
  void check_coverage(const SurveyDataset& ds, const std::vector<std::string>& items) const;
  std::size_t size() const;
  const std::string& provenance() const { return provenance_; }

 private:
  std::map<std::string, std::map<int, std::string>> entries_;
  std::string provenance_;
};

DescriptorCatalog load_descriptor_catalog(const std::string& path);

// One persona line derived from an answered item.
struct Descriptor {
  std::string item;
  int option = 0;
  std::string text;
  bool operator==(const Descriptor&) const = default;
};

// One few-shot exemplar: the item's question text plus the literal answer.
struct FewshotPair {
  std::string item;
  std::string question_text;
  int answer = 0;
  bool operator==(const FewshotPair&) const = default;
};

struct Persona {
  Mode mode = Mode::Value;
  std::optional<std::string> source_respondent;
  std::optional<std::string> nationality;  // set when include_nationality
  std::vector<Descriptor> descriptors;     // value / sociodemographic modes
  std::vector<FewshotPair> fewshot_pairs;  // fewshot mode

  bool empty() const { return descriptors.empty() && fewshot_pairs.empty(); }
  // item -> chosen option; consumed by the mock backend's planted-mean rules.
  std::map<std::string, int> profile() const;

  bool operator==(const Persona&) const = default;
};

struct Population {
  std::string country;
  std::uint64_t seed = 0;
  std::vector<std::string> items;
  std::vector<Persona> personas;

  bool operator==(const Population&) const = default;
};

// Builds one persona from a respondent. `items` selects which answers become
// descriptors (value / fewshot modes); `attribute_keys` selects which table
// attributes become sociodemographic lines. Throws ValidationError when the
// respondent contributes nothing under the requested mode.
Persona build_persona(const Respondent& resp, const std::vector<std::string>& items,
                      const DescriptorCatalog& catalog, const SurveyDataset& ds, Mode mode,
                      bool include_nationality,
                      const std::vector<std::string>& attribute_keys = {});

// Samples n respondents of one country uniformly with replacement (seeded,
// reproducible across platforms) and builds one persona each. Respondents
// that would yield an empty persona are excluded before sampling.
Population sample_population(const SurveyDataset& ds, const std::string& country,
                             const std::vector<std::string>& items,
                             const DescriptorCatalog& catalog, std::size_t n, std::uint64_t seed,
                             Mode mode, bool include_nationality,
                             const std::vector<std::string>& attribute_keys = {});

// Same personas restricted to a subset of items (for ablations). The subset
// must be contained in pop.items; personas may become empty.
Population item_subset_population(const Population& pop, const std::set<std::string>& item_subset);

}  // namespace persim
