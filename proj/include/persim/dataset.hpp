#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "persim/distribution.hpp"

namespace persim {

// One survey question with an admissible integer scale [scale_min, scale_max].
// `labels` may cover every option, only some (endpoint anchors), or none.
struct QuestionSpec {
  std::string id;
  std::string text;
  int scale_min = 0;
  int scale_max = 0;
  std::map<int, std::string> labels;
  std::optional<std::string> battery;

  int range() const { return scale_max - scale_min; }
  std::vector<int> options() const;
  // Label for an option, falling back to the bare number when unlabeled.
  std::string label_for(int option) const;
  void validate() const;

  bool operator==(const QuestionSpec&) const = default;
};

// One survey respondent. A question id absent from `answers` is missing.
// Non-question table columns land in `attributes` verbatim.
struct Respondent {
  std::string id;
  std::string country;
  std::map<std::string, int> answers;
  std::map<std::string, std::string> attributes;

  bool operator==(const Respondent&) const = default;
};

class SurveyDataset {
 public:
  SurveyDataset(std::vector<QuestionSpec> questions, std::vector<Respondent> respondents);

  const std::vector<QuestionSpec>& questions() const { return questions_; }
  const std::vector<Respondent>& respondents() const { return respondents_; }

  bool has_question(const std::string& id) const;
  const QuestionSpec& question(const std::string& id) const;  // throws ValidationError

  std::vector<std::string> countries() const;  // sorted, unique
  bool has_country(const std::string& code) const;
  // Respondents of one country in table order. Throws on unknown codes.
  std::vector<const Respondent*> respondents_in(const std::string& country) const;

  bool operator==(const SurveyDataset& other) const;

 private:
  std::vector<QuestionSpec> questions_;
  std::vector<Respondent> respondents_;
  std::map<std::string, std::size_t> question_index_;
  std::map<std::string, std::vector<std::size_t>> by_country_;
};

// Aggregated human answers for one (question, country) cell.
struct HumanDistribution {
  std::string question_id;
  std::string country;
  std::map<int, long> counts;
  long n_valid = 0;
  long n_missing = 0;

  double mean() const;                  // throws EmptyDistributionError when n_valid == 0
  double probability(int option) const; // relative frequency among valid answers
  // Probability vector over the full scale of q, zero for unobserved options.
  ResponseDistribution to_distribution(const QuestionSpec& q) const;
};

std::vector<QuestionSpec> load_question_catalog(const std::string& path);
void save_question_catalog(const std::string& path, const std::vector<QuestionSpec>& questions);

// Loads the question catalog and the respondent CSV table. CSV layout:
// column 1 = respondent id, column 2 = country code, remaining columns are
// question ids (integer cells; empty or negative = missing) or free-text
// attributes. Out-of-range answers are collected and reported together.
SurveyDataset load_dataset(const std::string& question_catalog_path,
                           const std::string& respondent_table_path);
void save_respondent_table(const std::string& path, const SurveyDataset& ds);

// Ids of questions whose missing-answer fraction is strictly below
// max_missing_fraction in every listed country, in catalog order.
std::vector<std::string> filter_questions(const SurveyDataset& ds,
                                          const std::vector<std::string>& countries,
                                          double max_missing_fraction = 0.20);

HumanDistribution human_distribution(const SurveyDataset& ds, const std::string& question_id,
                                     const std::string& country);

}  // namespace persim
