#include "persim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "persim/errors.hpp"
#include "persim/util.hpp"

namespace persim {

using nlohmann::json;

std::vector<int> QuestionSpec::options() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(range()) + 1);
  for (int k = scale_min; k <= scale_max; ++k) out.push_back(k);
  return out;
}

std::string QuestionSpec::label_for(int option) const {
  auto it = labels.find(option);
  if (it != labels.end()) return it->second;
  return std::to_string(option);
}

void QuestionSpec::validate() const {
  if (id.empty()) throw ValidationError("question with empty id");
  if (scale_min >= scale_max) {
    throw ValidationError("question " + id + ": scale [" + std::to_string(scale_min) + ", " +
                          std::to_string(scale_max) + "] must satisfy scale_min < scale_max");
  }
  for (const auto& [k, text] : labels) {
    if (k < scale_min || k > scale_max) {
      throw ValidationError("question " + id + ": label for option " + std::to_string(k) +
                            " lies outside the scale");
    }
    if (text.empty()) {
      throw ValidationError("question " + id + ": empty label for option " + std::to_string(k));
    }
  }
}

SurveyDataset::SurveyDataset(std::vector<QuestionSpec> questions, std::vector<Respondent> respondents)
    : questions_(std::move(questions)), respondents_(std::move(respondents)) {
  for (std::size_t i = 0; i < questions_.size(); ++i) {
    questions_[i].validate();
    auto [it, inserted] = question_index_.emplace(questions_[i].id, i);
    (void)it;
    if (!inserted) throw ValidationError("duplicate question id: " + questions_[i].id);
  }
  std::vector<std::string> range_errors;
  for (std::size_t i = 0; i < respondents_.size(); ++i) {
    const Respondent& r = respondents_[i];
    if (r.country.empty()) {
      throw ValidationError("respondent " + r.id + ": empty country code");
    }
    for (const auto& [qid, value] : r.answers) {
      auto it = question_index_.find(qid);
      if (it == question_index_.end()) {
        throw ValidationError("respondent " + r.id + ": answer to unknown question " + qid);
      }
      const QuestionSpec& q = questions_[it->second];
      if (value < q.scale_min || value > q.scale_max) {
        range_errors.push_back("respondent " + r.id + ", question " + qid + ": answer " +
                               std::to_string(value) + " outside [" + std::to_string(q.scale_min) +
                               ", " + std::to_string(q.scale_max) + "]");
      }
    }
    by_country_[r.country].push_back(i);
  }
  if (!range_errors.empty()) {
    throw ValidationError("out-of-range answers:\n  " + join(range_errors, "\n  "));
  }
}

bool SurveyDataset::has_question(const std::string& id) const {
  return question_index_.count(id) > 0;
}

const QuestionSpec& SurveyDataset::question(const std::string& id) const {
  auto it = question_index_.find(id);
  if (it == question_index_.end()) throw ValidationError("unknown question id: " + id);
  return questions_[it->second];
}

std::vector<std::string> SurveyDataset::countries() const {
  std::vector<std::string> out;
  out.reserve(by_country_.size());
  for (const auto& [code, idx] : by_country_) {
    (void)idx;
    out.push_back(code);
  }
  return out;
}

bool SurveyDataset::has_country(const std::string& code) const {
  return by_country_.count(code) > 0;
}

std::vector<const Respondent*> SurveyDataset::respondents_in(const std::string& country) const {
  auto it = by_country_.find(country);
  if (it == by_country_.end()) throw ValidationError("unknown country code: " + country);
  std::vector<const Respondent*> out;
  out.reserve(it->second.size());
  for (std::size_t i : it->second) out.push_back(&respondents_[i]);
  return out;
}

bool SurveyDataset::operator==(const SurveyDataset& other) const {
  return questions_ == other.questions_ && respondents_ == other.respondents_;
}

double HumanDistribution::mean() const {
  if (n_valid == 0) {
    throw EmptyDistributionError("no valid answers for question " + question_id + " in " + country);
  }
  double s = 0.0;
  for (const auto& [option, n] : counts) s += static_cast<double>(option) * static_cast<double>(n);
  return s / static_cast<double>(n_valid);
}

double HumanDistribution::probability(int option) const {
  if (n_valid == 0) {
    throw EmptyDistributionError("no valid answers for question " + question_id + " in " + country);
  }
  auto it = counts.find(option);
  if (it == counts.end()) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(n_valid);
}

ResponseDistribution HumanDistribution::to_distribution(const QuestionSpec& q) const {
  if (q.id != question_id) {
    throw ValidationError("question mismatch: distribution for " + question_id +
                          " rendered against question " + q.id);
  }
  std::vector<double> probs;
  probs.reserve(static_cast<std::size_t>(q.range()) + 1);
  for (int k : q.options()) probs.push_back(probability(k));
  return ResponseDistribution::make(question_id, q.options(), std::move(probs));
}

namespace {

json parse_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports "... parse error at line L, column C: ..."; keep it
    // and prefix the offending file.
    throw ParseError(path + ": " + e.what());
  }
}

QuestionSpec question_from_json(const std::string& path, const json& j) {
  if (!j.is_object()) throw ParseError(path + ": question entry is not an object");
  QuestionSpec q;
  try {
    q.id = j.at("id").get<std::string>();
    q.text = j.at("text").get<std::string>();
    q.scale_min = j.at("scale_min").get<int>();
    q.scale_max = j.at("scale_max").get<int>();
    if (j.contains("battery") && !j.at("battery").is_null()) {
      q.battery = j.at("battery").get<std::string>();
    }
    if (j.contains("labels") && !j.at("labels").is_null()) {
      const json& labels = j.at("labels");
      if (labels.is_array()) {
        // Full label list, aligned with scale_min..scale_max.
        if (static_cast<int>(labels.size()) != q.scale_max - q.scale_min + 1) {
          throw ValidationError("question " + q.id + ": label array has " +
                                std::to_string(labels.size()) + " entries for a scale of " +
                                std::to_string(q.scale_max - q.scale_min + 1));
        }
        for (std::size_t i = 0; i < labels.size(); ++i) {
          q.labels[q.scale_min + static_cast<int>(i)] = labels[i].get<std::string>();
        }
      } else if (labels.is_object()) {
        // Sparse map, e.g. endpoint anchors: {"1": "...", "10": "..."}.
        for (const auto& [key, value] : labels.items()) {
          std::size_t used = 0;
          int k = 0;
          try {
            k = std::stoi(key, &used);
          } catch (const std::exception&) {
            used = 0;
          }
          if (used != key.size()) {
            throw ValidationError("question " + q.id + ": non-integer label key \"" + key + "\"");
          }
          q.labels[k] = value.get<std::string>();
        }
      } else {
        throw ValidationError("question " + q.id + ": labels must be an array or object");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": malformed question entry: " + e.what());
  }
  q.validate();
  return q;
}

}  // namespace

std::vector<QuestionSpec> load_question_catalog(const std::string& path) {
  const json j = parse_json_file(path);
  const json* arr = nullptr;
  if (j.is_array()) {
    arr = &j;
  } else if (j.is_object() && j.contains("questions") && j.at("questions").is_array()) {
    arr = &j.at("questions");
  } else {
    throw ParseError(path + ": expected an array of questions or {\"questions\": [...]}");
  }
  std::vector<QuestionSpec> out;
  out.reserve(arr->size());
  std::set<std::string> seen;
  for (const json& entry : *arr) {
    QuestionSpec q = question_from_json(path, entry);
    if (!seen.insert(q.id).second) throw ValidationError("duplicate question id: " + q.id);
    out.push_back(std::move(q));
  }
  return out;
}

void save_question_catalog(const std::string& path, const std::vector<QuestionSpec>& questions) {
  json arr = json::array();
  for (const QuestionSpec& q : questions) {
    json entry{{"id", q.id}, {"text", q.text}, {"scale_min", q.scale_min}, {"scale_max", q.scale_max}};
    if (q.battery) entry["battery"] = *q.battery;
    if (!q.labels.empty()) {
      json labels = json::object();
      for (const auto& [k, text] : q.labels) labels[std::to_string(k)] = text;
      entry["labels"] = labels;
    }
    arr.push_back(std::move(entry));
  }
  write_file_atomic(path, json{{"questions", arr}}.dump(2) + "\n");
}

namespace {

// Minimal CSV: comma separated, double quotes for fields containing commas,
// quotes escaped by doubling. Returns one row of cells; `line` is 1-based.
std::vector<std::string> parse_csv_line(const std::string& path, long line, const std::string& text) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"' && cell.empty()) {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  if (quoted) throw ParseError(path, line, static_cast<long>(text.size()) + 1, "unterminated quote");
  cells.push_back(cell);
  return cells;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

SurveyDataset load_dataset(const std::string& question_catalog_path,
                           const std::string& respondent_table_path) {
  std::vector<QuestionSpec> questions = load_question_catalog(question_catalog_path);
  std::set<std::string> question_ids;
  for (const QuestionSpec& q : questions) question_ids.insert(q.id);

  std::ifstream in(respondent_table_path, std::ios::binary);
  if (!in) throw Error("cannot open file for reading: " + respondent_table_path);
  std::string line_text;
  if (!std::getline(in, line_text)) {
    throw ParseError(respondent_table_path, 1, 1, "empty file; expected a header row");
  }
  if (!line_text.empty() && line_text.back() == '\r') line_text.pop_back();
  const std::vector<std::string> header = parse_csv_line(respondent_table_path, 1, line_text);
  if (header.size() < 2) {
    throw ParseError(respondent_table_path, 1, 1,
                     "header must start with a respondent-id column and a country column");
  }

  std::vector<Respondent> respondents;
  long line_no = 1;
  while (std::getline(in, line_text)) {
    ++line_no;
    if (!line_text.empty() && line_text.back() == '\r') line_text.pop_back();
    if (trim(line_text).empty()) continue;
    const std::vector<std::string> cells = parse_csv_line(respondent_table_path, line_no, line_text);
    if (cells.size() != header.size()) {
      throw ParseError(respondent_table_path, line_no, 1,
                       "row has " + std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(header.size()));
    }
    Respondent r;
    r.id = trim(cells[0]);
    r.country = trim(cells[1]);
    if (r.id.empty()) throw ParseError(respondent_table_path, line_no, 1, "empty respondent id");
    if (r.country.empty()) {
      throw ParseError(respondent_table_path, line_no, 2, "empty country code");
    }
    for (std::size_t c = 2; c < header.size(); ++c) {
      const std::string& column = header[c];
      const std::string value = trim(cells[c]);
      if (question_ids.count(column)) {
        if (value.empty()) continue;  // missing
        std::size_t used = 0;
        long parsed = 0;
        try {
          parsed = std::stol(value, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != value.size()) {
          throw ParseError(respondent_table_path, line_no, static_cast<long>(c) + 1,
                           "question column " + column + " holds non-integer value \"" + value +
                               "\"");
        }
        if (parsed < 0) continue;  // survey convention: negative codes mean missing
        r.answers[column] = static_cast<int>(parsed);
      } else if (!value.empty()) {
        r.attributes[column] = value;
      }
    }
    respondents.push_back(std::move(r));
  }
  return SurveyDataset(std::move(questions), std::move(respondents));
}

void save_respondent_table(const std::string& path, const SurveyDataset& ds) {
  // Columns: id, country, every catalog question (catalog order), then the
  // union of attribute names in sorted order.
  std::set<std::string> attr_names;
  for (const Respondent& r : ds.respondents()) {
    for (const auto& [name, value] : r.attributes) {
      (void)value;
      attr_names.insert(name);
    }
  }
  std::ostringstream out;
  std::vector<std::string> header{"respondent_id", "country"};
  for (const QuestionSpec& q : ds.questions()) header.push_back(q.id);
  header.insert(header.end(), attr_names.begin(), attr_names.end());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(header[i]);
  }
  out << '\n';
  for (const Respondent& r : ds.respondents()) {
    out << csv_escape(r.id) << ',' << csv_escape(r.country);
    for (const QuestionSpec& q : ds.questions()) {
      out << ',';
      auto it = r.answers.find(q.id);
      if (it != r.answers.end()) out << it->second;
    }
    for (const std::string& name : attr_names) {
      out << ',';
      auto it = r.attributes.find(name);
      if (it != r.attributes.end()) out << csv_escape(it->second);
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<std::string> filter_questions(const SurveyDataset& ds,
                                          const std::vector<std::string>& countries,
                                          double max_missing_fraction) {
  if (countries.empty()) throw ValidationError("filter_questions: empty country list");
  if (!(max_missing_fraction >= 0.0) || !(max_missing_fraction <= 1.0)) {
    throw DomainError("filter_questions: max_missing_fraction must lie in [0, 1]");
  }
  std::vector<std::vector<const Respondent*>> groups;
  groups.reserve(countries.size());
  for (const std::string& c : countries) groups.push_back(ds.respondents_in(c));

  std::vector<std::string> kept;
  for (const QuestionSpec& q : ds.questions()) {
    bool ok = true;
    for (const auto& group : groups) {
      long missing = 0;
      for (const Respondent* r : group) {
        if (!r->answers.count(q.id)) ++missing;
      }
      const double fraction = static_cast<double>(missing) / static_cast<double>(group.size());
      if (!(fraction < max_missing_fraction)) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(q.id);
  }
  return kept;
}

HumanDistribution human_distribution(const SurveyDataset& ds, const std::string& question_id,
                                     const std::string& country) {
  const QuestionSpec& q = ds.question(question_id);
  (void)q;
  HumanDistribution h;
  h.question_id = question_id;
  h.country = country;
  for (const Respondent* r : ds.respondents_in(country)) {
    auto it = r->answers.find(question_id);
    if (it == r->answers.end()) {
      ++h.n_missing;
    } else {
      ++h.counts[it->second];
      ++h.n_valid;
    }
  }
  if (h.n_valid == 0) {
    throw EmptyDistributionError("no valid answers for question " + question_id + " in " + country);
  }
  return h;
}

}  // namespace persim
