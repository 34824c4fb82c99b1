#include "persim/prompt.hpp"

#include "json.hpp"
#include "persim/errors.hpp"
#include "persim/util.hpp"

namespace persim {

using nlohmann::json;

std::vector<GuidanceTemplate> load_guidance_templates(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("templates") || !j.at("templates").is_array()) {
    throw ParseError(path + ": expected {\"templates\": [{\"key\": ..., \"body\": ...}]}");
  }
  std::vector<GuidanceTemplate> out;
  std::map<std::string, bool> seen;
  for (const json& entry : j.at("templates")) {
    GuidanceTemplate t;
    try {
      t.key = entry.at("key").get<std::string>();
      t.body = entry.at("body").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(path + ": malformed template entry: " + e.what());
    }
    if (t.key.empty()) throw ValidationError(path + ": template with empty key");
    if (t.body.empty()) throw ValidationError(path + ": template " + t.key + " has an empty body");
    if (seen[t.key]) throw ValidationError(path + ": duplicate template key " + t.key);
    seen[t.key] = true;
    out.push_back(std::move(t));
  }
  if (out.empty()) throw ValidationError(path + ": no templates");
  return out;
}

const GuidanceTemplate& find_guidance(const std::vector<GuidanceTemplate>& templates,
                                      const std::string& key) {
  for (const GuidanceTemplate& t : templates) {
    if (t.key == key) return t;
  }
  std::vector<std::string> keys;
  keys.reserve(templates.size());
  for (const GuidanceTemplate& t : templates) keys.push_back(t.key);
  throw ConfigError("unknown guidance key \"" + key + "\" (available: " + join(keys, ", ") + ")");
}

std::string render_question(const QuestionSpec& q) {
  q.validate();
  std::string out = "Question:\n" + q.text + "\n\nScale: ";
  bool first = true;
  for (int k : q.options()) {
    if (!first) out += ", ";
    first = false;
    out += std::to_string(k) + "=" + q.label_for(k);
  }
  return out;
}

std::string render_persona_block(const Persona& persona) {
  std::vector<std::string> lines;
  if (persona.nationality) {
    lines.push_back("You are from " + *persona.nationality + ".");
  }
  for (const Descriptor& d : persona.descriptors) lines.push_back(d.text);
  for (const FewshotPair& f : persona.fewshot_pairs) {
    lines.push_back("Q: " + f.question_text + "\nA: " + std::to_string(f.answer));
  }
  return join(lines, "\n");
}

namespace {

// Rejects bodies that still contain {placeholder} tokens after substitution.
void check_no_placeholders(const std::string& text, const std::string& key) {
  std::size_t open = text.find('{');
  while (open != std::string::npos) {
    const std::size_t close = text.find('}', open);
    if (close != std::string::npos && close > open + 1 && close - open <= 40) {
      throw ValidationError("guidance template " + key + ": unresolved placeholder " +
                            text.substr(open, close - open + 1));
    }
    open = text.find('{', open + 1);
  }
}

}  // namespace

PromptBundle render_prompt(const Persona& persona, const QuestionSpec& q,
                           const GuidanceTemplate& guidance, Mode mode,
                           const std::optional<std::string>& country) {
  PromptBundle bundle;
  bundle.question_id = q.id;
  bundle.admissible_options = q.options();
  bundle.mode = std::string(to_string(mode));
  if (country) {
    bundle.country = *country;
  } else if (persona.nationality) {
    bundle.country = *persona.nationality;
  }

  if (mode == Mode::Default) {
    bundle.system_text = "You are a helpful assistant.";
  } else {
    std::string body = guidance.body;
    if (body.find("{country}") != std::string::npos) {
      if (!country) {
        throw ValidationError("guidance template " + guidance.key +
                              " requires a country and none was provided");
      }
      replace_all(body, "{country}", *country);
    }
    check_no_placeholders(body, guidance.key);
    bundle.system_text = body;
    const std::string block = render_persona_block(persona);
    if (!block.empty()) {
      bundle.system_text += "\n\nYour persona: " + block;
    }
  }

  bundle.user_text = render_question(q) + "\n\nRespond with ONLY the single integer (" +
                     std::to_string(q.scale_min) + "-" + std::to_string(q.scale_max) + "):";
  bundle.persona_profile = persona.profile();
  return bundle;
}

}  // namespace persim
