#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "persim/dataset.hpp"
#include "persim/persona.hpp"

namespace persim {

// System-prompt guidance text. Bodies may contain the {country} placeholder,
// substituted at render time.
struct GuidanceTemplate {
  std::string key;
  std::string body;
  bool operator==(const GuidanceTemplate&) const = default;
};

std::vector<GuidanceTemplate> load_guidance_templates(const std::string& path);
const GuidanceTemplate& find_guidance(const std::vector<GuidanceTemplate>& templates,
                                      const std::string& key);  // throws ConfigError

// Everything a backend needs to score one persona on one question. The
// profile/country/mode fields are metadata consumed by the mock backend and
// the run reports, not part of the prompt text.
struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::string question_id;
  std::vector<int> admissible_options;
  std::map<std::string, int> persona_profile;
  std::string country;
  std::string mode;

  bool operator==(const PromptBundle&) const = default;
};

// "Question:\n<text>\n\nScale: 1=<label>, 2=<label>, ..." with unlabeled
// options shown as bare numbers.
std::string render_question(const QuestionSpec& q);

// Persona lines joined by newlines; the nationality sentence (if any) comes
// first. Few-shot pairs render as "Q: <question text>\nA: <answer>".
std::string render_persona_block(const Persona& persona);

// Assembles the full prompt. Mode::Default ignores the guidance and uses the
// plain-assistant system text; every other mode substitutes {country} into
// the guidance body (error when the body needs a country and none is given)
// and appends the persona block under "Your persona:" when non-empty.
PromptBundle render_prompt(const Persona& persona, const QuestionSpec& q,
                           const GuidanceTemplate& guidance, Mode mode,
                           const std::optional<std::string>& country);

}  // namespace persim
