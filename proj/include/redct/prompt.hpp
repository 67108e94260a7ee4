#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "redct/types.hpp"

namespace redct::labeler {

/// A prompt template with `{TOPIC}` and `{STATEMENT}` placeholders.
///
/// Single-turn templates hold one turn. Chain-of-thought templates hold
/// two: the explanation request, and the answer-selection turn that is
/// sent after the model's explanation.
struct PromptTemplate {
  std::string name;
  std::vector<std::string> turns;

  bool uses_topic() const;
};

/// Separator line between the two turns in a template file.
inline constexpr std::string_view kTurnSeparator = "===TURN===";

PromptTemplate parse_template(std::string name, const std::string& text);
PromptTemplate load_template(const std::filesystem::path& path);
std::string format_template(const PromptTemplate& t);

/// Default templates shipped with the tool, keyed by task id and style:
/// stance (zero_shot, zero_shot_cot), misinformation, ideology, humor.
std::optional<PromptTemplate> builtin_template(const std::string& task_id, PromptStyle style);
std::vector<std::pair<std::string, PromptStyle>> builtin_template_keys();

/// Builtin template for the schema, or throws ConfigError.
PromptTemplate template_for(const TaskSchema& schema);

struct RenderedPrompt {
  std::vector<std::string> turns;
};

/// Substitutes TOPIC and STATEMENT. Throws DataError when the template
/// needs a topic and the document has none.
RenderedPrompt render_prompt(const Document& doc, const PromptTemplate& tmpl);
RenderedPrompt render_prompt(const Document& doc, const TaskSchema& schema);

}  // namespace redct::labeler
