#include "redct/prompt.hpp"

#include <sstream>

#include "redct/common.hpp"

namespace redct::labeler {

namespace {

constexpr std::string_view kTopic = "{TOPIC}";
constexpr std::string_view kStatement = "{STATEMENT}";

const char* const kStanceZeroShot =
    "{STATEMENT}\n"
    "Which of the following best describes the above social media statements' stance "
    "regarding {TOPIC}?\n"
    "A) For\n"
    "B) Against\n"
    "C) Neutral\n"
    "Only respond with 'For', 'Against', or 'Neutral'.";

const char* const kStanceCotExplain =
    "Stance classification is the task of determining the expressed or implied opinion, or "
    "stance, of a statement toward a specific target. Think step-by-step and explain the "
    "stance (For, Against, or Neutral) of the following social media statement towards "
    "{TOPIC}.\n"
    "target: {TOPIC}\n"
    "statement: {STATEMENT}\n"
    "explanation:";

const char* const kStanceCotAnswer =
    "Therefore, based on your explanation, what is the stance of the following social media "
    "statement toward the target?\n"
    "target: {TOPIC}\n"
    "statement: {STATEMENT}\n"
    "A) For\n"
    "B) Against\n"
    "C) Neutral\n"
    "Only respond with 'For', 'Against', or 'Neutral'. If the statement is not relevant to "
    "{TOPIC}, select Neutral.";

const char* const kMisinformation =
    "\"{STATEMENT}\"\n"
    "Which of the following describes the above news headline?\n"
    "A) Misinformation\n"
    "B) Trustworthy\n"
    "Only respond with 'Misinformation' or 'Trustworthy'";

const char* const kIdeology =
    "statement: \"{STATEMENT}\"\n"
    "Which of the following leanings would a political scientist say that the above "
    "statement has?\n"
    "A: Conservative\n"
    "B: Neutral\n"
    "C: Liberal\n"
    "Only respond with 'Conservative', 'Neutral', or 'Liberal'";

const char* const kHumor =
    "Joke: {STATEMENT}\n"
    "Would most people find the above joke humorous? You must pick between 'True' or "
    "'False'.\n"
    "You cannot use any words other than 'True' or 'False'.";

// Single pass, so slot syntax inside the substituted text is left alone.
std::string substitute(std::string_view turn, std::string_view topic, std::string_view statement) {
  std::string out;
  out.reserve(turn.size() + statement.size());
  std::size_t i = 0;
  while (i < turn.size()) {
    if (turn.substr(i, kTopic.size()) == kTopic) {
      out += topic;
      i += kTopic.size();
    } else if (turn.substr(i, kStatement.size()) == kStatement) {
      out += statement;
      i += kStatement.size();
    } else {
      out.push_back(turn[i++]);
    }
  }
  return out;
}

}  // namespace

bool PromptTemplate::uses_topic() const {
  for (const auto& t : turns) {
    if (t.find(kTopic) != std::string::npos) return true;
  }
  return false;
}

PromptTemplate parse_template(std::string name, const std::string& text) {
  PromptTemplate t{std::move(name), {}};
  std::istringstream in(text);
  std::string line;
  std::string current;
  bool first_line = true;
  while (std::getline(in, line)) {
    if (line == kTurnSeparator) {
      t.turns.push_back(current);
      current.clear();
      first_line = true;
      continue;
    }
    if (!first_line) current.push_back('\n');
    current += line;
    first_line = false;
  }
  t.turns.push_back(current);
  if (t.turns.size() > 2) throw ConfigError("template '" + t.name + "' has more than two turns");
  for (const auto& turn : t.turns) {
    if (turn.find(kStatement) == std::string::npos) {
      throw ConfigError("template '" + t.name + "': every turn needs a {STATEMENT} slot");
    }
  }
  return t;
}

std::string format_template(const PromptTemplate& t) {
  std::string out;
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    if (i > 0) {
      out.push_back('\n');
      out += kTurnSeparator;
      out.push_back('\n');
    }
    out += t.turns[i];
  }
  out.push_back('\n');
  return out;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  auto text = read_file(path);
  // A trailing newline terminates the last line; it is not part of the prompt.
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return parse_template(path.stem().string(), text);
}

std::optional<PromptTemplate> builtin_template(const std::string& task_id, PromptStyle style) {
  if (task_id == "stance") {
    if (style == PromptStyle::zero_shot) return PromptTemplate{"stance_zero_shot", {kStanceZeroShot}};
    return PromptTemplate{"stance_zero_shot_cot", {kStanceCotExplain, kStanceCotAnswer}};
  }
  if (style != PromptStyle::zero_shot) return std::nullopt;
  if (task_id == "misinformation") return PromptTemplate{"misinformation_zero_shot", {kMisinformation}};
  if (task_id == "ideology") return PromptTemplate{"ideology_zero_shot", {kIdeology}};
  if (task_id == "humor") return PromptTemplate{"humor_zero_shot", {kHumor}};
  return std::nullopt;
}

std::vector<std::pair<std::string, PromptStyle>> builtin_template_keys() {
  return {{"stance", PromptStyle::zero_shot},
          {"stance", PromptStyle::zero_shot_cot},
          {"misinformation", PromptStyle::zero_shot},
          {"ideology", PromptStyle::zero_shot},
          {"humor", PromptStyle::zero_shot}};
}

PromptTemplate template_for(const TaskSchema& schema) {
  if (auto t = builtin_template(schema.task_id(), schema.prompt_style())) return *t;
  throw ConfigError("no built-in " + to_string(schema.prompt_style()) + " template for task '" +
                    schema.task_id() + "'; configure a template file");
}

RenderedPrompt render_prompt(const Document& doc, const PromptTemplate& tmpl) {
  if (tmpl.uses_topic() && (!doc.target || doc.target->empty())) {
    throw DataError("document '" + doc.doc_id + "' has no target for template '" + tmpl.name +
                    "'");
  }
  RenderedPrompt out;
  const std::string_view topic = doc.target ? std::string_view(*doc.target) : std::string_view();
  for (const auto& turn : tmpl.turns) out.turns.push_back(substitute(turn, topic, doc.text));
  return out;
}

RenderedPrompt render_prompt(const Document& doc, const TaskSchema& schema) {
  return render_prompt(doc, template_for(schema));
}

}  // namespace redct::labeler
