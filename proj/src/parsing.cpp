#include "pertcot/parsing.hpp"

#include <algorithm>
#include <cctype>

#include "pertcot/errors.hpp"

namespace pertcot {
namespace {

struct TagToken {
  std::size_t begin;  // offset of '<'
  std::size_t end;    // one past '>'
  std::string name;   // lowercase
  bool closing;
};

// Reads a tag of the form <name> or </name> at `pos`; names are ASCII letters.
std::optional<TagToken> read_tag(std::string_view text, std::size_t pos) {
  std::size_t i = pos + 1;
  bool closing = false;
  if (i < text.size() && text[i] == '/') {
    closing = true;
    ++i;
  }
  std::string name;
  while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) {
    name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
    ++i;
  }
  if (name.empty() || i >= text.size() || text[i] != '>') return std::nullopt;
  return TagToken{pos, i + 1, std::move(name), closing};
}

std::vector<TagToken> tokenize(std::string_view text, const std::vector<std::string_view>& names) {
  std::vector<TagToken> tags;
  for (auto pos = text.find('<'); pos != std::string_view::npos; pos = text.find('<', pos + 1)) {
    auto tag = read_tag(text, pos);
    if (tag && std::find(names.begin(), names.end(), tag->name) != names.end()) {
      tags.push_back(std::move(*tag));
    }
  }
  return tags;
}

// Resolves repeated blocks: identical parses collapse to the first one,
// disagreement flags MultipleAnswers.
template <typename T, typename Parse>
std::pair<std::optional<T>, Validity> resolve(const std::vector<std::string_view>& bodies,
                                             Parse parse) {
  if (bodies.empty()) return {std::nullopt, Validity::MissingTags};
  const auto first = parse(bodies.front());
  for (std::size_t i = 1; i < bodies.size(); ++i) {
    if (parse(bodies[i]) != first) return {std::nullopt, Validity::MultipleAnswers};
  }
  if (!first) return {std::nullopt, Validity::UnknownLabel};
  return {first, Validity::Valid};
}

std::vector<std::string_view> bodies_named(const std::vector<TaggedBlock>& blocks,
                                           std::string_view name) {
  std::vector<std::string_view> out;
  for (const auto& b : blocks) {
    if (b.name == name) out.push_back(b.content);
  }
  return out;
}

}  // namespace

std::string_view to_string(Answer answer) {
  switch (answer) {
    case Answer::Up:
      return "upregulated";
    case Answer::Down:
      return "downregulated";
    case Answer::NotDE:
      return "not differentially expressed";
    case Answer::Unknown:
      return kUnknownAnswerText;
  }
  return "not differentially expressed";
}

std::optional<Answer> parse_answer_name(std::string_view name) {
  if (auto label = parse_label(name)) return to_answer(*label);
  if (iequals(trim(name), kUnknownAnswerText)) return Answer::Unknown;
  return std::nullopt;
}

std::string_view to_string(Validity validity) {
  switch (validity) {
    case Validity::Valid:
      return "valid";
    case Validity::MissingTags:
      return "missing_tags";
    case Validity::UnknownLabel:
      return "unknown_label";
    case Validity::MultipleAnswers:
      return "multiple_answers";
  }
  return "missing_tags";
}

std::optional<Validity> parse_validity(std::string_view name) {
  for (auto v : {Validity::Valid, Validity::MissingTags, Validity::UnknownLabel,
                 Validity::MultipleAnswers}) {
    if (name == to_string(v)) return v;
  }
  return std::nullopt;
}

std::optional<Label> to_label(Answer answer) {
  switch (answer) {
    case Answer::Up:
      return Label::Up;
    case Answer::Down:
      return Label::Down;
    case Answer::NotDE:
      return Label::NotDE;
    case Answer::Unknown:
      return std::nullopt;
  }
  return std::nullopt;
}

std::vector<TaggedBlock> scan_blocks(std::string_view text,
                                     const std::vector<std::string_view>& names) {
  const auto tags = tokenize(text, names);
  std::vector<TaggedBlock> blocks;
  std::size_t i = 0;
  while (i < tags.size()) {
    const auto& open = tags[i];
    if (open.closing) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tags.size() && !(tags[j].closing && tags[j].name == open.name)) ++j;
    if (j == tags.size()) {
      // Unclosed: later tags still get a chance.
      ++i;
      continue;
    }
    blocks.push_back({open.name, text.substr(open.end, tags[j].begin - open.end)});
    i = j + 1;
  }
  return blocks;
}

ParsedAnswer parse_answer(std::string_view raw_text) {
  const auto blocks = scan_blocks(raw_text, {"think", "answer"});
  ParsedAnswer parsed;
  if (auto thinks = bodies_named(blocks, "think"); !thinks.empty()) {
    parsed.think_text = std::string(trim(thinks.front()));
  }
  const auto [answer, validity] = resolve<Answer>(bodies_named(blocks, "answer"), parse_answer_name);
  parsed.validity = validity;
  parsed.answer = answer.value_or(Answer::NotDE);
  return parsed;
}

std::string_view to_string(Grade grade) {
  switch (grade) {
    case Grade::Excellent:
      return "excellent";
    case Grade::Good:
      return "good";
    case Grade::Average:
      return "average";
    case Grade::Bad:
      return "bad";
    case Grade::Terrible:
      return "terrible";
  }
  return "terrible";
}

std::optional<Grade> parse_grade(std::string_view text) {
  const auto trimmed = trim(text);
  for (auto g : {Grade::Excellent, Grade::Good, Grade::Average, Grade::Bad, Grade::Terrible}) {
    if (iequals(trimmed, to_string(g))) return g;
  }
  return std::nullopt;
}

CriticVerdict parse_critic(std::string_view raw_text) {
  const auto blocks = scan_blocks(raw_text, {"reasoning", "evaluation"});
  CriticVerdict verdict;
  if (auto reasons = bodies_named(blocks, "reasoning"); !reasons.empty()) {
    verdict.justification = std::string(trim(reasons.front()));
  }
  const auto [grade, validity] = resolve<Grade>(bodies_named(blocks, "evaluation"), parse_grade);
  verdict.validity = validity;
  verdict.grade = grade.value_or(Grade::Terrible);
  return verdict;
}

BinaryDE reduce_to_binary_de(const ParsedAnswer& answer) {
  if (!answer.valid()) {
    throw DataError("cannot reduce an invalid answer (" + std::string(to_string(answer.validity)) +
                    ")");
  }
  switch (answer.answer) {
    case Answer::Up:
    case Answer::Down:
      return BinaryDE::DE;
    case Answer::NotDE:
      return BinaryDE::NotDE;
    case Answer::Unknown:
      break;
  }
  throw DataError("cannot reduce an 'I do not know' answer to DE/not-DE");
}

}  // namespace pertcot
