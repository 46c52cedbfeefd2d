#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pertcot/label.hpp"

namespace pertcot {

enum class Answer { NotDE, Up, Down, Unknown };

enum class Validity { Valid, MissingTags, UnknownLabel, MultipleAnswers };

std::string_view to_string(Answer answer);
std::string_view to_string(Validity validity);
std::optional<Answer> parse_answer_name(std::string_view name);
std::optional<Validity> parse_validity(std::string_view name);

inline Answer to_answer(Label label) {
  switch (label) {
    case Label::Up:
      return Answer::Up;
    case Label::Down:
      return Answer::Down;
    case Label::NotDE:
      return Answer::NotDE;
  }
  return Answer::NotDE;
}

std::optional<Label> to_label(Answer answer);

/// Literal text of the abstain option offered by the generation prompts.
inline constexpr std::string_view kUnknownAnswerText = "I do not know";

/// Body of a `<name>...</name>` block.
struct TaggedBlock {
  std::string name;  // lowercase
  std::string_view content;
};

/// Scans `text` for blocks whose lowercase tag name is in `names`. An open tag
/// swallows everything up to its first matching close tag, so tags nested in
/// another block's content are not reported. Unclosed and stray tags are
/// skipped.
std::vector<TaggedBlock> scan_blocks(std::string_view text,
                                     const std::vector<std::string_view>& names);

struct ParsedAnswer {
  std::optional<std::string> think_text;
  Answer answer = Answer::NotDE;
  Validity validity = Validity::MissingTags;

  bool valid() const { return validity == Validity::Valid; }
  bool operator==(const ParsedAnswer&) const = default;
};

/// Total: never throws. On any failure the answer field is NotDE and the
/// validity flag says why.
ParsedAnswer parse_answer(std::string_view raw_text);

enum class Grade { Excellent, Good, Average, Bad, Terrible };

std::string_view to_string(Grade grade);
std::optional<Grade> parse_grade(std::string_view text);

struct CriticVerdict {
  Grade grade = Grade::Terrible;
  std::string justification;
  Validity validity = Validity::MissingTags;

  bool valid() const { return validity == Validity::Valid; }
  bool operator==(const CriticVerdict&) const = default;
};

/// Accepts reasoning and evaluation blocks in either order; only the
/// evaluation block determines the grade.
CriticVerdict parse_critic(std::string_view raw_text);

enum class BinaryDE { DE, NotDE };

/// Up/Down -> DE, NotDE -> NotDE. Throws DataError for invalid or Unknown.
BinaryDE reduce_to_binary_de(const ParsedAnswer& answer);

}  // namespace pertcot
