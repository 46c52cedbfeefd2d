#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pertcot/traces.hpp"

namespace pertcot {

/// Splits reasoning text into clauses at '.', '!' or '?' followed by
/// whitespace or end of text. Terminators inside parentheses and tokens on the
/// abbreviation list (e.g. "e.g.") do not split.
class SentenceSplitter {
 public:
  explicit SentenceSplitter(std::vector<std::string> abbreviations)
      : abbreviations_(std::move(abbreviations)) {}

  /// The list shipped in assets/abbreviations.txt.
  static const SentenceSplitter& builtin();
  /// One token per line; blank lines and '#' comments are ignored.
  static SentenceSplitter from_file(const std::filesystem::path& path);
  static SentenceSplitter from_text(std::string_view text);

  std::vector<std::string> split(std::string_view text) const;

  const std::vector<std::string>& abbreviations() const { return abbreviations_; }

 private:
  bool is_abbreviation(std::string_view token) const;

  std::vector<std::string> abbreviations_;
};

/// Fraction of clauses judged correct.
double factuality_score(const std::vector<bool>& clause_verdicts);

/// Stores verdicts and score on the trace. Throws DataError unless there is
/// exactly one verdict per clause of the think text.
ReasoningTrace annotate_factuality(ReasoningTrace trace, std::vector<bool> clause_verdicts,
                                   const SentenceSplitter& splitter = SentenceSplitter::builtin());

}  // namespace pertcot
