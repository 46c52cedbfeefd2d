#include "pertcot/factuality.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "pertcot/embedded_assets.hpp"
#include "pertcot/errors.hpp"

namespace pertcot {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

const SentenceSplitter& SentenceSplitter::builtin() {
  static const SentenceSplitter splitter = [] {
    const auto text = assets::find("abbreviations.txt");
    if (!text) throw ConfigError("missing embedded abbreviations list");
    return from_text(*text);
  }();
  return splitter;
}

SentenceSplitter SentenceSplitter::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read abbreviation list '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str());
}

SentenceSplitter SentenceSplitter::from_text(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream lines{std::string(text)};
  std::string line;
  while (std::getline(lines, line)) {
    const auto token = trim(line);
    if (token.empty() || token.front() == '#') continue;
    tokens.emplace_back(token);
  }
  return SentenceSplitter(std::move(tokens));
}

bool SentenceSplitter::is_abbreviation(std::string_view token) const {
  return std::find(abbreviations_.begin(), abbreviations_.end(), token) != abbreviations_.end();
}

std::vector<std::string> SentenceSplitter::split(std::string_view text) const {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  int depth = 0;
  auto flush = [&](std::size_t end) {
    const auto sentence = trim(text.substr(start, end - start));
    if (!sentence.empty()) sentences.emplace_back(sentence);
    start = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      depth = std::max(0, depth - 1);
    } else if ((c == '.' || c == '!' || c == '?') && depth == 0) {
      if (i + 1 < text.size() && !is_space(text[i + 1])) continue;
      if (c == '.') {
        auto word_start = i;
        while (word_start > 0 && !is_space(text[word_start - 1])) --word_start;
        if (is_abbreviation(text.substr(word_start, i + 1 - word_start))) continue;
      }
      flush(i + 1);
    }
  }
  flush(text.size());
  return sentences;
}

double factuality_score(const std::vector<bool>& clause_verdicts) {
  if (clause_verdicts.empty()) throw DataError("factuality score needs at least one clause");
  const auto correct = std::count(clause_verdicts.begin(), clause_verdicts.end(), true);
  return static_cast<double>(correct) / static_cast<double>(clause_verdicts.size());
}

ReasoningTrace annotate_factuality(ReasoningTrace trace, std::vector<bool> clause_verdicts,
                                   const SentenceSplitter& splitter) {
  const auto clauses = splitter.split(trace.think_text);
  if (clauses.size() != clause_verdicts.size()) {
    throw DataError("trace " + trace.trace_id + " has " + std::to_string(clauses.size()) +
                    " clauses but " + std::to_string(clause_verdicts.size()) + " verdicts");
  }
  trace.factuality = factuality_score(clause_verdicts);
  trace.clause_verdicts = std::move(clause_verdicts);
  return trace;
}

}  // namespace pertcot
