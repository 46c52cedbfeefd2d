#include "pertcot/label.hpp"

#include <algorithm>
#include <cctype>

namespace pertcot {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Up:
      return "upregulated";
    case Label::Down:
      return "downregulated";
    case Label::NotDE:
      return "not differentially expressed";
  }
  return "not differentially expressed";
}

std::optional<Label> parse_label(std::string_view text) {
  const auto trimmed = trim(text);
  for (Label label : kAllLabels) {
    if (iequals(trimmed, to_string(label))) return label;
  }
  return std::nullopt;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Test:
      return "test";
    case Split::Unassigned:
      return "unassigned";
  }
  return "unassigned";
}

std::optional<Split> parse_split(std::string_view text) {
  const auto trimmed = trim(text);
  for (Split split : {Split::Unassigned, Split::Train, Split::Test}) {
    if (iequals(trimmed, to_string(split))) return split;
  }
  if (trimmed.empty()) return Split::Unassigned;
  return std::nullopt;
}

std::string_view trim(std::string_view text) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return text;
}

bool iequals(std::string_view a, std::string_view b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    return std::tolower(static_cast<unsigned char>(x)) ==
           std::tolower(static_cast<unsigned char>(y));
  });
}

}  // namespace pertcot
