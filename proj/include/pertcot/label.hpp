#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace pertcot {

/// Outcome of knocking down a perturbation gene, as observed on a target gene.
enum class Label { NotDE, Up, Down };

inline constexpr std::array<Label, 3> kAllLabels = {Label::NotDE, Label::Up, Label::Down};

/// Exact serialized forms: "upregulated", "downregulated",
/// "not differentially expressed".
std::string_view to_string(Label label);

/// Case-insensitive match of the trimmed text against the three serialized
/// forms. Anything else, including near-misses like "Up-Regulated", is nullopt.
std::optional<Label> parse_label(std::string_view text);

constexpr std::size_t index_of(Label label) { return static_cast<std::size_t>(label); }

constexpr bool is_differentially_expressed(Label label) { return label != Label::NotDE; }

enum class Split { Unassigned, Train, Test };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

// Small string helpers shared by the parsers.
std::string_view trim(std::string_view text);
bool iequals(std::string_view a, std::string_view b);

}  // namespace pertcot
