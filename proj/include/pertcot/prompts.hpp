#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>

#include "pertcot/corpus.hpp"

namespace pertcot {

enum class TemplateKind {
  StandardSystem,
  StandardUser,
  DirectionUser,
  GeneratorSystem,
  GeneratorUser,
  CriticSystem,
  CriticUser,
};

inline constexpr std::array<TemplateKind, 7> kAllTemplateKinds = {
    TemplateKind::StandardSystem, TemplateKind::StandardUser,  TemplateKind::DirectionUser,
    TemplateKind::GeneratorSystem, TemplateKind::GeneratorUser, TemplateKind::CriticSystem,
    TemplateKind::CriticUser};

std::string_view to_string(TemplateKind kind);

/// Asset file backing a template kind, relative to the template directory.
/// The generator user query shares the standard user query file.
std::string_view template_file(TemplateKind kind);

using Bindings = std::map<std::string, std::string>;

/// Substitutes `{{name}}` placeholders in one left-to-right pass; substituted
/// values are never rescanned. Throws ConfigError on an unbound or
/// unterminated placeholder.
std::string substitute(std::string_view text, const Bindings& bindings);

/// Immutable set of template texts. Asset files end with a single newline
/// that is not part of the template.
class TemplateStore {
 public:
  /// Templates compiled into the binary from assets/templates/.
  static const TemplateStore& builtin();
  static TemplateStore from_directory(const std::filesystem::path& dir);

  const std::string& text(TemplateKind kind) const;
  /// SHA-256 of the template text.
  const std::string& digest(TemplateKind kind) const;

 private:
  TemplateStore() = default;
  void set(TemplateKind kind, std::string text);

  std::array<std::string, kAllTemplateKinds.size()> texts_;
  std::array<std::string, kAllTemplateKinds.size()> digests_;
};

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::pair<TemplateKind, TemplateKind> kind_pair;
  Bindings bindings;

  bool operator==(const PromptBundle&) const = default;
};

/// Renders the four prompt families. Pure; safe to share across threads.
class PromptForge {
 public:
  explicit PromptForge(const TemplateStore& store = TemplateStore::builtin()) : store_(&store) {}

  PromptBundle render_standard(const PerturbationRecord& record) const;
  /// Standard system prompt, direction-of-change user query.
  PromptBundle render_direction(const PerturbationRecord& record) const;
  /// Ground-truth label goes into the solution slot of the system prompt.
  PromptBundle render_generator(const PerturbationRecord& record) const;
  PromptBundle render_critic(std::string_view original_user_query,
                             std::string_view generated_thinking) const;

  const TemplateStore& store() const { return *store_; }

 private:
  PromptBundle render(TemplateKind system, TemplateKind user, Bindings bindings) const;

  const TemplateStore* store_;
};

}  // namespace pertcot
