#include "pertcot/prompts.hpp"

#include <fstream>
#include <sstream>

#include "pertcot/digest.hpp"
#include "pertcot/embedded_assets.hpp"
#include "pertcot/errors.hpp"

namespace pertcot {
namespace {

std::string strip_final_newline(std::string text) {
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

Bindings record_bindings(const PerturbationRecord& record) {
  auto require = [](const std::string& value, const char* what) {
    if (trim(value).empty()) throw DataError(std::string("cannot render prompt: empty ") + what);
    return value;
  };
  return {{"gene_name", require(record.perturbation_gene, "perturbation gene")},
          {"target_gene", require(record.target_gene, "target gene")},
          {"cell_type", require(record.cell_line.str(), "cell type")}};
}

}  // namespace

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::StandardSystem:
      return "standard_system";
    case TemplateKind::StandardUser:
      return "standard_user";
    case TemplateKind::DirectionUser:
      return "direction_user";
    case TemplateKind::GeneratorSystem:
      return "generator_system";
    case TemplateKind::GeneratorUser:
      return "generator_user";
    case TemplateKind::CriticSystem:
      return "critic_system";
    case TemplateKind::CriticUser:
      return "critic_user";
  }
  return "unknown";
}

std::string_view template_file(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::StandardSystem:
      return "standard_system.txt";
    case TemplateKind::StandardUser:
    case TemplateKind::GeneratorUser:
      return "standard_user.txt";
    case TemplateKind::DirectionUser:
      return "direction_user.txt";
    case TemplateKind::GeneratorSystem:
      return "generator_system.txt";
    case TemplateKind::CriticSystem:
      return "critic_system.txt";
    case TemplateKind::CriticUser:
      return "critic_user.txt";
  }
  return "";
}

std::string substitute(std::string_view text, const Bindings& bindings) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      return out;
    }
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw ConfigError("unterminated placeholder at offset " + std::to_string(open));
    }
    const std::string name(text.substr(open + 2, close - open - 2));
    const auto it = bindings.find(name);
    if (it == bindings.end()) throw ConfigError("unbound template variable '" + name + "'");
    out.append(text.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 2;
  }
}

const TemplateStore& TemplateStore::builtin() {
  static const TemplateStore store = [] {
    TemplateStore s;
    for (auto kind : kAllTemplateKinds) {
      const auto name = "templates/" + std::string(template_file(kind));
      const auto bytes = assets::find(name);
      if (!bytes) throw ConfigError("missing embedded template " + name);
      s.set(kind, strip_final_newline(std::string(*bytes)));
    }
    return s;
  }();
  return store;
}

TemplateStore TemplateStore::from_directory(const std::filesystem::path& dir) {
  TemplateStore s;
  for (auto kind : kAllTemplateKinds) {
    const auto path = dir / template_file(kind);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read template '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    s.set(kind, strip_final_newline(buffer.str()));
  }
  return s;
}

void TemplateStore::set(TemplateKind kind, std::string text) {
  const auto i = static_cast<std::size_t>(kind);
  digests_[i] = sha256_hex(text);
  texts_[i] = std::move(text);
}

const std::string& TemplateStore::text(TemplateKind kind) const {
  return texts_[static_cast<std::size_t>(kind)];
}

const std::string& TemplateStore::digest(TemplateKind kind) const {
  return digests_[static_cast<std::size_t>(kind)];
}

PromptBundle PromptForge::render(TemplateKind system, TemplateKind user, Bindings bindings) const {
  PromptBundle bundle;
  bundle.system_text = substitute(store_->text(system), bindings);
  bundle.user_text = substitute(store_->text(user), bindings);
  bundle.kind_pair = {system, user};
  bundle.bindings = std::move(bindings);
  return bundle;
}

PromptBundle PromptForge::render_standard(const PerturbationRecord& record) const {
  return render(TemplateKind::StandardSystem, TemplateKind::StandardUser, record_bindings(record));
}

PromptBundle PromptForge::render_direction(const PerturbationRecord& record) const {
  return render(TemplateKind::StandardSystem, TemplateKind::DirectionUser, record_bindings(record));
}

PromptBundle PromptForge::render_generator(const PerturbationRecord& record) const {
  auto bindings = record_bindings(record);
  bindings["solution"] = std::string(to_string(record.label));
  return render(TemplateKind::GeneratorSystem, TemplateKind::GeneratorUser, std::move(bindings));
}

PromptBundle PromptForge::render_critic(std::string_view original_user_query,
                                        std::string_view generated_thinking) const {
  if (trim(original_user_query).empty()) {
    throw DataError("cannot render critic prompt: empty original user query");
  }
  if (trim(generated_thinking).empty()) {
    throw DataError("cannot render critic prompt: empty generated thinking");
  }
  return render(TemplateKind::CriticSystem, TemplateKind::CriticUser,
                {{"user_query", std::string(original_user_query)},
                 {"generated_thinking", std::string(generated_thinking)}});
}

}  // namespace pertcot
