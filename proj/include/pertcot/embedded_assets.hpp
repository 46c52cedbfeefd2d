#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace pertcot::assets {

struct EmbeddedAsset {
  std::string_view name;  // path relative to assets/, e.g. "templates/critic_user.txt"
  std::string_view bytes;
};

std::span<const EmbeddedAsset> all();

inline std::optional<std::string_view> find(std::string_view name) {
  for (const auto& asset : all()) {
    if (asset.name == name) return asset.bytes;
  }
  return std::nullopt;
}

}  // namespace pertcot::assets
