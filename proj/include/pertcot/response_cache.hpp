#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

namespace pertcot {

struct CachedResponse {
  std::string raw_text;
  std::string finish_reason;
};

/// Content-addressed response store: `<dir>/<first 2 hex chars>/<digest>.json`.
/// Writes go through a temp file and a rename, so readers never see a partial
/// entry.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<CachedResponse> load(const std::string& digest) const;
  void store(const std::string& digest, const nlohmann::json& request_inputs,
             const CachedResponse& response) const;

  std::filesystem::path path_for(const std::string& digest) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

}  // namespace pertcot
