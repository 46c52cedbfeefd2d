#include "pertcot/response_cache.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "pertcot/errors.hpp"

namespace pertcot {

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create cache directory '" + dir_.string() + "': " + ec.message());
}

std::filesystem::path ResponseCache::path_for(const std::string& digest) const {
  return dir_ / digest.substr(0, 2) / (digest + ".json");
}

std::optional<CachedResponse> ResponseCache::load(const std::string& digest) const {
  std::ifstream in(path_for(digest), std::ios::binary);
  if (!in) return std::nullopt;
  // An unreadable entry is a miss; the next store overwrites it.
  const auto entry = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (!entry.is_object() || !entry.contains("raw_text") || !entry["raw_text"].is_string()) {
    return std::nullopt;
  }
  return CachedResponse{entry["raw_text"].get<std::string>(),
                        entry.value("finish_reason", std::string("stop"))};
}

void ResponseCache::store(const std::string& digest, const nlohmann::json& request_inputs,
                          const CachedResponse& response) const {
  const auto target = path_for(digest);
  std::filesystem::create_directories(target.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << ::getpid() << "." << std::this_thread::get_id();
  const auto temp = target.parent_path() / (target.filename().string() + suffix.str());
  {
    nlohmann::json entry = {{"digest", digest},
                            {"request", request_inputs},
                            {"raw_text", response.raw_text},
                            {"finish_reason", response.finish_reason}};
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    out << entry.dump(2) << '\n';
    if (!out) throw ConfigError("cannot write cache entry '" + temp.string() + "'");
  }
  std::filesystem::rename(temp, target);
}

}  // namespace pertcot
