#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pertcot/corpus.hpp"
#include "pertcot/evaluation.hpp"
#include "pertcot/traces.hpp"

namespace pertcot {

/// First line of every JSONL artifact, written as "# pertcot {...}". Readers
/// skip lines starting with '#'. Carries no timestamps so reruns stay
/// byte-identical.
struct Provenance {
  std::string stage;
  std::string config_digest;
  std::map<std::string, std::string> inputs;  // name -> sha256
  std::string version;

  nlohmann::json to_json() const;
  bool operator==(const Provenance&) const = default;
};

std::string tool_version();

/// Writes to a sibling temp file and renames over the target.
void write_text_atomic(const std::filesystem::path& path, const std::string& contents);

void write_jsonl(const std::filesystem::path& path, const Provenance& provenance,
                 const std::vector<nlohmann::json>& rows);

struct JsonlDocument {
  std::optional<nlohmann::json> provenance;
  std::vector<nlohmann::json> rows;
};

/// Throws DataError naming the line on malformed JSON.
JsonlDocument read_jsonl(const std::filesystem::path& path);

nlohmann::json to_json(const PerturbationRecord& record);
PerturbationRecord record_from_json(const nlohmann::json& row);

nlohmann::json to_json(const ReasoningTrace& trace);
ReasoningTrace trace_from_json(const nlohmann::json& row);

/// The SFT corpus row consumed by the trainer:
/// {system, user, target, label, trace_id}.
nlohmann::json to_json(const SftExample& example);
SftExample sft_from_json(const nlohmann::json& row);

nlohmann::json to_json(const Prediction& prediction);
Prediction prediction_from_json(const nlohmann::json& row);

void write_corpus(const std::filesystem::path& path, const Provenance& provenance,
                  const Corpus& corpus);
Corpus read_corpus_artifact(const std::filesystem::path& path);

std::vector<ReasoningTrace> read_traces(const std::filesystem::path& path);
std::vector<SftExample> read_sft(const std::filesystem::path& path);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

template <typename T>
std::vector<nlohmann::json> to_rows(const std::vector<T>& items) {
  std::vector<nlohmann::json> rows;
  rows.reserve(items.size());
  for (const auto& item : items) rows.push_back(to_json(item));
  return rows;
}

}  // namespace pertcot
