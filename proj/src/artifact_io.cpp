#include "pertcot/artifact_io.hpp"

#include <fstream>
#include <sstream>

#include "pertcot/errors.hpp"

#ifndef PERTCOT_VERSION
#define PERTCOT_VERSION "0.0.0"
#endif

namespace pertcot {
namespace {

using json = nlohmann::json;

constexpr std::string_view kHeaderPrefix = "# pertcot ";

template <typename T>
T required(const json& row, const char* key) {
  if (!row.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  return row.at(key).get<T>();
}

template <typename T>
std::optional<T> optional_field(const json& row, const char* key) {
  if (!row.contains(key) || row.at(key).is_null()) return std::nullopt;
  return row.at(key).get<T>();
}

Label label_field(const json& row, const char* key) {
  const auto text = required<std::string>(row, key);
  const auto label = parse_label(text);
  if (!label) throw DataError("unknown label '" + text + "'");
  return *label;
}

json nullable(const std::optional<std::string>& value) { return value ? json(*value) : json(nullptr); }

template <typename Fn>
auto parse_rows(const std::filesystem::path& path, Fn&& fn) {
  const auto doc = read_jsonl(path);
  std::vector<decltype(fn(doc.rows.front()))> out;
  out.reserve(doc.rows.size());
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    try {
      out.push_back(fn(doc.rows[i]));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": row " + std::to_string(i + 1) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ": row " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

json Provenance::to_json() const {
  return {{"stage", stage}, {"config_digest", config_digest}, {"inputs", inputs}, {"version", version}};
}

std::string tool_version() { return PERTCOT_VERSION; }

void write_text_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out.flush()) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_jsonl(const std::filesystem::path& path, const Provenance& provenance,
                 const std::vector<json>& rows) {
  std::string body;
  body += kHeaderPrefix;
  body += provenance.to_json().dump();
  body += '\n';
  for (const auto& row : rows) {
    body += row.dump();
    body += '\n';
  }
  write_text_atomic(path, body);
}

JsonlDocument read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  JsonlDocument doc;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line.front() == '#') {
      if (line_no == 1 && line.starts_with(kHeaderPrefix)) {
        auto header = json::parse(line.substr(kHeaderPrefix.size()), nullptr, false);
        if (!header.is_discarded()) doc.provenance = std::move(header);
      }
      continue;
    }
    auto row = json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object()) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + " is not a JSON object");
    }
    doc.rows.push_back(std::move(row));
  }
  return doc;
}

json to_json(const PerturbationRecord& record) {
  return {{"cell_line", record.cell_line.str()},
          {"perturbation", record.perturbation_gene},
          {"gene", record.target_gene},
          {"label", to_string(record.label)},
          {"split", to_string(record.split)}};
}

PerturbationRecord record_from_json(const json& row) {
  PerturbationRecord record;
  record.cell_line = CellLine(required<std::string>(row, "cell_line"));
  record.perturbation_gene = required<std::string>(row, "perturbation");
  record.target_gene = required<std::string>(row, "gene");
  record.label = label_field(row, "label");
  const auto split_text = optional_field<std::string>(row, "split").value_or("");
  const auto split = parse_split(split_text);
  if (!split) throw DataError("unknown split '" + split_text + "'");
  record.split = *split;
  return record;
}

json to_json(const ReasoningTrace& trace) {
  json row = {{"trace_id", trace.trace_id},
              {"record", to_json(trace.record)},
              {"approach", to_string(trace.approach)},
              {"think", trace.think_text},
              {"answer", to_string(trace.answer)},
              {"generator_validity", to_string(trace.generator_validity)},
              {"generator_model", trace.generator_model},
              {"generator_raw", trace.generator_raw},
              {"generator_cache_key", trace.generator_cache_key},
              {"generator_attempts", trace.generator_attempts},
              {"critic_grade", trace.critic_grade ? json(to_string(*trace.critic_grade)) : json(nullptr)},
              {"critic_validity",
               trace.critic_validity ? json(to_string(*trace.critic_validity)) : json(nullptr)},
              {"critic_justification", trace.critic_justification},
              {"critic_model", nullable(trace.critic_model)},
              {"critic_raw", trace.critic_raw},
              {"critic_cache_key", trace.critic_cache_key},
              {"retained", trace.retained},
              {"error", trace.error}};
  if (!trace.clause_verdicts.empty()) row["clause_verdicts"] = trace.clause_verdicts;
  if (trace.factuality) row["factuality"] = *trace.factuality;
  return row;
}

ReasoningTrace trace_from_json(const json& row) {
  ReasoningTrace trace;
  trace.trace_id = required<std::string>(row, "trace_id");
  trace.record = record_from_json(row.at("record"));
  const auto approach = parse_approach(required<std::string>(row, "approach"));
  if (!approach) throw DataError("unknown approach");
  trace.approach = *approach;
  trace.think_text = required<std::string>(row, "think");
  const auto answer = parse_answer_name(required<std::string>(row, "answer"));
  if (!answer) throw DataError("unknown answer");
  trace.answer = *answer;
  const auto validity = parse_validity(required<std::string>(row, "generator_validity"));
  if (!validity) throw DataError("unknown generator validity");
  trace.generator_validity = *validity;
  trace.generator_model = required<std::string>(row, "generator_model");
  trace.generator_raw = required<std::string>(row, "generator_raw");
  trace.generator_cache_key = required<std::string>(row, "generator_cache_key");
  trace.generator_attempts = required<int>(row, "generator_attempts");
  if (auto grade = optional_field<std::string>(row, "critic_grade")) {
    trace.critic_grade = parse_grade(*grade);
    if (!trace.critic_grade) throw DataError("unknown grade '" + *grade + "'");
  }
  if (auto v = optional_field<std::string>(row, "critic_validity")) {
    trace.critic_validity = parse_validity(*v);
    if (!trace.critic_validity) throw DataError("unknown critic validity '" + *v + "'");
  }
  trace.critic_justification = required<std::string>(row, "critic_justification");
  trace.critic_model = optional_field<std::string>(row, "critic_model");
  trace.critic_raw = required<std::string>(row, "critic_raw");
  trace.critic_cache_key = required<std::string>(row, "critic_cache_key");
  trace.retained = required<bool>(row, "retained");
  trace.error = required<std::string>(row, "error");
  if (row.contains("clause_verdicts")) trace.clause_verdicts = row["clause_verdicts"].get<std::vector<bool>>();
  trace.factuality = optional_field<double>(row, "factuality");
  return trace;
}

json to_json(const SftExample& example) {
  return {{"system", example.system_text},
          {"user", example.user_text},
          {"target", example.target_text},
          {"label", to_string(example.label)},
          {"trace_id", example.source_trace_id}};
}

SftExample sft_from_json(const json& row) {
  SftExample example;
  example.system_text = required<std::string>(row, "system");
  example.user_text = required<std::string>(row, "user");
  example.target_text = required<std::string>(row, "target");
  example.label = label_field(row, "label");
  example.source_trace_id = required<std::string>(row, "trace_id");
  return example;
}

json to_json(const Prediction& p) {
  return {{"record", to_json(p.record)},
          {"model", p.model_name},
          {"protocol", to_string(p.protocol)},
          {"raw", p.raw_text},
          {"think", nullable(p.parsed.think_text)},
          {"answer", to_string(p.parsed.answer)},
          {"validity", to_string(p.parsed.validity)},
          {"predicted_label", to_string(p.predicted_label())},
          {"invalid", p.invalid()},
          {"de_score", p.de_score},
          {"direction_score", p.direction_score ? json(*p.direction_score) : json(nullptr)},
          {"cache_key", p.cache_key},
          {"error", p.error}};
}

Prediction prediction_from_json(const json& row) {
  Prediction p;
  p.record = record_from_json(row.at("record"));
  p.model_name = required<std::string>(row, "model");
  const auto protocol = parse_protocol(required<std::string>(row, "protocol"));
  if (!protocol) throw DataError("unknown protocol");
  p.protocol = *protocol;
  p.raw_text = required<std::string>(row, "raw");
  p.parsed.think_text = optional_field<std::string>(row, "think");
  const auto answer = parse_answer_name(required<std::string>(row, "answer"));
  if (!answer) throw DataError("unknown answer");
  p.parsed.answer = *answer;
  const auto validity = parse_validity(required<std::string>(row, "validity"));
  if (!validity) throw DataError("unknown validity");
  p.parsed.validity = *validity;
  p.de_score = required<double>(row, "de_score");
  p.direction_score = optional_field<double>(row, "direction_score");
  p.cache_key = required<std::string>(row, "cache_key");
  p.error = required<std::string>(row, "error");
  return p;
}

void write_corpus(const std::filesystem::path& path, const Provenance& provenance,
                  const Corpus& corpus) {
  write_jsonl(path, provenance, to_rows(corpus));
}

Corpus read_corpus_artifact(const std::filesystem::path& path) {
  return parse_rows(path, record_from_json);
}

std::vector<ReasoningTrace> read_traces(const std::filesystem::path& path) {
  return parse_rows(path, trace_from_json);
}

std::vector<SftExample> read_sft(const std::filesystem::path& path) {
  return parse_rows(path, sft_from_json);
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  return parse_rows(path, prediction_from_json);
}

}  // namespace pertcot
