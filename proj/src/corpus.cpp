#include "pertcot/corpus.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <unordered_map>

#include "pertcot/errors.hpp"

namespace pertcot {
namespace {

using json = nlohmann::json;

// std::shuffle and the std distributions are implementation-defined; splits
// must be byte-identical across toolchains, so index draws are done here.
class SeededIndexer {
 public:
  explicit SeededIndexer(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return draw % bound;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  // First `count` entries of a Fisher-Yates pass over `indices`.
  std::vector<std::size_t> choose(std::vector<std::size_t> indices, std::size_t count) {
    for (std::size_t i = 0; i < count && i < indices.size(); ++i) {
      std::swap(indices[i], indices[i + below(indices.size() - i)]);
    }
    indices.resize(std::min(count, indices.size()));
    return indices;
  }

 private:
  std::mt19937_64 engine_;
};

struct RawRow {
  std::size_t line = 0;
  std::string cell_line, perturbation, gene, label;
  std::optional<std::string> split;
};

PerturbationRecord to_record(const RawRow& row) {
  auto require = [&](const std::string& value, const char* field) {
    if (trim(value).empty()) {
      throw DataError("row " + std::to_string(row.line) + ": empty field '" + field + "'");
    }
    return std::string(trim(value));
  };
  PerturbationRecord record;
  record.cell_line = CellLine(require(row.cell_line, "cell_line"));
  record.perturbation_gene = require(row.perturbation, "perturbation");
  record.target_gene = require(row.gene, "gene");
  const auto label = parse_label(row.label);
  if (!label) {
    throw DataError("row " + std::to_string(row.line) + ": unknown label string '" + row.label +
                    "'");
  }
  record.label = *label;
  if (row.split) {
    const auto split = parse_split(*row.split);
    if (!split) {
      throw DataError("row " + std::to_string(row.line) + ": unknown split '" + *row.split + "'");
    }
    record.split = *split;
  }
  return record;
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw DataError("row " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(std::move(field));
  return fields;
}

std::vector<RawRow> read_csv(std::istream& in) {
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> columns;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line, line_no);
    if (columns.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) columns[std::string(trim(fields[i]))] = i;
      for (const char* required : {"cell_line", "perturbation", "gene", "label"}) {
        if (!columns.contains(required)) {
          throw DataError(std::string("csv header lacks column '") + required + "'");
        }
      }
      continue;
    }
    auto get = [&](const char* name) -> std::string {
      const auto idx = columns.at(name);
      if (idx >= fields.size()) {
        throw DataError("row " + std::to_string(line_no) + ": missing column '" + name + "'");
      }
      return fields[idx];
    };
    RawRow row{line_no, get("cell_line"), get("perturbation"), get("gene"), get("label"), {}};
    if (columns.contains("split")) row.split = get("split");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<RawRow> read_jsonl(std::istream& in) {
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    json object;
    try {
      object = json::parse(body);
    } catch (const json::parse_error& e) {
      throw DataError("row " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    if (!object.is_object()) {
      throw DataError("row " + std::to_string(line_no) + ": expected a JSON object");
    }
    auto get = [&](const char* key) -> std::string {
      const auto it = object.find(key);
      if (it == object.end() || !it->is_string()) {
        throw DataError("row " + std::to_string(line_no) + ": missing string field '" + key + "'");
      }
      return it->get<std::string>();
    };
    RawRow row{line_no, get("cell_line"), get("perturbation"), get("gene"), get("label"), {}};
    if (object.contains("split")) row.split = get("split");
    rows.push_back(std::move(row));
  }
  return rows;
}

void require_fraction(double fraction, const char* what) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError(std::string(what) + " must lie strictly between 0 and 1, got " +
                      std::to_string(fraction));
  }
}

}  // namespace

CellLine::CellLine(std::string_view name) : name_(trim(name)) {
  if (name_.empty()) throw DataError("cell line name must be non-empty");
}

std::string RecordKey::to_string() const { return cell_line + "/" + perturbation + "/" + gene; }

CorpusFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  return iequals(ext, ".csv") ? CorpusFormat::Csv : CorpusFormat::Jsonl;
}

Corpus ingest_corpus(const std::filesystem::path& source) {
  return ingest_corpus(source, format_from_path(source));
}

Corpus ingest_corpus(const std::filesystem::path& source, CorpusFormat format) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file '" + source.string() + "'");
  const auto rows = format == CorpusFormat::Csv ? read_csv(in) : read_jsonl(in);

  Corpus corpus;
  corpus.reserve(rows.size());
  std::map<RecordKey, std::size_t> seen;
  for (const auto& row : rows) {
    auto record = to_record(row);
    auto [it, inserted] = seen.emplace(record.key(), row.line);
    if (!inserted) {
      throw DataError("duplicate key " + record.key().to_string() + " at rows " +
                      std::to_string(it->second) + " and " + std::to_string(row.line));
    }
    corpus.push_back(std::move(record));
  }
  return corpus;
}

CorpusStats compute_stats(const Corpus& corpus) {
  CorpusStats stats;
  for (const auto& record : corpus) {
    auto& line = stats.per_cell_line[record.cell_line.str()];
    ++line.by_label[index_of(record.label)];
    ++line.by_split[static_cast<std::size_t>(record.split)];
    ++stats.totals.by_label[index_of(record.label)];
    ++stats.totals.by_split[static_cast<std::size_t>(record.split)];
  }
  stats.n_direction_task = stats.totals.direction_task();
  stats.n_de_task = stats.totals.total();
  return stats;
}

Corpus assign_split(Corpus corpus, double fraction_train, std::uint64_t seed) {
  require_fraction(fraction_train, "train fraction");

  // Groups per cell line, in first-appearance order.
  std::vector<std::string> line_order;
  std::map<std::string, std::vector<std::string>> groups_by_line;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& record = corpus[i];
    if (record.split != Split::Unassigned) {
      throw DataError("assign_split requires unassigned records; " + record.key().to_string() +
                      " is already '" + std::string(to_string(record.split)) + "'");
    }
    const auto& line = record.cell_line.str();
    if (!groups_by_line.contains(line)) line_order.push_back(line);
    auto& group = members[{line, record.perturbation_gene}];
    if (group.empty()) groups_by_line[line].push_back(record.perturbation_gene);
    group.push_back(i);
  }

  SeededIndexer rng(seed);
  for (const auto& line : line_order) {
    auto groups = groups_by_line[line];
    rng.shuffle(groups);
    std::size_t line_total = 0;
    for (const auto& g : groups) line_total += members[{line, g}].size();
    const double target = fraction_train * static_cast<double>(line_total);
    double in_train = 0.0;
    for (const auto& g : groups) {
      const auto& idx = members[{line, g}];
      const double with = in_train + static_cast<double>(idx.size());
      const bool to_train = std::abs(with - target) <= std::abs(in_train - target);
      if (to_train) in_train = with;
      for (auto i : idx) corpus[i].split = to_train ? Split::Train : Split::Test;
    }
  }
  return corpus;
}

std::pair<Corpus, Corpus> holdout_cell_line(const Corpus& corpus, const CellLine& held) {
  Corpus train, test;
  for (const auto& record : corpus) {
    auto copy = record;
    if (record.cell_line == held) {
      copy.split = Split::Test;
      test.push_back(std::move(copy));
    } else {
      copy.split = Split::Train;
      train.push_back(std::move(copy));
    }
  }
  if (test.empty()) throw ConfigError("held-out cell line '" + held.str() + "' is not in the corpus");
  return {std::move(train), std::move(test)};
}

Corpus rebalance(const Corpus& corpus, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 3> by_label;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_label[index_of(corpus[i].label)].push_back(i);
  std::size_t smallest = corpus.size();
  for (Label label : kAllLabels) {
    if (by_label[index_of(label)].empty()) {
      throw DataError("cannot rebalance: no records labelled '" + std::string(to_string(label)) +
                      "'");
    }
    smallest = std::min(smallest, by_label[index_of(label)].size());
  }
  SeededIndexer rng(seed);
  std::vector<bool> keep(corpus.size(), false);
  for (Label label : kAllLabels) {
    for (auto i : rng.choose(by_label[index_of(label)], smallest)) keep[i] = true;
  }
  Corpus out;
  out.reserve(smallest * 3);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (keep[i]) out.push_back(corpus[i]);
  }
  return out;
}

Corpus sample_subset(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("subset fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const auto count = static_cast<std::size_t>(std::llround(fraction * corpus.size()));
  std::vector<std::size_t> all(corpus.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  SeededIndexer rng(seed);
  std::vector<bool> keep(corpus.size(), false);
  for (auto i : rng.choose(std::move(all), count)) keep[i] = true;
  Corpus out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (keep[i]) out.push_back(corpus[i]);
  }
  return out;
}

Corpus filter_split(const Corpus& corpus, Split split) {
  Corpus out;
  for (const auto& record : corpus) {
    if (record.split == split) out.push_back(record);
  }
  return out;
}

}  // namespace pertcot
