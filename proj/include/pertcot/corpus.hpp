#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pertcot/label.hpp"

namespace pertcot {

/// Cell-line identifier. Surrounding whitespace is trimmed on construction;
/// comparison is exact and case-sensitive.
class CellLine {
 public:
  CellLine() = default;
  explicit CellLine(std::string_view name);

  const std::string& str() const noexcept { return name_; }

  auto operator<=>(const CellLine&) const = default;

 private:
  std::string name_;
};

struct RecordKey {
  std::string cell_line;
  std::string perturbation;
  std::string gene;

  auto operator<=>(const RecordKey&) const = default;
  std::string to_string() const;
};

struct PerturbationRecord {
  CellLine cell_line;
  std::string perturbation_gene;
  std::string target_gene;
  Label label = Label::NotDE;
  Split split = Split::Unassigned;

  RecordKey key() const { return {cell_line.str(), perturbation_gene, target_gene}; }
  bool operator==(const PerturbationRecord&) const = default;
};

using Corpus = std::vector<PerturbationRecord>;

enum class CorpusFormat { Jsonl, Csv };

/// Picks the format from the file extension (.csv, otherwise jsonl).
CorpusFormat format_from_path(const std::filesystem::path& path);

/// Reads a corpus in file order. Labels are normalized; an optional `split`
/// column/key carries externally provided split assignments. Throws DataError
/// naming the offending row for unknown labels, missing fields and duplicate
/// keys.
Corpus ingest_corpus(const std::filesystem::path& source, CorpusFormat format);
Corpus ingest_corpus(const std::filesystem::path& source);

struct LabelCounts {
  std::array<std::uint64_t, 3> by_label{};  // indexed by index_of(Label)
  std::array<std::uint64_t, 3> by_split{};  // Unassigned, Train, Test

  std::uint64_t total() const { return by_label[0] + by_label[1] + by_label[2]; }
  std::uint64_t count(Label label) const { return by_label[index_of(label)]; }
  std::uint64_t count(Split split) const { return by_split[static_cast<std::size_t>(split)]; }
  // Up + Down: the direction-of-change task is the DE subset.
  std::uint64_t direction_task() const { return count(Label::Up) + count(Label::Down); }

  bool operator==(const LabelCounts&) const = default;
};

struct CorpusStats {
  std::map<std::string, LabelCounts> per_cell_line;
  LabelCounts totals;
  std::uint64_t n_direction_task = 0;
  std::uint64_t n_de_task = 0;

  bool operator==(const CorpusStats&) const = default;
};

CorpusStats compute_stats(const Corpus& corpus);

/// Assigns Train/Test atomically per (cell_line, perturbation) group, aiming
/// at `fraction_train` of each cell line's records. Deterministic in
/// (corpus order, seed). Requires every record to be Unassigned.
Corpus assign_split(Corpus corpus, double fraction_train, std::uint64_t seed);

/// Train holds every other cell line (split = Train), test holds exactly the
/// held-out line (split = Test). Order within each part follows the input.
std::pair<Corpus, Corpus> holdout_cell_line(const Corpus& corpus, const CellLine& held);

/// Downsamples every label class to the smallest class size, seeded sampling
/// without replacement. Output keeps input order.
Corpus rebalance(const Corpus& corpus, std::uint64_t seed);

/// Seeded sample of round(fraction * size) records, input order preserved.
Corpus sample_subset(const Corpus& corpus, double fraction, std::uint64_t seed);

Corpus filter_split(const Corpus& corpus, Split split);

}  // namespace pertcot
