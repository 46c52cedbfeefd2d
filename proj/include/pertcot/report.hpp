#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pertcot/corpus.hpp"
#include "pertcot/evaluation.hpp"

namespace pertcot {

enum class ReportFormat { Table, Machine };

/// Cell lines in column order: K562, RPE1, HepG2, Jurkat, then any others
/// alphabetically.
std::vector<std::string> column_order(const std::vector<std::string>& cell_lines);

/// Human-readable rendering: per-class Prec/Rec/F1 plus accuracy, then one
/// AUROC column per cell line. The skipped-groups section only appears when
/// something was skipped.
std::string render_table(const EvalReport& report);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);

std::string emit_report(const EvalReport& report, ReportFormat format);
EvalReport read_report(const std::filesystem::path& path);

/// Task-by-cell-line count table followed by a per-label/per-split breakdown.
std::string render_stats_table(const CorpusStats& stats);
nlohmann::json stats_to_json(const CorpusStats& stats);

}  // namespace pertcot
