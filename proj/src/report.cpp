#include "pertcot/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>

#include "pertcot/errors.hpp"

namespace pertcot {
namespace {

using json = nlohmann::json;

constexpr std::array<const char*, 4> kPreferredOrder = {"K562", "RPE1", "HepG2", "Jurkat"};
constexpr std::array<const char*, 3> kClassTitles = {"Not Diff. Expressed", "UP Regulated",
                                                     "DOWN Regulated"};

std::string with_thousands(std::uint64_t value) {
  auto digits = std::to_string(value);
  for (int i = static_cast<int>(digits.size()) - 3; i > 0; i -= 3) digits.insert(i, ",");
  return digits;
}

json auroc_to_json(const AurocResult& r) {
  json skipped = json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"group", s.group}, {"reason", s.reason}});
  return {{"per_perturbation", r.per_group}, {"mean", r.mean}, {"skipped", skipped}};
}

AurocResult auroc_from_json(const json& node) {
  AurocResult r;
  r.per_group = node.at("per_perturbation").get<std::map<std::string, double>>();
  r.mean = node.at("mean").get<double>();
  for (const auto& s : node.at("skipped")) {
    r.skipped.push_back({s.at("group").get<std::string>(), s.at("reason").get<std::string>()});
  }
  return r;
}

void render_auroc_row(std::string& out, const char* task, const std::string& model,
                      const std::map<std::string, AurocResult>& by_line,
                      const std::vector<std::string>& columns) {
  out += fmt::format("{:<24} {:<16}", task, model);
  for (const auto& line : columns) {
    const auto it = by_line.find(line);
    out += it == by_line.end() ? fmt::format(" {:>8}", "-") : fmt::format(" {:>8.2f}", it->second.mean);
  }
  out += '\n';
}

}  // namespace

std::vector<std::string> column_order(const std::vector<std::string>& cell_lines) {
  std::vector<std::string> out;
  for (const char* preferred : kPreferredOrder) {
    if (std::find(cell_lines.begin(), cell_lines.end(), preferred) != cell_lines.end()) {
      out.emplace_back(preferred);
    }
  }
  std::vector<std::string> rest;
  for (const auto& line : cell_lines) {
    if (std::find(out.begin(), out.end(), line) == out.end()) rest.push_back(line);
  }
  std::sort(rest.begin(), rest.end());
  rest.erase(std::unique(rest.begin(), rest.end()), rest.end());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

std::string render_table(const EvalReport& report) {
  std::string out;
  const std::string model = report.model_name.empty() ? "model" : report.model_name;

  if (report.three_class) {
    const auto& m = *report.three_class;
    out += "Three-class prediction\n";
    out += fmt::format("{:<16}", "Model");
    for (const char* title : kClassTitles) out += fmt::format(" | {:<22}", title);
    out += " | Accuracy\n";
    out += fmt::format("{:<16}", "");
    for (std::size_t i = 0; i < 3; ++i) out += fmt::format(" | {:<6} {:<6} {:<8}", "Prec.", "Rec.", "F1");
    out += " |\n";
    out += fmt::format("{:<16}", model);
    for (const auto& c : m.per_class) {
      out += fmt::format(" | {:<6.2f} {:<6.2f} {:<8.2f}", c.precision, c.recall, c.f1);
    }
    out += fmt::format(" | {:.2f}\n", m.accuracy);
    out += fmt::format("Evaluated: {}  Invalid responses: {} ({:.4f})\n", m.total, m.invalid,
                       m.invalid_rate);
    out += "Confusion (rows truth, columns prediction; NotDE, Up, Down):\n";
    for (const auto& row : m.confusion) {
      out += fmt::format("  {:>8} {:>8} {:>8}\n", row[0], row[1], row[2]);
    }
  }

  if (!report.de_auroc.empty() || !report.direction_auroc.empty()) {
    std::vector<std::string> lines;
    for (const auto& [line, r] : report.de_auroc) lines.push_back(line);
    for (const auto& [line, r] : report.direction_auroc) lines.push_back(line);
    const auto columns = column_order(lines);
    if (!out.empty()) out += '\n';
    out += "Binary AUROC (averaged over perturbations)\n";
    out += fmt::format("{:<24} {:<16}", "Task", "Model");
    for (const auto& line : columns) out += fmt::format(" {:>8}", line);
    out += '\n';
    if (!report.de_auroc.empty()) {
      render_auroc_row(out, "Differential expression", model, report.de_auroc, columns);
    }
    if (!report.direction_auroc.empty()) {
      render_auroc_row(out, "Direction of change", model, report.direction_auroc, columns);
    }

    auto skipped_section = [&](const char* task, const std::map<std::string, AurocResult>& by_line) {
      std::size_t n = 0;
      for (const auto& [line, r] : by_line) n += r.skipped.size();
      if (n == 0) return;
      out += fmt::format("\nSkipped groups ({}): {}\n", task, n);
      for (const auto& line : columns) {
        const auto it = by_line.find(line);
        if (it == by_line.end()) continue;
        for (const auto& s : it->second.skipped) out += fmt::format("  {}: {}\n", s.group, s.reason);
      }
    };
    skipped_section("differential expression", report.de_auroc);
    skipped_section("direction of change", report.direction_auroc);
  }
  return out;
}

json report_to_json(const EvalReport& report) {
  json doc = {{"model", report.model_name}};
  if (report.three_class) {
    const auto& m = *report.three_class;
    json per_class = json::object();
    for (Label label : kAllLabels) {
      const auto& c = m.per_class[index_of(label)];
      per_class[std::string(to_string(label))] = {
          {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
    }
    doc["three_class"] = {{"confusion", m.confusion},
                          {"per_class", per_class},
                          {"accuracy", m.accuracy},
                          {"invalid_rate", m.invalid_rate},
                          {"total", m.total},
                          {"invalid", m.invalid}};
  }
  auto auroc_map = [](const std::map<std::string, AurocResult>& by_line) {
    json node = json::object();
    for (const auto& [line, r] : by_line) node[line] = auroc_to_json(r);
    return node;
  };
  doc["de_auroc"] = auroc_map(report.de_auroc);
  doc["direction_auroc"] = auroc_map(report.direction_auroc);
  return doc;
}

EvalReport report_from_json(const json& doc) {
  try {
    EvalReport report;
    report.model_name = doc.at("model").get<std::string>();
    if (doc.contains("three_class")) {
      const auto& node = doc["three_class"];
      ThreeClassMetrics m;
      m.confusion = node.at("confusion").get<ConfusionMatrix>();
      for (Label label : kAllLabels) {
        const auto& c = node.at("per_class").at(std::string(to_string(label)));
        m.per_class[index_of(label)] = {c.at("precision").get<double>(), c.at("recall").get<double>(),
                                        c.at("f1").get<double>(), c.at("support").get<std::uint64_t>()};
      }
      m.accuracy = node.at("accuracy").get<double>();
      m.invalid_rate = node.at("invalid_rate").get<double>();
      m.total = node.at("total").get<std::uint64_t>();
      m.invalid = node.at("invalid").get<std::uint64_t>();
      report.three_class = m;
    }
    for (const auto& [line, node] : doc.at("de_auroc").items()) report.de_auroc[line] = auroc_from_json(node);
    for (const auto& [line, node] : doc.at("direction_auroc").items()) {
      report.direction_auroc[line] = auroc_from_json(node);
    }
    return report;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::string emit_report(const EvalReport& report, ReportFormat format) {
  if (format == ReportFormat::Table) return render_table(report);
  return report_to_json(report).dump(2) + "\n";
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read report '" + path.string() + "'");
  const auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw DataError("report '" + path.string() + "' is not JSON");
  return report_from_json(doc);
}

std::string render_stats_table(const CorpusStats& stats) {
  std::vector<std::string> lines;
  for (const auto& [line, counts] : stats.per_cell_line) lines.push_back(line);

  std::string out;
  out += fmt::format("{:<24}", "Task");
  for (const auto& line : lines) out += fmt::format(" {:>10}", line);
  out += fmt::format(" {:>10}\n", "Total");
  out += fmt::format("{:<24}", "Direction of Change");
  for (const auto& line : lines) {
    out += fmt::format(" {:>10}", with_thousands(stats.per_cell_line.at(line).direction_task()));
  }
  out += fmt::format(" {:>10}\n", with_thousands(stats.n_direction_task));
  out += fmt::format("{:<24}", "Differential Expression");
  for (const auto& line : lines) {
    out += fmt::format(" {:>10}", with_thousands(stats.per_cell_line.at(line).total()));
  }
  out += fmt::format(" {:>10}\n", with_thousands(stats.n_de_task));

  out += '\n';
  out += fmt::format("{:<12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}\n", "Cell line", "up", "down",
                     "not_de", "train", "test", "unassigned");
  auto row = [&](const std::string& name, const LabelCounts& c) {
    out += fmt::format("{:<12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}\n", name, c.count(Label::Up),
                       c.count(Label::Down), c.count(Label::NotDE), c.count(Split::Train),
                       c.count(Split::Test), c.count(Split::Unassigned));
  };
  for (const auto& line : lines) row(line, stats.per_cell_line.at(line));
  row("total", stats.totals);
  return out;
}

nlohmann::json stats_to_json(const CorpusStats& stats) {
  auto counts = [](const LabelCounts& c) {
    return json{{"upregulated", c.count(Label::Up)},
                {"downregulated", c.count(Label::Down)},
                {"not differentially expressed", c.count(Label::NotDE)},
                {"train", c.count(Split::Train)},
                {"test", c.count(Split::Test)},
                {"unassigned", c.count(Split::Unassigned)},
                {"direction_task", c.direction_task()},
                {"de_task", c.total()}};
  };
  json per_line = json::object();
  for (const auto& [line, c] : stats.per_cell_line) per_line[line] = counts(c);
  return {{"cell_lines", per_line},
          {"totals", counts(stats.totals)},
          {"n_direction_task", stats.n_direction_task},
          {"n_de_task", stats.n_de_task}};
}

}  // namespace pertcot
