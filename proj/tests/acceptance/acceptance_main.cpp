// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "pertcot/artifact_io.hpp"
#include "pertcot/cli.hpp"
#include "pertcot/corpus.hpp"
#include "pertcot/evaluation.hpp"
#include "pertcot/parsing.hpp"
#include "pertcot/prompts.hpp"
#include "pertcot/report.hpp"
#include "scenario.hpp"
#include "test_support.hpp"

namespace {

using namespace pertcot;
using pertcot::testing::fixture_path;
using pertcot::testing::read_file;
using pertcot::testing::TempDir;
using pertcot::testing::Script;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and budgets.
constexpr double kAurocOracleTol = 1e-9;
constexpr double kHardLabelTol = 1e-12;
constexpr double kAurocBudgetSeconds = 5.0;
constexpr double kStatsBudgetSeconds = 20.0;
constexpr double kMockRunBudgetSeconds = 60.0;
constexpr int kAurocGroups = 200;
constexpr int kFuzzCases = 10000;

struct Check {
  bool ok = true;
  std::vector<std::string> notes;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      notes.push_back("failed: " + what);
    }
  }
  void note(std::string text) { notes.push_back(std::move(text)); }
};

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::cerr << "  [cli " << (args.empty() ? "" : args.back()) << "] " << e.str();
  return code;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------------------

struct PublishedColumn {
  const char* cell_line;
  std::uint64_t direction;
  std::uint64_t de;
};

constexpr std::array<PublishedColumn, 4> kPublishedCounts = {{{"HepG2", 17860, 126889},
                                                      {"Jurkat", 20058, 142822},
                                                      {"K562", 19980, 157679},
                                                      {"RPE1", 26652, 187089}}};
constexpr std::uint64_t kPublishedDirectionTotal = 84550;
constexpr std::uint64_t kPublishedDeTotal = 614479;

void check_published_counts(const CorpusStats& stats, Check& c, const std::string& source) {
  for (const auto& col : kPublishedCounts) {
    const auto it = stats.per_cell_line.find(col.cell_line);
    c.require(it != stats.per_cell_line.end(), source + ": cell line " + col.cell_line);
    if (it == stats.per_cell_line.end()) continue;
    c.require(it->second.direction_task() == col.direction,
              fmt::format("{}: {} direction {} != {}", source, col.cell_line, it->second.direction_task(), col.direction));
    c.require(it->second.total() == col.de,
              fmt::format("{}: {} DE {} != {}", source, col.cell_line, it->second.total(), col.de));
  }
  c.require(stats.n_direction_task == kPublishedDirectionTotal, source + ": direction total");
  c.require(stats.n_de_task == kPublishedDeTotal, source + ": DE total");
}

Check criterion_stats() {
  Check c;
  // Bundled fixture against hand counts.
  const std::map<std::string, std::array<std::uint64_t, 2>> hand = {
      {"HepG2", {5, 15}}, {"Jurkat", {6, 15}}, {"K562", {7, 15}}, {"RPE1", {6, 15}}};
  const auto mini = compute_stats(ingest_corpus(fixture_path("fixtures/mini_corpus.jsonl")));
  for (const auto& [line, counts] : hand) {
    c.require(mini.per_cell_line.at(line).direction_task() == counts[0], "fixture direction " + line);
    c.require(mini.per_cell_line.at(line).total() == counts[1], "fixture DE " + line);
  }
  c.require(mini.n_direction_task == 24 && mini.n_de_task == 60, "fixture totals 24 / 60");

  TempDir dir;
  std::string table;
  c.require(cli({"--run-dir", (dir / "run").string(), "stats", "--corpus",
                 fixture_path("fixtures/mini_corpus.jsonl").string()},
                &table) == 0,
            "stats subcommand on fixture");
  c.require(table == read_file(fixture_path("golden/stats_mini.txt")), "fixture table equals golden");

  // Full-scale synthetic corpus with the published per-cell-line counts:
  // exercises the counting path and the time budget at real size.
  {
    std::string body;
    body.reserve(70u * kPublishedDeTotal);
    for (const auto& col : kPublishedCounts) {
      for (std::uint64_t i = 0; i < col.de; ++i) {
        const char* label = i < col.direction ? (i % 2 ? "downregulated" : "upregulated")
                                              : "not differentially expressed";
        body += fmt::format(R"({{"cell_line":"{}","perturbation":"P{}","gene":"G{}","label":"{}"}})",
                            col.cell_line, i / 200, i % 200, label);
        body += '\n';
      }
    }
    pertcot::testing::write_file(dir / "synthetic.jsonl", body);
    const auto start = Clock::now();
    c.require(cli({"--run-dir", (dir / "run").string(), "stats", "--corpus", (dir / "synthetic.jsonl").string()}) == 0,
              "stats subcommand at full scale");
    const double elapsed = seconds_since(start);
    const auto doc = nlohmann::json::parse(read_file(dir / "run/reports/stats.json"));
    c.require(doc["n_de_task"] == kPublishedDeTotal && doc["n_direction_task"] == kPublishedDirectionTotal,
              "synthetic full-scale totals");
    for (const auto& col : kPublishedCounts) {
      c.require(doc["cell_lines"][col.cell_line]["direction_task"] == col.direction &&
                    doc["cell_lines"][col.cell_line]["de_task"] == col.de,
                fmt::format("synthetic full-scale {}", col.cell_line));
    }
    c.require(elapsed < kStatsBudgetSeconds, fmt::format("full-scale stats took {:.1f}s", elapsed));
    c.note(fmt::format("full-scale synthetic: {:.1f}s", elapsed));
  }

  if (const char* env = std::getenv("PERTURBQA_CORPUS"); env && *env) {
    Corpus corpus;
    std::stringstream paths(env);
    for (std::string path; std::getline(paths, path, ':');) {
      auto part = ingest_corpus(path);
      corpus.insert(corpus.end(), part.begin(), part.end());
    }
    check_published_counts(compute_stats(corpus), c, "PerturbQA");
    c.note("real corpus checked against the published table");
  } else {
    c.note("real corpus not provided (PERTURBQA_CORPUS unset)");
  }
  return c;
}

// ---------------------------------------------------------------------------

double brute_force_auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

Check criterion_auroc_oracle() {
  Check c;
  std::mt19937_64 rng(20240611);
  std::vector<Prediction> predictions;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> expected;
  std::set<std::string> hard_groups;
  std::map<std::string, double> score_of;  // trace key -> score, fed through the hook

  for (int g = 0; g < kAurocGroups; ++g) {
    const std::string pert = fmt::format("P{:03}", g);
    const std::string group = "K562/" + pert;
    const bool hard = g % 2 == 0;
    if (hard) hard_groups.insert(group);
    const auto n = 2 + rng() % 14;
    std::vector<Label> truths(n);
    for (auto& t : truths) t = kAllLabels[rng() % 3];
    truths[0] = Label::Up;
    truths[1] = Label::NotDE;
    for (std::size_t i = 0; i < n; ++i) {
      double score = 0.0;
      if (hard) {
        score = static_cast<double>(rng() % 2);
      } else {
        // Coarse grid so real-valued groups also contain ties.
        score = static_cast<double>(rng() % 7) / 6.0 + (rng() % 3 == 0 ? 0.0 : 1e-3 * static_cast<double>(rng() % 5));
      }
      Prediction p;
      p.record = {CellLine("K562"), pert, fmt::format("G{}", i), truths[i], Split::Test};
      p.de_score = hard ? score : 0.0;
      score_of[p.record.key().to_string()] = score;
      auto& [pos, neg] = expected[group];
      (is_differentially_expressed(truths[i]) ? pos : neg).push_back(score);
      predictions.push_back(std::move(p));
    }
  }

  const ScoreFn hook = [&](const Prediction& p) { return std::optional(score_of.at(p.record.key().to_string())); };
  const auto start = Clock::now();
  const auto result = auroc_per_perturbation(predictions, TruthView::DEvsNotDE, hook);
  const double elapsed = seconds_since(start);

  c.require(result.per_group.size() == static_cast<std::size_t>(kAurocGroups), "all groups scored");
  double worst = 0.0;
  double worst_hard = 0.0;
  for (const auto& [group, sides] : expected) {
    const auto& [pos, neg] = sides;
    const double got = result.per_group.at(group);
    worst = std::max(worst, std::abs(got - brute_force_auroc(pos, neg)));
    if (hard_groups.count(group)) {
      const double tpr = std::count(pos.begin(), pos.end(), 1.0) / static_cast<double>(pos.size());
      const double tnr = std::count(neg.begin(), neg.end(), 0.0) / static_cast<double>(neg.size());
      worst_hard = std::max(worst_hard, std::abs(got - (tpr + tnr) / 2.0));
    }
  }
  c.require(worst <= kAurocOracleTol, fmt::format("max oracle deviation {:.3e}", worst));
  c.require(worst_hard <= kHardLabelTol, fmt::format("max hard-label deviation {:.3e}", worst_hard));
  c.require(elapsed < kAurocBudgetSeconds, fmt::format("took {:.3f}s", elapsed));
  c.note(fmt::format("{} groups, max |diff| {:.1e}, hard-label max |diff| {:.1e}, {:.3f}s", kAurocGroups,
                     worst, worst_hard, elapsed));
  return c;
}

// ---------------------------------------------------------------------------

Check criterion_metric_fixture() {
  Check c;
  std::vector<Prediction> preds;
  std::istringstream in(read_file(fixture_path("fixtures/three_class_12.jsonl")));
  for (std::string line; std::getline(in, line);) {
    const auto row = nlohmann::json::parse(line);
    const PerturbationRecord r{CellLine(row["cell_line"].get<std::string>()), row["perturbation"], row["gene"],
                               *parse_label(row["label"].get<std::string>()), Split::Test};
    preds.push_back(score_response(r, row["response"], "fixture", Protocol::Standard));
  }
  const auto m = *three_class_report(preds).three_class;
  const ConfusionMatrix confusion = {{{4, 1, 1}, {1, 2, 0}, {1, 1, 1}}};
  c.require(m.confusion == confusion, "confusion matrix");
  c.require(m.accuracy == 7.0 / 12.0, "accuracy 7/12");
  c.require(m.invalid_rate == 1.0 / 12.0, "invalid rate 1/12");
  const std::array<std::array<double, 3>, 3> prf = {{{2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0},
                                                     {1.0 / 2.0, 2.0 / 3.0, 4.0 / 7.0},
                                                     {1.0 / 2.0, 1.0 / 3.0, 2.0 / 5.0}}};
  for (Label label : kAllLabels) {
    const auto& got = m.per_class[index_of(label)];
    const auto& want = prf[index_of(label)];
    c.require(got.precision == want[0] && got.recall == want[1] && got.f1 == want[2],
              fmt::format("P/R/F1 for {}", to_string(label)));
  }
  return c;
}

// ---------------------------------------------------------------------------

Check criterion_prompts() {
  Check c;
  const PromptForge forge;
  const PerturbationRecord record{CellLine("K562"), "TMED2", "IER3", Label::Up, Split::Train};
  auto golden = [](const char* name) { return read_file(fixture_path(fmt::format("golden/prompts/{}.txt", name))); };
  const auto standard = forge.render_standard(record);
  const auto direction = forge.render_direction(record);
  const auto generator = forge.render_generator(record);
  const auto critic = forge.render_critic(standard.user_text, golden("critic_thinking"));
  c.require(standard.system_text == golden("standard_system"), "standard system prompt");
  c.require(standard.user_text == golden("standard_user"), "standard user query");
  c.require(direction.system_text == golden("standard_system"), "direction system prompt");
  c.require(direction.user_text == golden("direction_user"), "direction user query");
  c.require(generator.system_text == golden("generator_system"), "generator system prompt");
  c.require(generator.user_text == golden("generator_user"), "generator user query");
  c.require(critic.system_text == golden("critic_system"), "critic system prompt");
  c.require(critic.user_text == golden("critic_user"), "critic user query");
  return c;
}

// ---------------------------------------------------------------------------

Check criterion_parsing() {
  Check c;
  for (Answer a : {Answer::NotDE, Answer::Up, Answer::Down, Answer::Unknown}) {
    const auto parsed = parse_answer("<think>t</think><answer>" + std::string(to_string(a)) + "</answer>");
    c.require(parsed.valid() && parsed.answer == a, fmt::format("round trip '{}'", to_string(a)));
  }
  const auto first = parse_critic("<reasoning>r</reasoning><evaluation>excellent</evaluation>");
  const auto second = parse_critic("<evaluation>excellent</evaluation><reasoning>r</reasoning>");
  c.require(first.valid() && first == second && first.grade == Grade::Excellent, "both critic block orders");

  std::mt19937_64 rng(777);
  std::size_t valid = 0;
  for (int i = 0; i < kFuzzCases; ++i) {
    std::string bytes(rng() % 96, '\0');
    for (auto& b : bytes) b = static_cast<char>(rng() % 256);
    if (rng() % 4 == 0) bytes.insert(rng() % (bytes.size() + 1), "<answer>");
    if (rng() % 4 == 0) bytes.insert(rng() % (bytes.size() + 1), "</answer>");
    if (rng() % 8 == 0) bytes.insert(rng() % (bytes.size() + 1), "<evaluation>good</evaluation>");
    const auto parsed = parse_answer(bytes);
    const auto verdict = parse_critic(bytes);
    const bool flagged = parsed.valid() ? bytes.find('<') != std::string::npos : parsed.answer == Answer::NotDE;
    const bool critic_flagged = verdict.valid() || verdict.grade == Grade::Terrible;
    if (!flagged || !critic_flagged) {
      c.require(false, fmt::format("fuzz case {} not flagged", i));
      break;
    }
    valid += parsed.valid();
  }
  c.note(fmt::format("{} fuzz cases, {} parsed valid", kFuzzCases, valid));
  return c;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const std::filesystem::path& run) {
  std::map<std::string, std::string> files;
  for (const char* rel : {"traces/approach2.jsonl", "sft/sft.jsonl", "predictions/standard.jsonl",
                          "predictions/direction.jsonl", "reports/report.json", "reports/report.txt",
                          "splits/train.jsonl", "splits/test.jsonl", "corpus.jsonl"}) {
    files[rel] = read_file(run / rel);
  }
  return files;
}

Check criterion_mock_run() {
  Check c;
  TempDir dir;
  const auto scripted = pertcot::testing::mock_run_records();
  const auto test = pertcot::testing::scenario_test_records();
  pertcot::testing::write_scenario_corpus(dir / "corpus.jsonl", scripted, test);
  pertcot::testing::scenario_fixture(scripted, test).save(dir / "mock.json");
  MockFixture{}.save(dir / "empty_mock.json");

  std::map<Script, int> plan;
  for (const auto& s : scripted) ++plan[s.script];
  c.require(scripted.size() == 50 && plan[Script::Excellent] == 12 &&
                plan[Script::Good] + plan[Script::Average] == 20 && plan[Script::WrongAnswer] == 18,
            "scripted grade mix 12 / 20 / 18");

  const auto run = (dir / "run").string();
  auto pipeline = [&](const std::string& fixture) {
    const std::vector<std::string> base = {"--run-dir", run, "--mock", fixture, "--backoff-ms", "0"};
    auto with = [&](std::initializer_list<std::string> rest) {
      auto args = base;
      args.insert(args.end(), rest);
      return args;
    };
    return cli(with({"ingest", "--corpus", (dir / "corpus.jsonl").string()})) == 0 &&
           cli(with({"split", "--external"})) == 0 && cli(with({"generate", "--approach", "2"})) == 0 &&
           cli(with({"export"})) == 0 && cli(with({"predict", "--protocol", "standard"})) == 0 &&
           cli(with({"predict", "--protocol", "direction"})) == 0 && cli(with({"evaluate"})) == 0;
  };

  const auto start = Clock::now();
  c.require(pipeline((dir / "mock.json").string()), "cold pipeline exits 0");
  const double elapsed = seconds_since(start);
  c.require(elapsed < kMockRunBudgetSeconds, fmt::format("cold run took {:.1f}s", elapsed));

  const auto traces = read_traces(dir / "run/traces/approach2.jsonl");
  const auto retained = std::count_if(traces.begin(), traces.end(), [](const auto& t) { return t.retained; });
  c.require(traces.size() == 50 && retained == 12, fmt::format("retained {} of {}", retained, traces.size()));
  for (std::size_t i = 0; i < traces.size(); ++i) {
    c.require(traces[i].retained == (scripted[i].script == Script::Excellent), "retained set is the excellent set");
  }

  const auto examples = read_sft(dir / "run/sft/sft.jsonl");
  c.require(examples.size() == 12, "12 exported examples");
  for (const auto& e : examples) {
    const auto parsed = parse_answer(e.target_text);
    c.require(parsed.valid() && to_label(parsed.answer) == e.label && parsed.think_text && !parsed.think_text->empty(),
              "target round-trips through the parser: " + e.source_trace_id);
  }
  const auto report = read_report(dir / "run/reports/report.json");
  c.require(report.three_class && report.three_class->total == test.size(), "report covers the test split");

  // Warm rerun against a fixture with no rules: any cache miss would fail.
  const auto cold = snapshot(dir / "run");
  c.require(pipeline((dir / "empty_mock.json").string()), "warm pipeline exits 0 with an empty fixture");
  c.require(snapshot(dir / "run") == cold, "warm rerun artifacts byte-identical");
  c.note(fmt::format("{} traces, {} retained, cold run {:.2f}s", traces.size(), retained, elapsed));
  return c;
}

// ---------------------------------------------------------------------------

Check criterion_holdout() {
  Check c;
  TempDir dir;
  const auto run = (dir / "run").string();
  const auto corpus_path = fixture_path("fixtures/mini_corpus.jsonl");
  c.require(cli({"--run-dir", run, "ingest", "--corpus", corpus_path.string()}) == 0, "ingest");
  c.require(cli({"--run-dir", run, "split", "--holdout", "RPE1"}) == 0, "split --holdout RPE1");
  const auto train = read_corpus_artifact(dir / "run/splits/train.jsonl");
  pertcot::testing::faithful_fixture(train).save(dir / "mock.json");
  const std::vector<std::string> mock = {"--run-dir", run, "--mock", (dir / "mock.json").string()};
  auto with = [&](std::initializer_list<std::string> rest) {
    auto args = mock;
    args.insert(args.end(), rest);
    return args;
  };
  c.require(cli(with({"generate", "--approach", "2"})) == 0, "generate");
  c.require(cli(with({"export"})) == 0, "export");
  c.require(cli(with({"export", "--baseline"})) == 0, "export --baseline");

  const auto corpus = ingest_corpus(corpus_path);
  std::set<RecordKey> rpe1;
  for (const auto& r : corpus) {
    if (r.cell_line.str() == "RPE1") rpe1.insert(r.key());
  }
  std::set<RecordKey> manifest;
  for (const auto& r : read_corpus_artifact(dir / "run/splits/test.jsonl")) manifest.insert(r.key());
  c.require(manifest == rpe1, "evaluation manifest is exactly the RPE1 records");

  for (const char* file : {"sft/sft.jsonl", "sft/baseline.jsonl"}) {
    const auto examples = read_sft(dir / "run" / file);
    c.require(!examples.empty(), std::string(file) + " non-empty");
    for (const auto& e : examples) {
      c.require(e.source_trace_id.rfind("RPE1/", 0) != 0 && e.user_text.find("single-cell RPE1") == std::string::npos,
                std::string(file) + " contains RPE1 record " + e.source_trace_id);
    }
    c.note(fmt::format("{}: {} examples, 0 RPE1", file, examples.size()));
  }
  return c;
}

// ---------------------------------------------------------------------------

Check criterion_rebalance() {
  Check c;
  Corpus skewed;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 90; ++i) {
    const Label label = i < 61 ? Label::NotDE : (i < 83 ? Label::Up : Label::Down);
    skewed.push_back({CellLine(i % 2 ? "K562" : "RPE1"), fmt::format("P{}", i / 4), fmt::format("G{}", i), label,
                      Split::Unassigned});
  }
  std::shuffle(skewed.begin(), skewed.end(), rng);
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    const auto a = rebalance(skewed, seed);
    const auto b = rebalance(skewed, seed);
    const auto stats = compute_stats(a);
    c.require(a == b, fmt::format("seed {} deterministic", seed));
    c.require(stats.totals.count(Label::Up) == 7 && stats.totals.count(Label::Down) == 7 &&
                  stats.totals.count(Label::NotDE) == 7,
              fmt::format("seed {} counts 7/7/7", seed));
  }
  c.require(rebalance(skewed, 0) != rebalance(skewed, 1), "different seeds give different samples");
  c.note("61 / 22 / 7 skew -> 7 / 7 / 7");
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"dataset-statistics", criterion_stats},
      {"auroc-oracle-equivalence", criterion_auroc_oracle},
      {"three-class-metric-fixture", criterion_metric_fixture},
      {"prompt-byte-exactness", criterion_prompts},
      {"parsing-property-suite", criterion_parsing},
      {"end-to-end-mock-run", criterion_mock_run},
      {"holdout-soundness", criterion_holdout},
      {"rebalance", criterion_rebalance},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Check result;
    try {
      result = run();
    } catch (const std::exception& e) {
      result.ok = false;
      result.notes.push_back(std::string("exception: ") + e.what());
    }
    std::string detail;
    for (const auto& n : result.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::cout << (result.ok ? "PASS " : "FAIL ") << name << (detail.empty() ? "" : "  (" + detail + ")") << '\n';
    failures += result.ok ? 0 : 1;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
