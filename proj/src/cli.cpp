#include "pertcot/cli.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "pertcot/artifact_io.hpp"
#include "pertcot/corpus.hpp"
#include "pertcot/digest.hpp"
#include "pertcot/errors.hpp"
#include "pertcot/evaluation.hpp"
#include "pertcot/http_backend.hpp"
#include "pertcot/mock_backend.hpp"
#include "pertcot/prompts.hpp"
#include "pertcot/report.hpp"
#include "pertcot/traces.hpp"

namespace pertcot::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct RunLayout {
  fs::path root;

  fs::path corpus() const { return root / "corpus.jsonl"; }
  fs::path train() const { return root / "splits" / "train.jsonl"; }
  fs::path test() const { return root / "splits" / "test.jsonl"; }
  fs::path traces(int approach) const {
    return root / "traces" / fmt::format("approach{}.jsonl", approach);
  }
  fs::path sft() const { return root / "sft" / "sft.jsonl"; }
  fs::path baseline() const { return root / "sft" / "baseline.jsonl"; }
  fs::path predictions(Protocol p) const {
    return root / "predictions" / fmt::format("{}.jsonl", to_string(p));
  }
  fs::path report_json() const { return root / "reports" / "report.json"; }
  fs::path report_txt() const { return root / "reports" / "report.txt"; }
  fs::path stats_txt() const { return root / "reports" / "stats.txt"; }
  fs::path stats_json() const { return root / "reports" / "stats.json"; }
  fs::path lock() const { return root / ".lock"; }
  fs::path config_lock() const { return root / "config.lock"; }
};

// Advisory exclusive lock on <run_dir>/.lock for the lifetime of a command.
class RunLock {
 public:
  explicit RunLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw ConfigError("cannot open lock file '" + path.string() + "'");
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw ConfigError("run directory is in use by another process ('" + path.string() + "')");
    }
  }
  ~RunLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

void require_file(const fs::path& path, std::string_view produced_by) {
  if (!fs::exists(path)) {
    throw DataError(fmt::format("missing upstream artifact '{}' (run `{}` first)", path.string(),
                                produced_by));
  }
}

Provenance provenance(std::string stage, const json& params,
                      const std::vector<std::pair<std::string, fs::path>>& inputs) {
  Provenance p;
  p.stage = std::move(stage);
  p.config_digest = sha256_hex(params.dump());
  for (const auto& [name, path] : inputs) p.inputs[name] = sha256_file(path);
  p.version = tool_version();
  return p;
}

json template_digests(const TemplateStore& store) {
  json out = json::object();
  for (auto kind : kAllTemplateKinds) out[std::string(to_string(kind))] = store.digest(kind);
  return out;
}

class Runner {
 public:
  Runner(RunConfig config, std::ostream& out, std::ostream& err)
      : cfg_(std::move(config)), out_(out), err_(err), layout_{cfg_.run_dir} {}

  int dispatch(const std::string& command) {
    fs::create_directories(layout_.root);
    RunLock lock(layout_.lock());
    record_config(command);
    if (command == "ingest") return ingest();
    if (command == "stats") return stats();
    if (command == "split") return split();
    if (command == "generate") return generate();
    if (command == "export") return export_sft();
    if (command == "predict") return predict();
    if (command == "evaluate") return evaluate();
    if (command == "report") return report();
    throw ConfigError("unknown subcommand '" + command + "'");
  }

 private:
  json config_json() const {
    json doc = {{"corpus", cfg_.corpus_paths},
                {"corpus_format", cfg_.corpus_format},
                {"gateway",
                 {{"base_url", cfg_.base_url},
                  {"api_key_env", cfg_.api_key_env},
                  {"max_in_flight", cfg_.max_in_flight},
                  {"retry_budget", cfg_.retry_budget},
                  {"backoff_ms", cfg_.backoff_ms},
                  {"timeout_ms", cfg_.timeout_ms},
                  {"requests_per_minute",
                   cfg_.requests_per_minute ? json(*cfg_.requests_per_minute) : json(nullptr)},
                  {"cache_dir", cache_dir().string()},
                  {"mock_fixture", cfg_.mock_fixture}}},
                {"generator_model", cfg_.generator_model},
                {"critic_model", cfg_.critic_model},
                {"student_model", cfg_.student_model},
                {"templates_dir", cfg_.templates_dir},
                {"split",
                 {{"train_fraction", cfg_.train_fraction},
                  {"seed", cfg_.split_seed},
                  {"external", cfg_.external_split},
                  {"holdout", cfg_.holdout}}},
                {"generate",
                 {{"approach", cfg_.approach},
                  {"subset_fraction",
                   cfg_.subset_fraction ? json(*cfg_.subset_fraction) : json(nullptr)},
                  {"subset_seed", cfg_.subset_seed},
                  {"generator_temperature", cfg_.generator_temperature},
                  {"critic_temperature", cfg_.critic_temperature},
                  {"max_tokens", cfg_.max_tokens},
                  {"resample", cfg_.resample}}},
                {"export",
                 {{"baseline", cfg_.baseline},
                  {"all", cfg_.include_all},
                  {"approach", cfg_.export_approach},
                  {"rebalance", cfg_.rebalance},
                  {"rebalance_seed", cfg_.rebalance_seed}}},
                {"predict", {{"protocol", cfg_.protocol}, {"train_manifest", cfg_.train_manifest}}}};
    return doc;
  }

  // config.lock holds the effective configuration of the latest invocation of
  // each subcommand; the API key itself is never written.
  void record_config(const std::string& command) {
    json lock = json::object();
    if (fs::exists(layout_.config_lock())) {
      std::ifstream in(layout_.config_lock());
      lock = json::parse(in, nullptr, false);
      if (!lock.is_object()) lock = json::object();
    }
    lock[command] = config_json();
    lock["version"] = tool_version();
    write_text_atomic(layout_.config_lock(), lock.dump(2) + "\n");
  }

  fs::path cache_dir() const {
    if (cfg_.no_cache) return {};
    return cfg_.cache_dir.empty() ? layout_.root / "cache" : fs::path(cfg_.cache_dir);
  }

  const TemplateStore& templates() {
    if (cfg_.templates_dir.empty()) return TemplateStore::builtin();
    if (!custom_templates_) custom_templates_ = TemplateStore::from_directory(cfg_.templates_dir);
    return *custom_templates_;
  }

  std::unique_ptr<Gateway> gateway() {
    GatewayConfig g;
    g.base_url = cfg_.base_url;
    g.api_key_env_var = cfg_.api_key_env;
    g.max_in_flight = cfg_.max_in_flight;
    g.retry_budget = cfg_.retry_budget;
    g.backoff_base = std::chrono::milliseconds(cfg_.backoff_ms);
    g.request_timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    g.cache_dir = cache_dir();
    g.requests_per_minute = cfg_.requests_per_minute;
    g.validate();
    if (!cfg_.mock_fixture.empty()) {
      auto backend = std::make_shared<MockBackend>(MockFixture::load(cfg_.mock_fixture));
      return make_mock_gateway(g, std::move(backend));
    }
    return make_http_gateway(g);
  }

  std::string model_or_default(const std::string& model, const char* flag) const {
    if (!model.empty()) return model;
    if (!cfg_.mock_fixture.empty()) return "mock";
    throw ConfigError(fmt::format("{} is required", flag));
  }

  Corpus read_sources() const {
    if (cfg_.corpus_paths.empty()) throw ConfigError("--corpus is required");
    Corpus corpus;
    std::set<RecordKey> seen;
    for (const auto& source : cfg_.corpus_paths) {
      if (!fs::exists(source)) throw ConfigError("corpus file '" + source + "' does not exist");
      const auto format = cfg_.corpus_format.empty()   ? format_from_path(source)
                          : cfg_.corpus_format == "csv" ? CorpusFormat::Csv
                                                        : CorpusFormat::Jsonl;
      for (auto& record : ingest_corpus(source, format)) {
        if (!seen.insert(record.key()).second) {
          throw DataError(fmt::format("{}: duplicate record {} across corpus files", source,
                                      record.key().to_string()));
        }
        corpus.push_back(std::move(record));
      }
    }
    return corpus;
  }

  int ingest() {
    const auto corpus = read_sources();
    std::vector<std::pair<std::string, fs::path>> inputs;
    for (std::size_t i = 0; i < cfg_.corpus_paths.size(); ++i) {
      inputs.emplace_back(fmt::format("corpus[{}]", i), cfg_.corpus_paths[i]);
    }
    write_corpus(layout_.corpus(), provenance("ingest", {{"format", cfg_.corpus_format}}, inputs),
                 corpus);
    err_ << fmt::format("ingested {} records into {}\n", corpus.size(), layout_.corpus().string());
    return 0;
  }

  int stats() {
    Corpus corpus;
    if (!cfg_.corpus_paths.empty()) {
      corpus = read_sources();
    } else {
      require_file(layout_.corpus(), "ingest");
      corpus = read_corpus_artifact(layout_.corpus());
    }
    const auto stats = compute_stats(corpus);
    const auto table = render_stats_table(stats);
    write_text_atomic(layout_.stats_txt(), table);
    write_text_atomic(layout_.stats_json(), stats_to_json(stats).dump(2) + "\n");
    out_ << table;
    return 0;
  }

  int split() {
    const int modes = (cfg_.external_split ? 1 : 0) + (cfg_.holdout.empty() ? 0 : 1);
    if (modes > 1) throw ConfigError("--external and --holdout are mutually exclusive");
    require_file(layout_.corpus(), "ingest");
    auto corpus = read_corpus_artifact(layout_.corpus());

    Corpus train;
    Corpus test;
    json params;
    if (!cfg_.holdout.empty()) {
      for (auto& r : corpus) r.split = Split::Unassigned;
      std::tie(train, test) = holdout_cell_line(corpus, CellLine(cfg_.holdout));
      params = {{"mode", "holdout"}, {"cell_line", cfg_.holdout}};
    } else if (cfg_.external_split) {
      for (const auto& r : corpus) {
        if (r.split == Split::Unassigned) {
          throw DataError("--external: record " + r.key().to_string() + " has no split");
        }
      }
      train = filter_split(corpus, Split::Train);
      test = filter_split(corpus, Split::Test);
      params = {{"mode", "external"}};
    } else {
      for (auto& r : corpus) r.split = Split::Unassigned;
      const auto assigned = assign_split(std::move(corpus), cfg_.train_fraction, cfg_.split_seed);
      train = filter_split(assigned, Split::Train);
      test = filter_split(assigned, Split::Test);
      params = {{"mode", "random"}, {"train_fraction", cfg_.train_fraction}, {"seed", cfg_.split_seed}};
    }
    const auto prov = provenance("split", params, {{"corpus", layout_.corpus()}});
    write_corpus(layout_.train(), prov, train);
    write_corpus(layout_.test(), prov, test);
    err_ << fmt::format("split: {} train, {} test\n", train.size(), test.size());
    return 0;
  }

  int generate() {
    const auto approach = cfg_.approach == 1 ? Approach::PredictExplain : Approach::ExplainFromOutcome;
    require_file(layout_.train(), "split");
    auto records = read_corpus_artifact(layout_.train());
    if (cfg_.subset_fraction) records = sample_subset(records, *cfg_.subset_fraction, cfg_.subset_seed);

    GenerationOptions options;
    options.generator_model = model_or_default(cfg_.generator_model, "--generator-model");
    if (approach == Approach::ExplainFromOutcome) {
      options.critic_model = model_or_default(cfg_.critic_model, "--critic-model");
    }
    options.generator_temperature = cfg_.generator_temperature;
    options.critic_temperature = cfg_.critic_temperature;
    options.max_output_tokens = cfg_.max_tokens;
    options.resample_unparseable = cfg_.resample;

    const PromptForge forge(templates());
    auto gw = gateway();
    const auto traces = approach == Approach::PredictExplain
                            ? generate_approach1(records, *gw, forge, options)
                            : generate_approach2(records, *gw, forge, options);

    const json params = {{"approach", cfg_.approach},
                         {"generator_model", options.generator_model},
                         {"critic_model", options.critic_model},
                         {"generator_temperature", options.generator_temperature},
                         {"critic_temperature", options.critic_temperature},
                         {"max_tokens", options.max_output_tokens},
                         {"resample", options.resample_unparseable},
                         {"subset_fraction",
                          cfg_.subset_fraction ? json(*cfg_.subset_fraction) : json(nullptr)},
                         {"subset_seed", cfg_.subset_seed},
                         {"templates", template_digests(forge.store())}};
    write_jsonl(layout_.traces(cfg_.approach),
                provenance("generate", params, {{"train", layout_.train()}}), to_rows(traces));

    const auto summary = summarize(traces);
    err_ << fmt::format("generate: {} traces, {} retained, {} failed calls\n", summary.total,
                        summary.retained, summary.failed_calls);
    if (summary.failed_calls > 0) {
      err_ << "some model calls failed; rerun to retry them (successful calls are cached)\n";
      return static_cast<int>(ErrorClass::Network);
    }
    return 0;
  }

  std::vector<int> export_approaches() const {
    if (cfg_.export_approach == "1") return {1};
    if (cfg_.export_approach == "2") return {2};
    if (cfg_.export_approach == "both") return {1, 2};
    throw ConfigError("--approach must be 1, 2 or both");
  }

  int export_sft() {
    const PromptForge forge(templates());
    std::vector<SftExample> examples;
    std::vector<std::pair<std::string, fs::path>> inputs;
    json params = {{"baseline", cfg_.baseline},
                   {"rebalance", cfg_.rebalance},
                   {"rebalance_seed", cfg_.rebalance_seed},
                   {"templates", template_digests(forge.store())}};
    fs::path target;

    if (cfg_.baseline) {
      require_file(layout_.train(), "split");
      auto records = read_corpus_artifact(layout_.train());
      if (cfg_.rebalance) records = rebalance(records, cfg_.rebalance_seed);
      examples = build_baseline_examples(records, forge);
      inputs.emplace_back("train", layout_.train());
      target = layout_.baseline();
    } else {
      std::vector<ReasoningTrace> traces;
      for (int a : export_approaches()) {
        const auto path = layout_.traces(a);
        require_file(path, fmt::format("generate --approach {}", a));
        auto part = read_traces(path);
        traces.insert(traces.end(), std::make_move_iterator(part.begin()),
                      std::make_move_iterator(part.end()));
        inputs.emplace_back(fmt::format("traces{}", a), path);
      }
      if (!cfg_.include_all) {
        std::erase_if(traces, [](const ReasoningTrace& t) { return !t.retained; });
      }
      if (cfg_.rebalance) traces = rebalance_traces(std::move(traces));
      examples = build_sft_examples(traces, forge, !cfg_.include_all);
      params["approach"] = cfg_.export_approach;
      params["all"] = cfg_.include_all;
      target = layout_.sft();
    }
    write_jsonl(target, provenance("export", params, inputs), to_rows(examples));
    err_ << fmt::format("export: {} examples into {}\n", examples.size(), target.string());
    return 0;
  }

  // Rebalance the records behind the traces, then keep the traces whose
  // records survived (the sample is an order-preserving subsequence).
  std::vector<ReasoningTrace> rebalance_traces(std::vector<ReasoningTrace> traces) const {
    Corpus records;
    records.reserve(traces.size());
    for (const auto& t : traces) records.push_back(t.record);
    const auto kept = rebalance(records, cfg_.rebalance_seed);
    std::vector<ReasoningTrace> out;
    out.reserve(kept.size());
    std::size_t next = 0;
    for (auto& t : traces) {
      if (next < kept.size() && t.record == kept[next]) {
        out.push_back(std::move(t));
        ++next;
      }
    }
    return out;
  }

  int predict() {
    const auto protocol = parse_protocol(cfg_.protocol);
    if (!protocol) throw ConfigError("--protocol must be standard or direction");
    require_file(layout_.test(), "split");
    const auto test = read_corpus_artifact(layout_.test());

    std::vector<std::pair<std::string, fs::path>> inputs = {{"test", layout_.test()}};
    std::set<RecordKey> manifest;
    const fs::path manifest_path =
        cfg_.train_manifest.empty() ? layout_.train() : fs::path(cfg_.train_manifest);
    const bool have_manifest = fs::exists(manifest_path);
    if (!cfg_.train_manifest.empty() && !have_manifest) {
      throw ConfigError("training manifest '" + cfg_.train_manifest + "' does not exist");
    }
    if (have_manifest) {
      for (const auto& r : read_corpus_artifact(manifest_path)) manifest.insert(r.key());
      inputs.emplace_back("train_manifest", manifest_path);
    }

    const auto model = model_or_default(cfg_.student_model, "--student-model");
    const PromptForge forge(templates());
    auto gw = gateway();
    const auto predictions = run_predictions(test, *gw, forge, model, *protocol,
                                             have_manifest ? &manifest : nullptr, cfg_.max_tokens);
    const json params = {{"protocol", to_string(*protocol)},
                         {"model", model},
                         {"max_tokens", cfg_.max_tokens},
                         {"templates", template_digests(forge.store())}};
    write_jsonl(layout_.predictions(*protocol), provenance("predict", params, inputs),
                to_rows(predictions));

    const auto failed = std::count_if(predictions.begin(), predictions.end(),
                                      [](const Prediction& p) { return !p.error.empty(); });
    const auto invalid = std::count_if(predictions.begin(), predictions.end(),
                                       [](const Prediction& p) { return p.invalid(); });
    err_ << fmt::format("predict: {} predictions ({} invalid, {} failed calls)\n", predictions.size(),
                        invalid, failed);
    return failed > 0 ? static_cast<int>(ErrorClass::Network) : 0;
  }

  int evaluate() {
    const auto standard_path = layout_.predictions(Protocol::Standard);
    require_file(standard_path, "predict --protocol standard");
    const auto standard = read_predictions(standard_path);
    std::vector<Prediction> direction;
    const auto direction_path = layout_.predictions(Protocol::DirectionGiven);
    if (fs::exists(direction_path)) direction = read_predictions(direction_path);

    std::string model = cfg_.student_model;
    if (model.empty() && !standard.empty()) model = standard.front().model_name;
    const auto report = build_report(model, standard, direction);
    write_text_atomic(layout_.report_json(), emit_report(report, ReportFormat::Machine));
    write_text_atomic(layout_.report_txt(), emit_report(report, ReportFormat::Table));
    err_ << fmt::format("evaluate: report written to {}\n", layout_.report_json().string());
    return 0;
  }

  int report() {
    require_file(layout_.report_json(), "evaluate");
    const auto report = read_report(layout_.report_json());
    if (cfg_.report_format != "table" && cfg_.report_format != "machine") {
      throw ConfigError("--format must be table or machine");
    }
    out_ << emit_report(report, cfg_.report_format == "table" ? ReportFormat::Table
                                                              : ReportFormat::Machine);
    return 0;
  }

  RunConfig cfg_;
  std::ostream& out_;
  std::ostream& err_;
  RunLayout layout_;
  std::optional<TemplateStore> custom_templates_;
};

void add_common_options(CLI::App& app, RunConfig& cfg) {
  app.add_option("--run-dir", cfg.run_dir, "Run directory")
      ->envname("PERTCOT_RUN_DIR")
      ->capture_default_str();
  app.add_option("--templates-dir", cfg.templates_dir, "Override the built-in prompt templates");

  auto* gw = "Gateway";
  app.add_option("--base-url", cfg.base_url, "Chat-completions base URL")
      ->envname("PERTCOT_BASE_URL")
      ->group(gw)
      ->capture_default_str();
  app.add_option("--api-key-env", cfg.api_key_env, "Environment variable holding the API key")
      ->group(gw)
      ->capture_default_str();
  app.add_option("--max-in-flight", cfg.max_in_flight, "Concurrent requests")
      ->check(CLI::PositiveNumber)
      ->group(gw)
      ->capture_default_str();
  app.add_option("--retry-budget", cfg.retry_budget, "Retries per request on transient errors")
      ->check(CLI::NonNegativeNumber)
      ->group(gw)
      ->capture_default_str();
  app.add_option("--backoff-ms", cfg.backoff_ms, "Base backoff delay")
      ->check(CLI::NonNegativeNumber)
      ->group(gw)
      ->capture_default_str();
  app.add_option("--timeout-ms", cfg.timeout_ms, "Per-request timeout")
      ->check(CLI::PositiveNumber)
      ->group(gw)
      ->capture_default_str();
  app.add_option("--rpm", cfg.requests_per_minute, "Requests-per-minute ceiling")
      ->check(CLI::PositiveNumber)
      ->group(gw);
  app.add_option("--cache-dir", cfg.cache_dir, "Response cache (default <run-dir>/cache)")->group(gw);
  app.add_flag("--no-cache", cfg.no_cache, "Disable the response cache")->group(gw);
  app.add_option("--mock", cfg.mock_fixture, "Serve model calls from a JSON fixture")
      ->check(CLI::ExistingFile)
      ->group(gw);

  app.add_option("--generator-model", cfg.generator_model)->envname("PERTCOT_GENERATOR_MODEL");
  app.add_option("--critic-model", cfg.critic_model)->envname("PERTCOT_CRITIC_MODEL");
  app.add_option("--student-model", cfg.student_model)->envname("PERTCOT_STUDENT_MODEL");
  app.add_option("--max-tokens", cfg.max_tokens, "Output token cap per call")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Reasoning-trace distillation pipeline for perturbation outcome prediction",
               "pertcot"};
  app.set_version_flag("--version", tool_version());
  app.set_config("--config", "", "Config file (TOML/INI; [subcommand] sections)");
  app.fallthrough();
  app.require_subcommand(1);
  add_common_options(app, cfg);

  auto* ingest = app.add_subcommand("ingest", "Read the corpus into <run-dir>/corpus.jsonl");
  ingest->add_option("--corpus", cfg.corpus_paths, "Corpus file(s), JSONL or CSV")->required();
  ingest->add_option("--format", cfg.corpus_format)->check(CLI::IsMember({"jsonl", "csv"}));

  auto* stats = app.add_subcommand("stats", "Task counts per cell line");
  stats->add_option("--corpus", cfg.corpus_paths, "Read these files instead of the run corpus");
  stats->add_option("--format", cfg.corpus_format)->check(CLI::IsMember({"jsonl", "csv"}));

  auto* split = app.add_subcommand("split", "Write splits/train.jsonl and splits/test.jsonl");
  split->add_option("--train-fraction", cfg.train_fraction)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  split->add_option("--seed", cfg.split_seed)->capture_default_str();
  split->add_flag("--external", cfg.external_split, "Use the split column from the corpus");
  split->add_option("--holdout", cfg.holdout, "Hold out one cell line as the test set");

  auto* generate = app.add_subcommand("generate", "Synthesize reasoning traces for the train split");
  generate->add_option("--approach", cfg.approach, "1: predict then explain, 2: explain the outcome")
      ->check(CLI::Range(1, 2))
      ->capture_default_str();
  generate->add_option("--subset-fraction", cfg.subset_fraction)->check(CLI::Range(0.0, 1.0));
  generate->add_option("--subset-seed", cfg.subset_seed)->capture_default_str();
  generate->add_option("--temperature", cfg.generator_temperature)->capture_default_str();
  generate->add_option("--critic-temperature", cfg.critic_temperature)->capture_default_str();
  generate->add_option("--resample", cfg.resample, "Extra attempts for unparseable outputs")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  auto* exp = app.add_subcommand("export", "Write the fine-tuning corpus");
  exp->add_flag("--baseline", cfg.baseline, "Answer-only targets from the train split");
  exp->add_flag("--all", cfg.include_all, "Include unretained traces that have a think block");
  exp->add_option("--approach", cfg.export_approach, "1, 2 or both")->capture_default_str();
  exp->add_flag("--rebalance", cfg.rebalance, "Downsample to equal class counts");
  exp->add_option("--rebalance-seed", cfg.rebalance_seed)->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Query the student model on the test split");
  predict->add_option("--protocol", cfg.protocol)
      ->check(CLI::IsMember({"standard", "direction"}))
      ->capture_default_str();
  predict->add_option("--train-manifest", cfg.train_manifest,
                      "Records the student was trained on (default splits/train.jsonl)");

  app.add_subcommand("evaluate", "Score predictions into reports/report.json");
  auto* report = app.add_subcommand("report", "Print the evaluation report");
  report->add_option("--format", cfg.report_format)
      ->check(CLI::IsMember({"table", "machine"}))
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorClass::Config);
  }

  const auto* chosen = app.get_subcommands().front();
  try {
    Runner runner(cfg, out, err);
    return runner.dispatch(chosen->get_name());
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.error_class());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorClass::Data);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorClass::Data);
  }
}

}  // namespace pertcot::cli
