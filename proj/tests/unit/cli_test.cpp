#include <fcntl.h>
#include <gtest/gtest.h>
#include <sys/file.h>
#include <unistd.h>

#include <sstream>

#include "pertcot/artifact_io.hpp"
#include "pertcot/cli.hpp"
#include "pertcot/digest.hpp"
#include "pertcot/report.hpp"
#include "scenario.hpp"
#include "test_support.hpp"

namespace pertcot {
namespace {

using testing::fixture_path;
using testing::read_file;
using testing::TempDir;
using testing::write_file;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  std::string run_dir() const { return (tmp_ / "run").string(); }
  Outcome run_in(std::vector<std::string> args) {
    args.insert(args.begin(), {"--run-dir", run_dir()});
    return run(std::move(args));
  }
  void ingest_mini() {
    const auto r = run_in({"ingest", "--corpus", fixture_path("fixtures/mini_corpus.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  TempDir tmp_;
};

TEST_F(CliTest, HelpAndMissingSubcommand) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
}

TEST_F(CliTest, IngestAndStatsMatchGolden) {
  const auto source = fixture_path("fixtures/mini_corpus.jsonl");
  const auto before = sha256_file(source);
  ingest_mini();
  const auto r = run_in({"stats"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, read_file(fixture_path("golden/stats_mini.txt")));
  EXPECT_EQ(read_file(tmp_ / "run/reports/stats.txt"), r.out);
  EXPECT_TRUE(std::filesystem::exists(tmp_ / "run/reports/stats.json"));
  EXPECT_EQ(sha256_file(source), before);
  EXPECT_EQ(run_in({"stats", "--corpus", fixture_path("fixtures/mini_corpus.csv").string()}).out, r.out);
}

TEST_F(CliTest, IngestIsByteIdenticalOnRerunAndCarriesProvenance) {
  ingest_mini();
  const auto first = read_file(tmp_ / "run/corpus.jsonl");
  ingest_mini();
  EXPECT_EQ(read_file(tmp_ / "run/corpus.jsonl"), first);
  const auto doc = read_jsonl(tmp_ / "run/corpus.jsonl");
  ASSERT_TRUE(doc.provenance);
  EXPECT_EQ((*doc.provenance)["stage"], "ingest");
  EXPECT_EQ((*doc.provenance)["inputs"]["corpus[0]"], sha256_file(fixture_path("fixtures/mini_corpus.jsonl")));
  EXPECT_EQ((*doc.provenance)["version"], tool_version());
}

TEST_F(CliTest, ExitCodesByFailureClass) {
  EXPECT_EQ(run_in({"ingest", "--corpus", (tmp_ / "absent.jsonl").string()}).code, 1);
  write_file(tmp_ / "bad.jsonl", R"({"cell_line":"K562","perturbation":"A","gene":"B","label":"up"})"
                                 "\n");
  EXPECT_EQ(run_in({"ingest", "--corpus", (tmp_ / "bad.jsonl").string()}).code, 2);
  EXPECT_EQ(run_in({"evaluate"}).code, 2);
  EXPECT_EQ(run_in({"split"}).code, 2);

  ingest_mini();
  ASSERT_EQ(run_in({"split", "--holdout", "RPE1"}).code, 0);
  const auto network = run_in({"--base-url", "http://127.0.0.1:9", "--retry-budget", "0",
                               "--student-model", "m", "--no-cache", "predict"});
  EXPECT_EQ(network.code, 3) << network.err;
  EXPECT_TRUE(std::filesystem::exists(tmp_ / "run/predictions/standard.jsonl"));
}

TEST_F(CliTest, HoldoutSplitIsExact) {
  ingest_mini();
  ASSERT_EQ(run_in({"split", "--holdout", "RPE1"}).code, 0);
  for (const auto& r : read_corpus_artifact(tmp_ / "run/splits/test.jsonl")) EXPECT_EQ(r.cell_line.str(), "RPE1");
  for (const auto& r : read_corpus_artifact(tmp_ / "run/splits/train.jsonl")) EXPECT_NE(r.cell_line.str(), "RPE1");
  EXPECT_EQ(read_corpus_artifact(tmp_ / "run/splits/test.jsonl").size(), 15u);
  EXPECT_EQ(run_in({"split", "--holdout", "HeLa"}).code, 1);
  EXPECT_EQ(run_in({"split", "--holdout", "RPE1", "--external"}).code, 1);
}

TEST_F(CliTest, RandomSplitIsSeededAndGroupAtomic) {
  ingest_mini();
  ASSERT_EQ(run_in({"split", "--seed", "4"}).code, 0);
  const auto first = read_file(tmp_ / "run/splits/train.jsonl");
  ASSERT_EQ(run_in({"split", "--seed", "4"}).code, 0);
  EXPECT_EQ(read_file(tmp_ / "run/splits/train.jsonl"), first);
  const auto train = read_corpus_artifact(tmp_ / "run/splits/train.jsonl");
  const auto test = read_corpus_artifact(tmp_ / "run/splits/test.jsonl");
  EXPECT_EQ(train.size() + test.size(), 60u);
  for (const auto& a : train) {
    for (const auto& b : test) {
      EXPECT_FALSE(a.cell_line == b.cell_line && a.perturbation_gene == b.perturbation_gene);
    }
  }
}

TEST_F(CliTest, ExternalSplitNeedsEveryRecordAssigned) {
  ingest_mini();
  EXPECT_EQ(run_in({"split", "--external"}).code, 2);
}

TEST_F(CliTest, ConfigPrecedenceFlagThenFileThenEnvironment) {
  const auto corpus = fixture_path("fixtures/mini_corpus.jsonl").string();
  const auto env_dir = tmp_ / "from_env";
  const auto file_dir = tmp_ / "from_file";
  const auto flag_dir = tmp_ / "from_flag";
  write_file(tmp_ / "pertcot.toml", "run-dir = \"" + file_dir.string() + "\"\n");
  ::setenv("PERTCOT_RUN_DIR", env_dir.c_str(), 1);

  EXPECT_EQ(run({"ingest", "--corpus", corpus}).code, 0);
  EXPECT_TRUE(std::filesystem::exists(env_dir / "corpus.jsonl"));

  EXPECT_EQ(run({"--config", (tmp_ / "pertcot.toml").string(), "ingest", "--corpus", corpus}).code, 0);
  EXPECT_TRUE(std::filesystem::exists(file_dir / "corpus.jsonl"));

  EXPECT_EQ(run({"--config", (tmp_ / "pertcot.toml").string(), "--run-dir", flag_dir.string(), "ingest",
                 "--corpus", corpus})
                .code,
            0);
  EXPECT_TRUE(std::filesystem::exists(flag_dir / "corpus.jsonl"));
  ::unsetenv("PERTCOT_RUN_DIR");
}

TEST_F(CliTest, SubcommandSectionsInConfigFile) {
  ingest_mini();
  write_file(tmp_ / "split.toml", "[split]\nholdout = \"K562\"\n");
  ASSERT_EQ(run_in({"--config", (tmp_ / "split.toml").string(), "split"}).code, 0);
  for (const auto& r : read_corpus_artifact(tmp_ / "run/splits/test.jsonl")) EXPECT_EQ(r.cell_line.str(), "K562");
  const auto lock = nlohmann::json::parse(read_file(tmp_ / "run/config.lock"));
  EXPECT_EQ(lock["split"]["split"]["holdout"], "K562");
  EXPECT_TRUE(lock.contains("ingest"));
}

TEST_F(CliTest, BusyRunDirectoryIsRefused) {
  std::filesystem::create_directories(run_dir());
  const int fd = ::open((tmp_ / "run/.lock").c_str(), O_CREAT | O_RDWR, 0644);
  ASSERT_GE(fd, 0);
  ASSERT_EQ(::flock(fd, LOCK_EX), 0);
  const auto r = run_in({"ingest", "--corpus", fixture_path("fixtures/mini_corpus.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("in use"), std::string::npos);
  ::close(fd);
  ingest_mini();
}

TEST_F(CliTest, BaselineExportWithRebalance) {
  ingest_mini();
  ASSERT_EQ(run_in({"split", "--holdout", "RPE1"}).code, 0);
  ASSERT_EQ(run_in({"export", "--baseline", "--rebalance", "--rebalance-seed", "3"}).code, 0);
  const auto examples = read_sft(tmp_ / "run/sft/baseline.jsonl");
  std::map<Label, int> counts;
  for (const auto& e : examples) {
    ++counts[e.label];
    EXPECT_EQ(e.target_text, "<answer>" + std::string(to_string(e.label)) + "</answer>");
    EXPECT_EQ(e.user_text.find("RPE1"), std::string::npos);
  }
  // Train part of the fixture without RPE1: 9 up, 9 down, 27 not DE.
  EXPECT_EQ(counts[Label::Up], 9);
  EXPECT_EQ(counts[Label::Down], 9);
  EXPECT_EQ(counts[Label::NotDE], 9);
}

TEST_F(CliTest, MissingUpstreamArtifacts) {
  EXPECT_EQ(run_in({"--mock", fixture_path("fixtures/three_class_12.jsonl").string(), "generate"}).code, 2);
  EXPECT_EQ(run_in({"export"}).code, 2);
  EXPECT_EQ(run_in({"report"}).code, 2);
}

class CliPipelineTest : public CliTest {
 protected:
  void SetUp() override {
    scripted_ = testing::mock_run_records();
    test_ = testing::scenario_test_records();
    testing::write_scenario_corpus(tmp_ / "corpus.jsonl", scripted_, test_);
    testing::scenario_fixture(scripted_, test_).save(tmp_ / "mock.json");
  }
  Outcome mock(std::vector<std::string> args) {
    args.insert(args.begin(), {"--mock", (tmp_ / "mock.json").string(), "--backoff-ms", "0"});
    return run_in(std::move(args));
  }

  std::vector<testing::ScriptedRecord> scripted_;
  Corpus test_;
};

TEST_F(CliPipelineTest, GenerateExportPredictEvaluateReport) {
  ASSERT_EQ(run_in({"ingest", "--corpus", (tmp_ / "corpus.jsonl").string()}).code, 0);
  ASSERT_EQ(run_in({"split", "--external"}).code, 0);
  auto r = mock({"generate", "--approach", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto traces = read_traces(tmp_ / "run/traces/approach2.jsonl");
  EXPECT_EQ(std::count_if(traces.begin(), traces.end(), [](const auto& t) { return t.retained; }), 12);

  ASSERT_EQ(mock({"export"}).code, 0);
  const auto examples = read_sft(tmp_ / "run/sft/sft.jsonl");
  EXPECT_EQ(examples.size(), 12u);

  r = mock({"predict"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = mock({"predict", "--protocol", "direction"});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(mock({"evaluate"}).code, 0);
  const auto table = run_in({"report"});
  ASSERT_EQ(table.code, 0);
  EXPECT_NE(table.out.find("Accuracy"), std::string::npos);
  const auto machine = run_in({"report", "--format", "machine"});
  const auto report = report_from_json(nlohmann::json::parse(machine.out));
  EXPECT_EQ(report.model_name, "mock");
  ASSERT_TRUE(report.three_class);
  EXPECT_EQ(report.three_class->total, 12u);
  EXPECT_EQ(report.de_auroc.size(), 2u);
  EXPECT_EQ(report.direction_auroc.size(), 2u);
}

TEST_F(CliPipelineTest, Approach1AndBothExport) {
  ASSERT_EQ(run_in({"ingest", "--corpus", (tmp_ / "corpus.jsonl").string()}).code, 0);
  ASSERT_EQ(run_in({"split", "--external"}).code, 0);
  // The fixture has no rules for the standard prompt on training records.
  EXPECT_EQ(mock({"generate", "--approach", "1"}).code, 3);
  ASSERT_EQ(mock({"generate", "--approach", "2"}).code, 0);
  ASSERT_EQ(mock({"export", "--approach", "both"}).code, 0);
  EXPECT_EQ(read_sft(tmp_ / "run/sft/sft.jsonl").size(), 12u);
}

TEST_F(CliPipelineTest, PredictRefusesLeakedManifest) {
  ASSERT_EQ(run_in({"ingest", "--corpus", (tmp_ / "corpus.jsonl").string()}).code, 0);
  ASSERT_EQ(run_in({"split", "--external"}).code, 0);
  EXPECT_EQ(mock({"predict", "--train-manifest", (tmp_ / "run/splits/test.jsonl").string()}).code, 2);
  EXPECT_FALSE(std::filesystem::exists(tmp_ / "run/predictions/standard.jsonl"));
}

}  // namespace
}  // namespace pertcot
