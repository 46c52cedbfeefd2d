#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace pertcot::cli {

/// Everything the subcommands can be told, after flags, config file and
/// environment have been merged (in that order of precedence).
struct RunConfig {
  std::vector<std::string> corpus_paths;
  std::string corpus_format;  // "", "jsonl" or "csv"
  std::string run_dir = "run";

  // gateway
  std::string base_url = "http://127.0.0.1:8000";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_in_flight = 8;
  int retry_budget = 3;
  int backoff_ms = 500;
  int timeout_ms = 120000;
  std::optional<int> requests_per_minute;
  std::string cache_dir;  // default <run_dir>/cache
  bool no_cache = false;
  std::string mock_fixture;

  std::string generator_model;
  std::string critic_model;
  std::string student_model;
  std::string templates_dir;

  // split
  double train_fraction = 0.75;
  std::uint64_t split_seed = 0;
  bool external_split = false;
  std::string holdout;

  // generate
  int approach = 2;
  std::optional<double> subset_fraction;
  std::uint64_t subset_seed = 0;
  double generator_temperature = 1.0;
  double critic_temperature = 0.0;
  int max_tokens = 4096;
  int resample = 0;

  // export
  bool baseline = false;
  bool include_all = false;
  std::string export_approach = "2";
  bool rebalance = false;
  std::uint64_t rebalance_seed = 0;

  // predict / report
  std::string protocol = "standard";
  std::string train_manifest;
  std::string report_format = "table";
};

/// Parses `args` (without the program name), runs one subcommand and returns
/// the exit status: 0 ok, 1 configuration, 2 data, 3 network.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pertcot::cli
