#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pertcot/corpus.hpp"
#include "pertcot/gateway.hpp"
#include "pertcot/parsing.hpp"
#include "pertcot/prompts.hpp"

namespace pertcot {

enum class Approach {
  PredictExplain,      // model sees only the tuple, must get the outcome right
  ExplainFromOutcome,  // model is given the outcome, a critic grades the rationale
};

std::string_view to_string(Approach approach);
std::optional<Approach> parse_approach(std::string_view text);

struct ReasoningTrace {
  std::string trace_id;
  PerturbationRecord record;
  Approach approach = Approach::ExplainFromOutcome;
  std::string think_text;
  Answer answer = Answer::NotDE;
  Validity generator_validity = Validity::MissingTags;
  std::string generator_model;
  std::string generator_raw;
  std::string generator_cache_key;
  int generator_attempts = 0;  // generation requests issued, resamples included
  std::optional<Grade> critic_grade;
  std::optional<Validity> critic_validity;
  std::string critic_justification;
  std::optional<std::string> critic_model;
  std::string critic_raw;
  std::string critic_cache_key;
  bool retained = false;
  std::string error;
  std::vector<bool> clause_verdicts;
  std::optional<double> factuality;

  bool operator==(const ReasoningTrace&) const = default;
};

/// Stable identifier, e.g. "HepG2/PFDN2/VDAC3#2" for approach 2.
std::string make_trace_id(const PerturbationRecord& record, Approach approach);

// Retention rules. Both require a non-empty think block, since the block is
// the fine-tuning target.
bool retain_predict_explain(const ParsedAnswer& parsed, Label truth);
bool retain_explain_from_outcome(const ParsedAnswer& parsed, Label truth,
                                 const CriticVerdict& verdict);

struct GenerationOptions {
  std::string generator_model;
  std::string critic_model;
  double generator_temperature = 1.0;
  double critic_temperature = 0.0;
  int max_output_tokens = 4096;
  // Extra generation attempts for unparseable outputs; each uses a distinct
  // seed hint so it misses the cache. Off by default.
  int resample_unparseable = 0;
};

/// Standard prompt (no outcome shown); retained iff the parsed answer is valid
/// and equals the ground truth.
std::vector<ReasoningTrace> generate_approach1(std::span<const PerturbationRecord> records,
                                               Gateway& gateway, const PromptForge& forge,
                                               const GenerationOptions& options,
                                               const ProgressCallback& on_progress = {});

/// Generator prompt with the outcome in the solution slot, then a critic over
/// (standard user query, think block). Retained iff the generator output is
/// valid, its answer matches the given outcome and the grade is excellent.
std::vector<ReasoningTrace> generate_approach2(std::span<const PerturbationRecord> records,
                                               Gateway& gateway, const PromptForge& forge,
                                               const GenerationOptions& options,
                                               const ProgressCallback& on_progress = {});

struct SftExample {
  std::string system_text;
  std::string user_text;
  std::string target_text;
  std::string source_trace_id;
  Label label = Label::NotDE;

  bool operator==(const SftExample&) const = default;
};

/// "<think>" + think + "</think><answer>" + label + "</answer>", or just the
/// answer block without a think text.
std::string sft_target(std::optional<std::string_view> think_text, Label label);

/// One example per retained trace (or per labelled trace with a think block
/// when only_retained is false), in trace order, using the standard prompts.
/// Throws DataError if a retained trace breaks the retention invariants.
std::vector<SftExample> build_sft_examples(std::span<const ReasoningTrace> traces,
                                           const PromptForge& forge, bool only_retained = true);

/// The no-explanation baseline: answer block only.
std::vector<SftExample> build_baseline_examples(std::span<const PerturbationRecord> records,
                                                const PromptForge& forge);

struct RetentionSummary {
  std::size_t total = 0;
  std::size_t retained = 0;
  std::size_t failed_calls = 0;
  std::map<std::string, std::size_t> retained_by_label;
  std::map<std::string, std::size_t> validity_counts;
  std::map<std::string, std::size_t> grade_counts;
};

RetentionSummary summarize(std::span<const ReasoningTrace> traces);

}  // namespace pertcot
