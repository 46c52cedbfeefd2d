#include "pertcot/traces.hpp"

#include "pertcot/errors.hpp"

namespace pertcot {
namespace {

struct Generated {
  ParsedAnswer parsed;
  ChatResult result;
  int attempts = 0;
};

// Runs one generation request per prompt, then re-requests unparseable
// outputs with fresh seed hints up to `resample` more times.
std::vector<Generated> generate(std::vector<ChatRequest> requests, Gateway& gateway, int resample,
                                const ProgressCallback& on_progress) {
  std::vector<Generated> out(requests.size());
  auto results = gateway.complete_batch(requests, on_progress);
  for (std::size_t i = 0; i < results.size(); ++i) {
    out[i].result = std::move(results[i]);
    out[i].attempts = 1;
    if (out[i].result.ok()) out[i].parsed = parse_answer(out[i].result.raw_text);
  }
  for (int round = 1; round <= resample; ++round) {
    std::vector<std::size_t> redo;
    std::vector<ChatRequest> retry;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i].result.ok() && !out[i].parsed.valid()) {
        redo.push_back(i);
        retry.push_back(requests[i]);
        retry.back().seed_hint = round;
      }
    }
    if (redo.empty()) break;
    auto again = gateway.complete_batch(retry, on_progress);
    for (std::size_t k = 0; k < redo.size(); ++k) {
      auto& slot = out[redo[k]];
      ++slot.attempts;
      if (!again[k].ok()) continue;
      slot.result = std::move(again[k]);
      slot.parsed = parse_answer(slot.result.raw_text);
    }
  }
  return out;
}

ReasoningTrace start_trace(const PerturbationRecord& record, Approach approach,
                           const GenerationOptions& options, Generated generated) {
  ReasoningTrace trace;
  trace.trace_id = make_trace_id(record, approach);
  trace.record = record;
  trace.approach = approach;
  trace.generator_model = options.generator_model;
  trace.generator_attempts = generated.attempts;
  trace.generator_cache_key = generated.result.cache_key;
  if (!generated.result.ok()) {
    trace.error = "generator: " + generated.result.error_message;
    return trace;
  }
  trace.generator_raw = std::move(generated.result.raw_text);
  trace.generator_validity = generated.parsed.validity;
  trace.answer = generated.parsed.answer;
  trace.think_text = generated.parsed.think_text.value_or("");
  return trace;
}

ChatRequest make_request(const PromptBundle& bundle, const std::string& model, double temperature,
                         int max_tokens) {
  return {model, bundle.system_text, bundle.user_text, temperature, max_tokens, std::nullopt};
}

}  // namespace

std::string_view to_string(Approach approach) {
  return approach == Approach::PredictExplain ? "predict_explain" : "explain_from_outcome";
}

std::optional<Approach> parse_approach(std::string_view text) {
  if (text == "predict_explain" || text == "1") return Approach::PredictExplain;
  if (text == "explain_from_outcome" || text == "2") return Approach::ExplainFromOutcome;
  return std::nullopt;
}

std::string make_trace_id(const PerturbationRecord& record, Approach approach) {
  return record.key().to_string() + (approach == Approach::PredictExplain ? "#1" : "#2");
}

bool retain_predict_explain(const ParsedAnswer& parsed, Label truth) {
  return parsed.valid() && parsed.answer == to_answer(truth) && parsed.think_text &&
         !trim(*parsed.think_text).empty();
}

bool retain_explain_from_outcome(const ParsedAnswer& parsed, Label truth,
                                 const CriticVerdict& verdict) {
  return retain_predict_explain(parsed, truth) && verdict.valid() &&
         verdict.grade == Grade::Excellent;
}

std::vector<ReasoningTrace> generate_approach1(std::span<const PerturbationRecord> records,
                                               Gateway& gateway, const PromptForge& forge,
                                               const GenerationOptions& options,
                                               const ProgressCallback& on_progress) {
  std::vector<ChatRequest> requests;
  requests.reserve(records.size());
  for (const auto& record : records) {
    requests.push_back(make_request(forge.render_standard(record), options.generator_model,
                                    options.generator_temperature, options.max_output_tokens));
  }
  auto generated = generate(std::move(requests), gateway, options.resample_unparseable, on_progress);

  std::vector<ReasoningTrace> traces;
  traces.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto parsed = generated[i].parsed;
    const bool ok = generated[i].result.ok();
    auto trace = start_trace(records[i], Approach::PredictExplain, options, std::move(generated[i]));
    trace.retained = ok && retain_predict_explain(parsed, records[i].label);
    traces.push_back(std::move(trace));
  }
  return traces;
}

std::vector<ReasoningTrace> generate_approach2(std::span<const PerturbationRecord> records,
                                               Gateway& gateway, const PromptForge& forge,
                                               const GenerationOptions& options,
                                               const ProgressCallback& on_progress) {
  std::vector<ChatRequest> requests;
  requests.reserve(records.size());
  for (const auto& record : records) {
    requests.push_back(make_request(forge.render_generator(record), options.generator_model,
                                    options.generator_temperature, options.max_output_tokens));
  }
  auto generated = generate(std::move(requests), gateway, options.resample_unparseable, on_progress);

  std::vector<ReasoningTrace> traces;
  std::vector<ParsedAnswer> parsed;
  traces.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    parsed.push_back(generated[i].parsed);
    traces.push_back(
        start_trace(records[i], Approach::ExplainFromOutcome, options, std::move(generated[i])));
  }

  // The critic sees the standard user query, never the generator prompt.
  std::vector<std::size_t> judged;
  std::vector<ChatRequest> critic_requests;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (!traces[i].error.empty() || trim(traces[i].think_text).empty()) continue;
    const auto query = forge.render_standard(records[i]).user_text;
    judged.push_back(i);
    critic_requests.push_back(make_request(forge.render_critic(query, traces[i].think_text),
                                           options.critic_model, options.critic_temperature,
                                           options.max_output_tokens));
  }
  auto verdicts = gateway.complete_batch(critic_requests, on_progress);

  for (std::size_t k = 0; k < judged.size(); ++k) {
    auto& trace = traces[judged[k]];
    auto& result = verdicts[k];
    trace.critic_model = options.critic_model;
    trace.critic_cache_key = result.cache_key;
    if (!result.ok()) {
      trace.error = "critic: " + result.error_message;
      continue;
    }
    const auto verdict = parse_critic(result.raw_text);
    trace.critic_raw = std::move(result.raw_text);
    trace.critic_validity = verdict.validity;
    trace.critic_justification = verdict.justification;
    if (verdict.valid()) trace.critic_grade = verdict.grade;
    trace.retained = retain_explain_from_outcome(parsed[judged[k]], trace.record.label, verdict);
  }
  return traces;
}

std::string sft_target(std::optional<std::string_view> think_text, Label label) {
  std::string target;
  if (think_text) {
    target += "<think>";
    target += *think_text;
    target += "</think>";
  }
  target += "<answer>";
  target += to_string(label);
  target += "</answer>";
  return target;
}

std::vector<SftExample> build_sft_examples(std::span<const ReasoningTrace> traces,
                                           const PromptForge& forge, bool only_retained) {
  std::vector<SftExample> examples;
  for (const auto& trace : traces) {
    if (only_retained && !trace.retained) continue;
    const auto label = to_label(trace.answer);
    if (trace.retained) {
      if (!label) throw DataError("retained trace " + trace.trace_id + " has an 'I do not know' answer");
      if (*label != trace.record.label) {
        throw DataError("retained trace " + trace.trace_id + " disagrees with its ground truth");
      }
      if (trace.approach == Approach::ExplainFromOutcome && trace.critic_grade != Grade::Excellent) {
        throw DataError("retained trace " + trace.trace_id + " was not graded excellent");
      }
    }
    if (!label || trace.generator_validity != Validity::Valid || trim(trace.think_text).empty()) {
      continue;
    }
    const auto prompt = forge.render_standard(trace.record);
    examples.push_back({prompt.system_text, prompt.user_text, sft_target(trace.think_text, *label),
                        trace.trace_id, *label});
  }
  return examples;
}

std::vector<SftExample> build_baseline_examples(std::span<const PerturbationRecord> records,
                                                const PromptForge& forge) {
  std::vector<SftExample> examples;
  examples.reserve(records.size());
  for (const auto& record : records) {
    const auto prompt = forge.render_standard(record);
    examples.push_back({prompt.system_text, prompt.user_text, sft_target(std::nullopt, record.label),
                        record.key().to_string() + "#0", record.label});
  }
  return examples;
}

RetentionSummary summarize(std::span<const ReasoningTrace> traces) {
  RetentionSummary summary;
  summary.total = traces.size();
  for (const auto& trace : traces) {
    if (!trace.error.empty()) ++summary.failed_calls;
    ++summary.validity_counts[std::string(to_string(trace.generator_validity))];
    if (trace.critic_grade) ++summary.grade_counts[std::string(to_string(*trace.critic_grade))];
    if (trace.retained) {
      ++summary.retained;
      ++summary.retained_by_label[std::string(to_string(trace.record.label))];
    }
  }
  return summary;
}

}  // namespace pertcot
