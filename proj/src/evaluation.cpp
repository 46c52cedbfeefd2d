#include "pertcot/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pertcot/errors.hpp"

namespace pertcot {
namespace {

std::string group_key(const PerturbationRecord& record) {
  return record.cell_line.str() + "/" + record.perturbation_gene;
}

// Positive / negative membership under a view; nullopt = not in the view.
std::optional<bool> truth_is_positive(Label truth, TruthView view) {
  if (view == TruthView::DEvsNotDE) return is_differentially_expressed(truth);
  if (truth == Label::NotDE) return std::nullopt;
  return truth == Label::Up;
}

}  // namespace

std::string_view to_string(Protocol protocol) {
  return protocol == Protocol::Standard ? "standard" : "direction";
}

std::optional<Protocol> parse_protocol(std::string_view text) {
  if (text == "standard") return Protocol::Standard;
  if (text == "direction") return Protocol::DirectionGiven;
  return std::nullopt;
}

std::string_view to_string(TruthView view) {
  return view == TruthView::DEvsNotDE ? "de_vs_notde" : "up_vs_down";
}

bool Prediction::invalid() const {
  return !error.empty() || !parsed.valid() || parsed.answer == Answer::Unknown;
}

Label Prediction::predicted_label() const {
  if (invalid()) return Label::NotDE;
  return to_label(parsed.answer).value_or(Label::NotDE);
}

Prediction score_response(const PerturbationRecord& record, std::string raw_text,
                          std::string model_name, Protocol protocol) {
  Prediction p;
  p.record = record;
  p.parsed = parse_answer(raw_text);
  p.raw_text = std::move(raw_text);
  p.model_name = std::move(model_name);
  p.protocol = protocol;
  const auto label = p.predicted_label();
  p.de_score = is_differentially_expressed(label) ? 1.0 : 0.0;
  if (label == Label::Up) {
    p.direction_score = 1.0;
  } else if (label == Label::Down) {
    p.direction_score = 0.0;
  } else if (protocol == Protocol::DirectionGiven) {
    p.direction_score = 0.5;
  }
  return p;
}

std::vector<Prediction> run_predictions(std::span<const PerturbationRecord> test_records,
                                        Gateway& gateway, const PromptForge& forge,
                                        const std::string& model_name, Protocol protocol,
                                        const std::set<RecordKey>* training_manifest,
                                        int max_output_tokens,
                                        const ProgressCallback& on_progress) {
  if (training_manifest) {
    std::size_t overlap = 0;
    std::string example;
    for (const auto& record : test_records) {
      if (training_manifest->contains(record.key())) {
        if (overlap++ == 0) example = record.key().to_string();
      }
    }
    if (overlap > 0) {
      throw DataError("train/test leakage: " + std::to_string(overlap) +
                      " test record(s) appear in the training manifest, e.g. " + example);
    }
  }

  std::vector<const PerturbationRecord*> evaluated;
  std::vector<ChatRequest> requests;
  for (const auto& record : test_records) {
    if (protocol == Protocol::DirectionGiven && record.label == Label::NotDE) continue;
    const auto bundle = protocol == Protocol::Standard ? forge.render_standard(record)
                                                       : forge.render_direction(record);
    evaluated.push_back(&record);
    requests.push_back(
        {model_name, bundle.system_text, bundle.user_text, 0.0, max_output_tokens, std::nullopt});
  }
  auto results = gateway.complete_batch(requests, on_progress);

  std::vector<Prediction> predictions;
  predictions.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto p = score_response(*evaluated[i], results[i].ok() ? results[i].raw_text : std::string(),
                            model_name, protocol);
    p.cache_key = results[i].cache_key;
    if (!results[i].ok()) {
      p.error = results[i].error_message.empty() ? "request failed" : results[i].error_message;
      p.de_score = 0.0;
      p.direction_score = protocol == Protocol::DirectionGiven ? std::optional(0.5) : std::nullopt;
    }
    predictions.push_back(std::move(p));
  }
  return predictions;
}

ScoreFn default_score(TruthView view) {
  if (view == TruthView::DEvsNotDE) {
    return [](const Prediction& p) -> std::optional<double> { return p.de_score; };
  }
  return [](const Prediction& p) { return p.direction_score; };
}

double mann_whitney_auroc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw DataError("AUROC needs at least one positive and one negative");
  }
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(positives.size() + negatives.size());
  for (double s : positives) all.push_back({s, true});
  for (double s : negatives) all.push_back({s, false});
  for (const auto& s : all) {
    if (std::isnan(s.score)) throw DataError("AUROC score is NaN");
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });

  // Twice the Mann-Whitney U, so ties stay integral.
  std::uint64_t twice_u = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      (all[j].positive ? pos : neg) += 1;
      ++j;
    }
    twice_u += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    i = j;
  }
  const auto pairs = static_cast<double>(positives.size()) * static_cast<double>(negatives.size());
  return static_cast<double>(twice_u) / (2.0 * pairs);
}

AurocResult auroc_per_perturbation(std::span<const Prediction> predictions, TruthView view,
                                   const ScoreFn& score) {
  const auto& score_of = score ? score : default_score(view);
  struct Group {
    std::vector<double> positives, negatives;
  };
  std::map<std::string, Group> groups;
  for (const auto& p : predictions) {
    const auto positive = truth_is_positive(p.record.label, view);
    if (!positive) continue;
    const auto s = score_of(p);
    if (!s) {
      throw DataError("prediction for " + p.record.key().to_string() + " carries no " +
                      std::string(to_string(view)) + " score");
    }
    auto& g = groups[group_key(p.record)];
    (*positive ? g.positives : g.negatives).push_back(*s);
  }

  AurocResult result;
  for (const auto& [key, g] : groups) {
    if (g.positives.empty() || g.negatives.empty()) {
      result.skipped.push_back({key, g.positives.empty() ? "no positives" : "no negatives"});
      continue;
    }
    result.per_group[key] = mann_whitney_auroc(g.positives, g.negatives);
  }
  if (result.per_group.empty()) {
    throw DataError("no perturbation group has both truth classes under " +
                    std::string(to_string(view)));
  }
  double sum = 0.0;
  for (const auto& [key, value] : result.per_group) sum += value;
  result.mean = sum / static_cast<double>(result.per_group.size());
  return result;
}

ThreeClassMetrics metrics_from_confusion(const ConfusionMatrix& confusion, std::uint64_t invalid) {
  ThreeClassMetrics m;
  m.confusion = confusion;
  m.invalid = invalid;
  std::uint64_t diagonal = 0;
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t p = 0; p < 3; ++p) m.total += confusion[t][p];
    diagonal += confusion[t][t];
  }
  for (std::size_t c = 0; c < 3; ++c) {
    const auto tp = confusion[c][c];
    std::uint64_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      predicted += confusion[k][c];
      actual += confusion[c][k];
    }
    auto& cm = m.per_class[c];
    cm.support = actual;
    cm.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    cm.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    // 2TP / (2TP + FP + FN): the harmonic mean of P and R as one exact ratio.
    const auto denom = predicted + actual;
    cm.f1 = denom ? static_cast<double>(2 * tp) / static_cast<double>(denom) : 0.0;
  }
  if (m.total) {
    m.accuracy = static_cast<double>(diagonal) / static_cast<double>(m.total);
    m.invalid_rate = static_cast<double>(invalid) / static_cast<double>(m.total);
  }
  return m;
}

EvalReport three_class_report(std::span<const Prediction> predictions) {
  if (predictions.empty()) throw DataError("three-class report needs at least one prediction");
  ConfusionMatrix confusion{};
  std::uint64_t invalid = 0;
  for (const auto& p : predictions) {
    ++confusion[index_of(p.record.label)][index_of(p.predicted_label())];
    if (p.invalid()) ++invalid;
  }
  EvalReport report;
  report.model_name = predictions.front().model_name;
  report.three_class = metrics_from_confusion(confusion, invalid);
  return report;
}

EvalReport build_report(const std::string& model_name, std::span<const Prediction> standard,
                        std::span<const Prediction> direction) {
  EvalReport report;
  if (!standard.empty()) report = three_class_report(standard);
  report.model_name = model_name;

  auto per_line = [](std::span<const Prediction> preds, TruthView view) {
    std::map<std::string, std::vector<Prediction>> by_line;
    for (const auto& p : preds) by_line[p.record.cell_line.str()].push_back(p);
    std::map<std::string, AurocResult> out;
    for (const auto& [line, subset] : by_line) {
      try {
        out[line] = auroc_per_perturbation(subset, view);
      } catch (const DataError&) {
        // nothing scorable on this line
      }
    }
    return out;
  };
  report.de_auroc = per_line(standard, TruthView::DEvsNotDE);
  report.direction_auroc = per_line(direction, TruthView::UpVsDown);
  return report;
}

}  // namespace pertcot
