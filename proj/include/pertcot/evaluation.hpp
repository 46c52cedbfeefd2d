#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pertcot/corpus.hpp"
#include "pertcot/gateway.hpp"
#include "pertcot/parsing.hpp"
#include "pertcot/prompts.hpp"

namespace pertcot {

enum class Protocol {
  Standard,        // three-way question
  DirectionGiven,  // told the gene is DE, asked up vs down
};

std::string_view to_string(Protocol protocol);
std::optional<Protocol> parse_protocol(std::string_view text);

struct Prediction {
  PerturbationRecord record;
  ParsedAnswer parsed;
  std::string raw_text;
  double de_score = 0.0;
  std::optional<double> direction_score;
  std::string model_name;
  Protocol protocol = Protocol::Standard;
  std::string cache_key;
  std::string error;  // gateway failure, empty on success

  /// Scored as a NotDE prediction and counted in the invalid rate: failed
  /// calls, unparseable outputs and "I do not know".
  bool invalid() const;
  /// The class used for three-class scoring.
  Label predicted_label() const;

  bool operator==(const Prediction&) const = default;
};

/// Builds a prediction from raw model text using hard-label scores:
/// de_score = 1 for Up/Down, 0 otherwise; direction_score = 1 for Up, 0 for
/// Down, and 0.5 for anything else under DirectionGiven.
Prediction score_response(const PerturbationRecord& record, std::string raw_text,
                          std::string model_name, Protocol protocol);

/// Renders the protocol's prompt per record and queries the model at
/// temperature 0. DirectionGiven only evaluates Up/Down records. When a
/// training manifest is given, any overlap with the test records is fatal
/// (DataError) and nothing is sent.
std::vector<Prediction> run_predictions(std::span<const PerturbationRecord> test_records,
                                        Gateway& gateway, const PromptForge& forge,
                                        const std::string& model_name, Protocol protocol,
                                        const std::set<RecordKey>* training_manifest = nullptr,
                                        int max_output_tokens = 4096,
                                        const ProgressCallback& on_progress = {});

enum class TruthView { DEvsNotDE, UpVsDown };

std::string_view to_string(TruthView view);

/// Score for one prediction under a view; nullopt if the prediction does not
/// carry one. The default reads de_score / direction_score; a custom function
/// can supply e.g. answer-token likelihoods.
using ScoreFn = std::function<std::optional<double>(const Prediction&)>;

ScoreFn default_score(TruthView view);

/// P(score_pos > score_neg) + 0.5 P(tie) over all positive/negative pairs,
/// via sorted tie blocks (exact integer pair counts). Throws DataError if
/// either side is empty or a score is NaN.
double mann_whitney_auroc(std::span<const double> positives, std::span<const double> negatives);

struct SkippedGroup {
  std::string group;
  std::string reason;

  bool operator==(const SkippedGroup&) const = default;
};

struct AurocResult {
  std::map<std::string, double> per_group;  // "cell_line/perturbation" -> AUROC
  double mean = 0.0;                        // unweighted over scored groups
  std::vector<SkippedGroup> skipped;

  bool operator==(const AurocResult&) const = default;
};

/// Groups by (cell line, perturbation). Under UpVsDown, NotDE records are not
/// part of the view. Groups lacking either truth class are skipped and listed.
/// Throws DataError when nothing is scorable or a needed score is missing.
AurocResult auroc_per_perturbation(std::span<const Prediction> predictions, TruthView view,
                                   const ScoreFn& score = {});

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;

  bool operator==(const ClassMetrics&) const = default;
};

/// Rows are truth, columns prediction, both in NotDE, Up, Down order.
using ConfusionMatrix = std::array<std::array<std::uint64_t, 3>, 3>;

struct ThreeClassMetrics {
  ConfusionMatrix confusion{};
  std::array<ClassMetrics, 3> per_class{};  // indexed by index_of(Label)
  double accuracy = 0.0;
  double invalid_rate = 0.0;
  std::uint64_t total = 0;
  std::uint64_t invalid = 0;

  bool operator==(const ThreeClassMetrics&) const = default;
};

/// Metrics that only depend on the confusion matrix and the invalid count.
ThreeClassMetrics metrics_from_confusion(const ConfusionMatrix& confusion, std::uint64_t invalid);

struct EvalReport {
  std::string model_name;
  std::optional<ThreeClassMetrics> three_class;
  std::map<std::string, AurocResult> de_auroc;         // by cell line
  std::map<std::string, AurocResult> direction_auroc;  // by cell line

  bool operator==(const EvalReport&) const = default;
};

/// Three-class part only. Throws DataError on empty input.
EvalReport three_class_report(std::span<const Prediction> predictions);

/// Full report: three-class metrics and DE AUROC from standard-protocol
/// predictions, direction AUROC from direction-protocol predictions. Cell
/// lines with no scorable group are left out of the AUROC maps.
EvalReport build_report(const std::string& model_name, std::span<const Prediction> standard,
                        std::span<const Prediction> direction);

}  // namespace pertcot
