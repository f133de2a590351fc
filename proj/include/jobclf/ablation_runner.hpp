#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jobclf/dataset.hpp"
#include "jobclf/llm_client.hpp"
#include "jobclf/metrics.hpp"
#include "jobclf/prompt_catalog.hpp"
#include "jobclf/response_parser.hpp"

namespace jobclf {

struct ExampleRecord {
  std::string posting_id;
  std::string plan_id;
  std::string request_hash;
  std::string raw_output;
  ParsedAnswer parsed;
  Label truth = Label::Unlabeled;
  Label predicted = Label::NonGrad;  // parsed label, or the fallback on parse failure
  bool parse_failed = false;
  bool correct = false;

  friend bool operator==(const ExampleRecord&, const ExampleRecord&) = default;
};

std::string record_to_json(const ExampleRecord& record);
ExampleRecord record_from_json(std::string_view line);

/// Append-only JSONL files, one per (dataset fingerprint, plan id):
/// <dir>/<fingerprint[0:16]>/<plan id>.jsonl
class ResultStore {
 public:
  explicit ResultStore(std::filesystem::path dir);

  std::filesystem::path path_for(const std::string& fingerprint, const std::string& plan_id) const;
  /// Records already stored, keyed by (posting id, request hash). A torn
  /// final line from an interrupted write is ignored.
  std::map<std::pair<std::string, std::string>, ExampleRecord> load(const std::string& fingerprint,
                                                                    const std::string& plan_id) const;
  void append(const std::string& fingerprint, const ExampleRecord& record);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
};

struct ExperimentOptions {
  std::string model_id = "gpt-3.5-turbo-0301";
  int max_output_tokens = ChatRequest::kDefaultMaxOutputTokens;
  int concurrency = 1;
  Label parse_fallback = Label::NonGrad;
  const PromptPack* pack = nullptr;  // builtin pack when null
  ResultStore* store = nullptr;      // no persistence or resume when null
};

struct ExperimentResult {
  PromptPlan plan;
  std::vector<ExampleRecord> records;  // sorted by posting id
  ConfusionCounts counts;
  Percentage precision;
  Percentage recall;
  Percentage f1;
  double stickiness = 0.0;
  std::size_t dispatched = 0;  // requests sent to the backend in this call
  std::size_t reused = 0;      // records taken from the result store
};

/// Confusion counts and stickiness over records.
ConfusionCounts count_records(std::span<const ExampleRecord> records);

/// Runs one plan over a labeled dataset. Records already in the store are
/// not dispatched again. Backend failures raise RunAborted after the
/// completed records have been stored.
ExperimentResult run_experiment(const PromptPlan& plan, const Dataset& dataset, Backend& backend,
                                const ExperimentOptions& options = {});

struct StepResult {
  std::string step_name;
  std::string row_label;  // "Baseline", "Zero-CoT", "+bothinst+mock", ...
  FlagSet flags;
  Percentage precision;
  Percentage recall;
  Percentage f1;
  double stickiness = 0.0;
  bool kept = false;
  std::optional<std::string> skipped_reason;  // candidate plan was invalid
};

struct AblationReport {
  std::vector<StepResult> steps;
  PromptPlan final_plan;
  std::string dataset_fingerprint;
  std::string backend;
  std::string model_id;
};

/// Greedy keep-or-discard over the ladder: every candidate of a step is run
/// on top of the kept stack, and the best one (by F1, first on ties) is kept
/// iff its F1 strictly beats the incumbent. The first step always sets the
/// incumbent.
AblationReport greedy_ablate(std::span<const LadderStep> ladder, const Dataset& dataset, Backend& backend,
                             const ExperimentOptions& options = {});

enum class ReportFormat { Markdown, Csv };

std::string render_report(const AblationReport& report, ReportFormat format);

std::string report_to_json(const AblationReport& report);
AblationReport report_from_json(std::string_view text);

struct PointSummary {
  Percentage precision;
  Percentage recall;
  double p_at_95 = 0.0;
  double p_at_85 = 0.0;
};

/// Applies point_precision_at_recall at 95 and 85. Throws
/// std::invalid_argument for no records.
PointSummary evaluate_point(std::span<const ExampleRecord> records);
PointSummary evaluate_point(const ConfusionCounts& counts);
std::string format_point_summary(const PointSummary& summary);

/// One decimal, e.g. 86.9.
std::string format_pct(double value);

/// Manifest JSON: plan, plan id, dataset fingerprint, backend, model, version.
std::string manifest_json(const PromptPlan& plan, const std::string& dataset_fingerprint, const std::string& backend,
                          const std::string& model_id, std::string_view command);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace jobclf
