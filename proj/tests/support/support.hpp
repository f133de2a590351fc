#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jobclf/ablation_runner.hpp"
#include "jobclf/dataset.hpp"
#include "jobclf/llm_client.hpp"
#include "jobclf/metrics.hpp"
#include "jobclf/response_parser.hpp"

namespace jobclf::testing {

std::filesystem::path fixture_dir();
std::string read_file(const std::filesystem::path& path);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Published prompt-modification results: precision, recall, F1 and
// stickiness as printed, in ladder row order.
struct PublishedRow {
  std::string label;
  double precision;
  double recall;
  double f1;
  int stickiness;
};
const std::vector<PublishedRow>& published_ablation_rows();

// Synthetic postings: ids s00000.. in order, first `grad` GRAD then NON_GRAD,
// interleaved by a seeded shuffle so labels are not sorted by id.
Dataset synthetic_postings(std::size_t grad, std::size_t non_grad, std::uint64_t seed = 7);

struct TargetProfile {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t sticky = 0;
};

// Smallest (tp, fp) whose precision, recall and F1 print as the row's values
// to one decimal, with stickiness realized exactly. nullopt if impossible.
std::optional<TargetProfile> realize(const PublishedRow& row, std::size_t grad, std::size_t non_grad);

// A model output that parses to the requested label and stickiness in `mode`.
std::string scripted_output(bool grad, bool sticky, TemplateMode mode, std::size_t variant = 0);

// Responses keyed by request hash so that running `plan` over `dataset`
// yields exactly `profile`.
void script_plan(MockBackend& backend, const PromptPlan& plan, const Dataset& dataset, const TargetProfile& profile,
                 const ExperimentOptions& options);

// Mock backend that drives greedy_ablate through the published ladder.
MockBackend scripted_ablation_backend(const Dataset& dataset, const ExperimentOptions& options);

// Brute force over every observed score: predicted GRAD iff score >= cutoff.
std::optional<SweepResult> brute_force_sweep(std::span<const ScoredPrediction> preds, double threshold_pct);

// Delegates to `inner` and throws BackendError once `fail_after` calls succeeded.
class FaultInjectingBackend final : public Backend {
 public:
  FaultInjectingBackend(Backend& inner, std::size_t fail_after) : inner_(inner), fail_after_(fail_after) {}
  ChatResponse complete(const ChatRequest& request) override;
  std::string descriptor() const override { return inner_.descriptor(); }

 private:
  Backend& inner_;
  std::size_t fail_after_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace jobclf::testing
