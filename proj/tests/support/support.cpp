#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include <fmt/format.h>

#include "jobclf/errors.hpp"
#include "jobclf/prompt_catalog.hpp"
#include "jobclf/random.hpp"

namespace fs = std::filesystem;

namespace jobclf::testing {

fs::path fixture_dir() { return JOBCLF_FIXTURE_DIR; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() / fmt::format("jobclf-test-{}-{}-{}", ::getpid(), counter++, rd());
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

const std::vector<PublishedRow>& published_ablation_rows() {
  static const std::vector<PublishedRow> rows = {
      {"Baseline", 61.2, 70.6, 65.6, 79},
      {"CoT", 72.6, 85.1, 78.4, 87},
      {"Zero-CoT", 75.5, 88.3, 81.4, 65},
      {"+rawinst", 80.0, 92.4, 85.8, 68},
      {"+sysinst", 77.7, 90.9, 83.8, 69},
      {"+bothinst", 81.9, 93.9, 87.5, 71},
      {"+bothinst+mock", 83.3, 95.1, 88.8, 74},
      {"+bothinst+mock+reit", 83.8, 95.5, 89.3, 75},
      {"+bothinst+mock+reit+strict", 79.9, 93.7, 86.3, 98},
      {"+bothinst+mock+reit+loose", 80.5, 94.8, 87.1, 95},
      {"+bothinst+mock+reit+right", 84.0, 95.9, 89.6, 77},
      {"+bothinst+mock+reit+right+info", 84.9, 96.5, 90.3, 77},
      {"+bothinst+mock+reit+right+info+name", 85.7, 96.8, 90.9, 79},
      {"+bothinst+mock+reit+right+info+name+pos", 86.9, 97.0, 91.7, 81},
  };
  return rows;
}

Dataset synthetic_postings(std::size_t grad, std::size_t non_grad, std::uint64_t seed) {
  std::vector<Label> labels(grad, Label::Grad);
  labels.insert(labels.end(), non_grad, Label::NonGrad);
  std::mt19937_64 rng(seed);
  portable_shuffle(labels, rng);
  Dataset out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    JobPosting p;
    p.id = fmt::format("s{:05}", i);
    const bool g = labels[i] == Label::Grad;
    p.title = g ? fmt::format("Associate Analyst {}", i) : fmt::format("Lead Consultant {}", i);
    p.description = g ? fmt::format("Posting {}. Training provided for new starters.", i)
                      : fmt::format("Posting {}. Several years of client delivery required.", i);
    p.label = labels[i];
    out.push_back(std::move(p));
  }
  return out;
}

std::optional<TargetProfile> realize(const PublishedRow& row, std::size_t grad, std::size_t non_grad) {
  const auto want_p = format_pct(row.precision);
  const auto want_r = format_pct(row.recall);
  const auto want_f = format_pct(row.f1);
  const std::size_t total = grad + non_grad;
  if ((static_cast<std::size_t>(row.stickiness) * total) % 100 != 0) return std::nullopt;
  for (std::size_t tp = 0; tp <= grad; ++tp) {
    ConfusionCounts c{tp, 0, grad - tp, non_grad};
    if (format_pct(recall(c).value) != want_r) continue;
    for (std::size_t fp = 0; fp <= non_grad; ++fp) {
      c.fp = fp;
      c.tn = non_grad - fp;
      if (format_pct(precision(c).value) == want_p && format_pct(f1(c).value) == want_f) {
        return TargetProfile{tp, fp, static_cast<std::size_t>(row.stickiness) * total / 100};
      }
    }
  }
  return std::nullopt;
}

std::string scripted_output(bool grad, bool sticky, TemplateMode mode, std::size_t variant) {
  static const char* const openers[] = {
      "The posting lists its expectations clearly.",
      "Looking at the responsibilities and the experience asked for,",
      "The title and the description point the same way.",
  };
  const std::string opener = openers[variant % 3];
  const char* choice = grad ? "(A) a job fit for a recent graduate" : "(B) a job requiring more professional experience";
  const char* final_line = grad ? "Final Answer: This is a (A) job fit for a recent graduate or a student"
                                : "Final Answer: This is a (B) job requiring more professional experience.";
  if (mode == TemplateMode::Free) {
    if (sticky) return fmt::format("{} Therefore, this is {}", opener, choice);
    return fmt::format("{} Overall it is {}.", opener,
                       grad ? "fit for a recent graduate" : "a role requiring more professional experience");
  }
  if (!sticky) return fmt::format("{} So the answer is {}.", opener, grad ? "(A)" : "(B)");
  if (mode == TemplateMode::Strict) {
    return fmt::format("Reasoning step 1: {}\nReasoning step 2: The experience asked for is weighed.\n"
                       "Reasoning step 3: The seniority is weighed.\n{}",
                       opener, final_line);
  }
  return fmt::format("{}\n{}", opener, final_line);
}

void script_plan(MockBackend& backend, const PromptPlan& plan, const Dataset& dataset, const TargetProfile& profile,
                 const ExperimentOptions& options) {
  const PromptPack& pack = options.pack ? *options.pack : builtin_prompt_pack();
  const TemplateMode mode = template_mode(plan);
  std::size_t grad_seen = 0;
  std::size_t non_grad_seen = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& posting = dataset[i];
    bool predict_grad;
    if (posting.label == Label::Grad) {
      predict_grad = grad_seen++ < profile.tp;
    } else {
      predict_grad = non_grad_seen++ < profile.fp;
    }
    const bool sticky = i < profile.sticky;
    auto compiled = build(plan, compose_input(posting), pack, posting.id);
    ChatRequest request(options.model_id, std::move(compiled.messages), options.max_output_tokens);
    backend.set_response(cache_key(request), scripted_output(predict_grad, sticky, mode, i));
  }
}

MockBackend scripted_ablation_backend(const Dataset& dataset, const ExperimentOptions& options) {
  std::size_t grad = 0;
  for (const auto& p : dataset) grad += p.label == Label::Grad ? 1 : 0;
  const std::size_t non_grad = dataset.size() - grad;
  const PromptPack& pack = options.pack ? *options.pack : builtin_prompt_pack();
  const auto& rows = published_ablation_rows();

  MockBackend backend;
  PromptPlan kept;
  std::optional<double> incumbent;
  std::size_t row = 0;
  for (const auto& step : ablation_ladder()) {
    std::optional<std::pair<double, PromptPlan>> best;
    for (const auto& candidate : step.candidates) {
      if (row >= rows.size()) throw std::logic_error("ladder has more rows than the published table");
      const auto plan = apply_delta(kept, candidate.delta, pack);
      const auto profile = realize(rows[row], grad, non_grad);
      if (!profile) throw std::logic_error("row " + rows[row].label + " cannot be realized on this dataset");
      script_plan(backend, plan, dataset, *profile, options);
      const double f = f1(ConfusionCounts{profile->tp, profile->fp, grad - profile->tp, non_grad - profile->fp}).value;
      if (!best || f > best->first) best.emplace(f, plan);
      ++row;
    }
    if (best && (!incumbent || best->first > *incumbent)) {
      incumbent = best->first;
      kept = best->second;
    }
  }
  if (row != rows.size()) throw std::logic_error("ladder has fewer rows than the published table");
  return backend;
}

std::optional<SweepResult> brute_force_sweep(std::span<const ScoredPrediction> preds, double threshold_pct) {
  std::size_t positives = 0;
  for (const auto& p : preds) positives += p.is_grad ? 1 : 0;
  std::optional<SweepResult> best;
  for (const auto& candidate : preds) {
    const double cutoff = candidate.score;
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const auto& p : preds) {
      if (p.score >= cutoff) (p.is_grad ? tp : fp) += 1;
    }
    if (100.0 * static_cast<double>(tp) < threshold_pct * static_cast<double>(positives)) continue;
    const double prec = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (!best || prec > best->best_precision || (prec == best->best_precision && cutoff > best->chosen_cutoff)) {
      best = SweepResult{prec, cutoff};
    }
  }
  return best;
}

ChatResponse FaultInjectingBackend::complete(const ChatRequest& request) {
  if (calls_.fetch_add(1) >= fail_after_) throw BackendError("injected fault: connection reset");
  return inner_.complete(request);
}

}  // namespace jobclf::testing
