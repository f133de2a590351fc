#include "jobclf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace jobclf {

namespace {

Percentage ratio(std::size_t num, std::size_t den) {
  if (den == 0) return {0.0, true};
  return {100.0 * static_cast<double>(num) / static_cast<double>(den), false};
}

void check_threshold(double threshold_pct) {
  if (!(threshold_pct > 0.0 && threshold_pct <= 100.0)) {
    throw std::invalid_argument("recall threshold must be in (0, 100]");
  }
}

// recall >= threshold, evaluated without the division.
bool meets_recall(std::size_t tp, std::size_t positives, double threshold_pct) {
  return 100.0 * static_cast<double>(tp) >= threshold_pct * static_cast<double>(positives);
}

}  // namespace

Percentage precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
Percentage recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }

Percentage f1(const ConfusionCounts& c) {
  // 2PR/(P+R) reduces to 2tp / (2tp + fp + fn).
  return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
}

Percentage f1_from(double precision_pct, double recall_pct) {
  const double sum = precision_pct + recall_pct;
  if (sum <= 0.0) return {0.0, true};
  return {2.0 * precision_pct * recall_pct / sum, false};
}

double point_precision_at_recall(const ConfusionCounts& c, double threshold_pct) {
  check_threshold(threshold_pct);
  if (c.tp + c.fn == 0 || !meets_recall(c.tp, c.tp + c.fn, threshold_pct)) return 0.0;
  return precision(c).value;
}

std::optional<SweepResult> sweep_precision_at_recall(std::span<const ScoredPrediction> preds,
                                                     double threshold_pct) {
  check_threshold(threshold_pct);
  std::size_t positives = 0;
  for (const auto& p : preds) {
    if (!std::isfinite(p.score)) throw std::invalid_argument("scores must be finite");
    positives += p.is_grad ? 1 : 0;
  }
  if (positives == 0) throw std::invalid_argument("sweep needs at least one GRAD example");

  std::vector<ScoredPrediction> sorted(preds.begin(), preds.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredPrediction& a, const ScoredPrediction& b) { return a.score > b.score; });

  std::optional<SweepResult> best;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double cutoff = sorted[i].score;
    for (; i < sorted.size() && sorted[i].score == cutoff; ++i) {
      (sorted[i].is_grad ? tp : fp) += 1;
    }
    if (!meets_recall(tp, positives, threshold_pct)) continue;
    const double p = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (!best || p > best->best_precision) best = SweepResult{p, cutoff};
  }
  return best;
}

}  // namespace jobclf
