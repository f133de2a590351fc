#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace jobclf {

/// Confusion counts with GRAD as the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// A percentage in [0, 100]. `degenerate` marks a zero denominator, in which
/// case `value` is 0.
struct Percentage {
  double value = 0.0;
  bool degenerate = false;
};

Percentage precision(const ConfusionCounts& c);
Percentage recall(const ConfusionCounts& c);
Percentage f1(const ConfusionCounts& c);

/// Harmonic mean of two percentages; degenerate when both are 0.
Percentage f1_from(double precision_pct, double recall_pct);

/// precision(c) if recall(c) >= threshold, otherwise 0.
/// Throws std::invalid_argument unless threshold is in (0, 100].
double point_precision_at_recall(const ConfusionCounts& c, double threshold_pct);

struct ScoredPrediction {
  double score = 0.0;  // higher = more GRAD-like
  bool is_grad = false;
};

struct SweepResult {
  double best_precision = 0.0;
  double chosen_cutoff = 0.0;  // predict GRAD iff score >= cutoff
};

/// Best precision over cutoffs at the observed scores (ties move together)
/// whose recall reaches the threshold; nullopt when none does. Equal
/// precisions keep the highest cutoff. Throws std::invalid_argument when
/// there are no GRAD examples, a score is not finite, or the threshold is
/// outside (0, 100].
std::optional<SweepResult> sweep_precision_at_recall(std::span<const ScoredPrediction> preds,
                                                     double threshold_pct);

}  // namespace jobclf
