#include <random>

#include "doctest.h"
#include "support.hpp"

#include "jobclf/metrics.hpp"

using namespace jobclf;

TEST_SUITE("metrics") {

TEST_CASE("precision recall f1 from counts") {
  ConfusionCounts c{95, 15, 5, 100};
  CHECK(precision(c).value == doctest::Approx(100.0 * 95 / 110));
  CHECK(recall(c).value == doctest::Approx(95.0));
  CHECK(f1(c).value == doctest::Approx(f1_from(precision(c).value, recall(c).value).value));
  const auto empty = precision(ConfusionCounts{});
  CHECK(empty.value == 0.0);
  CHECK(empty.degenerate);
  CHECK(f1(ConfusionCounts{}).degenerate);
}

TEST_CASE("f1 from published precision and recall") {
  CHECK(std::abs(f1_from(61.2, 70.6).value - 65.6) <= 0.06);
  CHECK(std::abs(f1_from(86.9, 97.0).value - 91.7) <= 0.06);
  CHECK(f1_from(0, 0).degenerate);
  CHECK(f1_from(30, 80).value == doctest::Approx(f1_from(80, 30).value));
}

TEST_CASE("point precision at recall") {
  CHECK(point_precision_at_recall({95, 15, 5, 0}, 95) == doctest::Approx(86.3636).epsilon(1e-5));
  CHECK(point_precision_at_recall({94, 15, 6, 0}, 95) == 0.0);
  CHECK(point_precision_at_recall({0, 0, 0, 10}, 95) == 0.0);
  CHECK_THROWS_AS(point_precision_at_recall({1, 0, 0, 0}, 0), std::invalid_argument);
  CHECK_THROWS_AS(point_precision_at_recall({1, 0, 0, 0}, 100.5), std::invalid_argument);
}

TEST_CASE("sweep examples") {
  std::vector<ScoredPrediction> p = {{0.9, true}, {0.8, true}, {0.7, false}, {0.2, true}};
  auto r = sweep_precision_at_recall(p, 66);
  REQUIRE(r);
  CHECK(r->best_precision == 100.0);
  CHECK(r->chosen_cutoff == 0.8);

  std::vector<ScoredPrediction> sep = {{0.9, true}, {0.8, true}, {0.3, false}, {0.1, false}};
  CHECK(sweep_precision_at_recall(sep, 95)->best_precision == 100.0);

  std::vector<ScoredPrediction> low = {{0.1, true}, {0.5, false}, {0.6, false}, {0.9, false}};
  r = sweep_precision_at_recall(low, 100);
  REQUIRE(r);
  CHECK(r->best_precision == 25.0);
  CHECK(r->chosen_cutoff == 0.1);
}

TEST_CASE("sweep ties move together") {
  // Splitting the 0.5 tie would let a lone positive claim precision 100.
  std::vector<ScoredPrediction> p = {{0.5, true}, {0.5, false}, {0.1, false}};
  const auto r = sweep_precision_at_recall(p, 50);
  REQUIRE(r);
  CHECK(r->best_precision == 50.0);
  CHECK(r->chosen_cutoff == 0.5);
}

TEST_CASE("sweep preconditions") {
  std::vector<ScoredPrediction> none = {{0.5, false}};
  CHECK_THROWS_AS(sweep_precision_at_recall(none, 95), std::invalid_argument);
  std::vector<ScoredPrediction> nan = {{std::nan(""), true}};
  CHECK_THROWS_AS(sweep_precision_at_recall(nan, 95), std::invalid_argument);
}

TEST_CASE("sweep matches brute force and is monotone in the threshold") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ScoredPrediction> preds(1 + rng() % 30);
    for (auto& p : preds) {
      p.score = static_cast<double>(rng() % 10) / 10.0;
      p.is_grad = rng() & 1;
    }
    preds[0].is_grad = true;
    double previous = 101.0;
    for (double t : {10.0, 50.0, 85.0, 95.0, 100.0}) {
      const auto fast = sweep_precision_at_recall(preds, t);
      const auto slow = jobclf::testing::brute_force_sweep(preds, t);
      REQUIRE(fast.has_value() == slow.has_value());
      if (!fast) continue;
      CHECK(fast->best_precision == slow->best_precision);
      CHECK(fast->chosen_cutoff == slow->chosen_cutoff);
      CHECK(fast->best_precision <= previous);
      previous = fast->best_precision;
    }
  }
}

}  // TEST_SUITE
