#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"

#include "jobclf/ablation_runner.hpp"
#include "jobclf/errors.hpp"

using namespace jobclf;
using jobclf::testing::TargetProfile;
using jobclf::testing::TempDir;

namespace {

PromptPlan plan_of(FlagSet flags) {
  PromptPlan p;
  p.flags = flags;
  return p;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

StepResult row(std::string label, double p, double r, double f, double s, bool kept) {
  StepResult x;
  x.step_name = label;
  x.row_label = std::move(label);
  x.precision = {p, false};
  x.recall = {r, false};
  x.f1 = {f, false};
  x.stickiness = s;
  x.kept = kept;
  return x;
}

}  // namespace

TEST_SUITE("ablation_runner") {

TEST_CASE("saturated run") {
  Dataset d = jobclf::testing::synthetic_postings(12, 0);
  MockBackend mock({}, {}, std::string("Final Answer: This is a (A) job fit for a recent graduate or a student"));
  const auto r = run_experiment(plan_of({ModFlag::ZeroCot, ModFlag::Loose}), d, mock);
  CHECK(r.precision.value == 100.0);
  CHECK(r.recall.value == 100.0);
  CHECK(r.stickiness == 100.0);
  CHECK(r.records.size() == d.size());
}

TEST_CASE("scripted baseline profile is recovered") {
  const auto d = jobclf::testing::synthetic_postings(500, 500);
  const auto& baseline = jobclf::testing::published_ablation_rows().front();
  const auto profile = jobclf::testing::realize(baseline, 500, 500);
  REQUIRE(profile);
  MockBackend mock;
  ExperimentOptions opts;
  jobclf::testing::script_plan(mock, PromptPlan{}, d, *profile, opts);
  const auto r = run_experiment(PromptPlan{}, d, mock, opts);
  CHECK(std::abs(r.precision.value - 61.2) <= 0.1);
  CHECK(std::abs(r.recall.value - 70.6) <= 0.1);
  CHECK(std::abs(r.f1.value - 65.6) <= 0.1);
  CHECK(r.stickiness == doctest::Approx(79.0));
  CHECK(r.counts.tp == profile->tp);
  CHECK(r.counts.fp == profile->fp);
}

TEST_CASE("replay rerun is identical with no upstream calls") {
  TempDir tmp;
  const auto d = jobclf::testing::synthetic_postings(30, 50);
  auto mock = std::make_shared<MockBackend>();
  ExperimentOptions opts;
  opts.concurrency = 4;
  const auto plan = plan_of({ModFlag::ZeroCot});
  jobclf::testing::script_plan(*mock, plan, d, TargetProfile{25, 10, 40}, opts);
  auto cache = std::make_shared<ResponseCache>(tmp / "cache");
  ReplayBackend filling(cache, false, mock);
  const auto first = run_experiment(plan, d, filling, opts);
  CHECK(mock->calls() == d.size());
  ReplayBackend strict(std::make_shared<ResponseCache>(tmp / "cache"), true);
  const auto second = run_experiment(plan, d, strict, opts);
  CHECK(first.records == second.records);
  CHECK(first.counts == second.counts);
  CHECK(mock->calls() == d.size());
  CHECK(cache_stats(tmp / "cache").entries == d.size());
}

TEST_CASE("parse failures fall back to NON_GRAD and are flagged") {
  const auto d = jobclf::testing::synthetic_postings(3, 0);
  MockBackend mock({}, {}, std::string("I am unsure."));
  const auto r = run_experiment(PromptPlan{}, d, mock);
  for (const auto& rec : r.records) {
    CHECK(rec.parse_failed);
    CHECK(rec.predicted == Label::NonGrad);
    CHECK_FALSE(rec.correct);
    CHECK_FALSE(rec.parsed.sticky);
  }
  ExperimentOptions opts;
  opts.parse_fallback = Label::Grad;
  CHECK(run_experiment(PromptPlan{}, d, mock, opts).recall.value == 100.0);
}

TEST_CASE("run preconditions") {
  auto d = jobclf::testing::synthetic_postings(2, 2);
  MockBackend mock({}, {}, std::string("(A)"));
  CHECK_THROWS_AS(run_experiment(plan_of({ModFlag::Mock}), d, mock), UsageError);
  CHECK_THROWS_AS(run_experiment(PromptPlan{}, Dataset{}, mock), DataError);
  d[1].label = Label::Unlabeled;
  CHECK_THROWS_AS(run_experiment(PromptPlan{}, d, mock), DataError);
}

TEST_CASE("result store resumes and tolerates a torn tail") {
  TempDir tmp;
  const auto d = jobclf::testing::synthetic_postings(10, 10);
  MockBackend mock({}, {}, std::string("(B)"));
  ResultStore store(tmp / "store");
  ExperimentOptions opts;
  opts.store = &store;
  const auto first = run_experiment(PromptPlan{}, d, mock, opts);
  CHECK(first.dispatched == 20);
  const auto path = store.path_for(dataset_fingerprint(d), PromptPlan{}.id());
  { std::ofstream(path, std::ios::app) << R"({"posting_id":"s0)"; }
  const auto second = run_experiment(PromptPlan{}, d, mock, opts);
  CHECK(second.dispatched == 0);
  CHECK(second.reused == 20);
  CHECK(second.records == first.records);
}

TEST_CASE("aborted runs report partial progress") {
  TempDir tmp;
  const auto d = jobclf::testing::synthetic_postings(5, 5);
  MockBackend mock({}, {}, std::string("(A)"));
  jobclf::testing::FaultInjectingBackend faulty(mock, 4);
  ResultStore store(tmp / "store");
  ExperimentOptions opts;
  opts.store = &store;
  try {
    run_experiment(PromptPlan{}, d, faulty, opts);
    FAIL("expected RunAborted");
  } catch (const RunAborted& e) {
    CHECK(std::string(e.what()).find("4 of 10") != std::string::npos);
  }
  CHECK(store.load(dataset_fingerprint(d), PromptPlan{}.id()).size() == 4);
}

TEST_CASE("best candidate of a step is kept") {
  const auto d = jobclf::testing::synthetic_postings(20, 20);
  ExperimentOptions opts;
  MockBackend mock;
  std::vector<LadderStep> ladder = {
      {"Baseline", {{"Baseline", {}}}, false},
      {"Instructions", {{"rawinst", {ModFlag::RawInst}}, {"sysinst", {ModFlag::SysInst}}, {"bothinst", {ModFlag::BothInst}}}, true},
  };
  jobclf::testing::script_plan(mock, PromptPlan{}, d, {10, 10, 0}, opts);
  jobclf::testing::script_plan(mock, plan_of({ModFlag::RawInst}), d, {12, 8, 0}, opts);
  jobclf::testing::script_plan(mock, plan_of({ModFlag::SysInst}), d, {18, 2, 0}, opts);
  jobclf::testing::script_plan(mock, plan_of({ModFlag::BothInst}), d, {15, 5, 0}, opts);
  const auto report = greedy_ablate(ladder, d, mock, opts);
  REQUIRE(report.steps.size() == 4);
  CHECK(report.steps[0].kept);
  CHECK_FALSE(report.steps[1].kept);
  CHECK(report.steps[2].kept);
  CHECK_FALSE(report.steps[3].kept);
  CHECK(report.steps[2].row_label == "+sysinst");
  CHECK(report.final_plan.flags == FlagSet{ModFlag::SysInst});
  CHECK(report.steps[2].f1.value == doctest::Approx(f1(ConfusionCounts{18, 2, 2, 18}).value));
}

TEST_CASE("a tie with the incumbent is discarded") {
  const auto d = jobclf::testing::synthetic_postings(20, 20);
  ExperimentOptions opts;
  MockBackend mock;
  std::vector<LadderStep> ladder = {
      {"Baseline", {{"Baseline", {}}}, false},
      {"Reasoning", {{"Zero-CoT", {ModFlag::ZeroCot}}}, false},
  };
  jobclf::testing::script_plan(mock, PromptPlan{}, d, {14, 4, 0}, opts);
  jobclf::testing::script_plan(mock, plan_of({ModFlag::ZeroCot}), d, {14, 4, 40}, opts);
  const auto report = greedy_ablate(ladder, d, mock, opts);
  CHECK(report.steps[0].kept);
  CHECK_FALSE(report.steps[1].kept);
  CHECK(report.final_plan.flags.empty());
}

TEST_CASE("published ladder is reproduced") {
  const auto d = jobclf::testing::synthetic_postings(1000, 1500);
  ExperimentOptions opts;
  auto mock = jobclf::testing::scripted_ablation_backend(d, opts);
  const auto report = greedy_ablate(ablation_ladder(), d, mock, opts);
  const auto& rows = jobclf::testing::published_ablation_rows();
  REQUIRE(report.steps.size() == rows.size());
  double incumbent = -1.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& s = report.steps[i];
    INFO(rows[i].label);
    CHECK(s.row_label == rows[i].label);
    CHECK(format_pct(s.precision.value) == format_pct(rows[i].precision));
    CHECK(format_pct(s.recall.value) == format_pct(rows[i].recall));
    CHECK(format_pct(s.f1.value) == format_pct(rows[i].f1));
    CHECK(s.stickiness == doctest::Approx(rows[i].stickiness));
    if (s.kept) {
      CHECK(s.f1.value > incumbent);
      incumbent = s.f1.value;
    }
  }
  CHECK(report.final_plan == final_best_plan());
}

TEST_CASE("markdown rendering") {
  AblationReport r;
  r.steps.push_back(row("Baseline", 61.2, 70.6, 65.6, 79, true));
  r.dataset_fingerprint = "abc";
  r.backend = "mock";
  r.model_id = "m";
  const auto text = render_report(r, ReportFormat::Markdown);
  CHECK(text.find("| Baseline | 61.2 | 70.6 | 65.6 | 79% | yes |\n") != std::string::npos);
  CHECK(render_report(r, ReportFormat::Markdown) == text);

  StepResult empty;
  empty.row_label = "Empty";
  empty.precision = {0.0, true};
  empty.f1 = {0.0, true};
  r.steps.push_back(empty);
  const auto with_degenerate = render_report(r, ReportFormat::Markdown);
  CHECK(with_degenerate.find("| *Empty* | 0.0† | 0.0 | 0.0† | 0% | no |") != std::string::npos);
  CHECK(with_degenerate.find("† zero denominator") != std::string::npos);
}

TEST_CASE("csv rendering round-trips") {
  AblationReport r;
  r.steps.push_back(row("Baseline", 61.2, 70.6, 65.6, 79, true));
  r.steps.push_back(row("+bothinst+mock+reit+strict", 79.9, 93.7, 86.3, 98, false));
  r.steps[1].flags = FlagSet{ModFlag::ZeroCot, ModFlag::Strict};
  std::istringstream in(render_report(r, ReportFormat::Csv));
  std::string line;
  std::getline(in, line);
  CHECK(line == "row,step,flags,precision,recall,f1,stickiness,kept,degenerate");
  for (const auto& s : r.steps) {
    REQUIRE(std::getline(in, line));
    const auto cells = split_csv_line(line);
    REQUIRE(cells.size() == 9);
    CHECK(cells[0] == s.row_label);
    CHECK(FlagSet::parse(cells[2]) == s.flags);
    CHECK(std::stod(cells[3]) == s.precision.value);
    CHECK(std::stod(cells[4]) == s.recall.value);
    CHECK(std::stod(cells[5]) == s.f1.value);
    CHECK(std::stod(cells[6]) == s.stickiness);
    CHECK((cells[7] == "yes") == s.kept);
  }
}

TEST_CASE("json report round-trips") {
  AblationReport r;
  r.steps.push_back(row("Baseline", 61.2, 70.6, 65.6, 79, true));
  r.final_plan = final_best_plan();
  r.dataset_fingerprint = "f";
  r.backend = "mock";
  r.model_id = "m";
  const auto back = report_from_json(report_to_json(r));
  CHECK(render_report(back, ReportFormat::Markdown) == render_report(r, ReportFormat::Markdown));
  CHECK(back.final_plan == r.final_plan);
}

TEST_CASE("point summaries") {
  auto at = [](std::size_t tp, std::size_t fn, std::size_t fp) { return evaluate_point(ConfusionCounts{tp, fp, fn, 0}); };
  auto s = at(970, 30, 146);
  CHECK(format_pct(s.p_at_95) == "86.9");
  CHECK(format_pct(s.p_at_85) == "86.9");
  s = at(802, 198, 10);
  CHECK(s.p_at_95 == 0.0);
  CHECK(s.p_at_85 == 0.0);
  s = at(722, 278, 272);
  CHECK(format_pct(s.precision.value) == "72.6");
  CHECK(s.p_at_95 == 0.0);
  CHECK(s.p_at_85 == 0.0);
  CHECK(format_point_summary(at(970, 30, 146)) == "P@95%R 86.9 | P@85%R 86.9 | Precision 86.9 | Recall 97.0");
  CHECK_THROWS_AS(evaluate_point(std::vector<ExampleRecord>{}), std::invalid_argument);
}

}  // TEST_SUITE
