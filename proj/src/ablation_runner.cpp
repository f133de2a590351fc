#include "jobclf/ablation_runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include "json.hpp"

#include "jobclf/errors.hpp"

namespace fs = std::filesystem;

namespace jobclf {

using json = nlohmann::json;

namespace {

std::optional<Label> parse_any_label(std::string_view text) {
  if (text == "UNLABELED") return Label::Unlabeled;
  return parse_label(text);
}

AnswerLabel answer_label_from(std::string_view text) {
  if (text == "GRAD") return AnswerLabel::Grad;
  if (text == "NON_GRAD") return AnswerLabel::NonGrad;
  return AnswerLabel::None;
}

MatchRule rule_from(std::string_view text) {
  if (text == "TEMPLATE_FINAL") return MatchRule::TemplateFinal;
  if (text == "CHOICE_TOKEN") return MatchRule::ChoiceToken;
  if (text == "POLARITY_PHRASE") return MatchRule::PolarityPhrase;
  return MatchRule::None;
}

json plan_to_json(const PromptPlan& plan) {
  json flags = json::array();
  for (auto f : plan.flags.to_vector()) flags.push_back(std::string(to_string(f)));
  json exemplars = json::array();
  for (const auto& ex : plan.exemplars) exemplars.push_back({{"posting", ex.posting}, {"answer", ex.answer}});
  return {{"flags", flags}, {"assistant_name", plan.assistant_name}, {"exemplars", exemplars}, {"id", plan.id()}};
}

PromptPlan plan_from_json(const json& j) {
  PromptPlan plan;
  for (const auto& f : j.at("flags")) {
    auto flag = parse_mod_flag(f.get<std::string>());
    if (!flag) throw DataError(fmt::format("unknown flag '{}' in report", f.get<std::string>()));
    plan.flags.insert(*flag);
  }
  plan.assistant_name = j.value("assistant_name", std::string("Frederick"));
  if (j.contains("exemplars")) {
    for (const auto& ex : j.at("exemplars")) {
      plan.exemplars.push_back({ex.at("posting").get<std::string>(), ex.at("answer").get<std::string>()});
    }
  }
  return plan;
}

ExampleRecord make_record(const JobPosting& posting, const PromptPlan& plan, std::string request_hash,
                          std::string raw_output, TemplateMode mode, Label fallback) {
  ExampleRecord r;
  r.posting_id = posting.id;
  r.plan_id = plan.id();
  r.request_hash = std::move(request_hash);
  r.parsed = parse(raw_output, mode);
  r.raw_output = std::move(raw_output);
  r.truth = posting.label;
  switch (r.parsed.label) {
    case AnswerLabel::Grad: r.predicted = Label::Grad; break;
    case AnswerLabel::NonGrad: r.predicted = Label::NonGrad; break;
    case AnswerLabel::None:
      r.predicted = fallback;
      r.parse_failed = true;
      break;
  }
  r.correct = r.predicted == r.truth;
  return r;
}

std::string sanitize_file_name(std::string name) {
  for (auto& c : name) {
    if (c == '/' || c == '\\' || c == '\0') c = '_';
  }
  return name;
}

}  // namespace

std::string record_to_json(const ExampleRecord& r) {
  json j = {{"posting_id", r.posting_id},
            {"plan_id", r.plan_id},
            {"request_hash", r.request_hash},
            {"raw_output", r.raw_output},
            {"label", to_string(r.parsed.label)},
            {"sticky", r.parsed.sticky},
            {"rule", to_string(r.parsed.matched_rule)},
            {"truth", to_string(r.truth)},
            {"predicted", to_string(r.predicted)},
            {"parse_failed", r.parse_failed},
            {"correct", r.correct}};
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

ExampleRecord record_from_json(std::string_view line) {
  try {
    const auto j = json::parse(line);
    ExampleRecord r;
    r.posting_id = j.at("posting_id").get<std::string>();
    r.plan_id = j.at("plan_id").get<std::string>();
    r.request_hash = j.at("request_hash").get<std::string>();
    r.raw_output = j.at("raw_output").get<std::string>();
    r.parsed.raw = r.raw_output;
    r.parsed.label = answer_label_from(j.at("label").get<std::string>());
    r.parsed.sticky = j.at("sticky").get<bool>();
    r.parsed.matched_rule = rule_from(j.at("rule").get<std::string>());
    auto truth = parse_any_label(j.at("truth").get<std::string>());
    auto predicted = parse_any_label(j.at("predicted").get<std::string>());
    if (!truth || !predicted) throw DataError("record has an unknown label");
    r.truth = *truth;
    r.predicted = *predicted;
    r.parse_failed = j.at("parse_failed").get<bool>();
    r.correct = j.at("correct").get<bool>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed result record: {}", e.what()));
  }
}

// ---------------------------------------------------------------------------

ResultStore::ResultStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw DataError(fmt::format("cannot create result store '{}': {}", dir_.string(), ec.message()));
}

fs::path ResultStore::path_for(const std::string& fingerprint, const std::string& plan_id) const {
  return dir_ / fingerprint.substr(0, 16) / (sanitize_file_name(plan_id) + ".jsonl");
}

std::map<std::pair<std::string, std::string>, ExampleRecord> ResultStore::load(const std::string& fingerprint,
                                                                               const std::string& plan_id) const {
  std::map<std::pair<std::string, std::string>, ExampleRecord> out;
  std::ifstream in(path_for(fingerprint, plan_id), std::ios::binary);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ExampleRecord r;
    try {
      r = record_from_json(line);
    } catch (const DataError&) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // torn tail
      throw;
    }
    auto key = std::make_pair(r.posting_id, r.request_hash);
    out.insert_or_assign(std::move(key), std::move(r));
  }
  return out;
}

void ResultStore::append(const std::string& fingerprint, const ExampleRecord& record) {
  const auto path = path_for(fingerprint, record.plan_id);
  std::lock_guard lock(mutex_);
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw DataError(fmt::format("cannot append to '{}'", path.string()));
  out << record_to_json(record) << '\n';
  out.flush();
  if (!out) throw DataError(fmt::format("cannot append to '{}'", path.string()));
}

// ---------------------------------------------------------------------------

ConfusionCounts count_records(std::span<const ExampleRecord> records) {
  ConfusionCounts c;
  for (const auto& r : records) {
    const bool truth = r.truth == Label::Grad;
    const bool pred = r.predicted == Label::Grad;
    if (truth && pred) ++c.tp;
    else if (!truth && pred) ++c.fp;
    else if (truth && !pred) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ExperimentResult run_experiment(const PromptPlan& plan, const Dataset& dataset, Backend& backend,
                                const ExperimentOptions& options) {
  if (auto violations = validate(plan); !violations.empty()) {
    throw UsageError(fmt::format("invalid prompt plan: {}", violations.front()));
  }
  if (dataset.empty()) throw DataError("cannot run an experiment on an empty dataset");
  for (const auto& p : dataset) {
    if (p.label == Label::Unlabeled) throw DataError(fmt::format("posting '{}' has no label", p.id));
  }
  const PromptPack& pack = options.pack ? *options.pack : builtin_prompt_pack();
  const TemplateMode mode = template_mode(plan);
  const std::string fingerprint = dataset_fingerprint(dataset);
  const std::string plan_id = plan.id();

  std::map<std::pair<std::string, std::string>, ExampleRecord> stored;
  if (options.store) stored = options.store->load(fingerprint, plan_id);

  std::vector<std::optional<ExampleRecord>> slots(dataset.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> dispatched{0};
  std::atomic<std::size_t> reused{0};
  std::atomic<bool> stop{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= dataset.size()) return;
      const auto& posting = dataset[i];
      try {
        auto compiled = build(plan, compose_input(posting), pack, posting.id);
        ChatRequest request(options.model_id, std::move(compiled.messages), options.max_output_tokens);
        auto key = cache_key(request);
        if (auto it = stored.find({posting.id, key}); it != stored.end()) {
          slots[i] = make_record(posting, plan, key, it->second.raw_output, mode, options.parse_fallback);
          ++reused;
          continue;
        }
        ++dispatched;
        auto response = backend.complete(request);
        auto record = make_record(posting, plan, std::move(key), std::move(response.text), mode,
                                  options.parse_fallback);
        if (options.store) options.store->append(fingerprint, record);
        slots[i] = std::move(record);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop = true;
        return;
      }
    }
  };

  const int threads = std::clamp(options.concurrency, 1, 64);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  if (first_error) {
    std::size_t completed = 0;
    for (const auto& s : slots) completed += s.has_value() ? 1 : 0;
    try {
      std::rethrow_exception(first_error);
    } catch (const BackendError& e) {
      throw RunAborted(e.what(), completed, dataset.size());
    }
  }

  ExperimentResult result;
  result.plan = plan;
  result.records.reserve(dataset.size());
  for (auto& s : slots) result.records.push_back(std::move(*s));
  std::sort(result.records.begin(), result.records.end(),
            [](const ExampleRecord& a, const ExampleRecord& b) { return a.posting_id < b.posting_id; });
  result.counts = count_records(result.records);
  result.precision = precision(result.counts);
  result.recall = recall(result.counts);
  result.f1 = f1(result.counts);
  std::vector<ParsedAnswer> answers;
  answers.reserve(result.records.size());
  for (const auto& r : result.records) answers.push_back(r.parsed);
  result.stickiness = stickiness_rate(answers);
  result.dispatched = dispatched.load();
  result.reused = reused.load();
  return result;
}

// ---------------------------------------------------------------------------

AblationReport greedy_ablate(std::span<const LadderStep> ladder, const Dataset& dataset, Backend& backend,
                             const ExperimentOptions& options) {
  if (ladder.empty()) throw UsageError("ablation ladder is empty");
  const PromptPack& pack = options.pack ? *options.pack : builtin_prompt_pack();

  AblationReport report;
  report.dataset_fingerprint = dataset_fingerprint(dataset);
  report.backend = backend.descriptor();
  report.model_id = options.model_id;

  PromptPlan kept;
  std::optional<double> incumbent_f1;
  std::string label_stack;

  for (const auto& step : ladder) {
    struct Evaluated {
      std::size_t row;
      PromptPlan plan;
      double f1;
      const LadderCandidate* candidate;
    };
    std::vector<Evaluated> evaluated;
    for (const auto& candidate : step.candidates) {
      PromptPlan plan = apply_delta(kept, candidate.delta, pack);
      StepResult row;
      row.step_name = step.name;
      row.row_label = step.labels_with_stack ? label_stack + "+" + candidate.name : candidate.name;
      row.flags = plan.flags;
      if (auto violations = validate(plan); !violations.empty()) {
        row.skipped_reason = violations.front();
        report.steps.push_back(std::move(row));
        continue;
      }
      auto result = run_experiment(plan, dataset, backend, options);
      row.precision = result.precision;
      row.recall = result.recall;
      row.f1 = result.f1;
      row.stickiness = result.stickiness;
      evaluated.push_back({report.steps.size(), plan, result.f1.value, &candidate});
      report.steps.push_back(std::move(row));
    }
    if (evaluated.empty()) continue;
    const auto best = std::max_element(evaluated.begin(), evaluated.end(),
                                       [](const Evaluated& a, const Evaluated& b) { return a.f1 < b.f1; });
    if (!incumbent_f1 || best->f1 > *incumbent_f1) {
      incumbent_f1 = best->f1;
      kept = best->plan;
      report.steps[best->row].kept = true;
      if (step.labels_with_stack) label_stack += "+" + best->candidate->name;
    }
  }
  report.final_plan = kept;
  return report;
}

// ---------------------------------------------------------------------------

std::string format_pct(double value) { return fmt::format("{:.1f}", value); }

std::string render_report(const AblationReport& report, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::Csv) {
    out += "row,step,flags,precision,recall,f1,stickiness,kept,degenerate\n";
    for (const auto& s : report.steps) {
      if (s.skipped_reason) {
        out += fmt::format("{},{},{},,,,,skipped,\n", s.row_label, s.step_name, s.flags.to_string());
        continue;
      }
      const bool degenerate = s.precision.degenerate || s.recall.degenerate || s.f1.degenerate;
      out += fmt::format("{},{},{},{},{},{},{},{},{}\n", s.row_label, s.step_name, s.flags.to_string(),
                         format_pct(s.precision.value), format_pct(s.recall.value), format_pct(s.f1.value),
                         format_pct(s.stickiness), s.kept ? "yes" : "no", degenerate ? "yes" : "no");
    }
    return out;
  }

  bool any_degenerate = false;
  auto cell = [&](const Percentage& p) {
    if (!p.degenerate) return format_pct(p.value);
    any_degenerate = true;
    return format_pct(0.0) + "†";
  };
  out += "| Modification | Precision | Recall | F1 | Template Stickiness | Kept |\n";
  out += "|:---|---:|---:|---:|---:|:---:|\n";
  for (const auto& s : report.steps) {
    const std::string label = s.kept ? s.row_label : "*" + s.row_label + "*";
    if (s.skipped_reason) {
      out += fmt::format("| {} | n/a | n/a | n/a | n/a | skipped |\n", label);
      continue;
    }
    out += fmt::format("| {} | {} | {} | {} | {:.0f}% | {} |\n", label, cell(s.precision), cell(s.recall),
                       cell(s.f1), s.stickiness, s.kept ? "yes" : "no");
  }
  out += "\n";
  if (any_degenerate) out += "† zero denominator, reported as 0.0\n";
  out += "Rows in italics were evaluated and discarded.\n";
  out += fmt::format("Final plan: {}\n", report.final_plan.flags.to_string());
  out += fmt::format("Dataset fingerprint: {}\n", report.dataset_fingerprint);
  out += fmt::format("Backend: {} ({})\n", report.backend, report.model_id);
  return out;
}

std::string report_to_json(const AblationReport& report) {
  json steps = json::array();
  auto pct = [](const Percentage& p) { return json{{"value", p.value}, {"degenerate", p.degenerate}}; };
  for (const auto& s : report.steps) {
    json j = {{"step", s.step_name},         {"row", s.row_label},       {"flags", s.flags.to_string()},
              {"precision", pct(s.precision)}, {"recall", pct(s.recall)}, {"f1", pct(s.f1)},
              {"stickiness", s.stickiness},   {"kept", s.kept}};
    j["skipped_reason"] = s.skipped_reason ? json(*s.skipped_reason) : json(nullptr);
    steps.push_back(std::move(j));
  }
  json j = {{"steps", steps},
            {"final_plan", plan_to_json(report.final_plan)},
            {"dataset_fingerprint", report.dataset_fingerprint},
            {"backend", report.backend},
            {"model_id", report.model_id}};
  return j.dump(2) + "\n";
}

AblationReport report_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    AblationReport report;
    auto pct = [](const json& p) { return Percentage{p.at("value").get<double>(), p.at("degenerate").get<bool>()}; };
    for (const auto& s : j.at("steps")) {
      StepResult r;
      r.step_name = s.at("step").get<std::string>();
      r.row_label = s.at("row").get<std::string>();
      r.flags = FlagSet::parse(s.at("flags").get<std::string>());
      r.precision = pct(s.at("precision"));
      r.recall = pct(s.at("recall"));
      r.f1 = pct(s.at("f1"));
      r.stickiness = s.at("stickiness").get<double>();
      r.kept = s.at("kept").get<bool>();
      if (!s.at("skipped_reason").is_null()) r.skipped_reason = s.at("skipped_reason").get<std::string>();
      report.steps.push_back(std::move(r));
    }
    report.final_plan = plan_from_json(j.at("final_plan"));
    report.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    report.backend = j.at("backend").get<std::string>();
    report.model_id = j.at("model_id").get<std::string>();
    return report;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed ablation report: {}", e.what()));
  }
}

PointSummary evaluate_point(const ConfusionCounts& counts) {
  PointSummary s;
  s.precision = precision(counts);
  s.recall = recall(counts);
  s.p_at_95 = point_precision_at_recall(counts, 95.0);
  s.p_at_85 = point_precision_at_recall(counts, 85.0);
  return s;
}

PointSummary evaluate_point(std::span<const ExampleRecord> records) {
  if (records.empty()) throw std::invalid_argument("evaluate_point needs at least one record");
  return evaluate_point(count_records(records));
}

std::string format_point_summary(const PointSummary& s) {
  return fmt::format("P@95%R {} | P@85%R {} | Precision {} | Recall {}", format_pct(s.p_at_95), format_pct(s.p_at_85),
                     format_pct(s.precision.value), format_pct(s.recall.value));
}

std::string manifest_json(const PromptPlan& plan, const std::string& dataset_fingerprint, const std::string& backend,
                          const std::string& model_id, std::string_view command) {
  json j = {{"harness_version", JOBCLF_VERSION},
            {"command", command},
            {"plan", plan_to_json(plan)},
            {"dataset_fingerprint", dataset_fingerprint},
            {"backend", backend},
            {"model_id", model_id},
            {"temperature", 0.0}};
  return j.dump(2) + "\n";
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
}

}  // namespace jobclf
