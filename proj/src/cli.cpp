#include "jobclf/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include "CLI11.hpp"
#include "json.hpp"

#include "jobclf/ablation_runner.hpp"
#include "jobclf/baselines.hpp"
#include "jobclf/dataset.hpp"
#include "jobclf/errors.hpp"
#include "jobclf/llm_client.hpp"
#include "jobclf/metrics.hpp"
#include "jobclf/prompt_catalog.hpp"

namespace fs = std::filesystem;

namespace jobclf {

namespace {

using json = nlohmann::json;

// Resolved settings. Precedence: command-line flag > environment > config file > default.
struct HarnessConfig {
  std::string backend = "mock";
  std::string model = "gpt-3.5-turbo-0301";
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "HARNESS_API_KEY";
  int concurrency = 1;
  std::string cache_dir = ".jobclf/cache";
  std::string store_dir = ".jobclf/results";
  std::string prompt_pack;
  std::string rule_pack;
  std::string mock_script;
  bool replay_strict = true;
  std::uint64_t seed = 42;
  int max_output_tokens = ChatRequest::kDefaultMaxOutputTokens;
};

// Raw flag values; empty / unset means "not given on the command line".
struct GlobalFlags {
  std::string config;
  std::string backend, model, endpoint, cache_dir, store_dir, prompt_pack, rule_pack, mock_script;
  int concurrency = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int max_output_tokens = 0;
  bool strict = false;
  bool no_strict = false;
};

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

template <typename T>
T parse_number(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    T value;
    if constexpr (std::is_same_v<T, int>) {
      value = std::stoi(text, &used);
    } else {
      value = static_cast<T>(std::stoull(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw UsageError(fmt::format("{} must be an integer, got '{}'", what, text));
  }
}

void apply_config_file(HarnessConfig& cfg, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(fmt::format("cannot read config file '{}'", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(fmt::format("config file '{}' is not valid JSON: {}", path.string(), e.what()));
  }
  try {
    cfg.backend = j.value("backend", cfg.backend);
    cfg.model = j.value("model", cfg.model);
    cfg.endpoint = j.value("endpoint", cfg.endpoint);
    cfg.api_key_env = j.value("api_key_env", cfg.api_key_env);
    cfg.concurrency = j.value("concurrency", cfg.concurrency);
    cfg.cache_dir = j.value("cache_dir", cfg.cache_dir);
    cfg.store_dir = j.value("store_dir", cfg.store_dir);
    cfg.prompt_pack = j.value("prompt_pack", cfg.prompt_pack);
    cfg.rule_pack = j.value("rule_pack", cfg.rule_pack);
    cfg.mock_script = j.value("mock_script", cfg.mock_script);
    cfg.replay_strict = j.value("replay_strict", cfg.replay_strict);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.max_output_tokens = j.value("max_output_tokens", cfg.max_output_tokens);
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("config file '{}': {}", path.string(), e.what()));
  }
  if (j.contains("api_key")) throw UsageError("config files must not contain credentials; use api_key_env");
}

HarnessConfig resolve_config(const GlobalFlags& flags) {
  HarnessConfig cfg;
  std::string config_path = flags.config.empty() ? env_or_empty("HARNESS_CONFIG") : flags.config;
  if (!config_path.empty()) apply_config_file(cfg, config_path);

  auto from_env = [](std::string& field, const char* name) {
    if (auto v = env_or_empty(name); !v.empty()) field = v;
  };
  from_env(cfg.backend, "HARNESS_BACKEND");
  from_env(cfg.model, "HARNESS_MODEL");
  from_env(cfg.endpoint, "HARNESS_ENDPOINT");
  from_env(cfg.cache_dir, "HARNESS_CACHE_DIR");
  from_env(cfg.store_dir, "HARNESS_STORE_DIR");
  from_env(cfg.prompt_pack, "HARNESS_PROMPT_PACK");
  from_env(cfg.rule_pack, "HARNESS_RULE_PACK");
  from_env(cfg.mock_script, "HARNESS_MOCK_SCRIPT");
  if (auto v = env_or_empty("HARNESS_CONCURRENCY"); !v.empty()) cfg.concurrency = parse_number<int>(v, "HARNESS_CONCURRENCY");
  if (auto v = env_or_empty("HARNESS_SEED"); !v.empty()) cfg.seed = parse_number<std::uint64_t>(v, "HARNESS_SEED");

  auto from_flag = [](std::string& field, const std::string& value) {
    if (!value.empty()) field = value;
  };
  from_flag(cfg.backend, flags.backend);
  from_flag(cfg.model, flags.model);
  from_flag(cfg.endpoint, flags.endpoint);
  from_flag(cfg.cache_dir, flags.cache_dir);
  from_flag(cfg.store_dir, flags.store_dir);
  from_flag(cfg.prompt_pack, flags.prompt_pack);
  from_flag(cfg.rule_pack, flags.rule_pack);
  from_flag(cfg.mock_script, flags.mock_script);
  if (flags.concurrency != 0) cfg.concurrency = flags.concurrency;
  if (flags.seed_given) cfg.seed = flags.seed;
  if (flags.max_output_tokens != 0) cfg.max_output_tokens = flags.max_output_tokens;
  if (flags.strict) cfg.replay_strict = true;
  if (flags.no_strict) cfg.replay_strict = false;

  if (cfg.concurrency < 1) throw UsageError("concurrency must be at least 1");
  if (cfg.backend != "mock" && cfg.backend != "remote" && cfg.backend != "replay") {
    throw UsageError(fmt::format("unknown backend '{}' (expected mock, remote or replay)", cfg.backend));
  }
  return cfg;
}

std::shared_ptr<Backend> make_backend(const HarnessConfig& cfg) {
  if (cfg.backend == "replay") {
    return std::make_shared<ReplayBackend>(std::make_shared<ResponseCache>(cfg.cache_dir), true);
  }
  std::shared_ptr<Backend> upstream;
  if (cfg.backend == "mock") {
    if (cfg.mock_script.empty()) throw UsageError("the mock backend needs --mock-script");
    upstream = std::make_shared<MockBackend>(MockBackend::load(cfg.mock_script));
  } else {
    RemoteConfig remote;
    remote.endpoint = cfg.endpoint;
    remote.api_key_env = cfg.api_key_env;
    remote.max_in_flight = cfg.concurrency;
    upstream = std::make_shared<RemoteBackend>(remote);
  }
  return std::make_shared<ReplayBackend>(std::make_shared<ResponseCache>(cfg.cache_dir), false, upstream);
}

PromptPack load_pack(const HarnessConfig& cfg) {
  return cfg.prompt_pack.empty() ? builtin_prompt_pack() : load_prompt_pack(cfg.prompt_pack);
}

Dataset load_dataset(const std::string& path, const std::string& format) {
  DataFormat f = format_from_path(path);
  if (format == "csv") f = DataFormat::Csv;
  if (format == "jsonl") f = DataFormat::Jsonl;
  return ingest(path, f);
}

PromptPlan plan_from_flags(const std::string& flags, bool final_plan, const std::string& name, const PromptPack& pack) {
  PromptPlan plan;
  if (final_plan) {
    if (!flags.empty()) throw UsageError("use either --final or --flags, not both");
    plan = final_best_plan();
  } else {
    plan.flags = FlagSet::parse(flags);
    if (plan.has(ModFlag::FewshotCot)) plan.exemplars = pack.default_exemplars;
  }
  if (!name.empty()) plan.assistant_name = name;
  if (auto violations = validate(plan); !violations.empty()) {
    std::string joined;
    for (const auto& v : violations) joined += "\n  - " + v;
    throw UsageError("invalid prompt plan:" + joined);
  }
  return plan;
}

void print_summary(std::ostream& out, const DatasetSummary& s) {
  out << fmt::format("{:<14}{:>8}{:>12}{:>15}{:>12}\n", "Label", "Count", "Proportion", "Median tokens", "Token std");
  auto row = [&](std::string_view name, const TokenStats& t) {
    out << fmt::format("{:<14}{:>8}{:>11.1f}%{:>15}{:>12.1f}\n", name, t.count, 100.0 * t.proportion, t.median_tokens,
                       t.token_stddev);
  };
  for (const auto& [label, stats] : s.per_label) row(to_string(label), stats);
  row("Full dataset", s.overall);
}

void print_experiment(std::ostream& out, const ExperimentResult& r) {
  out << fmt::format("Plan: {}\n", r.plan.id());
  out << fmt::format("Examples: {} (dispatched {}, reused {})\n", r.records.size(), r.dispatched, r.reused);
  out << fmt::format("Precision {} | Recall {} | F1 {} | Stickiness {}\n", format_pct(r.precision.value),
                     format_pct(r.recall.value), format_pct(r.f1.value), format_pct(r.stickiness));
  out << format_point_summary(evaluate_point(r.counts)) << "\n";
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string posting_text_from(const std::string& path, const std::string& id) {
  const auto ext = fs::path(path).extension().string();
  if (ext == ".jsonl" || ext == ".csv") {
    const auto data = ingest(path, format_from_path(path));
    if (data.empty()) throw DataError(fmt::format("'{}' has no postings", path));
    if (id.empty()) return compose_input(data.front());
    for (const auto& p : data) {
      if (p.id == id) return compose_input(p);
    }
    throw DataError(fmt::format("no posting with id '{}' in '{}'", id, path));
  }
  auto text = read_text(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

ReportFormat report_format(const std::string& format, const std::string& path) {
  if (format == "csv") return ReportFormat::Csv;
  if (format == "markdown" || format == "md") return ReportFormat::Markdown;
  if (!format.empty()) throw UsageError(fmt::format("unknown report format '{}'", format));
  return fs::path(path).extension() == ".csv" ? ReportFormat::Csv : ReportFormat::Markdown;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prompt-engineering ablation harness for graduate job classification", "jobclf"};
  app.set_version_flag("--version", std::string("jobclf ") + JOBCLF_VERSION);
  app.set_help_all_flag("--help-all", "Print help for every subcommand and exit");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config, "JSON config file (flags > env > config file)");
  app.add_option("--backend", g.backend, "Model backend: mock, remote or replay");
  app.add_option("--model", g.model, "Model id sent with every request");
  app.add_option("--endpoint", g.endpoint, "Chat-completions URL for the remote backend");
  app.add_option("--concurrency", g.concurrency, "Maximum in-flight requests")->check(CLI::PositiveNumber);
  app.add_option("--cache-dir", g.cache_dir, "Response cache directory");
  app.add_option("--store-dir", g.store_dir, "Result store directory");
  app.add_option("--prompt-pack", g.prompt_pack, "Prompt pack JSON file (default: built-in pack)");
  app.add_option("--rule-pack", g.rule_pack, "Keyword rule pack file (default: built-in rules)");
  app.add_option("--mock-script", g.mock_script, "Scripted responses for the mock backend");
  app.add_option("--max-output-tokens", g.max_output_tokens, "Completion token limit")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for splitting and SVM training");
  app.add_flag("--replay-strict", g.strict, "Replay backend: fail on cache misses (default)");
  app.add_flag("--no-replay-strict", g.no_strict, "Replay backend: allow non-strict replay");

  // ingest
  std::string in_path, in_format, in_output;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a dataset file and print its summary");
  ingest_cmd->add_option("--input", in_path, "Dataset file (.jsonl or .csv)")->required();
  ingest_cmd->add_option("--format", in_format, "Override format detection")->check(CLI::IsMember({"jsonl", "csv"}));
  ingest_cmd->add_option("--output", in_output, "Write the validated dataset as JSONL");

  // split
  std::string sp_input, sp_format, sp_train, sp_test;
  double sp_fraction = 0.7;
  auto* split_cmd = app.add_subcommand("split", "Stratified train/test split");
  split_cmd->add_option("--input", sp_input, "Dataset file")->required();
  split_cmd->add_option("--format", sp_format, "Override format detection")->check(CLI::IsMember({"jsonl", "csv"}));
  split_cmd->add_option("--train-out", sp_train, "Training split output (JSONL)")->required();
  split_cmd->add_option("--test-out", sp_test, "Test split output (JSONL)")->required();
  split_cmd->add_option("--fraction", sp_fraction, "Training fraction")->capture_default_str();

  // build-prompt
  std::string bp_flags, bp_name, bp_posting, bp_id;
  bool bp_final = false, bp_flat = false;
  auto* build_cmd = app.add_subcommand("build-prompt", "Print the message sequence for a plan and posting");
  build_cmd->add_option("--flags", bp_flags, "Comma-separated modifications, e.g. zero_cot,bothinst,mock");
  build_cmd->add_flag("--final", bp_final, "Use the best-performing final plan");
  build_cmd->add_option("--name", bp_name, "Assistant name used by the 'name' modification");
  build_cmd->add_option("--posting", bp_posting, "Text file, or a .jsonl/.csv dataset")->required();
  build_cmd->add_option("--id", bp_id, "Posting id when --posting is a dataset");
  build_cmd->add_flag("--flat", bp_flat, "Print without role markers");

  // run
  std::string run_input, run_format, run_flags, run_name, run_records;
  bool run_final = false;
  auto* run_cmd = app.add_subcommand("run", "Run one plan over a dataset");
  run_cmd->add_option("--input", run_input, "Labeled dataset file")->required();
  run_cmd->add_option("--format", run_format, "Override format detection")->check(CLI::IsMember({"jsonl", "csv"}));
  run_cmd->add_option("--flags", run_flags, "Comma-separated modifications");
  run_cmd->add_flag("--final", run_final, "Use the best-performing final plan");
  run_cmd->add_option("--name", run_name, "Assistant name used by the 'name' modification");
  run_cmd->add_option("--records-out", run_records, "Also write the sorted per-example records here");

  // ablate
  std::string ab_input, ab_format, ab_output, ab_report_format, ab_json;
  auto* ablate_cmd = app.add_subcommand("ablate", "Greedy keep-or-discard ablation over the modification ladder");
  ablate_cmd->add_option("--input", ab_input, "Labeled dataset file")->required();
  ablate_cmd->add_option("--format", ab_format, "Override format detection")->check(CLI::IsMember({"jsonl", "csv"}));
  ablate_cmd->add_option("--output", ab_output, "Report file (.md or .csv)");
  ablate_cmd->add_option("--report-format", ab_report_format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));
  ablate_cmd->add_option("--json-out", ab_json, "Machine-readable report for the 'report' command");

  // baseline
  std::string bl_train, bl_test, bl_save;
  bool bl_keyword = false, bl_svm = false;
  double bl_lambda = 1e-4;
  int bl_epochs = 20;
  std::size_t bl_min_df = 1;
  auto* baseline_cmd = app.add_subcommand("baseline", "Evaluate the keyword or tf-idf SVM baseline");
  baseline_cmd->add_option("--train", bl_train, "Training dataset (used for evaluation when --test is absent)")->required();
  baseline_cmd->add_option("--test", bl_test, "Evaluation dataset");
  auto* kw_flag = baseline_cmd->add_flag("--keyword", bl_keyword, "Keyword/regex lookup baseline");
  auto* svm_flag = baseline_cmd->add_flag("--svm", bl_svm, "tf-idf + linear SVM baseline");
  kw_flag->excludes(svm_flag);
  baseline_cmd->add_option("--lambda", bl_lambda, "SVM regularisation strength")->capture_default_str();
  baseline_cmd->add_option("--epochs", bl_epochs, "SVM training epochs")->capture_default_str();
  baseline_cmd->add_option("--min-df", bl_min_df, "Minimum document frequency")->capture_default_str();
  baseline_cmd->add_option("--save-model", bl_save, "Write the fitted SVM as JSON");

  // report
  std::string rp_records, rp_ablation, rp_format, rp_output;
  auto* report_cmd = app.add_subcommand("report", "Summarise stored records or re-render an ablation report");
  report_cmd->add_option("--records", rp_records, "Per-example records (JSONL)");
  report_cmd->add_option("--ablation", rp_ablation, "Ablation report JSON");
  report_cmd->add_option("--report-format", rp_format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));
  report_cmd->add_option("--output", rp_output, "Write the rendered report here");

  // cache
  auto* cache_cmd = app.add_subcommand("cache", "Inspect or clear the response cache");
  cache_cmd->require_subcommand(1);
  auto* cache_stats_cmd = cache_cmd->add_subcommand("stats", "Print entry and byte counts");
  auto* cache_clear_cmd = cache_cmd->add_subcommand("clear", "Delete every cache entry");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    const HarnessConfig cfg = resolve_config(g);

    if (ingest_cmd->parsed()) {
      const auto data = load_dataset(in_path, in_format);
      print_summary(out, summarize(data));
      if (!in_output.empty()) write_jsonl(in_output, data);
    } else if (split_cmd->parsed()) {
      const auto data = load_dataset(sp_input, sp_format);
      const auto split = stratified_split(data, sp_fraction, cfg.seed);
      write_jsonl(sp_train, split.train);
      write_jsonl(sp_test, split.test);
      auto share = [](const Dataset& d) {
        std::size_t g = 0;
        for (const auto& p : d) g += p.label == Label::Grad ? 1 : 0;
        return 100.0 * static_cast<double>(g) / static_cast<double>(d.size());
      };
      out << fmt::format("train {} examples ({:.1f}% GRAD) -> {}\n", split.train.size(), share(split.train), sp_train);
      out << fmt::format("test {} examples ({:.1f}% GRAD) -> {}\n", split.test.size(), share(split.test), sp_test);
    } else if (build_cmd->parsed()) {
      const auto pack = load_pack(cfg);
      const auto plan = plan_from_flags(bp_flags, bp_final, bp_name, pack);
      const auto compiled = build(plan, posting_text_from(bp_posting, bp_id), pack);
      out << (bp_flat ? render_flat(compiled) : render_tagged(compiled)) << "\n";
    } else if (run_cmd->parsed()) {
      const auto pack = load_pack(cfg);
      const auto plan = plan_from_flags(run_flags, run_final, run_name, pack);
      const auto data = load_dataset(run_input, run_format);
      auto backend = make_backend(cfg);
      ResultStore store(cfg.store_dir);
      ExperimentOptions opts;
      opts.model_id = cfg.model;
      opts.max_output_tokens = cfg.max_output_tokens;
      opts.concurrency = cfg.concurrency;
      opts.pack = &pack;
      opts.store = &store;
      const auto fingerprint = dataset_fingerprint(data);
      const auto manifest_path = store.path_for(fingerprint, plan.id()).replace_extension(".manifest.json");
      write_text_file(manifest_path, manifest_json(plan, fingerprint, backend->descriptor(), cfg.model, "run"));
      const auto result = run_experiment(plan, data, *backend, opts);
      if (!run_records.empty()) {
        std::string text;
        for (const auto& r : result.records) text += record_to_json(r) + "\n";
        write_text_file(run_records, text);
      }
      print_experiment(out, result);
    } else if (ablate_cmd->parsed()) {
      const auto pack = load_pack(cfg);
      const auto data = load_dataset(ab_input, ab_format);
      auto backend = make_backend(cfg);
      ResultStore store(cfg.store_dir);
      ExperimentOptions opts;
      opts.model_id = cfg.model;
      opts.max_output_tokens = cfg.max_output_tokens;
      opts.concurrency = cfg.concurrency;
      opts.pack = &pack;
      opts.store = &store;
      const auto ladder = ablation_ladder();
      const auto report = greedy_ablate(ladder, data, *backend, opts);
      const auto fingerprint = report.dataset_fingerprint;
      write_text_file(store.dir() / fingerprint.substr(0, 16) / "ablation.manifest.json",
                      manifest_json(report.final_plan, fingerprint, report.backend, cfg.model, "ablate"));
      const auto text = render_report(report, report_format(ab_report_format, ab_output));
      if (!ab_output.empty()) write_text_file(ab_output, text);
      if (!ab_json.empty()) write_text_file(ab_json, report_to_json(report));
      out << text;
    } else if (baseline_cmd->parsed()) {
      if (!bl_keyword && !bl_svm) throw UsageError("choose --keyword or --svm");
      const auto train = load_dataset(bl_train, "");
      const auto test = bl_test.empty() ? train : load_dataset(bl_test, "");
      for (const auto& p : test) {
        if (p.label == Label::Unlabeled) throw DataError(fmt::format("posting '{}' has no label", p.id));
      }
      if (bl_keyword) {
        const auto rules =
            cfg.rule_pack.empty() ? parse_rule_pack(default_rule_pack_text()) : load_rule_pack(cfg.rule_pack);
        ConfusionCounts c;
        for (const auto& p : test) {
          const bool pred = keyword_classify(p, rules) == Label::Grad;
          const bool truth = p.label == Label::Grad;
          (truth ? (pred ? c.tp : c.fn) : (pred ? c.fp : c.tn)) += 1;
        }
        out << fmt::format("Keyword baseline on {} examples\n", test.size());
        out << fmt::format("Precision {} | Recall {} | F1 {}\n", format_pct(precision(c).value),
                           format_pct(recall(c).value), format_pct(f1(c).value));
        out << format_point_summary(evaluate_point(c)) << "\n";
      } else {
        std::vector<std::string> corpus;
        std::vector<Label> truths;
        for (const auto& p : train) {
          corpus.push_back(compose_input(p));
          truths.push_back(p.label);
        }
        SvmClassifier clf;
        clf.tfidf = fit_tfidf(corpus, bl_min_df);
        std::vector<SparseVector> vectors;
        for (const auto& doc : corpus) vectors.push_back(transform(clf.tfidf, doc));
        clf.linear = train_linear(vectors, truths, clf.tfidf.dimension(), {bl_lambda, bl_epochs, cfg.seed});
        if (!bl_save.empty()) save_svm(bl_save, clf);
        std::vector<ScoredPrediction> preds;
        for (const auto& p : test) {
          preds.push_back({score(clf.linear, transform(clf.tfidf, compose_input(p))), p.label == Label::Grad});
        }
        out << fmt::format("SVM baseline: vocabulary {} terms, trained on {}, evaluated on {}\n",
                           clf.tfidf.dimension(), train.size(), test.size());
        for (double t : {95.0, 85.0}) {
          const auto sweep = sweep_precision_at_recall(preds, t);
          if (sweep) {
            out << fmt::format("P@{:.0f}%R {} (cutoff {:.6g})\n", t, format_pct(sweep->best_precision),
                               sweep->chosen_cutoff);
          } else {
            out << fmt::format("P@{:.0f}%R {} (unreachable)\n", t, format_pct(0.0));
          }
        }
      }
    } else if (report_cmd->parsed()) {
      if (rp_records.empty() == rp_ablation.empty()) throw UsageError("give exactly one of --records or --ablation");
      std::string text;
      if (!rp_records.empty()) {
        std::vector<ExampleRecord> records;
        std::istringstream in(read_text(rp_records));
        std::string line;
        while (std::getline(in, line)) {
          if (!line.empty()) records.push_back(record_from_json(line));
        }
        if (records.empty()) throw DataError("no records to report");
        const auto c = count_records(records);
        std::vector<ParsedAnswer> answers;
        for (const auto& r : records) answers.push_back(r.parsed);
        text = fmt::format("Records: {}\nPrecision {} | Recall {} | F1 {} | Stickiness {}\n{}\n", records.size(),
                           format_pct(precision(c).value), format_pct(recall(c).value), format_pct(f1(c).value),
                           format_pct(stickiness_rate(answers)), format_point_summary(evaluate_point(c)));
      } else {
        const auto report = report_from_json(read_text(rp_ablation));
        text = render_report(report, report_format(rp_format, rp_output));
      }
      if (!rp_output.empty()) write_text_file(rp_output, text);
      out << text;
    } else if (cache_stats_cmd->parsed()) {
      const auto s = cache_stats(cfg.cache_dir);
      out << fmt::format("cache {}: {} entries, {} bytes\n", cfg.cache_dir, s.entries, s.bytes);
    } else if (cache_clear_cmd->parsed()) {
      if (!fs::exists(cfg.cache_dir)) {
        out << fmt::format("cache {}: nothing to clear\n", cfg.cache_dir);
      } else {
        ResponseCache cache(cfg.cache_dir);
        out << fmt::format("cache {}: removed {} entries\n", cfg.cache_dir, cache.clear());
      }
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const BackendError& e) {
    err << "error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace jobclf
