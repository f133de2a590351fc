#include "jobclf/prompt_catalog.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

#include "jobclf/digest.hpp"
#include "jobclf/errors.hpp"

namespace jobclf {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, kModFlagCount> kFlagNames = {
    "fewshot_cot", "zero_cot", "rawinst", "sysinst", "bothinst", "mock", "reit",
    "strict",      "loose",    "right",   "info",    "name",     "pos",
};

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  if (from.empty()) return;
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string with_name(std::string text, std::string_view name) {
  replace_all(text, "{name}", name);
  return text;
}

std::string with_posting(std::string text, std::string_view posting) {
  replace_all(text, "{job_posting}", posting);
  return text;
}

PromptPack make_builtin_pack() {
  PromptPack p;
  p.version = "graduate-jobs/1";
  p.role =
      "You are an AI expert in career advice. You are tasked with sorting through jobs by analysing their "
      "content and deciding whether they would be a good fit for a recent graduate or not.";
  p.role_named =
      "You are {name}, an AI expert in career advice. You are tasked with sorting through jobs by analysing "
      "their content and deciding whether they would be a good fit for a recent graduate or not.";
  p.task_definition =
      "A job is fit for a graduate if it's a junior-level position that does not require extensive prior "
      "professional experience.";
  p.task_request =
      "I will give you a job posting and you will analyse it, to know whether or not it describes a position "
      "fit for a graduate.";
  p.task_request_reit =
      "I will give you a job posting and you will analyse it, step-by-step, to know whether or not it "
      "describes a position fit for a graduate.";
  p.reit_system_reminder = "";
  p.info =
      "When analysing the experience required, take into account that requiring internships is still fit for "
      "a graduate.";
  p.mock_question = "Got it?";
  p.mock_ack = "Yes, I understand. I am ready to analyse your job posting.";
  p.mock_ack_named = "Yes, I understand. I am {name}, and I will analyse your job posting.";
  p.positive_feedback = "Great! Let's begin then :)";
  p.query_head = "For the given job:\n{job_posting}\n---------";
  p.question = "Is this job (A) a job fit for a recent graduate,\nor (B) a job requiring more professional experience.";
  p.fewshot_question =
      "Is this job (A) a job fit for a recent graduate, or (B) a job requiring more professional experience.";
  p.answer_prefix = "Answer:";
  p.zero_cot_cue = "Let's think step by step,";
  p.right_cue = "Let's think step by step to reach the right conclusion";
  p.loose_template =
      "Your answer must end with:\nFinal Answer: This is a (A) job fit for a recent graduate or a student OR "
      "(B) a job requiring more professional experience.";
  p.strict_template =
      "You will answer following this template:\nReasoning step 1:\nReasoning step 2:\nReasoning step 3:\n"
      "Final Answer: This is a (A) job fit for a recent graduate or a student OR (B) a job requiring more "
      "professional experience.";
  p.strict_cue = "Reasoning Step 1:";
  p.default_exemplars = {
      {"Senior Client Partner\nYou will own relationships with C-level stakeholders across our largest "
       "accounts, working in a fast-paced and intense environment. At least eight years of account "
       "management experience is required.",
       "This job appears to be a senior position, as it mentions requiring experience interacting with "
       "C-level stakeholder in intense environments and asks for at least eight years of account management. "
       "Therefore, this is (B) a job requiring more professional experience"},
      {"Graduate Data Analyst\nJoin our analytics team straight out of university. You will receive full "
       "training, and no prior professional experience is needed; a degree in a numerate subject is "
       "preferred.",
       "This job appears to be an entry-level position, as it targets people straight out of university and "
       "provides full training without asking for prior professional experience. Therefore, this is (A) a job "
       "fit for a recent graduate"},
  };
  p.notes = {
      "default_exemplars are placeholders: the original few-shot postings were never published.",
      "rawinst places role, task and query in one user message; the original wording is elided and is "
      "reconstructed from the role and task fragments.",
      "reit_system_reminder is empty because the best-performing final prompt has no system reminder; the "
      "published reit snippet used: Remember, you're the best AI careers expert and will use your expertise "
      "to provide the best possible analysis",
  };
  return p;
}

std::string answer_line(const PromptPlan& plan, const PromptPack& pack) {
  std::string line = pack.answer_prefix;
  if (plan.has(ModFlag::Strict)) {
    line += ' ' + pack.strict_cue;
  } else if (plan.has(ModFlag::Right)) {
    line += ' ' + pack.right_cue;
  } else if (plan.has(ModFlag::ZeroCot)) {
    line += ' ' + pack.zero_cot_cue;
  }
  return line;
}

std::string compose_query(const PromptPlan& plan, const PromptPack& pack, std::string_view posting) {
  std::string q;
  if (plan.has(ModFlag::Pos)) q += pack.positive_feedback + '\n';
  q += with_posting(pack.query_head, posting);
  q += '\n';
  q += pack.question;
  if (plan.has(ModFlag::Strict)) {
    q += '\n' + pack.strict_template;
  } else if (plan.has(ModFlag::Loose)) {
    q += '\n' + pack.loose_template;
  }
  q += '\n';
  q += answer_line(plan, pack);
  return q;
}

std::string compose_role(const PromptPlan& plan, const PromptPack& pack) {
  std::string role = plan.has(ModFlag::Name) ? with_name(pack.role_named, plan.assistant_name) : pack.role;
  if (plan.has(ModFlag::Reit) && !pack.reit_system_reminder.empty()) role += ' ' + pack.reit_system_reminder;
  return role;
}

std::string compose_task(const PromptPlan& plan, const PromptPack& pack) {
  std::string task = pack.task_definition;
  if (plan.has(ModFlag::Info)) {
    task += '\n' + pack.info + ' ';
  } else {
    task += ' ';
  }
  task += plan.has(ModFlag::Reit) ? pack.task_request_reit : pack.task_request;
  return task;
}

const std::array<std::pair<const char*, std::string PromptPack::*>, 21> kPackFields = {{
    {"version", &PromptPack::version},
    {"role", &PromptPack::role},
    {"role_named", &PromptPack::role_named},
    {"task_definition", &PromptPack::task_definition},
    {"task_request", &PromptPack::task_request},
    {"task_request_reit", &PromptPack::task_request_reit},
    {"reit_system_reminder", &PromptPack::reit_system_reminder},
    {"info", &PromptPack::info},
    {"mock_question", &PromptPack::mock_question},
    {"mock_ack", &PromptPack::mock_ack},
    {"mock_ack_named", &PromptPack::mock_ack_named},
    {"positive_feedback", &PromptPack::positive_feedback},
    {"query_head", &PromptPack::query_head},
    {"question", &PromptPack::question},
    {"fewshot_question", &PromptPack::fewshot_question},
    {"answer_prefix", &PromptPack::answer_prefix},
    {"zero_cot_cue", &PromptPack::zero_cot_cue},
    {"right_cue", &PromptPack::right_cue},
    {"loose_template", &PromptPack::loose_template},
    {"strict_template", &PromptPack::strict_template},
    {"strict_cue", &PromptPack::strict_cue},
}};

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

std::optional<Role> parse_role(std::string_view text) {
  if (text == "system") return Role::System;
  if (text == "user") return Role::User;
  if (text == "assistant") return Role::Assistant;
  return std::nullopt;
}

std::string_view to_string(ModFlag flag) { return kFlagNames[static_cast<std::size_t>(flag)]; }

std::optional<ModFlag> parse_mod_flag(std::string_view text) {
  for (std::size_t i = 0; i < kFlagNames.size(); ++i) {
    if (kFlagNames[i] == text) return static_cast<ModFlag>(i);
  }
  if (text == "cot") return ModFlag::FewshotCot;
  return std::nullopt;
}

std::vector<ModFlag> FlagSet::to_vector() const {
  std::vector<ModFlag> out;
  for (std::size_t i = 0; i < kModFlagCount; ++i) {
    if (contains(static_cast<ModFlag>(i))) out.push_back(static_cast<ModFlag>(i));
  }
  return out;
}

std::string FlagSet::to_string() const {
  if (empty()) return "baseline";
  std::string out;
  for (auto f : to_vector()) {
    if (!out.empty()) out += '+';
    out += jobclf::to_string(f);
  }
  return out;
}

FlagSet FlagSet::parse(std::string_view list) {
  FlagSet out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    auto next = list.find_first_of(",+", pos);
    if (next == std::string_view::npos) next = list.size();
    auto token = list.substr(pos, next - pos);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (!token.empty() && token != "baseline") {
      auto flag = parse_mod_flag(token);
      if (!flag) throw UsageError(fmt::format("unknown prompt modification '{}'", token));
      out.insert(*flag);
    }
    pos = next + 1;
  }
  return out;
}

std::string PromptPlan::id() const {
  std::string out = flags.to_string();
  if (has(ModFlag::Name) && assistant_name != "Frederick") out += "@" + assistant_name;
  if (has(ModFlag::FewshotCot)) {
    std::string joined;
    for (const auto& ex : exemplars) joined += ex.posting + '\x1f' + ex.answer + '\x1e';
    out += "#" + sha256_hex(joined).substr(0, 8);
  }
  return out;
}

const PromptPack& builtin_prompt_pack() {
  static const PromptPack pack = make_builtin_pack();
  return pack;
}

std::string prompt_pack_to_json(const PromptPack& pack) {
  json j = json::object();
  for (const auto& [key, member] : kPackFields) j[key] = pack.*member;
  j["default_exemplars"] = json::array();
  for (const auto& ex : pack.default_exemplars) {
    j["default_exemplars"].push_back({{"posting", ex.posting}, {"answer", ex.answer}});
  }
  j["notes"] = pack.notes;
  return j.dump(2) + "\n";
}

PromptPack prompt_pack_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("prompt pack is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw DataError("prompt pack must be a JSON object");
  PromptPack pack;
  for (const auto& [key, member] : kPackFields) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw DataError(fmt::format("prompt pack: missing string field '{}'", key));
    }
    pack.*member = it->get<std::string>();
  }
  if (auto it = j.find("default_exemplars"); it != j.end()) {
    for (const auto& ex : *it) {
      if (!ex.contains("posting") || !ex.contains("answer")) {
        throw DataError("prompt pack: exemplars need 'posting' and 'answer'");
      }
      pack.default_exemplars.push_back({ex.at("posting").get<std::string>(), ex.at("answer").get<std::string>()});
    }
  }
  if (auto it = j.find("notes"); it != j.end()) pack.notes = it->get<std::vector<std::string>>();
  return pack;
}

PromptPack load_prompt_pack(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read prompt pack '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return prompt_pack_from_json(buf.str());
}

std::vector<std::string> validate(const PromptPlan& plan) {
  std::vector<std::string> violations;
  auto count = [&](std::initializer_list<ModFlag> flags) {
    int n = 0;
    for (auto f : flags) n += plan.has(f) ? 1 : 0;
    return n;
  };
  const bool any_inst = count({ModFlag::RawInst, ModFlag::SysInst, ModFlag::BothInst}) > 0;

  if (count({ModFlag::RawInst, ModFlag::SysInst, ModFlag::BothInst}) > 1)
    violations.emplace_back("at most one of RAWINST, SYSINST, BOTHINST");
  if (count({ModFlag::Strict, ModFlag::Loose}) > 1) violations.emplace_back("at most one of STRICT, LOOSE");
  if (count({ModFlag::FewshotCot, ModFlag::ZeroCot}) > 1)
    violations.emplace_back("at most one of FEWSHOT_COT, ZERO_COT");
  if (plan.has(ModFlag::Mock) && !plan.has(ModFlag::BothInst)) violations.emplace_back("MOCK requires BOTHINST");
  if (plan.has(ModFlag::Pos) && !plan.has(ModFlag::Mock)) violations.emplace_back("POS requires MOCK");
  if (plan.has(ModFlag::Reit) && !any_inst)
    violations.emplace_back("REIT requires one of RAWINST, SYSINST, BOTHINST");
  if (plan.has(ModFlag::Info) && !any_inst)
    violations.emplace_back("INFO requires one of RAWINST, SYSINST, BOTHINST");
  if (plan.has(ModFlag::Name) && !any_inst)
    violations.emplace_back("NAME requires one of RAWINST, SYSINST, BOTHINST");
  if (plan.has(ModFlag::Right) && !plan.has(ModFlag::ZeroCot)) violations.emplace_back("RIGHT requires ZERO_COT");
  if (plan.has(ModFlag::FewshotCot) && plan.exemplars.empty())
    violations.emplace_back("FEWSHOT_COT requires non-empty exemplars");
  if (plan.has(ModFlag::Name) && plan.assistant_name.empty())
    violations.emplace_back("NAME requires a non-empty assistant name");
  return violations;
}

CompiledPrompt build(const PromptPlan& plan, std::string_view posting_text, const PromptPack& pack,
                     std::string posting_id) {
  if (auto violations = validate(plan); !violations.empty()) {
    std::string joined;
    for (const auto& v : violations) joined += (joined.empty() ? "" : "; ") + v;
    throw UsageError("invalid prompt plan: " + joined);
  }
  if (posting_text.empty()) throw UsageError("cannot build a prompt for an empty posting");

  const std::string query = compose_query(plan, pack, posting_text);
  std::vector<Message> messages;
  std::string final_user;

  if (plan.has(ModFlag::RawInst)) {
    final_user = compose_role(plan, pack) + '\n' + compose_task(plan, pack) + '\n' + query;
  } else if (plan.has(ModFlag::SysInst)) {
    messages.push_back({Role::System, compose_role(plan, pack) + '\n' + compose_task(plan, pack)});
    final_user = query;
  } else if (plan.has(ModFlag::BothInst)) {
    messages.push_back({Role::System, compose_role(plan, pack)});
    if (plan.has(ModFlag::Mock)) {
      messages.push_back({Role::User, compose_task(plan, pack) + ' ' + pack.mock_question});
      messages.push_back({Role::Assistant, plan.has(ModFlag::Name)
                                               ? with_name(pack.mock_ack_named, plan.assistant_name)
                                               : pack.mock_ack});
      final_user = query;
    } else {
      final_user = compose_task(plan, pack) + '\n' + query;
    }
  } else {
    final_user = query;
  }

  if (plan.has(ModFlag::FewshotCot)) {
    for (const auto& ex : plan.exemplars) {
      messages.push_back({Role::User, with_posting(pack.query_head, ex.posting) + '\n' + pack.fewshot_question});
      messages.push_back({Role::Assistant, ex.answer});
    }
  }
  messages.push_back({Role::User, std::move(final_user)});
  return CompiledPrompt{std::move(messages), plan, std::move(posting_id)};
}

CompiledPrompt build(const PromptPlan& plan, std::string_view posting_text, std::string posting_id) {
  return build(plan, posting_text, builtin_prompt_pack(), std::move(posting_id));
}

PromptPlan final_best_plan() {
  PromptPlan plan;
  plan.flags = {ModFlag::ZeroCot, ModFlag::BothInst, ModFlag::Mock, ModFlag::Reit,
                ModFlag::Right,   ModFlag::Info,     ModFlag::Name, ModFlag::Pos};
  plan.assistant_name = "Frederick";
  return plan;
}

std::string render_flat(const CompiledPrompt& compiled) {
  std::string out;
  for (const auto& m : compiled.messages) {
    if (!out.empty()) out += "\n\n";
    out += m.content;
  }
  return out;
}

std::string render_tagged(const CompiledPrompt& compiled) {
  std::string out;
  for (const auto& m : compiled.messages) {
    if (!out.empty()) out += "\n\n";
    out += fmt::format("[{}]\n{}", to_string(m.role), m.content);
  }
  return out;
}

std::vector<LadderStep> ablation_ladder() {
  using F = ModFlag;
  return {
      {"Baseline", {{"Baseline", {}}}, false},
      {"Reasoning", {{"CoT", {F::FewshotCot}}, {"Zero-CoT", {F::ZeroCot}}}, false},
      {"Instructions", {{"rawinst", {F::RawInst}}, {"sysinst", {F::SysInst}}, {"bothinst", {F::BothInst}}}, true},
      {"Mocked exchange", {{"mock", {F::Mock}}}, true},
      {"Reiteration", {{"reit", {F::Reit}}}, true},
      {"Answer template", {{"strict", {F::Strict}}, {"loose", {F::Loose}}}, true},
      {"Right conclusion", {{"right", {F::Right}}}, true},
      {"Reasoning gaps", {{"info", {F::Info}}}, true},
      {"Naming", {{"name", {F::Name}}}, true},
      {"Positive feedback", {{"pos", {F::Pos}}}, true},
  };
}

PromptPlan apply_delta(const PromptPlan& base, FlagSet delta, const PromptPack& pack) {
  PromptPlan plan = base;
  plan.flags = base.flags | delta;
  if (plan.has(ModFlag::FewshotCot) && plan.exemplars.empty()) plan.exemplars = pack.default_exemplars;
  return plan;
}

}  // namespace jobclf
