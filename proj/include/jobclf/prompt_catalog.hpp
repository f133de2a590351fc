#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace jobclf {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view text);

struct Message {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

/// The prompt modifications that can be stacked on the baseline query.
enum class ModFlag : std::uint8_t {
  FewshotCot,
  ZeroCot,
  RawInst,
  SysInst,
  BothInst,
  Mock,
  Reit,
  Strict,
  Loose,
  Right,
  Info,
  Name,
  Pos,
};

inline constexpr std::size_t kModFlagCount = 13;

/// Lowercase short names: fewshot_cot, zero_cot, rawinst, ..., pos.
std::string_view to_string(ModFlag flag);
std::optional<ModFlag> parse_mod_flag(std::string_view text);

/// Small bitset over ModFlag; iteration order is enum order.
class FlagSet {
 public:
  constexpr FlagSet() = default;
  constexpr FlagSet(std::initializer_list<ModFlag> flags) {
    for (auto f : flags) insert(f);
  }

  constexpr bool contains(ModFlag f) const { return (bits_ >> static_cast<unsigned>(f)) & 1u; }
  constexpr void insert(ModFlag f) { bits_ |= std::uint16_t(1u << static_cast<unsigned>(f)); }
  constexpr void erase(ModFlag f) { bits_ &= std::uint16_t(~(1u << static_cast<unsigned>(f))); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint16_t bits() const { return bits_; }

  FlagSet operator|(FlagSet other) const {
    FlagSet out;
    out.bits_ = bits_ | other.bits_;
    return out;
  }

  std::vector<ModFlag> to_vector() const;
  /// "baseline" for the empty set, else names joined by '+'.
  std::string to_string() const;
  /// Parses a comma or '+' separated list; throws UsageError on unknown names.
  static FlagSet parse(std::string_view list);

  friend bool operator==(FlagSet, FlagSet) = default;

 private:
  std::uint16_t bits_ = 0;
};

struct Exemplar {
  std::string posting;  // job text shown in the example user turn
  std::string answer;   // worked assistant answer

  friend bool operator==(const Exemplar&, const Exemplar&) = default;
};

struct PromptPlan {
  FlagSet flags;
  std::string assistant_name = "Frederick";
  std::vector<Exemplar> exemplars;  // used only with FewshotCot

  bool has(ModFlag f) const { return flags.contains(f); }
  /// Stable identifier used for result-store file names.
  std::string id() const;

  friend bool operator==(const PromptPlan&, const PromptPlan&) = default;
};

/// Verbatim prompt fragments. `{name}` is replaced by the assistant name and
/// `{job_posting}` by the posting text.
struct PromptPack {
  std::string version;
  std::string role;                   // role instruction, unnamed
  std::string role_named;             // role instruction with {name}
  std::string task_definition;        // first sentence of the task
  std::string task_request;           // "I will give you a job posting ..."
  std::string task_request_reit;      // task_request with the step-by-step reminder
  std::string reit_system_reminder;   // appended to the role text under reit; may be empty
  std::string info;                   // extra guidance sentence
  std::string mock_question;          // appended to the task under mock
  std::string mock_ack;               // assistant acknowledgement, unnamed
  std::string mock_ack_named;         // acknowledgement with {name}
  std::string positive_feedback;      // first line of the query under pos
  std::string query_head;             // "For the given job:\n{job_posting}\n---------"
  std::string question;               // the (A)/(B) question lines
  std::string fewshot_question;       // question used in few-shot example turns
  std::string answer_prefix;          // "Answer:"
  std::string zero_cot_cue;
  std::string right_cue;
  std::string loose_template;
  std::string strict_template;
  std::string strict_cue;
  std::vector<Exemplar> default_exemplars;
  std::vector<std::string> notes;

  friend bool operator==(const PromptPack&, const PromptPack&) = default;
};

/// The pack reconstructed from the published prompt snippets.
const PromptPack& builtin_prompt_pack();
PromptPack load_prompt_pack(const std::filesystem::path& path);
std::string prompt_pack_to_json(const PromptPack& pack);
PromptPack prompt_pack_from_json(std::string_view text);

struct CompiledPrompt {
  std::vector<Message> messages;
  PromptPlan plan;
  std::string posting_id;

  friend bool operator==(const CompiledPrompt&, const CompiledPrompt&) = default;
};

/// Every violated compatibility rule, in a fixed order. Empty means valid.
std::vector<std::string> validate(const PromptPlan& plan);

/// Throws UsageError when the plan is invalid or the posting is empty.
CompiledPrompt build(const PromptPlan& plan, std::string_view posting_text, const PromptPack& pack,
                     std::string posting_id = {});
CompiledPrompt build(const PromptPlan& plan, std::string_view posting_text, std::string posting_id = {});

/// zero_cot + bothinst + mock + reit + right + info + name + pos, named Frederick.
PromptPlan final_best_plan();

/// Message contents separated by blank lines, no role markers.
std::string render_flat(const CompiledPrompt& compiled);

/// Role-tagged listing, e.g. "[system]\n...\n\n[user]\n...".
std::string render_tagged(const CompiledPrompt& compiled);

struct LadderCandidate {
  std::string name;  // "Zero-CoT", "rawinst", ...
  FlagSet delta;
};

struct LadderStep {
  std::string name;
  std::vector<LadderCandidate> candidates;
  bool labels_with_stack = true;  // report rows read "+kept+...+candidate"
};

/// The fixed evaluation order of the greedy ablation. The first step holds
/// the single empty Baseline candidate.
std::vector<LadderStep> ablation_ladder();

/// `base` with `delta` added; FewshotCot candidates pick up default exemplars.
PromptPlan apply_delta(const PromptPlan& base, FlagSet delta, const PromptPack& pack);

}  // namespace jobclf
