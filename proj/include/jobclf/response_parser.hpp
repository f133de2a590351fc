#pragma once

#include <span>
#include <string>
#include <string_view>

#include "jobclf/prompt_catalog.hpp"

namespace jobclf {

enum class AnswerLabel { Grad, NonGrad, None };
enum class MatchRule { TemplateFinal, ChoiceToken, PolarityPhrase, None };
enum class TemplateMode { Free, Loose, Strict };

std::string_view to_string(AnswerLabel label);
std::string_view to_string(MatchRule rule);
std::string_view to_string(TemplateMode mode);

struct ParsedAnswer {
  AnswerLabel label = AnswerLabel::None;
  bool sticky = false;
  MatchRule matched_rule = MatchRule::None;
  std::string raw;

  friend bool operator==(const ParsedAnswer&, const ParsedAnswer&) = default;
};

/// Strict when the plan asks for the strict template, Loose for the loose one.
TemplateMode template_mode(const PromptPlan& plan);

/// Extracts the (A)/(B) choice. Cascade, first match wins:
///   1. "Final Answer: This is a (A..." / "(B..." (Strict also needs
///      "Reasoning step" lines),
///   2. the last standalone "(A)" or "(B)",
///   3. the last polarity phrase, negated by "not"/"n't" up to three words
///      before it,
///   4. nothing.
/// sticky: rule 1 in Loose/Strict mode, rule 1 or 2 in Free mode.
/// Total over arbitrary bytes.
ParsedAnswer parse(std::string_view text, TemplateMode mode);

/// 100 * sticky / total. Throws std::invalid_argument for an empty input.
double stickiness_rate(std::span<const ParsedAnswer> answers);

}  // namespace jobclf
