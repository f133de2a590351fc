#include "jobclf/response_parser.hpp"

#include <cctype>
#include <stdexcept>
#include <vector>

namespace jobclf {

namespace {

constexpr std::string_view kFinalAnswer = "Final Answer:";
constexpr std::string_view kGradPhrase = "fit for a recent graduate";
constexpr std::string_view kNonGradPhrase = "requiring more professional experience";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = ascii_lower(c);
  return out;
}

std::size_t skip_spaces(std::string_view text, std::size_t pos) {
  while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  return pos;
}

bool starts_with_at(std::string_view text, std::size_t pos, std::string_view prefix) {
  return pos <= text.size() && text.substr(pos).starts_with(prefix);
}

// Label of the last "Final Answer: This is a(n) (A|B" occurrence.
AnswerLabel template_final(std::string_view text) {
  AnswerLabel found = AnswerLabel::None;
  std::size_t pos = 0;
  while ((pos = text.find(kFinalAnswer, pos)) != std::string_view::npos) {
    std::size_t p = skip_spaces(text, pos + kFinalAnswer.size());
    pos += kFinalAnswer.size();
    if (!starts_with_at(text, p, "This is a")) continue;
    p += 9;
    if (p < text.size() && text[p] == 'n') ++p;
    p = skip_spaces(text, p);
    if (starts_with_at(text, p, "(A")) {
      found = AnswerLabel::Grad;
    } else if (starts_with_at(text, p, "(B")) {
      found = AnswerLabel::NonGrad;
    }
  }
  return found;
}

bool has_reasoning_steps(std::string_view text) {
  const auto lower = lowercase(text);
  std::size_t pos = 0;
  while ((pos = lower.find("reasoning step", pos)) != std::string::npos) {
    std::size_t p = skip_spaces(lower, pos + 14);
    if (p < lower.size() && std::isdigit(static_cast<unsigned char>(lower[p]))) return true;
    pos += 14;
  }
  return false;
}

// Last standalone "(A)" / "(B)": not glued to a preceding word character.
AnswerLabel choice_token(std::string_view text) {
  AnswerLabel found = AnswerLabel::None;
  for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
    if (text[i] != '(' || text[i + 2] != ')') continue;
    if (i > 0 && is_alnum(text[i - 1])) continue;
    if (text[i + 1] == 'A') found = AnswerLabel::Grad;
    if (text[i + 1] == 'B') found = AnswerLabel::NonGrad;
  }
  return found;
}

bool negated_before(std::string_view lower, std::size_t phrase_start) {
  // Collect up to three whitespace-separated words preceding the phrase.
  std::vector<std::string_view> words;
  std::size_t end = phrase_start;
  while (words.size() < 3) {
    while (end > 0 && is_space(lower[end - 1])) --end;
    if (end == 0) break;
    std::size_t begin = end;
    while (begin > 0 && !is_space(lower[begin - 1])) --begin;
    words.push_back(lower.substr(begin, end - begin));
    end = begin;
  }
  for (auto w : words) {
    while (!w.empty() && !is_alnum(w.back()) && w.back() != '\'') w.remove_suffix(1);
    while (!w.empty() && !is_alnum(w.front())) w.remove_prefix(1);
    if (w == "not" || w.ends_with("n't")) return true;
  }
  return false;
}

AnswerLabel polarity_phrase(std::string_view text) {
  const auto lower = lowercase(text);
  AnswerLabel found = AnswerLabel::None;
  std::size_t best_pos = 0;
  auto scan = [&](std::string_view phrase, AnswerLabel positive, AnswerLabel negative) {
    std::size_t pos = 0;
    while ((pos = lower.find(phrase, pos)) != std::string::npos) {
      if (found == AnswerLabel::None || pos >= best_pos) {
        found = negated_before(lower, pos) ? negative : positive;
        best_pos = pos;
      }
      pos += phrase.size();
    }
  };
  scan(kGradPhrase, AnswerLabel::Grad, AnswerLabel::NonGrad);
  scan(kNonGradPhrase, AnswerLabel::NonGrad, AnswerLabel::Grad);
  return found;
}

}  // namespace

std::string_view to_string(AnswerLabel label) {
  switch (label) {
    case AnswerLabel::Grad: return "GRAD";
    case AnswerLabel::NonGrad: return "NON_GRAD";
    case AnswerLabel::None: return "NONE";
  }
  return "NONE";
}

std::string_view to_string(MatchRule rule) {
  switch (rule) {
    case MatchRule::TemplateFinal: return "TEMPLATE_FINAL";
    case MatchRule::ChoiceToken: return "CHOICE_TOKEN";
    case MatchRule::PolarityPhrase: return "POLARITY_PHRASE";
    case MatchRule::None: return "NONE";
  }
  return "NONE";
}

std::string_view to_string(TemplateMode mode) {
  switch (mode) {
    case TemplateMode::Free: return "FREE";
    case TemplateMode::Loose: return "LOOSE";
    case TemplateMode::Strict: return "STRICT";
  }
  return "FREE";
}

TemplateMode template_mode(const PromptPlan& plan) {
  if (plan.has(ModFlag::Strict)) return TemplateMode::Strict;
  if (plan.has(ModFlag::Loose)) return TemplateMode::Loose;
  return TemplateMode::Free;
}

ParsedAnswer parse(std::string_view text, TemplateMode mode) {
  ParsedAnswer out;
  out.raw = std::string(text);

  if (auto label = template_final(text); label != AnswerLabel::None) {
    if (mode != TemplateMode::Strict || has_reasoning_steps(text)) {
      out.label = label;
      out.matched_rule = MatchRule::TemplateFinal;
      out.sticky = true;
      return out;
    }
  }
  if (auto label = choice_token(text); label != AnswerLabel::None) {
    out.label = label;
    out.matched_rule = MatchRule::ChoiceToken;
    out.sticky = mode == TemplateMode::Free;
    return out;
  }
  if (auto label = polarity_phrase(text); label != AnswerLabel::None) {
    out.label = label;
    out.matched_rule = MatchRule::PolarityPhrase;
    return out;
  }
  return out;
}

double stickiness_rate(std::span<const ParsedAnswer> answers) {
  if (answers.empty()) throw std::invalid_argument("stickiness_rate needs at least one answer");
  std::size_t sticky = 0;
  for (const auto& a : answers) sticky += a.sticky ? 1 : 0;
  return 100.0 * static_cast<double>(sticky) / static_cast<double>(answers.size());
}

}  // namespace jobclf
