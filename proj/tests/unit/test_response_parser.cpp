#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

#include "jobclf/response_parser.hpp"

using namespace jobclf;

namespace {

TemplateMode mode_named(const std::string& s) {
  if (s == "LOOSE") return TemplateMode::Loose;
  if (s == "STRICT") return TemplateMode::Strict;
  return TemplateMode::Free;
}

void check_invariants(const ParsedAnswer& a) {
  CHECK((a.label == AnswerLabel::None) == (a.matched_rule == MatchRule::None));
  if (a.sticky) CHECK((a.matched_rule == MatchRule::TemplateFinal || a.matched_rule == MatchRule::ChoiceToken));
}

}  // namespace

TEST_SUITE("response_parser") {

TEST_CASE("fixture corpus") {
  std::istringstream in(jobclf::testing::read_file(jobclf::testing::fixture_dir() / "parser" / "corpus.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto text = j.at("text").get<std::string>();
    const auto mode = j.at("mode").get<std::string>();
    const auto got = parse(text, mode_named(mode));
    INFO("case ", n, ": ", text, " [", mode, "]");
    CHECK(to_string(got.label) == j.at("label").get<std::string>());
    CHECK(got.sticky == j.at("sticky").get<bool>());
    CHECK(to_string(got.matched_rule) == j.at("rule").get<std::string>());
    CHECK(got.raw == text);
    check_invariants(got);
    ++n;
  }
  CHECK(n >= 30);
}

TEST_CASE("template final line wins over choice tokens elsewhere") {
  const std::string final_a = "Final Answer: This is a (A) job fit for a recent graduate or a student";
  for (auto mode : {TemplateMode::Free, TemplateMode::Loose}) {
    const auto alone = parse(final_a, mode);
    for (const char* noise : {"(B) first. ", "Not (B). (B) (B) ", "requiring more professional experience "}) {
      const auto mixed = parse(std::string(noise) + final_a + " (B)", mode);
      CHECK(mixed.label == alone.label);
      CHECK(mixed.sticky == alone.sticky);
      CHECK(mixed.matched_rule == alone.matched_rule);
    }
  }
}

TEST_CASE("template mode follows the plan") {
  PromptPlan p;
  CHECK(template_mode(p) == TemplateMode::Free);
  p.flags = {ModFlag::ZeroCot, ModFlag::Loose};
  CHECK(template_mode(p) == TemplateMode::Loose);
  p.flags = {ModFlag::ZeroCot, ModFlag::Strict};
  CHECK(template_mode(p) == TemplateMode::Strict);
}

TEST_CASE("random bytes never break the parser") {
  std::mt19937_64 rng(99);
  const std::string alphabet = "(AB) Final Answer: This is a fit for a recent graduate not n't\nReasoning step 1";
  for (int i = 0; i < 2000; ++i) {
    std::string s(rng() % 80, '\0');
    for (auto& c : s) c = (rng() & 1) ? static_cast<char>(rng() & 0xff) : alphabet[rng() % alphabet.size()];
    for (auto mode : {TemplateMode::Free, TemplateMode::Loose, TemplateMode::Strict}) {
      const auto a = parse(s, mode);
      check_invariants(a);
      CHECK(a == parse(s, mode));
    }
  }
}

TEST_CASE("stickiness rate") {
  ParsedAnswer yes;
  yes.sticky = true;
  yes.label = AnswerLabel::Grad;
  yes.matched_rule = MatchRule::ChoiceToken;
  ParsedAnswer no;
  std::vector<ParsedAnswer> all(5, yes);
  CHECK(stickiness_rate(all) == 100.0);
  std::vector<ParsedAnswer> hundred(79, yes);
  hundred.insert(hundred.end(), 21, no);
  CHECK(stickiness_rate(hundred) == doctest::Approx(79.0));
  std::vector<ParsedAnswer> eight(6, yes);
  eight.insert(eight.end(), 2, no);
  CHECK(stickiness_rate(eight) == doctest::Approx(75.0));
  CHECK_THROWS_AS(stickiness_rate(std::vector<ParsedAnswer>{}), std::invalid_argument);
}

}  // TEST_SUITE
