#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jobclf/dataset.hpp"

namespace jobclf {

// ---------------------------------------------------------------------------
// Keyword lookup

enum class RuleTarget { Title, Body, Either };

class KeywordRule {
 public:
  /// Case-insensitive substring match.
  static KeywordRule literal(std::string text, RuleTarget target);
  /// ECMAScript regex searched anywhere in the field. Throws UsageError if
  /// the pattern does not compile.
  static KeywordRule regex(std::string pattern, RuleTarget target);

  bool matches(const JobPosting& posting) const;

  const std::string& pattern() const { return pattern_; }
  bool is_regex() const { return compiled_ != nullptr; }
  RuleTarget target() const { return target_; }

 private:
  KeywordRule(std::string pattern, RuleTarget target, std::shared_ptr<const std::regex> compiled);
  bool matches_field(std::string_view field) const;

  std::string pattern_;
  std::string lowered_;
  RuleTarget target_;
  std::shared_ptr<const std::regex> compiled_;
};

/// Rule pack text: one rule per line, "<TARGET> literal:<text>" or
/// "<TARGET> regex:<pattern>" with TARGET one of TITLE, BODY, EITHER.
/// Blank lines and lines starting with '#' are skipped.
std::vector<KeywordRule> parse_rule_pack(std::string_view text);
std::vector<KeywordRule> load_rule_pack(const std::filesystem::path& path);
std::string_view default_rule_pack_text();

/// GRAD iff any rule matches. Throws std::invalid_argument for no rules.
Label keyword_classify(const JobPosting& posting, std::span<const KeywordRule> rules);

// ---------------------------------------------------------------------------
// tf-idf

struct TokenizeOptions {
  std::size_t min_token_length = 2;
};

/// Lowercase, split on non-alphanumeric runs, drop tokens shorter than
/// `min_token_length`.
std::vector<std::string> tfidf_tokens(std::string_view text, const TokenizeOptions& options = {});

struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;  // sorted by index
  bool zero = false;  // no known term: the flagged zero vector

  double norm() const;
};

struct TfidfModel {
  std::map<std::string, std::uint32_t> vocabulary;  // term -> index, lexicographic
  std::vector<std::size_t> document_frequency;      // by index
  std::size_t corpus_size = 0;
  TokenizeOptions tokenize;

  std::size_t dimension() const { return vocabulary.size(); }
  double idf(std::uint32_t index) const;
};

/// Throws DataError for an empty corpus.
TfidfModel fit_tfidf(std::span<const std::string> corpus, std::size_t min_df, const TokenizeOptions& options = {});

/// Raw term counts times ln((1+N)/(1+df)) + 1, L2-normalised. Unknown terms
/// are dropped.
SparseVector transform(const TfidfModel& model, std::string_view text);

// ---------------------------------------------------------------------------
// Linear max-margin classifier

struct LinearConfig {
  double lambda = 1e-4;
  int epochs = 20;
  std::uint64_t seed = 42;
};

struct LinearModel {
  std::vector<double> weights;  // dense over the vocabulary
  double bias = 0.0;
  LinearConfig config;
  std::vector<double> epoch_objective;  // regularised hinge objective after each epoch
};

/// Pegasos: primal stochastic subgradient descent on the L2-regularised
/// hinge loss with step 1/(lambda*t) and projection onto the 1/sqrt(lambda)
/// ball. The bias is an extra constant feature. GRAD is +1.
LinearModel train_linear(std::span<const SparseVector> vectors, std::span<const Label> truths,
                         std::size_t dimension, const LinearConfig& config);

/// dot(weights, x) + bias.
double score(const LinearModel& model, const SparseVector& x);

/// lambda/2 |w|^2 + mean hinge loss; the bias takes part in the norm.
double svm_objective(const LinearModel& model, std::span<const SparseVector> vectors, std::span<const Label> truths);

struct SvmClassifier {
  TfidfModel tfidf;
  LinearModel linear;
};

std::string svm_to_json(const SvmClassifier& classifier);
SvmClassifier svm_from_json(std::string_view text);
void save_svm(const std::filesystem::path& path, const SvmClassifier& classifier);
SvmClassifier load_svm(const std::filesystem::path& path);

}  // namespace jobclf
