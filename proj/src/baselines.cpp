#include "jobclf/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include "json.hpp"

#include "jobclf/errors.hpp"
#include "jobclf/random.hpp"

namespace jobclf {

using json = nlohmann::json;

namespace {

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double hinge(double margin) { return std::max(0.0, 1.0 - margin); }

double label_sign(Label l) { return l == Label::Grad ? 1.0 : -1.0; }

constexpr std::string_view kDefaultRules =
    "# Keyword baseline rules: <TARGET> literal:<text> | <TARGET> regex:<pattern>\n"
    "TITLE literal:Graduate\n"
    "TITLE literal:Junior\n"
    "BODY regex:(is|would be) suitable for (graduate|student)s?\n"
    "# Placeholders; extend with your own list.\n"
    "TITLE literal:Trainee\n"
    "EITHER literal:entry-level\n";

}  // namespace

KeywordRule::KeywordRule(std::string pattern, RuleTarget target, std::shared_ptr<const std::regex> compiled)
    : pattern_(std::move(pattern)), lowered_(ascii_lower(pattern_)), target_(target), compiled_(std::move(compiled)) {}

KeywordRule KeywordRule::literal(std::string text, RuleTarget target) {
  if (text.empty()) throw UsageError("keyword rule pattern must not be empty");
  return KeywordRule(std::move(text), target, nullptr);
}

KeywordRule KeywordRule::regex(std::string pattern, RuleTarget target) {
  if (pattern.empty()) throw UsageError("keyword rule pattern must not be empty");
  try {
    auto compiled = std::make_shared<const std::regex>(pattern, std::regex::ECMAScript | std::regex::optimize);
    return KeywordRule(std::move(pattern), target, std::move(compiled));
  } catch (const std::regex_error& e) {
    throw UsageError(fmt::format("invalid keyword regex '{}': {}", pattern, e.what()));
  }
}

bool KeywordRule::matches_field(std::string_view field) const {
  if (compiled_) return std::regex_search(field.begin(), field.end(), *compiled_);
  return ascii_lower(field).find(lowered_) != std::string::npos;
}

bool KeywordRule::matches(const JobPosting& posting) const {
  switch (target_) {
    case RuleTarget::Title: return matches_field(posting.title);
    case RuleTarget::Body: return matches_field(posting.description);
    case RuleTarget::Either: return matches_field(posting.title) || matches_field(posting.description);
  }
  return false;
}

std::vector<KeywordRule> parse_rule_pack(std::string_view text) {
  std::vector<KeywordRule> rules;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto space = line.find_first_of(" \t");
    if (space == std::string_view::npos) throw UsageError(fmt::format("rule pack line {}: expected '<TARGET> <kind>:<pattern>'", line_no));
    const auto tag = line.substr(0, space);
    const auto body = trim(line.substr(space));
    RuleTarget target;
    if (tag == "TITLE") {
      target = RuleTarget::Title;
    } else if (tag == "BODY") {
      target = RuleTarget::Body;
    } else if (tag == "EITHER") {
      target = RuleTarget::Either;
    } else {
      throw UsageError(fmt::format("rule pack line {}: unknown target '{}'", line_no, tag));
    }
    if (body.starts_with("literal:")) {
      rules.push_back(KeywordRule::literal(std::string(body.substr(8)), target));
    } else if (body.starts_with("regex:")) {
      rules.push_back(KeywordRule::regex(std::string(body.substr(6)), target));
    } else {
      throw UsageError(fmt::format("rule pack line {}: rule must start with 'literal:' or 'regex:'", line_no));
    }
  }
  return rules;
}

std::vector<KeywordRule> load_rule_pack(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read rule pack '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rule_pack(buf.str());
}

std::string_view default_rule_pack_text() { return kDefaultRules; }

Label keyword_classify(const JobPosting& posting, std::span<const KeywordRule> rules) {
  if (rules.empty()) throw std::invalid_argument("keyword_classify needs at least one rule");
  for (const auto& rule : rules) {
    if (rule.matches(posting)) return Label::Grad;
  }
  return Label::NonGrad;
}

std::vector<std::string> tfidf_tokens(std::string_view text, const TokenizeOptions& options) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && current.size() >= options.min_token_length) tokens.push_back(current);
    current.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

double SparseVector::norm() const {
  double ss = 0.0;
  for (const auto& [i, v] : entries) ss += v * v;
  return std::sqrt(ss);
}

double TfidfModel::idf(std::uint32_t index) const {
  const double n = static_cast<double>(corpus_size);
  const double df = static_cast<double>(document_frequency.at(index));
  return std::log((1.0 + n) / (1.0 + df)) + 1.0;
}

TfidfModel fit_tfidf(std::span<const std::string> corpus, std::size_t min_df, const TokenizeOptions& options) {
  if (corpus.empty()) throw DataError("cannot fit tf-idf on an empty corpus");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    auto tokens = tfidf_tokens(doc, options);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& t : tokens) ++df[t];
  }
  TfidfModel model;
  model.corpus_size = corpus.size();
  model.tokenize = options;
  for (const auto& [term, count] : df) {
    if (count < std::max<std::size_t>(min_df, 1)) continue;
    model.vocabulary.emplace(term, static_cast<std::uint32_t>(model.document_frequency.size()));
    model.document_frequency.push_back(count);
  }
  return model;
}

SparseVector transform(const TfidfModel& model, std::string_view text) {
  std::map<std::uint32_t, double> counts;
  for (const auto& t : tfidf_tokens(text, model.tokenize)) {
    if (auto it = model.vocabulary.find(t); it != model.vocabulary.end()) counts[it->second] += 1.0;
  }
  SparseVector out;
  if (counts.empty()) {
    out.zero = true;
    return out;
  }
  out.entries.reserve(counts.size());
  double ss = 0.0;
  for (const auto& [index, tf] : counts) {
    const double w = tf * model.idf(index);
    out.entries.emplace_back(index, w);
    ss += w * w;
  }
  const double norm = std::sqrt(ss);
  for (auto& e : out.entries) e.second /= norm;
  return out;
}

double score(const LinearModel& model, const SparseVector& x) {
  double s = model.bias;
  for (const auto& [i, v] : x.entries) {
    if (i < model.weights.size()) s += model.weights[i] * v;
  }
  return s;
}

double svm_objective(const LinearModel& model, std::span<const SparseVector> vectors, std::span<const Label> truths) {
  double norm2 = model.bias * model.bias;
  for (double w : model.weights) norm2 += w * w;
  double loss = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) loss += hinge(label_sign(truths[i]) * score(model, vectors[i]));
  return 0.5 * model.config.lambda * norm2 + loss / static_cast<double>(vectors.size());
}

LinearModel train_linear(std::span<const SparseVector> vectors, std::span<const Label> truths, std::size_t dimension,
                         const LinearConfig& config) {
  if (vectors.size() != truths.size()) throw std::invalid_argument("vectors and truths differ in length");
  if (!(config.lambda > 0.0) || config.epochs <= 0) throw UsageError("linear config needs lambda > 0 and epochs > 0");
  bool has_pos = false;
  bool has_neg = false;
  for (auto t : truths) {
    if (t == Label::Unlabeled) throw DataError("training data must be labeled");
    (t == Label::Grad ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw DataError("training data must contain both GRAD and NON_GRAD examples");

  LinearModel model;
  model.config = config;
  model.weights.assign(dimension, 0.0);

  // w is stored as scale * v so the shrink step is O(1) per update.
  std::vector<double> v(dimension, 0.0);
  double v_bias = 0.0;
  double scale = 1.0;
  double v_norm2 = 0.0;

  auto margin_of = [&](const SparseVector& x) {
    double dot = v_bias;
    for (const auto& [i, val] : x.entries) dot += v[i] * val;
    return scale * dot;
  };

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(vectors.size());
  const double radius2 = 1.0 / config.lambda;
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    portable_shuffle(order, rng);
    for (auto idx : order) {
      ++t;
      const double eta = 1.0 / (config.lambda * static_cast<double>(t));
      const double y = label_sign(truths[idx]);
      const auto& x = vectors[idx];
      const bool violated = y * margin_of(x) < 1.0;

      const double shrink = 1.0 - eta * config.lambda;
      if (shrink <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        v_bias = 0.0;
        v_norm2 = 0.0;
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (violated) {
        const double step = eta * y / scale;
        for (const auto& [j, val] : x.entries) {
          v_norm2 += 2.0 * v[j] * step * val + step * val * step * val;
          v[j] += step * val;
        }
        v_norm2 += 2.0 * v_bias * step + step * step;
        v_bias += step;
      }
      const double w_norm2 = scale * scale * v_norm2;
      if (w_norm2 > radius2) scale *= std::sqrt(radius2 / w_norm2);
      if (scale < 1e-100) {
        // Fold the scale back in before it underflows.
        for (auto& vi : v) vi *= scale;
        v_bias *= scale;
        v_norm2 *= scale * scale;
        scale = 1.0;
      }
    }
    for (std::size_t j = 0; j < dimension; ++j) model.weights[j] = scale * v[j];
    model.bias = scale * v_bias;
    model.epoch_objective.push_back(svm_objective(model, vectors, truths));
  }
  return model;
}

std::string svm_to_json(const SvmClassifier& c) {
  json j;
  j["format"] = "jobclf-svm";
  j["version"] = 1;
  std::vector<std::string> terms(c.tfidf.vocabulary.size());
  for (const auto& [term, index] : c.tfidf.vocabulary) terms[index] = term;
  j["vocabulary"] = terms;
  j["document_frequency"] = c.tfidf.document_frequency;
  j["corpus_size"] = c.tfidf.corpus_size;
  j["min_token_length"] = c.tfidf.tokenize.min_token_length;
  json weights = json::array();
  for (std::size_t i = 0; i < c.linear.weights.size(); ++i) {
    if (c.linear.weights[i] != 0.0) weights.push_back({i, c.linear.weights[i]});
  }
  j["dimension"] = c.linear.weights.size();
  j["weights"] = weights;
  j["bias"] = c.linear.bias;
  j["config"] = {{"lambda", c.linear.config.lambda}, {"epochs", c.linear.config.epochs}, {"seed", c.linear.config.seed}};
  return j.dump(1) + "\n";
}

SvmClassifier svm_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    if (j.at("format") != "jobclf-svm" || j.at("version") != 1) throw DataError("unsupported model envelope");
    SvmClassifier c;
    const auto terms = j.at("vocabulary").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < terms.size(); ++i) c.tfidf.vocabulary.emplace(terms[i], static_cast<std::uint32_t>(i));
    c.tfidf.document_frequency = j.at("document_frequency").get<std::vector<std::size_t>>();
    c.tfidf.corpus_size = j.at("corpus_size").get<std::size_t>();
    c.tfidf.tokenize.min_token_length = j.at("min_token_length").get<std::size_t>();
    if (c.tfidf.document_frequency.size() != terms.size()) throw DataError("vocabulary and df differ in length");
    c.linear.weights.assign(j.at("dimension").get<std::size_t>(), 0.0);
    for (const auto& w : j.at("weights")) c.linear.weights.at(w.at(0).get<std::size_t>()) = w.at(1).get<double>();
    c.linear.bias = j.at("bias").get<double>();
    const auto& cfg = j.at("config");
    c.linear.config = {cfg.at("lambda").get<double>(), cfg.at("epochs").get<int>(), cfg.at("seed").get<std::uint64_t>()};
    return c;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed model file: {}", e.what()));
  } catch (const std::out_of_range& e) {
    throw DataError(fmt::format("malformed model file: {}", e.what()));
  }
}

void save_svm(const std::filesystem::path& path, const SvmClassifier& classifier) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << svm_to_json(classifier);
}

SvmClassifier load_svm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read model '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return svm_from_json(buf.str());
}

}  // namespace jobclf
