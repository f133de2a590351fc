#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace jobclf {

enum class Label { Grad, NonGrad, Unlabeled };

std::string_view to_string(Label label);
/// Accepts exactly "GRAD" and "NON_GRAD".
std::optional<Label> parse_label(std::string_view text);

struct JobPosting {
  std::string id;
  std::string title;
  std::string description;
  Label label = Label::Unlabeled;
};

using Dataset = std::vector<JobPosting>;

enum class DataFormat { Jsonl, Csv };

/// Picks the format from the file extension (.csv, otherwise JSONL).
DataFormat format_from_path(const std::filesystem::path& path);

/// Reads a dataset file. Rows keep file order. Throws DataError naming the
/// row for missing fields, empty title/description, duplicate ids and
/// unknown label strings.
Dataset ingest(const std::filesystem::path& path, DataFormat format);
Dataset ingest_jsonl(std::string_view content);
Dataset ingest_csv(std::string_view content);

/// Writes one JSON object per line; `ingest` reads it back unchanged.
void write_jsonl(const std::filesystem::path& path, const Dataset& dataset);

/// Title, a newline, then the description.
std::string compose_input(const JobPosting& posting);

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t count(std::string_view text) const = 0;
};

/// Counts maximal runs of non-whitespace.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override;
};

std::size_t token_count(std::string_view text);

struct TokenStats {
  std::size_t count = 0;
  double proportion = 0.0;
  std::size_t median_tokens = 0;  // lower median
  double token_stddev = 0.0;      // population form
};

struct DatasetSummary {
  std::map<Label, TokenStats> per_label;  // only labels that occur
  TokenStats overall;
};

/// Token statistics are computed over compose_input(posting).
DatasetSummary summarize(const Dataset& dataset, const Tokenizer& tokenizer);
DatasetSummary summarize(const Dataset& dataset);

/// Lower median of `values` (element (n-1)/2 after sorting).
std::size_t lower_median(std::vector<std::size_t> values);
double population_stddev(const std::vector<std::size_t>& values);

struct Split {
  Dataset train;
  Dataset test;
};

/// Per-label shuffle (seeded, platform independent) then a rounded
/// per-label cut. Both outputs keep the original relative order.
Split stratified_split(const Dataset& dataset, double train_fraction, std::uint64_t seed);

/// Digest over the ordered (id, label) pairs.
std::string dataset_fingerprint(const Dataset& dataset);

}  // namespace jobclf
