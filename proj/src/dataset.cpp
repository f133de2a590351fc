#include "jobclf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include "json.hpp"

#include "jobclf/digest.hpp"
#include "jobclf/errors.hpp"
#include "jobclf/random.hpp"

namespace jobclf {

using json = nlohmann::json;

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Grad: return "GRAD";
    case Label::NonGrad: return "NON_GRAD";
    case Label::Unlabeled: return "UNLABELED";
  }
  return "UNLABELED";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "GRAD") return Label::Grad;
  if (text == "NON_GRAD") return Label::NonGrad;
  return std::nullopt;
}

DataFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? DataFormat::Csv : DataFormat::Jsonl;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

class RowBuilder {
 public:
  void add(std::size_t row, std::optional<std::string> id, std::optional<std::string> title,
           std::optional<std::string> description, std::optional<std::string> label) {
    if (!id) missing(row, "id");
    if (!title) missing(row, "title");
    if (!description) missing(row, "description");
    if (id->empty()) throw DataError(fmt::format("row {}: field 'id' is empty", row));
    if (title->empty()) throw DataError(fmt::format("row {}: field 'title' is empty", row));
    if (description->empty()) throw DataError(fmt::format("row {}: field 'description' is empty", row));

    JobPosting posting{std::move(*id), std::move(*title), std::move(*description), Label::Unlabeled};
    if (label && !label->empty()) {
      auto parsed = parse_label(*label);
      if (!parsed) throw DataError(fmt::format("row {}: unknown label '{}'", row, *label));
      posting.label = *parsed;
    }
    if (!seen_.insert(posting.id).second) {
      throw DataError(fmt::format("row {}: duplicate id '{}'", row, posting.id));
    }
    rows_.push_back(std::move(posting));
  }

  Dataset take() { return std::move(rows_); }

 private:
  [[noreturn]] static void missing(std::size_t row, std::string_view field) {
    throw DataError(fmt::format("row {}: missing required field '{}'", row, field));
  }

  Dataset rows_;
  std::unordered_set<std::string> seen_;
};

std::optional<std::string> string_field(const json& obj, const char* key, std::size_t row) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw DataError(fmt::format("row {}: field '{}' must be a string", row, key));
  return it->get<std::string>();
}

// RFC 4180 style: comma separated, double-quote escaping, CRLF or LF.
std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  while (i < content.size()) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
    ++i;
  }
  if (in_quotes) throw DataError(fmt::format("row {}: unterminated quoted field", records.size()));
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

}  // namespace

Dataset ingest_jsonl(std::string_view content) {
  RowBuilder builder;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    auto line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (nl == content.size()) break;
      continue;
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(fmt::format("row {}: invalid JSON ({})", line_no, e.what()));
    }
    if (!obj.is_object()) throw DataError(fmt::format("row {}: expected a JSON object", line_no));
    builder.add(line_no, string_field(obj, "id", line_no), string_field(obj, "title", line_no),
                string_field(obj, "description", line_no), string_field(obj, "label", line_no));
    if (nl == content.size()) break;
  }
  return builder.take();
}

Dataset ingest_csv(std::string_view content) {
  auto records = parse_csv(content);
  if (records.empty()) throw DataError("CSV input has no header row");
  const auto& header = records.front();
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = column("id");
  const auto title_col = column("title");
  const auto desc_col = column("description");
  const auto label_col = column("label");
  if (!id_col || !title_col || !desc_col) {
    throw DataError("CSV header must contain the columns id,title,description[,label]");
  }
  auto cell = [](const std::vector<std::string>& rec, std::optional<std::size_t> col) -> std::optional<std::string> {
    if (!col || *col >= rec.size()) return std::nullopt;
    return rec[*col];
  };
  RowBuilder builder;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    builder.add(r, cell(rec, id_col), cell(rec, title_col), cell(rec, desc_col), cell(rec, label_col));
  }
  return builder.take();
}

Dataset ingest(const std::filesystem::path& path, DataFormat format) {
  const auto content = read_file(path);
  return format == DataFormat::Csv ? ingest_csv(content) : ingest_jsonl(content);
}

void write_jsonl(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  for (const auto& p : dataset) {
    json obj{{"id", p.id}, {"title", p.title}, {"description", p.description}};
    if (p.label != Label::Unlabeled) obj["label"] = std::string(to_string(p.label));
    out << obj.dump() << '\n';
  }
  if (!out) throw DataError(fmt::format("write to '{}' failed", path.string()));
}

std::string compose_input(const JobPosting& posting) {
  std::string text;
  text.reserve(posting.title.size() + 1 + posting.description.size());
  text += posting.title;
  text += '\n';
  text += posting.description;
  return text;
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

std::size_t token_count(std::string_view text) { return WhitespaceTokenizer{}.count(text); }

std::size_t lower_median(std::vector<std::size_t> values) {
  if (values.empty()) return 0;
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

double population_stddev(const std::vector<std::size_t>& values) {
  if (values.empty()) return 0.0;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (auto v : values) ss += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  return std::sqrt(ss / n);
}

DatasetSummary summarize(const Dataset& dataset, const Tokenizer& tokenizer) {
  if (dataset.empty()) throw DataError("cannot summarize an empty dataset");
  std::map<Label, std::vector<std::size_t>> by_label;
  std::vector<std::size_t> all;
  all.reserve(dataset.size());
  for (const auto& p : dataset) {
    const auto n = tokenizer.count(compose_input(p));
    by_label[p.label].push_back(n);
    all.push_back(n);
  }
  const double total = static_cast<double>(dataset.size());
  auto stats = [&](const std::vector<std::size_t>& counts) {
    return TokenStats{counts.size(), static_cast<double>(counts.size()) / total, lower_median(counts),
                      population_stddev(counts)};
  };
  DatasetSummary summary;
  for (const auto& [label, counts] : by_label) summary.per_label[label] = stats(counts);
  summary.overall = stats(all);
  return summary;
}

DatasetSummary summarize(const Dataset& dataset) { return summarize(dataset, WhitespaceTokenizer{}); }

Split stratified_split(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError(fmt::format("train fraction must be in (0, 1), got {}", train_fraction));
  }
  std::map<Label, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].label == Label::Unlabeled) {
      throw DataError(fmt::format("cannot stratify: posting '{}' is unlabeled", dataset[i].id));
    }
    strata[dataset[i].label].push_back(i);
  }
  for (Label label : {Label::Grad, Label::NonGrad}) {
    const auto n = strata.count(label) ? strata[label].size() : 0;
    if (n < 2) {
      throw DataError(fmt::format("dataset too small to stratify: {} example(s) of {}", n, to_string(label)));
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<bool> in_train(dataset.size(), false);
  for (auto& [label, indices] : strata) {
    portable_shuffle(indices, rng);
    const auto n = indices.size();
    auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    k = std::clamp<std::size_t>(k, 1, n - 1);
    for (std::size_t j = 0; j < k; ++j) in_train[indices[j]] = true;
  }

  Split split;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (in_train[i] ? split.train : split.test).push_back(dataset[i]);
  }
  return split;
}

std::string dataset_fingerprint(const Dataset& dataset) {
  std::string canonical;
  for (const auto& p : dataset) {
    canonical += p.id;
    canonical += '\t';
    canonical += to_string(p.label);
    canonical += '\n';
  }
  return sha256_hex(canonical);
}

}  // namespace jobclf
