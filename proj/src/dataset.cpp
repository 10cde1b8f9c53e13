#include "msnt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "msnt/errors.hpp"
#include "msnt/random.hpp"

namespace msnt {

namespace {

constexpr std::size_t kMaxReportedErrors = 20;

class ErrorLog {
 public:
  void add(std::size_t line, const std::string& what) {
    ++count_;
    if (details_.size() < kMaxReportedErrors) {
      details_.push_back("line " + std::to_string(line) + ": " + what);
    }
  }
  void throw_if_any() const {
    if (count_ == 0) return;
    std::string msg = std::to_string(count_) + " malformed record(s)";
    for (const std::string& d : details_) msg += "\n  " + d;
    if (count_ > details_.size()) msg += "\n  ...";
    throw DataError(msg, details_);
  }

 private:
  std::size_t count_ = 0;
  std::vector<std::string> details_;
};

std::optional<std::string> check_record(const std::string& text, const std::string& label,
                                        Sentiment& parsed) {
  if (!is_valid_utf8(text) || !is_valid_utf8(label)) return "invalid UTF-8";
  if (text.empty()) return "empty text";
  auto s = parse_sentiment(label);
  if (!s) return "unknown label '" + label + "'";
  parsed = *s;
  return std::nullopt;
}

std::vector<LabeledExample> parse_jsonl(std::string_view contents, ErrorLog& errors) {
  std::vector<LabeledExample> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == contents.size()) break;
      continue;
    }
    if (!is_valid_utf8(line)) {
      errors.add(line_no, "invalid UTF-8");
      continue;
    }
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      errors.add(line_no, "not valid JSON");
      continue;
    }
    if (!record.is_object()) {
      errors.add(line_no, "record is not a JSON object");
      continue;
    }
    if (!record.contains("text") || !record["text"].is_string()) {
      errors.add(line_no, "missing string field 'text'");
      continue;
    }
    if (!record.contains("label") || !record["label"].is_string()) {
      errors.add(line_no, "missing string field 'label'");
      continue;
    }
    Sentiment label{};
    if (auto problem = check_record(record["text"].get<std::string>(),
                                    record["label"].get<std::string>(), label)) {
      errors.add(line_no, *problem);
      continue;
    }
    out.push_back({record["text"].get<std::string>(), label, out.size()});
    if (end == contents.size()) break;
  }
  return out;
}

// RFC 4180 fields; quoted fields may span lines.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

std::vector<CsvRow> split_csv(std::string_view contents, ErrorLog& errors) {
  std::vector<CsvRow> rows;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < contents.size()) {
    CsvRow row;
    row.line = line;
    std::string field;
    bool in_quotes = false;
    bool row_done = false;
    while (i < contents.size() && !row_done) {
      const char c = contents[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < contents.size() && contents[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          if (c == '\n') ++line;
          field += c;
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\n') {
        ++line;
        row_done = true;
      } else if (c != '\r') {
        field += c;
      }
      ++i;
    }
    if (in_quotes) errors.add(row.line, "unterminated quoted field");
    row.fields.push_back(std::move(field));
    const bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<LabeledExample> parse_csv(std::string_view contents, ErrorLog& errors) {
  std::vector<LabeledExample> out;
  const auto rows = split_csv(contents, errors);
  if (rows.empty()) return out;
  const auto& header = rows[0].fields;
  const auto text_col = std::find(header.begin(), header.end(), "text");
  const auto label_col = std::find(header.begin(), header.end(), "label");
  if (text_col == header.end() || label_col == header.end()) {
    errors.add(rows[0].line, "header must name 'text' and 'label' columns");
    return out;
  }
  const auto ti = static_cast<std::size_t>(text_col - header.begin());
  const auto li = static_cast<std::size_t>(label_col - header.begin());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    if (row.fields.size() != header.size()) {
      errors.add(row.line, "expected " + std::to_string(header.size()) + " fields, found " +
                               std::to_string(row.fields.size()));
      continue;
    }
    Sentiment label{};
    if (auto problem = check_record(row.fields[ti], row.fields[li], label)) {
      errors.add(row.line, *problem);
      continue;
    }
    out.push_back({row.fields[ti], label, out.size()});
  }
  return out;
}

}  // namespace

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

std::vector<LabeledExample> parse_dataset(std::string_view contents, DatasetFormat format) {
  ErrorLog errors;
  std::vector<LabeledExample> out =
      format == DatasetFormat::csv ? parse_csv(contents, errors) : parse_jsonl(contents, errors);
  errors.throw_if_any();
  if (out.empty()) throw DataError("no examples");
  return out;
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), format);
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path) {
  return load_dataset(path, path.extension() == ".csv" ? DatasetFormat::csv : DatasetFormat::jsonl);
}

void write_jsonl(std::ostream& out, std::span<const LabeledExample> data) {
  for (const LabeledExample& ex : data) {
    nlohmann::ordered_json j;
    j["text"] = ex.text;
    j["label"] = std::string(to_string(ex.label));
    out << j.dump() << '\n';
  }
}

void save_jsonl(const std::filesystem::path& path, std::span<const LabeledExample> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_jsonl(out, data);
}

DatasetSplit split_dataset(std::span<const LabeledExample> data, std::array<double, 3> ratios,
                           std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw ConfigError("split ratios must all be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  DatasetSplit split;
  split.seed = seed;
  for (Sentiment label : kLabelOrder) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!is_valid(data[i].label)) {
        throw DataError("record " + std::to_string(i) + " has a label outside the 3-class set");
      }
      if (data[i].label == label) members.push_back(i);
    }
    if (members.empty()) continue;
    Rng rng(derive_seed(seed, index_of(label), 0x73706c74));
    rng.shuffle(std::span<std::size_t>(members));
    const double n = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * ratios[0]));
    const auto n_valid = static_cast<std::size_t>(std::llround(n * ratios[1]));
    if (n_train == 0 || n_valid == 0 || n_train + n_valid >= members.size()) {
      throw DataError("label '" + std::string(to_string(label)) + "' has too few examples (" +
                      std::to_string(members.size()) + ") for a non-empty stratified split");
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      const LabeledExample& ex = data[members[k]];
      if (k < n_train) {
        split.train.push_back(ex);
      } else if (k < n_train + n_valid) {
        split.validation.push_back(ex);
      } else {
        split.test.push_back(ex);
      }
    }
  }
  if (split.train.empty()) throw DataError("split_dataset: no examples");
  auto by_id = [](const LabeledExample& a, const LabeledExample& b) { return a.id < b.id; };
  std::sort(split.train.begin(), split.train.end(), by_id);
  std::sort(split.validation.begin(), split.validation.end(), by_id);
  std::sort(split.test.begin(), split.test.end(), by_id);
  return split;
}

}  // namespace msnt
