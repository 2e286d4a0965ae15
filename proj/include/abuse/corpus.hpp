#pragma once

// Comment corpora: records, language tags, the delimited corpus file format,
// and the pure text transforms applied before featurization.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "abuse/error.hpp"
#include "abuse/unicode.hpp"

namespace abuse {

class LanguageTag {
 public:
  LanguageTag() : code_("other") {}

  explicit LanguageTag(std::string code) : code_(std::move(code)) {
    if (code_.empty()) fail(ErrorKind::BadLanguageTag, "empty language code");
    for (char c : code_) {
      const auto u = static_cast<unsigned char>(c);
      if (u >= 0x80 || !(std::islower(u) || std::isdigit(u) || c == '_' || c == '-')) {
        fail(ErrorKind::BadLanguageTag, "language code must be lowercase ASCII: '" + code_ + "'");
      }
    }
  }

  const std::string& code() const noexcept { return code_; }

  friend bool operator==(const LanguageTag&, const LanguageTag&) = default;
  friend auto operator<=>(const LanguageTag&, const LanguageTag&) = default;

 private:
  std::string code_;
};

inline const LanguageTag& other_language() {
  static const LanguageTag tag("other");
  return tag;
}

/// Known language codes in a fixed order. Anything not registered resolves
/// to "other", which is always the last entry.
class LanguageRegistry {
 public:
  explicit LanguageRegistry(const std::vector<std::string>& codes) {
    for (const auto& code : codes) {
      LanguageTag tag(code);
      if (tag == other_language()) continue;
      if (std::find(tags_.begin(), tags_.end(), tag) == tags_.end()) tags_.push_back(std::move(tag));
    }
    tags_.push_back(other_language());
  }

  static const LanguageRegistry& defaults() {
    static const LanguageRegistry registry(
        {"hi", "ta", "te", "ml", "kn", "bn", "mr", "gu", "pa", "or", "as", "ur", "bho", "raj", "hne"});
    return registry;
  }

  LanguageTag resolve(std::string_view raw) const {
    std::string code;
    for (char c : raw) {
      const auto u = static_cast<unsigned char>(c);
      if (std::isspace(u)) continue;
      code.push_back(static_cast<char>(std::tolower(u)));
    }
    for (const auto& tag : tags_) {
      if (tag.code() == code) return tag;
    }
    return other_language();
  }

  const std::vector<LanguageTag>& tags() const noexcept { return tags_; }

  std::size_t position(const LanguageTag& tag) const {
    const auto it = std::find(tags_.begin(), tags_.end(), tag);
    return it == tags_.end() ? tags_.size() - 1 : static_cast<std::size_t>(it - tags_.begin());
  }

 private:
  std::vector<LanguageTag> tags_;
};

struct CommentRecord {
  std::string id;
  std::string raw_text;
  std::string clean_text;
  std::string translit_text;
  LanguageTag language;
  std::uint64_t like_count = 0;
  std::uint64_t report_count = 0;
  std::optional<int> label;
};

enum class Split { Train, Test };

inline std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

/// Immutable ordered collection of records. Record order is the canonical
/// row order for every feature matrix built from the corpus.
class Corpus {
 public:
  Corpus() = default;

  Corpus(Split split, std::vector<CommentRecord> records) : split_(split), records_(std::move(records)) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(records_.size());
    for (const auto& record : records_) {
      if (!seen.insert(record.id).second) fail(ErrorKind::DuplicateId, "duplicate id '" + record.id + "'");
      if (record.label && *record.label != 0 && *record.label != 1) {
        fail(ErrorKind::BadLabel, "label must be 0 or 1 for id '" + record.id + "'");
      }
      if (split_ == Split::Train && !record.label) {
        fail(ErrorKind::MissingLabel, "train record '" + record.id + "' has no label");
      }
    }
  }

  Split split() const noexcept { return split_; }
  const std::vector<CommentRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const CommentRecord& operator[](std::size_t i) const { return records_[i]; }

  /// Labels as 0/1 ints; unlabeled records raise MissingLabel.
  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(records_.size());
    for (const auto& record : records_) {
      if (!record.label) fail(ErrorKind::MissingLabel, "record '" + record.id + "' has no label");
      out.push_back(*record.label);
    }
    return out;
  }

  std::vector<LanguageTag> languages() const {
    std::vector<LanguageTag> out;
    out.reserve(records_.size());
    for (const auto& record : records_) out.push_back(record.language);
    return out;
  }

 private:
  Split split_ = Split::Train;
  std::vector<CommentRecord> records_;
};

// ---------------------------------------------------------------------------
// Corpus file: header `id,text,language,like_count,report_count,label`,
// comma separated, double-quote quoting with "" escapes, LF line endings.

inline constexpr std::array<std::string_view, 6> kCorpusHeader = {"id", "text", "language", "like_count",
                                                                  "report_count", "label"};

namespace csv {

/// Splits the whole input into rows of fields. Quoted fields may span lines.
/// Returns rows paired with the 1-based line number where each row starts.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> parse(std::string_view input) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  std::size_t line = 1;
  std::size_t row_line = 1;
  std::size_t i = 0;
  const auto end_row = [&] {
    fields.push_back(std::move(field));
    field.clear();
    rows.emplace_back(row_line, std::move(fields));
    fields.clear();
    field_was_quoted = false;
  };
  while (i < input.size()) {
    const char c = input[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < input.size() && input[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        quoted = false;
        ++i;
        continue;
      }
      if (c == '\n') ++line;
      field.push_back(c);
      ++i;
      continue;
    }
    if (c == '"') {
      if (!field.empty() || field_was_quoted) {
        fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": stray quote inside unquoted field");
      }
      quoted = true;
      field_was_quoted = true;
      ++i;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
      ++i;
    } else if (c == '\n') {
      end_row();
      ++line;
      row_line = line;
      ++i;
    } else {
      if (field_was_quoted) {
        fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": text after closing quote");
      }
      field.push_back(c);
      ++i;
    }
  }
  if (quoted) fail(ErrorKind::MalformedRow, "line " + std::to_string(row_line) + ": unterminated quoted field");
  if (!field.empty() || !fields.empty() || field_was_quoted) end_row();
  return rows;
}

inline std::string quote(std::string_view value) {
  const bool needs = value.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace csv

namespace detail {

inline std::uint64_t parse_count(std::string_view text, std::size_t line, std::string_view column) {
  if (!text.empty() && text.front() == '-') {
    fail(ErrorKind::NegativeCount, "line " + std::to_string(line) + ": negative " + std::string(column));
  }
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": bad " + std::string(column) + " '" +
                                      std::string(text) + "'");
  }
  return value;
}

}  // namespace detail

inline Corpus parse_corpus(std::string_view content, Split split,
                           const LanguageRegistry& registry = LanguageRegistry::defaults()) {
  auto rows = csv::parse(content);
  if (rows.empty()) fail(ErrorKind::MalformedRow, "missing header row");
  const auto& header = rows.front().second;
  if (header.size() != kCorpusHeader.size() || !std::equal(header.begin(), header.end(), kCorpusHeader.begin())) {
    fail(ErrorKind::MalformedRow, "header must be id,text,language,like_count,report_count,label");
  }
  std::vector<CommentRecord> records;
  records.reserve(rows.size() - 1);
  std::unordered_set<std::string> ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line, fields] = rows[r];
    if (fields.size() != kCorpusHeader.size()) {
      fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": expected 6 columns, got " +
                                        std::to_string(fields.size()));
    }
    for (const auto& field : fields) {
      if (!utf8::valid(field)) fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": invalid UTF-8");
    }
    CommentRecord record;
    record.id = fields[0];
    if (record.id.empty()) fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": empty id");
    if (!ids.insert(record.id).second) {
      fail(ErrorKind::DuplicateId, "line " + std::to_string(line) + ": duplicate id '" + record.id + "'");
    }
    record.raw_text = fields[1];
    record.language = registry.resolve(fields[2]);
    record.like_count = detail::parse_count(fields[3], line, "like_count");
    record.report_count = detail::parse_count(fields[4], line, "report_count");
    const std::string& label = fields[5];
    if (label == "0" || label == "1") {
      record.label = label == "1" ? 1 : 0;
    } else if (!label.empty()) {
      fail(ErrorKind::BadLabel, "line " + std::to_string(line) + ": label '" + label + "' not in {0,1,empty}");
    } else if (split == Split::Train) {
      fail(ErrorKind::BadLabel, "line " + std::to_string(line) + ": train split requires a label");
    }
    records.push_back(std::move(record));
  }
  return Corpus(split, std::move(records));
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline Corpus load_corpus(const std::string& path, Split split,
                          const LanguageRegistry& registry = LanguageRegistry::defaults()) {
  return parse_corpus(read_file(path), split, registry);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (std::size_t i = 0; i < kCorpusHeader.size(); ++i) out << (i ? "," : "") << kCorpusHeader[i];
  out << '\n';
  for (const auto& record : corpus.records()) {
    out << csv::quote(record.id) << ',' << csv::quote(record.raw_text) << ',' << record.language.code() << ','
        << record.like_count << ',' << record.report_count << ',';
    if (record.label) out << *record.label;
    out << '\n';
  }
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
  write_corpus(out, corpus);
}

// ---------------------------------------------------------------------------
// Text transforms.

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline std::string strip_tags(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '<') {
      const std::size_t close = text.find_first_of("<>", i + 1);
      if (close != std::string_view::npos && text[close] == '>') {
        // A tag separates words, so it leaves a space behind.
        out.push_back(' ');
        i = close + 1;
        continue;
      }
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

inline std::string decode_entities(std::string_view text) {
  static constexpr std::array<std::pair<std::string_view, char>, 5> kEntities = {
      {{"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}}};
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    if (text[i] == '&') {
      for (const auto& [name, value] : kEntities) {
        if (text.substr(i, name.size()) == name) {
          out.push_back(value);
          i += name.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) out.push_back(text[i++]);
  }
  return out;
}

inline std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// Removes `<...>` tags, decodes the five named XML entities, collapses
/// whitespace runs, and trims. Decoding can expose new tags or entities
/// ("&amp;lt;"), so the steps repeat until the text stops changing; that makes
/// the function idempotent.
inline std::string clean_text(std::string_view raw) {
  std::string current(raw);
  while (true) {
    std::string next = detail::collapse_whitespace(detail::decode_entities(detail::strip_tags(current)));
    if (next == current) return next;
    current = std::move(next);
  }
}

/// Model input text: clean + " " + transliterated, cut to max_len code points.
/// An empty side contributes nothing, including the separator.
inline std::string compose_model_text(const CommentRecord& record, std::size_t max_len) {
  if (max_len == 0) fail(ErrorKind::BadMaxLen, "max_len must be positive");
  std::string joined = record.clean_text;
  if (!record.translit_text.empty()) {
    if (!joined.empty()) joined.push_back(' ');
    joined += record.translit_text;
  }
  return utf8::prefix(joined, max_len);
}

inline constexpr std::string_view kRawSuffix = "#raw";
inline constexpr std::string_view kCleanSuffix = "#clean";

/// Source id of a record produced by merge_oversample (suffix removed).
inline std::string base_id(std::string_view id) {
  for (auto suffix : {kRawSuffix, kCleanSuffix}) {
    if (id.size() > suffix.size() && id.substr(id.size() - suffix.size()) == suffix) {
      return std::string(id.substr(0, id.size() - suffix.size()));
    }
  }
  return std::string(id);
}

/// Concatenates the original and cleaned corpora (original first), tagging
/// ids with "#raw" / "#clean".
inline Corpus merge_oversample(const Corpus& original, const Corpus& cleaned) {
  if (original.split() != cleaned.split()) fail(ErrorKind::SplitMismatch, "corpora belong to different splits");
  if (original.size() != cleaned.size()) fail(ErrorKind::IdMismatch, "corpora differ in size");
  std::vector<std::string_view> a, b;
  for (const auto& r : original.records()) a.push_back(r.id);
  for (const auto& r : cleaned.records()) b.push_back(r.id);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b) fail(ErrorKind::IdMismatch, "corpora carry different ids");

  std::vector<CommentRecord> merged;
  merged.reserve(original.size() * 2);
  for (const auto& record : original.records()) {
    merged.push_back(record);
    merged.back().id += kRawSuffix;
  }
  for (const auto& record : cleaned.records()) {
    merged.push_back(record);
    merged.back().id += kCleanSuffix;
  }
  return Corpus(original.split(), std::move(merged));
}

/// Row indices per language, each list in corpus order.
inline std::map<LanguageTag, std::vector<std::size_t>> language_rows(const Corpus& corpus) {
  std::map<LanguageTag, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) out[corpus[i].language].push_back(i);
  return out;
}

inline std::map<LanguageTag, Corpus> partition_by_language(const Corpus& corpus) {
  std::map<LanguageTag, Corpus> out;
  for (const auto& [language, rows] : language_rows(corpus)) {
    std::vector<CommentRecord> records;
    records.reserve(rows.size());
    for (auto i : rows) records.push_back(corpus[i]);
    out.emplace(language, Corpus(corpus.split(), std::move(records)));
  }
  return out;
}

}  // namespace abuse
