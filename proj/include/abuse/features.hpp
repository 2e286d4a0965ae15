#pragma once

// Feature matrices and the text/metadata featurizers.

#include <algorithm>
#include <array>
#include <initializer_list>
#include <optional>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "abuse/corpus.hpp"
#include "abuse/error.hpp"
#include "abuse/unicode.hpp"

namespace abuse {

enum class BlockKind { Tfidf, Embedding, Pca, Metadata, Pseudo };

inline std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::Tfidf: return "tfidf";
    case BlockKind::Embedding: return "embedding";
    case BlockKind::Pca: return "pca";
    case BlockKind::Metadata: return "metadata";
    case BlockKind::Pseudo: return "pseudo";
  }
  return "unknown";
}

struct FeatureBlock {
  BlockKind kind;
  std::size_t width;
  friend bool operator==(const FeatureBlock&, const FeatureBlock&) = default;
};

/// Dense row-major matrix; row i belongs to corpus record i. Values are
/// always finite.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  FeatureMatrix(std::size_t rows, BlockKind kind, std::size_t width)
      : rows_(rows), width_(width), blocks_{{kind, width}}, values_(rows * width, 0.0) {}

  FeatureMatrix(std::size_t rows, BlockKind kind, std::size_t width, std::vector<double> values)
      : rows_(rows), width_(width), blocks_{{kind, width}}, values_(std::move(values)) {
    if (values_.size() != rows * width) fail(ErrorKind::DimMismatch, "value count does not match rows x width");
    for (double v : values_) {
      if (!std::isfinite(v)) fail(ErrorKind::NonFiniteValue, "feature values must be finite");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t width() const noexcept { return width_; }
  const std::vector<FeatureBlock>& blocks() const noexcept { return blocks_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double at(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }

  void set(std::size_t row, std::size_t col, double value) {
    if (!std::isfinite(value)) fail(ErrorKind::NonFiniteValue, "feature values must be finite");
    values_[row * width_ + col] = value;
  }

  std::span<const double> row(std::size_t r) const { return {values_.data() + r * width_, width_}; }

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const {
    FeatureMatrix out;
    out.rows_ = rows.size();
    out.width_ = width_;
    out.blocks_ = blocks_;
    out.values_.reserve(rows.size() * width_);
    for (auto r : rows) {
      const auto src = row(r);
      out.values_.insert(out.values_.end(), src.begin(), src.end());
    }
    return out;
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  friend FeatureMatrix assemble_features(std::span<const FeatureMatrix> parts);

  std::size_t rows_ = 0;
  std::size_t width_ = 0;
  std::vector<FeatureBlock> blocks_;
  std::vector<double> values_;
};

/// Column-block concatenation; block kinds and order are preserved.
inline FeatureMatrix assemble_features(std::span<const FeatureMatrix> parts) {
  if (parts.empty()) return {};
  FeatureMatrix out;
  out.rows_ = parts.front().rows();
  for (const auto& part : parts) {
    if (part.rows() != out.rows_) {
      fail(ErrorKind::RowCountMismatch, "feature parts have " + std::to_string(out.rows_) + " and " +
                                            std::to_string(part.rows()) + " rows");
    }
    out.width_ += part.width();
    out.blocks_.insert(out.blocks_.end(), part.blocks().begin(), part.blocks().end());
  }
  out.values_.reserve(out.rows_ * out.width_);
  for (std::size_t r = 0; r < out.rows_; ++r) {
    for (const auto& part : parts) {
      const auto src = part.row(r);
      out.values_.insert(out.values_.end(), src.begin(), src.end());
    }
  }
  return out;
}

inline FeatureMatrix assemble_features(std::initializer_list<FeatureMatrix> parts) {
  return assemble_features(std::span<const FeatureMatrix>(parts.begin(), parts.size()));
}

// ---------------------------------------------------------------------------
// Tokenization and TF-IDF.

/// NFC, lowercase, then split on anything that is not a letter, decimal digit,
/// or combining mark.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char32_t cp : utf8::nfc_lower(text)) {
    if (utf8::is_word_char(cp)) {
      utf8::append(current, cp);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

/// Terms in lexicographic (byte / code point) order; column index = position.
class Vocabulary {
 public:
  Vocabulary() = default;

  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq, std::size_t n_docs)
      : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), n_docs_(n_docs) {
    if (terms_.size() != doc_freq_.size()) fail(ErrorKind::DimMismatch, "terms and doc_freq differ in length");
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      if (i > 0 && !(terms_[i - 1] < terms_[i])) fail(ErrorKind::BadParams, "vocabulary terms must be sorted and unique");
      if (doc_freq_[i] == 0 || doc_freq_[i] > n_docs_) fail(ErrorKind::BadParams, "doc_freq out of range");
      index_.emplace(terms_[i], i);
    }
  }

  std::size_t size() const noexcept { return terms_.size(); }
  std::size_t n_docs() const noexcept { return n_docs_; }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::vector<std::size_t>& doc_freq() const noexcept { return doc_freq_; }

  std::optional<std::size_t> index_of(std::string_view term) const {
    const auto it = index_.find(std::string(term));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Smoothed inverse document frequency ln((1+N)/(1+df)) + 1.
  double idf(std::size_t column) const {
    return std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + static_cast<double>(doc_freq_[column]))) + 1.0;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.terms_ == b.terms_ && a.doc_freq_ == b.doc_freq_ && a.n_docs_ == b.n_docs_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> doc_freq_;
  std::size_t n_docs_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Keeps the `max_features` terms with the highest document frequency,
/// lexicographically smaller terms first among equal frequencies.
inline Vocabulary cap_vocabulary(const Vocabulary& vocab, std::size_t max_features) {
  std::vector<std::size_t> order(vocab.size());
  std::iota(order.begin(), order.end(), 0);
  // Terms are already sorted, so a stable sort by df keeps lexicographic ties.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return vocab.doc_freq()[a] > vocab.doc_freq()[b]; });
  if (order.size() > max_features) order.resize(max_features);
  std::sort(order.begin(), order.end());
  std::vector<std::string> terms;
  std::vector<std::size_t> df;
  for (auto i : order) {
    terms.push_back(vocab.terms()[i]);
    df.push_back(vocab.doc_freq()[i]);
  }
  return Vocabulary(std::move(terms), std::move(df), vocab.n_docs());
}

inline Vocabulary fit_tfidf(std::span<const std::string> texts, std::size_t max_features) {
  if (texts.empty()) fail(ErrorKind::EmptyCorpus, "cannot fit TF-IDF on zero documents");
  if (max_features == 0) fail(ErrorKind::BadParams, "max_features must be positive");
  std::map<std::string, std::size_t> doc_freq;
  for (const auto& text : texts) {
    auto tokens = tokenize(text);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& token : tokens) ++doc_freq[std::move(token)];
  }
  std::vector<std::string> terms;
  std::vector<std::size_t> df;
  terms.reserve(doc_freq.size());
  for (auto& [term, count] : doc_freq) {
    terms.push_back(term);
    df.push_back(count);
  }
  return cap_vocabulary(Vocabulary(std::move(terms), std::move(df), texts.size()), max_features);
}

/// Raw counts times smoothed idf, each row L2-normalized. Rows without any
/// in-vocabulary term stay zero.
inline FeatureMatrix transform_tfidf(const Vocabulary& vocab, std::span<const std::string> texts) {
  FeatureMatrix out(texts.size(), BlockKind::Tfidf, vocab.size());
  std::vector<double> row(vocab.size());
  for (std::size_t r = 0; r < texts.size(); ++r) {
    std::fill(row.begin(), row.end(), 0.0);
    for (const auto& token : tokenize(texts[r])) {
      if (auto col = vocab.index_of(token)) row[*col] += 1.0;
    }
    double norm_sq = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] != 0.0) {
        row[c] *= vocab.idf(c);
        norm_sq += row[c] * row[c];
      }
    }
    if (norm_sq == 0.0) continue;
    const double norm = std::sqrt(norm_sq);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] != 0.0) out.set(r, c, row[c] / norm);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metadata.

enum class MetadataTransform { Log1p, Raw };

inline std::array<double, 2> metadata_features(const CommentRecord& record,
                                               MetadataTransform transform = MetadataTransform::Log1p) {
  const auto likes = static_cast<double>(record.like_count);
  const auto reports = static_cast<double>(record.report_count);
  if (transform == MetadataTransform::Raw) return {likes, reports};
  return {std::log1p(likes), std::log1p(reports)};
}

inline FeatureMatrix metadata_matrix(const Corpus& corpus, MetadataTransform transform = MetadataTransform::Log1p) {
  FeatureMatrix out(corpus.size(), BlockKind::Metadata, 2);
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    const auto values = metadata_features(corpus[r], transform);
    out.set(r, 0, values[0]);
    out.set(r, 1, values[1]);
  }
  return out;
}

}  // namespace abuse
