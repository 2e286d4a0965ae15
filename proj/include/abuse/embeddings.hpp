#pragma once

// EMB1 embedding files: "EMB1", u32 LE rows, u32 LE cols, then rows*cols
// float32 LE values in row-major order. Nothing may follow the payload.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "abuse/corpus.hpp"
#include "abuse/error.hpp"
#include "abuse/features.hpp"

namespace abuse {

static_assert(std::endian::native == std::endian::little, "EMB1 I/O assumes a little-endian host");

class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<double> values)
      : rows_(rows), dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) fail(ErrorKind::DimMismatch, "embedding dim must be positive");
    if (values_.size() != rows_ * dim_) fail(ErrorKind::DimMismatch, "embedding value count mismatch");
    for (double v : values_) {
      if (!std::isfinite(v)) fail(ErrorKind::NonFiniteValue, "embedding values must be finite");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double at(std::size_t r, std::size_t c) const { return values_[r * dim_ + c]; }

  std::span<const double> row(std::size_t r) const { return {values_.data() + r * dim_, dim_}; }

  FeatureMatrix as_features(BlockKind kind = BlockKind::Embedding) const {
    return FeatureMatrix(rows_, kind, dim_, values_);
  }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

inline constexpr std::string_view kEmbeddingMagic = "EMB1";

namespace detail {

inline std::uint32_t read_u32(const char* p) {
  std::uint32_t value;
  std::memcpy(&value, p, 4);
  return value;
}

}  // namespace detail

inline EmbeddingMatrix parse_embeddings(std::string_view bytes, std::size_t expected_rows) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != kEmbeddingMagic) fail(ErrorKind::BadMagic, "missing EMB1 magic");
  if (bytes.size() < 12) fail(ErrorKind::TruncatedFile, "header shorter than 12 bytes");
  const std::uint64_t rows = detail::read_u32(bytes.data() + 4);
  const std::uint64_t cols = detail::read_u32(bytes.data() + 8);
  if (rows != expected_rows) {
    fail(ErrorKind::RowCountMismatch,
         "header has " + std::to_string(rows) + " rows, corpus has " + std::to_string(expected_rows));
  }
  if (cols == 0) fail(ErrorKind::DimMismatch, "header declares zero columns");
  const std::uint64_t payload = rows * cols * 4;
  if (bytes.size() - 12 < payload) fail(ErrorKind::TruncatedFile, "payload shorter than rows x cols floats");
  if (bytes.size() - 12 > payload) fail(ErrorKind::TrailingBytes, "bytes after the payload");
  std::vector<double> values(rows * cols);
  for (std::size_t i = 0; i < values.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 12 + 4 * i, 4);
    if (!std::isfinite(f)) fail(ErrorKind::NonFiniteValue, "non-finite value at index " + std::to_string(i));
    values[i] = f;
  }
  return EmbeddingMatrix(rows, cols, std::move(values));
}

inline EmbeddingMatrix load_embeddings(const std::string& path, std::size_t expected_rows) {
  return parse_embeddings(read_file(path), expected_rows);
}

/// Values are rounded to float32 on the way out.
inline std::string serialize_embeddings(const EmbeddingMatrix& matrix) {
  std::string out(kEmbeddingMagic);
  const auto put_u32 = [&](std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
  };
  put_u32(static_cast<std::uint32_t>(matrix.rows()));
  put_u32(static_cast<std::uint32_t>(matrix.dim()));
  out.reserve(12 + matrix.values().size() * 4);
  for (double v : matrix.values()) {
    const auto f = static_cast<float>(v);
    char buf[4];
    std::memcpy(buf, &f, 4);
    out.append(buf, 4);
  }
  return out;
}

inline void save_embeddings(const std::string& path, const EmbeddingMatrix& matrix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
  const auto bytes = serialize_embeddings(matrix);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace abuse
