#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace abuse {

enum class ErrorKind {
  // corpus
  MalformedRow,
  DuplicateId,
  NegativeCount,
  BadLabel,
  BadMaxLen,
  SplitMismatch,
  IdMismatch,
  BadProportions,
  MissingLabel,
  BadLanguageTag,
  BadTable,
  // features
  EmptyCorpus,
  BadMagic,
  RowCountMismatch,
  TruncatedFile,
  TrailingBytes,
  NonFiniteValue,
  BadK,
  DimMismatch,
  // gbdt
  EmptyTrainingSet,
  LabelOutOfRange,
  BadParams,
  BadModelFile,
  // pipeline / evaluation
  FoldTooSmall,
  NoModels,
  ModelMismatch,
  LengthMismatch,
  EmptyInput,
  // cli
  ParseError,
  SchemaError,
  ConstraintError,
  Io,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::NegativeCount: return "NegativeCount";
    case ErrorKind::BadLabel: return "BadLabel";
    case ErrorKind::BadMaxLen: return "BadMaxLen";
    case ErrorKind::SplitMismatch: return "SplitMismatch";
    case ErrorKind::IdMismatch: return "IdMismatch";
    case ErrorKind::BadProportions: return "BadProportions";
    case ErrorKind::MissingLabel: return "MissingLabel";
    case ErrorKind::BadLanguageTag: return "BadLanguageTag";
    case ErrorKind::BadTable: return "BadTable";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::RowCountMismatch: return "RowCountMismatch";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::TrailingBytes: return "TrailingBytes";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::BadK: return "BadK";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::BadParams: return "BadParams";
    case ErrorKind::BadModelFile: return "BadModelFile";
    case ErrorKind::FoldTooSmall: return "FoldTooSmall";
    case ErrorKind::NoModels: return "NoModels";
    case ErrorKind::ModelMismatch: return "ModelMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ConstraintError: return "ConstraintError";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace abuse
