#pragma once

// Confusion-count metrics for binary labels (1 = abusive).

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "abuse/error.hpp"
#include "abuse/format.hpp"

namespace abuse {

enum class Averaging { Positive, Macro, Weighted };

inline std::string_view to_string(Averaging averaging) {
  switch (averaging) {
    case Averaging::Positive: return "positive";
    case Averaging::Macro: return "macro";
    case Averaging::Weighted: return "weighted";
  }
  return "positive";
}

inline Averaging parse_averaging(std::string_view text) {
  if (text == "positive") return Averaging::Positive;
  if (text == "macro") return Averaging::Macro;
  if (text == "weighted") return Averaging::Weighted;
  fail(ErrorKind::BadParams, "unknown averaging '" + std::string(text) + "'");
}

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

inline Confusion confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) fail(ErrorKind::LengthMismatch, "label vectors differ in length");
  Confusion c;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_pred[i] == 1) {
      ++(y_true[i] == 1 ? c.tp : c.fp);
    } else {
      ++(y_true[i] == 1 ? c.fn : c.tn);
    }
  }
  return c;
}

namespace detail {

inline double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// F1 = 2tp / (2tp + fp + fn); 0 when the class never occurs in either vector.
inline double class_f1(std::size_t tp, std::size_t fp, std::size_t fn) { return ratio(2 * tp, 2 * tp + fp + fn); }

}  // namespace detail

inline double f1_from(const Confusion& c, Averaging averaging) {
  const double positive = detail::class_f1(c.tp, c.fp, c.fn);
  if (averaging == Averaging::Positive) return positive;
  const double negative = detail::class_f1(c.tn, c.fn, c.fp);
  if (averaging == Averaging::Macro) return (positive + negative) / 2.0;
  const std::size_t support_pos = c.tp + c.fn;
  const std::size_t support_neg = c.tn + c.fp;
  return (positive * static_cast<double>(support_pos) + negative * static_cast<double>(support_neg)) /
         static_cast<double>(support_pos + support_neg);
}

inline double f1_score(std::span<const int> y_true, std::span<const int> y_pred, Averaging averaging = Averaging::Positive) {
  if (y_true.size() != y_pred.size()) fail(ErrorKind::LengthMismatch, "label vectors differ in length");
  if (y_true.empty()) fail(ErrorKind::EmptyInput, "no labels");
  return f1_from(confusion(y_true, y_pred), averaging);
}

struct MetricReport {
  Confusion counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double false_positive_rate = 0.0;
};

inline MetricReport metric_report(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.empty()) fail(ErrorKind::EmptyInput, "no labels");
  MetricReport r;
  r.counts = confusion(y_true, y_pred);
  r.precision = detail::ratio(r.counts.tp, r.counts.tp + r.counts.fp);
  r.recall = detail::ratio(r.counts.tp, r.counts.tp + r.counts.fn);
  r.f1 = f1_from(r.counts, Averaging::Positive);
  r.macro_f1 = f1_from(r.counts, Averaging::Macro);
  r.weighted_f1 = f1_from(r.counts, Averaging::Weighted);
  r.false_positive_rate = detail::ratio(r.counts.fp, r.counts.fp + r.counts.tn);
  return r;
}

/// One `name=value` line per metric.
inline void write_metrics(std::ostream& out, const MetricReport& r) {
  out << "tp=" << r.counts.tp << "\nfp=" << r.counts.fp << "\nfn=" << r.counts.fn << "\ntn=" << r.counts.tn
      << "\nprecision=" << format_double(r.precision) << "\nrecall=" << format_double(r.recall)
      << "\nf1=" << format_double(r.f1) << "\nmacro_f1=" << format_double(r.macro_f1)
      << "\nweighted_f1=" << format_double(r.weighted_f1)
      << "\nfalse_positive_rate=" << format_double(r.false_positive_rate) << '\n';
}

/// Labels from probabilities with the >= rule.
inline std::vector<int> threshold_labels(std::span<const double> probs, double threshold) {
  std::vector<int> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= threshold ? 1 : 0;
  return out;
}

}  // namespace abuse
