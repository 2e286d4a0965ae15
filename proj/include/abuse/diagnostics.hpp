#pragma once

// Label-noise probes and figure-data export.

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "abuse/corpus.hpp"
#include "abuse/embeddings.hpp"
#include "abuse/error.hpp"
#include "abuse/features.hpp"
#include "abuse/format.hpp"
#include "abuse/gbdt.hpp"
#include "abuse/pca.hpp"
#include "abuse/thresholds.hpp"

namespace abuse {

inline Corpus flip_labels(const Corpus& corpus) {
  std::vector<CommentRecord> records = corpus.records();
  for (auto& record : records) {
    if (!record.label) fail(ErrorKind::MissingLabel, "record '" + record.id + "' has no label");
    record.label = 1 - *record.label;
  }
  return Corpus(corpus.split(), std::move(records));
}

struct NoiseReport {
  std::size_t n = 0;
  std::size_t misclassified = 0;
  double misclassified_fraction = 0.0;
  std::size_t subset_positive = 0;  // given label 1 inside the misclassified subset
  std::size_t subset_negative = 0;
  bool no_misclassified = false;
  double subset_opposite_rate = 0.0;      // retrained model disagrees with the given label, on the subset
  double complement_opposite_rate = 0.0;  // same, on the remaining records
  std::optional<double> flip_recall;      // planted flips found in the subset / planted flips
  std::optional<double> flip_precision;   // planted flips found in the subset / subset size
};

/// Harvests the records whose thresholded OOF label disagrees with the
/// given label, retrains a booster on just those records, and measures how
/// often it contradicts the given labels on the subset and on the rest.
inline NoiseReport noise_probe(const Corpus& corpus, const FeatureMatrix& x, std::span<const double> oof,
                               const ThresholdMap& thresholds, const GbdtParams& params,
                               const std::optional<std::vector<std::size_t>>& planted_flips = std::nullopt) {
  const auto y = corpus.labels();
  const auto languages = corpus.languages();
  if (x.rows() != y.size() || oof.size() != y.size()) fail(ErrorKind::LengthMismatch, "noise probe inputs misaligned");
  if (y.empty()) fail(ErrorKind::EmptyInput, "empty corpus");
  const auto predicted = apply_thresholds(oof, languages, thresholds);

  NoiseReport report;
  report.n = y.size();
  std::vector<std::size_t> subset, complement;
  for (std::size_t i = 0; i < y.size(); ++i) (predicted[i] != y[i] ? subset : complement).push_back(i);
  report.misclassified = subset.size();
  report.misclassified_fraction = static_cast<double>(subset.size()) / static_cast<double>(y.size());
  for (auto i : subset) ++(y[i] == 1 ? report.subset_positive : report.subset_negative);
  report.no_misclassified = subset.empty();

  if (!subset.empty()) {
    std::vector<int> labels;
    for (auto i : subset) labels.push_back(y[i]);
    const auto model = fit_gbdt(x.select_rows(subset), labels, params);
    const auto opposite_rate = [&](const std::vector<std::size_t>& rows) {
      if (rows.empty()) return 0.0;
      std::size_t opposite = 0;
      for (auto i : rows) {
        const int label = probability_from_score(model.raw_score(x.row(i))) >= 0.5 ? 1 : 0;
        opposite += label != y[i] ? 1 : 0;
      }
      return static_cast<double>(opposite) / static_cast<double>(rows.size());
    };
    report.subset_opposite_rate = opposite_rate(subset);
    report.complement_opposite_rate = opposite_rate(complement);
  }

  if (planted_flips) {
    const std::set<std::size_t> flips(planted_flips->begin(), planted_flips->end());
    std::size_t found = 0;
    for (auto i : subset) found += flips.contains(i) ? 1 : 0;
    report.flip_recall = flips.empty() ? 0.0 : static_cast<double>(found) / static_cast<double>(flips.size());
    report.flip_precision = subset.empty() ? 0.0 : static_cast<double>(found) / static_cast<double>(subset.size());
  }
  return report;
}

inline void write_noise_report(std::ostream& out, const NoiseReport& r) {
  out << "n=" << r.n << '\n'
      << "misclassified=" << r.misclassified << '\n'
      << "misclassified_fraction=" << format_double(r.misclassified_fraction) << '\n'
      << "subset_positive=" << r.subset_positive << '\n'
      << "subset_negative=" << r.subset_negative << '\n'
      << "no_misclassified=" << (r.no_misclassified ? 1 : 0) << '\n'
      << "subset_opposite_rate=" << format_double(r.subset_opposite_rate) << '\n'
      << "complement_opposite_rate=" << format_double(r.complement_opposite_rate) << '\n';
  if (r.flip_recall) out << "flip_recall=" << format_double(*r.flip_recall) << '\n';
  if (r.flip_precision) out << "flip_precision=" << format_double(*r.flip_precision) << '\n';
}

/// Two-component PCA projection as `x<TAB>y<TAB>label<TAB>flagged` rows.
/// `flagged` is 1/0 membership in the flip set, or empty without one.
inline void write_pca_scatter(std::ostream& out, const EmbeddingMatrix& e, std::span<const int> labels,
                              const std::optional<std::vector<std::size_t>>& flip_set = std::nullopt) {
  if (labels.size() != e.rows()) fail(ErrorKind::LengthMismatch, "labels and embeddings differ in length");
  const auto model = fit_pca(e, 2);
  std::set<std::size_t> flagged;
  if (flip_set) flagged.insert(flip_set->begin(), flip_set->end());
  out << "x\ty\tlabel\tflagged\n";
  for (std::size_t r = 0; r < e.rows(); ++r) {
    const auto z = project(model, e.row(r));
    out << format_fixed(z[0], 6) << '\t' << format_fixed(z[1], 6) << '\t' << labels[r] << '\t';
    if (flip_set) out << (flagged.contains(r) ? 1 : 0);
    out << '\n';
  }
}

inline void pca_scatter_export(const EmbeddingMatrix& e, std::span<const int> labels,
                               const std::optional<std::vector<std::size_t>>& flip_set, const std::string& out_path) {
  std::ofstream out(out_path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + out_path + "'");
  write_pca_scatter(out, e, labels, flip_set);
  if (!out) fail(ErrorKind::Io, "write failed for '" + out_path + "'");
}

}  // namespace abuse
