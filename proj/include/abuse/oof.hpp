#pragma once

// Out-of-fold predictions with fold-conditional views.

#include <span>
#include <string>
#include <vector>

#include "abuse/error.hpp"
#include "abuse/folds.hpp"
#include "abuse/metrics.hpp"

namespace abuse {

/// `views[j][i]` is a probability for record i computed without any label
/// of fold j. For records of fold j it is the out-of-fold probability, so
/// `views[fold_of[i]][i] == probs[i]`. Later stages that consume these
/// values while predicting fold j read only `views[j]`, which keeps fold j's
/// labels out of everything that scores fold j.
struct OofPredictions {
  std::string producer;
  FoldAssignment folds;
  std::vector<double> probs;
  std::vector<std::vector<double>> views;
  std::vector<double> test;  // empty when no test rows were supplied

  std::size_t size() const noexcept { return probs.size(); }
};

/// F1 of the 0.5-thresholded view j on the rows outside fold j.
inline double view_f1(const OofPredictions& oof, std::size_t j, std::span<const int> y, Averaging averaging) {
  std::vector<int> truth, predicted;
  for (std::size_t i = 0; i < oof.folds.size(); ++i) {
    if (oof.folds.fold_of[i] == j) continue;
    truth.push_back(y[i]);
    predicted.push_back(oof.views[j][i] >= 0.5 ? 1 : 0);
  }
  if (truth.empty()) return 0.0;
  return f1_score(truth, predicted, averaging);
}

inline double oof_f1(const OofPredictions& oof, std::span<const int> y, Averaging averaging) {
  return f1_score(y, threshold_labels(oof.probs, 0.5), averaging);
}

/// Rebuilds probs from views: probs[i] = views[fold_of[i]][i].
inline void sync_probs(OofPredictions& oof) {
  oof.probs.resize(oof.folds.size());
  for (std::size_t i = 0; i < oof.folds.size(); ++i) oof.probs[i] = oof.views[oof.folds.fold_of[i]][i];
}

}  // namespace abuse
