#pragma once

// Convex blends of model probabilities with weights searched on a simplex grid.

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "abuse/error.hpp"
#include "abuse/metrics.hpp"
#include "abuse/oof.hpp"

namespace abuse {

struct EnsembleWeights {
  std::vector<std::string> ids;  // model order
  std::vector<double> weights;   // aligned with ids; non-negative, sum 1

  double weight_of(std::string_view id) const {
    for (std::size_t m = 0; m < ids.size(); ++m) {
      if (ids[m] == id) return weights[m];
    }
    return 0.0;
  }

  friend bool operator==(const EnsembleWeights&, const EnsembleWeights&) = default;
};

/// Per-record convex combination, accumulated in model order.
inline std::vector<double> blend(std::span<const double> weights, std::span<const std::vector<double>> preds) {
  if (preds.empty()) fail(ErrorKind::NoModels, "nothing to blend");
  const std::size_t n = preds.front().size();
  std::vector<double> out(n, 0.0);
  for (std::size_t m = 0; m < preds.size(); ++m) {
    if (preds[m].size() != n) fail(ErrorKind::LengthMismatch, "prediction vectors differ in length");
    if (weights[m] == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) out[i] += weights[m] * preds[m][i];
  }
  return out;
}

namespace detail {

inline double blend_f1(const std::vector<long long>& units, long long total, std::span<const std::vector<double>> preds,
                       std::span<const int> y, Averaging averaging) {
  std::vector<double> w(units.size());
  for (std::size_t m = 0; m < units.size(); ++m) w[m] = static_cast<double>(units[m]) / static_cast<double>(total);
  const auto p = blend(w, preds);
  return f1_score(y, threshold_labels(p, 0.5), averaging);
}

}  // namespace detail

/// Coordinate ascent on the grid {units / U} of the simplex, U = 1/grid_step.
/// Starts at the best single model (first on ties), then sweeps ordered
/// model pairs (a, b) in list order, moving d units from b to a for the d
/// that helps most; a move is kept only if it strictly improves F1 of the
/// 0.5-thresholded blend. Sweeps repeat until one changes nothing.
inline EnsembleWeights fit_ensemble_weights(const std::vector<std::string>& ids, std::span<const std::vector<double>> oof,
                                            std::span<const int> y, double grid_step,
                                            Averaging averaging = Averaging::Positive) {
  if (ids.empty() || oof.empty()) fail(ErrorKind::NoModels, "no models to ensemble");
  if (ids.size() != oof.size()) fail(ErrorKind::ModelMismatch, "ids and predictions differ in count");
  for (const auto& p : oof) {
    if (p.size() != y.size()) fail(ErrorKind::LengthMismatch, "OOF vector length differs from labels");
  }
  if (!(grid_step > 0.0 && grid_step <= 1.0)) fail(ErrorKind::BadParams, "grid_step must be in (0, 1]");
  const double inverse = 1.0 / grid_step;
  const auto total = static_cast<long long>(std::llround(inverse));
  if (std::abs(inverse - static_cast<double>(total)) > 1e-9) fail(ErrorKind::BadParams, "1/grid_step must be an integer");

  const std::size_t models = ids.size();
  std::vector<long long> units(models, 0);
  double best = -1.0;
  std::size_t start = 0;
  for (std::size_t m = 0; m < models; ++m) {
    std::vector<long long> vertex(models, 0);
    vertex[m] = total;
    const double f1 = detail::blend_f1(vertex, total, oof, y, averaging);
    if (f1 > best) {
      best = f1;
      start = m;
    }
  }
  units[start] = total;

  bool improved = models > 1;
  while (improved) {
    improved = false;
    for (std::size_t a = 0; a < models; ++a) {
      for (std::size_t b = 0; b < models; ++b) {
        if (a == b || units[b] == 0) continue;
        long long best_move = 0;
        double best_f1 = best;
        for (long long d = 1; d <= units[b]; ++d) {
          auto trial = units;
          trial[a] += d;
          trial[b] -= d;
          const double f1 = detail::blend_f1(trial, total, oof, y, averaging);
          if (f1 > best_f1) {
            best_f1 = f1;
            best_move = d;
          }
        }
        if (best_move > 0) {
          units[a] += best_move;
          units[b] -= best_move;
          best = best_f1;
          improved = true;
        }
      }
    }
  }

  EnsembleWeights out;
  out.ids = ids;
  for (auto u : units) out.weights.push_back(static_cast<double>(u) / static_cast<double>(total));
  return out;
}

/// Blend of named prediction vectors; every weighted id must be present and
/// every supplied id must be weighted.
inline std::vector<double> ensemble_predict(const EnsembleWeights& weights,
                                            const std::map<std::string, std::vector<double>>& preds) {
  if (weights.ids.empty()) fail(ErrorKind::NoModels, "empty ensemble");
  if (preds.size() != weights.ids.size()) fail(ErrorKind::ModelMismatch, "prediction set differs from weighted models");
  std::vector<std::vector<double>> ordered;
  for (const auto& id : weights.ids) {
    const auto it = preds.find(id);
    if (it == preds.end()) fail(ErrorKind::ModelMismatch, "no predictions for model '" + id + "'");
    ordered.push_back(it->second);
  }
  return blend(weights.weights, ordered);
}

struct EnsembleResult {
  OofPredictions predictions;
  EnsembleWeights weights;                 // fit on every OOF record; used for test rows
  std::vector<EnsembleWeights> view_weights;  // view j: fit on the rows outside fold j
};

/// Cross-fitted ensemble. View j blends the stages' view-j values with
/// weights fit only on rows outside fold j, so the blend that scores fold j
/// never sees its labels.
inline EnsembleResult fit_crossfit_ensemble(std::span<const OofPredictions* const> stages, std::span<const int> y,
                                            double grid_step, Averaging averaging = Averaging::Positive) {
  if (stages.empty()) fail(ErrorKind::NoModels, "no stages to ensemble");
  const auto& folds = stages.front()->folds;
  const std::size_t n = folds.size();
  std::vector<std::string> ids;
  std::vector<std::vector<double>> probs;
  for (const auto* stage : stages) {
    if (stage->size() != n || stage->folds != folds) fail(ErrorKind::ModelMismatch, "stages use different folds");
    ids.push_back(stage->producer);
    probs.push_back(stage->probs);
  }
  EnsembleResult result;
  result.weights = fit_ensemble_weights(ids, probs, y, grid_step, averaging);
  auto& out = result.predictions;
  out.producer = "ensemble";
  out.folds = folds;
  out.views.resize(folds.k);
  for (std::size_t j = 0; j < folds.k; ++j) {
    const auto rows = folds.rows_outside({j});
    std::vector<int> labels;
    for (auto i : rows) labels.push_back(y[i]);
    std::vector<std::vector<double>> full, restricted;
    for (const auto* stage : stages) {
      full.push_back(stage->views[j]);
      std::vector<double> part;
      for (auto i : rows) part.push_back(stage->views[j][i]);
      restricted.push_back(std::move(part));
    }
    auto weights = rows.empty() ? result.weights : fit_ensemble_weights(ids, restricted, labels, grid_step, averaging);
    out.views[j] = blend(weights.weights, full);
    result.view_weights.push_back(std::move(weights));
  }
  sync_probs(out);
  bool have_test = true;
  for (const auto* stage : stages) have_test = have_test && !stage->test.empty();
  if (have_test) {
    std::vector<std::vector<double>> tests;
    for (const auto* stage : stages) tests.push_back(stage->test);
    out.test = blend(result.weights.weights, tests);
  }
  return result;
}

}  // namespace abuse
