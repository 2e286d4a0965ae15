#pragma once

// Iterative pseudo-labelling: prior predictions are appended as feature
// columns and the out-of-fold stage is rerun.

#include <span>
#include <vector>

#include "abuse/error.hpp"
#include "abuse/features.hpp"
#include "abuse/oof.hpp"
#include "abuse/parallel.hpp"
#include "abuse/stacking.hpp"

namespace abuse {

struct PseudoOptions {
  std::size_t max_iters = 3;
  double epsilon = 1e-4;
  bool hard = false;  // append 0/1 labels instead of probabilities
  Averaging averaging = Averaging::Positive;
};

/// Everything that scores fold j. The chain's feature columns come from
/// view j of the prior and of its own earlier iterations, so no label of
/// fold j ever enters them. Stopping and best-iteration choice use F1 on the
/// rows outside fold j for the same reason.
struct PseudoChain {
  std::size_t prior = 0;           // index into the candidate stages
  std::size_t best_iteration = 0;  // >= 1
  std::vector<FoldModel> models;   // iterations 1..best_iteration; excludes fold j
  std::vector<double> f1;          // f1[0] for the prior, f1[t] for iteration t
  std::vector<std::vector<double>> columns;  // pseudo columns appended to the training rows, in order
};

struct PseudoResult {
  OofPredictions predictions;
  std::vector<PseudoChain> chains;
  std::size_t iterations_run = 0;
};

inline std::vector<double> pseudo_column(std::span<const double> probs, bool hard) {
  std::vector<double> out(probs.begin(), probs.end());
  if (hard) {
    for (auto& v : out) v = v >= 0.5 ? 1.0 : 0.0;
  }
  return out;
}

inline FeatureMatrix append_pseudo(const FeatureMatrix& x, std::span<const double> column, bool hard) {
  return assemble_features({x, FeatureMatrix(x.rows(), BlockKind::Pseudo, 1, pseudo_column(column, hard))});
}

inline PseudoResult pseudo_label(const Learner& learner, const FeatureMatrix& x, std::span<const int> y,
                                 std::span<const LanguageTag> languages, const FoldAssignment& folds,
                                 std::span<const OofPredictions* const> candidates, const PseudoOptions& options,
                                 const FeatureMatrix* test = nullptr, std::span<const LanguageTag> test_languages = {},
                                 std::size_t threads = 1) {
  if (candidates.empty()) fail(ErrorKind::NoModels, "pseudo-labelling needs a prior stage");
  if (options.max_iters < 1) fail(ErrorKind::BadParams, "pseudo_max_iters must be positive");
  if (!(options.epsilon > 0.0)) fail(ErrorKind::BadParams, "pseudo_epsilon must be positive");
  const std::size_t n = x.rows();
  const std::size_t k = folds.k;
  for (const auto* candidate : candidates) {
    if (candidate->size() != n || candidate->views.size() != k) fail(ErrorKind::LengthMismatch, "prior misaligned");
    if (test && candidate->test.size() != test->rows()) fail(ErrorKind::LengthMismatch, "prior test predictions misaligned");
  }

  std::vector<std::vector<std::size_t>> in_fold(k);
  for (std::size_t i = 0; i < n; ++i) in_fold[folds.fold_of[i]].push_back(i);

  PseudoResult result;
  result.chains.resize(k);
  std::vector<FeatureMatrix> train_features(k), test_features(k);
  std::vector<std::vector<double>> best_view(k), best_test(k);
  std::vector<double> best_f1(k, -1.0);
  std::vector<std::uint8_t> active(k, 1);
  for (std::size_t j = 0; j < k; ++j) {
    auto& chain = result.chains[j];
    double prior_f1 = -1.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double f1 = view_f1(*candidates[c], j, y, options.averaging);
      if (f1 > prior_f1) {
        prior_f1 = f1;
        chain.prior = c;
      }
    }
    chain.f1.push_back(prior_f1);
    chain.columns.push_back(pseudo_column(candidates[chain.prior]->views[j], options.hard));
    train_features[j] = append_pseudo(x, candidates[chain.prior]->views[j], options.hard);
    if (test) test_features[j] = append_pseudo(*test, candidates[chain.prior]->test, options.hard);
  }

  for (std::size_t t = 1; t <= options.max_iters; ++t) {
    std::vector<std::pair<std::size_t, std::size_t>> tasks;  // (j, m); m == j is the fold model
    for (std::size_t j = 0; j < k; ++j) {
      if (!active[j]) continue;
      for (std::size_t m = 0; m < k; ++m) tasks.emplace_back(j, m);
    }
    if (tasks.empty()) break;
    result.iterations_run = t;

    std::vector<std::vector<double>> scores(tasks.size());
    std::vector<std::vector<double>> test_scores(tasks.size());
    std::vector<FoldModel> fold_models(tasks.size());
    parallel_for(tasks.size(), threads, [&](std::size_t task) {
      const auto [j, m] = tasks[task];
      const auto& features = train_features[j];
      if (m == j) {
        fold_models[task] = fit_fold_model(learner, features, y, languages, folds.rows_outside({j}));
        scores[task] = predict_fold_model(fold_models[task], features, languages, in_fold[j]);
        if (test) {
          test_scores[task] = predict_fold_model(fold_models[task], test_features[j], test_languages, all_rows(test->rows()));
        }
        return;
      }
      const auto rows = folds.rows_outside({j, m});
      if (rows.empty()) {
        scores[task].assign(in_fold[m].size(), kEmptyViewValue);
        return;
      }
      const auto model = fit_fold_model(learner, features, y, languages, rows);
      scores[task] = predict_fold_model(model, features, languages, in_fold[m]);
    });

    for (std::size_t first = 0; first < tasks.size(); first += k) {
      const std::size_t j = tasks[first].first;
      auto& chain = result.chains[j];
      std::vector<double> view(n, kEmptyViewValue);
      std::vector<double> test_view;
      for (std::size_t m = 0; m < k; ++m) {
        const std::size_t task = first + m;
        for (std::size_t r = 0; r < in_fold[m].size(); ++r) view[in_fold[m][r]] = scores[task][r];
        if (m == j) {
          chain.models.push_back(std::move(fold_models[task]));
          test_view = std::move(test_scores[task]);
        }
      }
      OofPredictions probe;
      probe.folds = folds;
      probe.views.assign(k, {});
      probe.views[j] = view;
      const double f1 = view_f1(probe, j, y, options.averaging);
      if (f1 > best_f1[j]) {
        best_f1[j] = f1;
        chain.best_iteration = t;
        best_view[j] = view;
        best_test[j] = test_view;
      }
      const double previous = chain.f1.back();
      chain.f1.push_back(f1);
      if (f1 - previous < options.epsilon || t == options.max_iters) {
        active[j] = 0;
        continue;
      }
      chain.columns.push_back(pseudo_column(view, options.hard));
      train_features[j] = append_pseudo(train_features[j], view, options.hard);
      if (test) test_features[j] = append_pseudo(test_features[j], test_view, options.hard);
    }
  }

  auto& out = result.predictions;
  out.producer = "pseudo";
  out.folds = folds;
  out.views = std::move(best_view);
  sync_probs(out);
  for (auto& chain : result.chains) chain.models.resize(chain.best_iteration);
  if (test) out.test = mean_of(best_test, test->rows());
  return result;
}

/// Replays the chains on new rows: each chain starts from its prior's test
/// probabilities and appends its own predictions iteration by iteration.
/// The result is the mean over chains of their best-iteration predictions.
inline std::vector<double> pseudo_predict(const std::vector<PseudoChain>& chains, const FeatureMatrix& x,
                                          std::span<const LanguageTag> languages,
                                          std::span<const std::vector<double>> prior_predictions, bool hard) {
  if (chains.empty()) fail(ErrorKind::NoModels, "no pseudo-label chains");
  const auto rows = all_rows(x.rows());
  std::vector<std::vector<double>> finals;
  for (const auto& chain : chains) {
    if (chain.prior >= prior_predictions.size()) fail(ErrorKind::ModelMismatch, "chain prior out of range");
    if (chain.models.empty()) fail(ErrorKind::ModelMismatch, "chain without models");
    FeatureMatrix features = append_pseudo(x, prior_predictions[chain.prior], hard);
    std::vector<double> scores;
    for (std::size_t t = 0; t < chain.models.size(); ++t) {
      scores = predict_fold_model(chain.models[t], features, languages, rows);
      if (t + 1 < chain.models.size()) features = append_pseudo(features, scores, hard);
    }
    finals.push_back(std::move(scores));
  }
  return mean_of(finals, x.rows());
}

}  // namespace abuse
