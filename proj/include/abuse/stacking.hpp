#pragma once

// k-fold out-of-fold training, pooled or language-wise.

#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "abuse/corpus.hpp"
#include "abuse/error.hpp"
#include "abuse/features.hpp"
#include "abuse/folds.hpp"
#include "abuse/gbdt.hpp"
#include "abuse/oof.hpp"
#include "abuse/parallel.hpp"

namespace abuse {

/// How one fold model is trained. Language-wise learners fit one booster per
/// language plus a pooled booster that scores fallback and unseen languages.
struct Learner {
  GbdtParams params;
  bool language_wise = false;
  std::set<LanguageTag> fallback;  // routed to the pooled booster
};

struct FoldModel {
  std::map<LanguageTag, GbdtModel> by_language;
  GbdtModel pooled;

  const GbdtModel& model_for(const LanguageTag& language) const {
    const auto it = by_language.find(language);
    return it == by_language.end() ? pooled : it->second;
  }

  friend bool operator==(const FoldModel&, const FoldModel&) = default;
};

/// Languages with fewer than `min_samples` records.
inline std::set<LanguageTag> fallback_languages(std::span<const LanguageTag> languages, std::size_t min_samples) {
  std::map<LanguageTag, std::size_t> counts;
  for (const auto& language : languages) ++counts[language];
  std::set<LanguageTag> out;
  for (const auto& [language, count] : counts) {
    if (count < min_samples) out.insert(language);
  }
  return out;
}

inline FoldModel fit_fold_model(const Learner& learner, const FeatureMatrix& x, std::span<const int> y,
                                std::span<const LanguageTag> languages, std::span<const std::size_t> rows) {
  if (rows.empty()) fail(ErrorKind::FoldTooSmall, "empty training complement");
  const auto fit_rows = [&](std::span<const std::size_t> subset) {
    std::vector<int> labels(subset.size());
    for (std::size_t r = 0; r < subset.size(); ++r) labels[r] = y[subset[r]];
    return fit_gbdt(x.select_rows(subset), labels, learner.params);
  };
  FoldModel model;
  model.pooled = fit_rows(rows);
  if (learner.language_wise) {
    std::map<LanguageTag, std::vector<std::size_t>> groups;
    for (auto r : rows) {
      if (!learner.fallback.contains(languages[r])) groups[languages[r]].push_back(r);
    }
    for (const auto& [language, subset] : groups) model.by_language.emplace(language, fit_rows(subset));
  }
  return model;
}

inline std::vector<double> predict_fold_model(const FoldModel& model, const FeatureMatrix& x,
                                              std::span<const LanguageTag> languages,
                                              std::span<const std::size_t> rows) {
  std::vector<double> out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& booster = model.model_for(languages[rows[r]]);
    if (x.width() != booster.num_features) fail(ErrorKind::DimMismatch, "fold model feature width differs");
    out[r] = probability_from_score(booster.raw_score(x.row(rows[r])));
  }
  return out;
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: `fold-model v1`, then one `model scope=...` line before each
// booster's text.

inline void write_fold_model(std::ostream& out, const FoldModel& model) {
  out << "fold-model v1\n";
  out << "model scope=pooled\n";
  write_gbdt(out, model.pooled);
  for (const auto& [language, booster] : model.by_language) {
    out << "model scope=language language=" << language.code() << '\n';
    write_gbdt(out, booster);
  }
}

inline FoldModel parse_fold_model(std::string_view text) {
  constexpr std::string_view kHeader = "fold-model v1\n";
  if (text.substr(0, kHeader.size()) != kHeader) fail(ErrorKind::BadModelFile, "not a fold model");
  text.remove_prefix(kHeader.size());
  FoldModel model;
  bool pooled_seen = false;
  while (!text.empty()) {
    const auto line_end = text.find('\n');
    if (line_end == std::string_view::npos) fail(ErrorKind::BadModelFile, "truncated fold model");
    const auto header = text.substr(0, line_end);
    text.remove_prefix(line_end + 1);
    auto next = text.find("\nmodel scope=");
    const auto body = next == std::string_view::npos ? text : text.substr(0, next + 1);
    text.remove_prefix(body.size());
    auto booster = parse_gbdt(body);
    const auto tokens = detail::split_ws(header);
    if (tokens.empty() || tokens[0] != "model") fail(ErrorKind::BadModelFile, "expected a model section");
    const auto scope = detail::field(tokens, "scope");
    if (scope == "pooled") {
      model.pooled = std::move(booster);
      pooled_seen = true;
    } else if (scope == "language") {
      model.by_language.emplace(LanguageTag(std::string(detail::field(tokens, "language"))), std::move(booster));
    } else {
      fail(ErrorKind::BadModelFile, "unknown model scope");
    }
  }
  if (!pooled_seen) fail(ErrorKind::BadModelFile, "fold model without pooled booster");
  return model;
}

inline std::string serialize_fold_model(const FoldModel& model) {
  std::ostringstream out;
  write_fold_model(out, model);
  return out.str();
}

// ---------------------------------------------------------------------------

/// Arithmetic mean of equally long vectors, accumulated in index order.
inline std::vector<double> mean_of(const std::vector<std::vector<double>>& parts, std::size_t n) {
  std::vector<double> out(n, 0.0);
  if (parts.empty()) return out;
  for (const auto& part : parts) {
    for (std::size_t i = 0; i < n; ++i) out[i] += part[i];
  }
  for (auto& v : out) v /= static_cast<double>(parts.size());
  return out;
}

struct OofResult {
  std::vector<FoldModel> models;  // model j excludes fold j
  OofPredictions predictions;
};

/// Value used for a view entry when the rows outside both folds are empty
/// (only possible for k = 2): an uninformative, label-free constant.
inline constexpr double kEmptyViewValue = 0.5;

/// Trains model j on all folds except j and scores fold j with it. The views
/// come from pair models trained on all folds except {j, m}, which score fold
/// m for view j (and fold j for view m). Test probabilities, when test
/// features are given, are the mean of the k fold models.
inline OofResult train_oof(const Learner& learner, const FeatureMatrix& x, std::span<const int> y,
                           std::span<const LanguageTag> languages, const FoldAssignment& folds,
                           const FeatureMatrix* test = nullptr, std::span<const LanguageTag> test_languages = {},
                           std::size_t threads = 1, std::string producer = "pooled") {
  const std::size_t n = x.rows();
  const std::size_t k = folds.k;
  if (y.size() != n || languages.size() != n || folds.size() != n) {
    fail(ErrorKind::LengthMismatch, "features, labels, languages and folds differ in length");
  }
  if (test && test->rows() != test_languages.size()) fail(ErrorKind::LengthMismatch, "test languages misaligned");

  std::vector<std::vector<std::size_t>> in_fold(k);
  for (std::size_t i = 0; i < n; ++i) in_fold[folds.fold_of[i]].push_back(i);
  for (std::size_t j = 0; j < k; ++j) {
    if (in_fold[j].size() == n) fail(ErrorKind::FoldTooSmall, "fold " + std::to_string(j) + " holds every record");
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) pairs.emplace_back(a, b);
  }

  OofResult result;
  result.models.resize(k);
  auto& out = result.predictions;
  out.producer = std::move(producer);
  out.folds = folds;
  out.views.assign(k, std::vector<double>(n, kEmptyViewValue));
  std::vector<std::vector<double>> test_parts(k);
  std::vector<std::vector<double>> fold_scores(k);
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pair_scores(pairs.size());
  std::vector<std::uint8_t> pair_trained(pairs.size(), 0);

  parallel_for(k + pairs.size(), threads, [&](std::size_t task) {
    if (task < k) {
      const auto rows = folds.rows_outside({task});
      result.models[task] = fit_fold_model(learner, x, y, languages, rows);
      fold_scores[task] = predict_fold_model(result.models[task], x, languages, in_fold[task]);
      if (test) test_parts[task] = predict_fold_model(result.models[task], *test, test_languages, all_rows(test->rows()));
      return;
    }
    const auto [a, b] = pairs[task - k];
    const auto rows = folds.rows_outside({a, b});
    if (rows.empty()) return;
    const auto model = fit_fold_model(learner, x, y, languages, rows);
    pair_scores[task - k] = {predict_fold_model(model, x, languages, in_fold[a]),
                             predict_fold_model(model, x, languages, in_fold[b])};
    pair_trained[task - k] = 1;
  });

  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t r = 0; r < in_fold[j].size(); ++r) out.views[j][in_fold[j][r]] = fold_scores[j][r];
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a, b] = pairs[p];
    if (!pair_trained[p]) continue;
    for (std::size_t r = 0; r < in_fold[a].size(); ++r) out.views[b][in_fold[a][r]] = pair_scores[p].first[r];
    for (std::size_t r = 0; r < in_fold[b].size(); ++r) out.views[a][in_fold[b][r]] = pair_scores[p].second[r];
  }
  sync_probs(out);
  if (test) out.test = mean_of(test_parts, test->rows());
  return result;
}

struct LanguageWiseResult {
  OofResult oof;
  std::set<LanguageTag> fallback;
};

/// Language-wise out-of-fold training. Languages with fewer than
/// `min_language_samples` records are scored by the pooled booster that every
/// fold model also carries.
inline LanguageWiseResult train_oof_language_wise(const GbdtParams& params, const FeatureMatrix& x, std::span<const int> y,
                                                  std::span<const LanguageTag> languages, const FoldAssignment& folds,
                                                  std::size_t min_language_samples, const FeatureMatrix* test = nullptr,
                                                  std::span<const LanguageTag> test_languages = {},
                                                  std::size_t threads = 1) {
  Learner learner{params, true, fallback_languages(languages, min_language_samples)};
  LanguageWiseResult result;
  result.fallback = learner.fallback;
  result.oof = train_oof(learner, x, y, languages, folds, test, test_languages, threads, "language_wise");
  return result;
}

}  // namespace abuse
