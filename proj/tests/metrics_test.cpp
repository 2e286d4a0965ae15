#include <gtest/gtest.h>

#include <map>
#include <sstream>
#include <vector>

#include "abuse/ensemble.hpp"
#include "abuse/folds.hpp"
#include "abuse/metrics.hpp"
#include "abuse/random.hpp"
#include "abuse/synth.hpp"
#include "abuse/thresholds.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace abuse;
using testutil::kind_of;

// --- F1 ---------------------------------------------------------------------

TEST(F1, HandCounts) {
  // tp=1 fp=1 fn=1 tn=1
  const std::vector<int> truth{1, 0, 1, 0};
  const std::vector<int> pred{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(f1_score(truth, pred), 0.5);
  EXPECT_DOUBLE_EQ(f1_score(truth, pred, Averaging::Macro), 0.5);
  EXPECT_DOUBLE_EQ(f1_score(truth, pred, Averaging::Weighted), 0.5);
}

TEST(F1, AllWrongIsZero) {
  const std::vector<int> truth{1, 1, 0, 0};
  const std::vector<int> pred{0, 0, 1, 1};
  EXPECT_EQ(f1_score(truth, pred), 0.0);
  EXPECT_EQ(f1_score(truth, pred, Averaging::Macro), 0.0);
}

TEST(F1, UndefinedPositiveClassIsZero) {
  const std::vector<int> truth{0, 0, 0};
  const std::vector<int> pred{0, 0, 0};
  EXPECT_EQ(f1_score(truth, pred), 0.0);
  // negative class is perfect: macro = (0 + 1) / 2
  EXPECT_DOUBLE_EQ(f1_score(truth, pred, Averaging::Macro), 0.5);
  EXPECT_DOUBLE_EQ(f1_score(truth, pred, Averaging::Weighted), 1.0);
}

TEST(F1, MatchesOracleAndMacroIsFlipInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> truth(40), pred(40), truth_flip(40), pred_flip(40);
    for (std::size_t i = 0; i < 40; ++i) {
      truth[i] = rng.uniform() < 0.4 ? 1 : 0;
      pred[i] = rng.uniform() < 0.5 ? 1 : 0;
      truth_flip[i] = 1 - truth[i];
      pred_flip[i] = 1 - pred[i];
    }
    EXPECT_DOUBLE_EQ(f1_score(truth, pred), oracle::positive_f1(truth, pred));
    const double macro = (oracle::positive_f1(truth, pred) + oracle::positive_f1(truth_flip, pred_flip)) / 2.0;
    EXPECT_NEAR(f1_score(truth, pred, Averaging::Macro), macro, 1e-15);
    EXPECT_EQ(f1_score(truth, pred, Averaging::Macro), f1_score(truth_flip, pred_flip, Averaging::Macro));
  }
}

TEST(F1, WeightedUsesSupport) {
  // class 1: tp=2 fp=0 fn=1 -> 0.8 ; class 0: tp=1 fp=1 fn=0 -> 2/3 ; supports 3 and 1
  const std::vector<int> truth{1, 1, 1, 0};
  const std::vector<int> pred{1, 1, 0, 0};
  EXPECT_NEAR(f1_score(truth, pred, Averaging::Weighted), (3 * 0.8 + 1 * (2.0 / 3.0)) / 4.0, 1e-15);
}

TEST(F1, Errors) {
  const std::vector<int> a{1, 0};
  const std::vector<int> b{1};
  const std::vector<int> none;
  EXPECT_EQ(kind_of([&] { f1_score(a, b); }), ErrorKind::LengthMismatch);
  EXPECT_EQ(kind_of([&] { f1_score(none, none); }), ErrorKind::EmptyInput);
}

TEST(Metrics, ReportAndFalsePositiveRate) {
  const std::vector<int> truth{1, 1, 1, 1};
  const std::vector<int> pred{1, 1, 0, 0};
  const auto r = metric_report(truth, pred);
  EXPECT_EQ(r.false_positive_rate, 0.0);  // no negatives: 0/0 reads as 0
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 2.0 / 3.0);
  std::ostringstream out;
  write_metrics(out, r);
  EXPECT_NE(out.str().find("tp=2\n"), std::string::npos);
}

// --- thresholds -------------------------------------------------------------

namespace {

// Brute force over the grid written independently: highest t wins ties.
double oracle_threshold(const std::vector<double>& p, const std::vector<int>& y, int m) {
  double best_t = 0.0, best = -1.0;
  for (int i = m; i >= 0; --i) {
    const double t = static_cast<double>(i) / m;
    std::vector<int> pred(p.size());
    for (std::size_t r = 0; r < p.size(); ++r) pred[r] = p[r] >= t;
    const double f1 = oracle::positive_f1(y, pred);
    if (f1 > best) {
      best = f1;
      best_t = t;
    }
  }
  return best_t;
}

std::vector<LanguageTag> tags(std::size_t n, const std::string& code) { return std::vector<LanguageTag>(n, LanguageTag(code)); }

}  // namespace

TEST(Thresholds, GridIsEvenAndExact) {
  const auto grid = threshold_grid(0.01);
  ASSERT_EQ(grid.size(), 101u);
  EXPECT_EQ(grid[50], 0.5);
  EXPECT_EQ(grid.front(), 0.0);
  EXPECT_EQ(grid.back(), 1.0);
  EXPECT_EQ(kind_of([] { threshold_grid(0.2); }), ErrorKind::BadParams);  // m = 5
  EXPECT_EQ(kind_of([] { threshold_grid(0.03); }), ErrorKind::BadParams);
  EXPECT_EQ(kind_of([] { threshold_grid(0.0); }), ErrorKind::BadParams);
}

TEST(Thresholds, MatchesBruteForce) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> p(60);
    std::vector<int> y(60);
    for (std::size_t i = 0; i < 60; ++i) {
      y[i] = rng.uniform() < 0.3 ? 1 : 0;
      p[i] = std::clamp(0.35 * y[i] + 0.5 * rng.uniform(), 0.0, 1.0);
    }
    const auto map = tune_thresholds(p, y, tags(60, "hi"), 0.02);
    EXPECT_EQ(map.global_threshold, oracle_threshold(p, y, 50));
    EXPECT_EQ(map.per_language.at(LanguageTag("hi")), map.global_threshold);
  }
}

TEST(Thresholds, TieGoesToHighestThreshold) {
  // Every t in (0.2, 0.8] gives F1 = 1.
  const std::vector<double> p{0.2, 0.2, 0.8, 0.8};
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_EQ(tune_thresholds(p, y, tags(4, "hi"), 0.1).global_threshold, 0.8);
}

TEST(Thresholds, DecisionRuleIsInclusive) {
  ThresholdMap map;
  map.global_threshold = 0.3;
  const std::vector<double> p{0.3, std::nextafter(0.3, 0.0)};
  EXPECT_EQ(apply_thresholds(p, tags(2, "hi"), map), (std::vector<int>{1, 0}));
}

TEST(Thresholds, SmallLanguagesFallBackToGlobal) {
  std::vector<double> p;
  std::vector<int> y;
  std::vector<LanguageTag> langs;
  for (int i = 0; i < 20; ++i) {
    p.push_back(i % 2 ? 0.7 : 0.1);
    y.push_back(i % 2);
    langs.emplace_back("hi");
  }
  for (int i = 0; i < 3; ++i) {
    p.push_back(0.4);
    y.push_back(1);
    langs.emplace_back("ta");
  }
  const auto map = tune_thresholds(p, y, langs, 0.1, 5);
  EXPECT_TRUE(map.per_language.contains(LanguageTag("hi")));
  EXPECT_FALSE(map.per_language.contains(LanguageTag("ta")));
  EXPECT_EQ(map.threshold_for(LanguageTag("ta")), map.global_threshold);
  EXPECT_EQ(map.threshold_for(LanguageTag("zz")), map.global_threshold);
}

TEST(Thresholds, TunedF1NeverBelowHalfThreshold) {
  Rng rng(3);
  std::vector<double> p(200);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    y[i] = rng.uniform() < 0.2 ? 1 : 0;
    p[i] = std::clamp(0.2 * y[i] + 0.6 * rng.uniform(), 0.0, 1.0);
  }
  const auto langs = tags(200, "hi");
  const auto map = tune_thresholds(p, y, langs, 0.01);
  EXPECT_GE(f1_score(y, apply_thresholds(p, langs, map)), f1_score(y, threshold_labels(p, 0.5)));
}

TEST(Thresholds, RoundTrip) {
  ThresholdMap map;
  map.global_threshold = 0.43;
  map.per_language[LanguageTag("hi")] = 0.37;
  map.per_language[LanguageTag("ta")] = 0.61;
  std::ostringstream out;
  write_thresholds(out, map);
  EXPECT_EQ(parse_thresholds(out.str()), map);
  EXPECT_EQ(kind_of([] { parse_thresholds("hi=0.4\n"); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { parse_thresholds("global=1.5\n"); }), ErrorKind::ParseError);
}

// --- ensemble ---------------------------------------------------------------

TEST(Ensemble, BlendArithmetic) {
  const std::vector<double> w{0.5, 0.5};
  const std::vector<std::vector<double>> preds{{0.2}, {0.6}};
  EXPECT_NEAR(blend(w, preds)[0], 0.4, 1e-15);
}

TEST(Ensemble, SingleModelGetsAllWeight) {
  const std::vector<std::vector<double>> oof{{0.1, 0.9, 0.4}};
  const std::vector<int> y{0, 1, 1};
  const auto w = fit_ensemble_weights({"a"}, oof, y, 0.05);
  EXPECT_EQ(w.weights, (std::vector<double>{1.0}));
}

TEST(Ensemble, PerfectModelDominatesNoise) {
  Rng rng(17);
  const std::size_t n = 400;
  std::vector<int> y(n);
  std::vector<std::vector<double>> oof(2, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < 0.4 ? 1 : 0;
    oof[0][i] = y[i] ? 0.9 : 0.1;
    oof[1][i] = rng.uniform();
  }
  const auto w = fit_ensemble_weights({"a", "b"}, oof, y, 0.05);
  EXPECT_GE(w.weight_of("a"), 0.95);
  EXPECT_NEAR(w.weights[0] + w.weights[1], 1.0, 1e-12);

  // exhaustive grid oracle: nothing on the grid beats the chosen blend
  double best = 0.0;
  for (int u = 0; u <= 20; ++u) {
    std::vector<int> pred(n);
    for (std::size_t i = 0; i < n; ++i) pred[i] = (u / 20.0) * oof[0][i] + (1 - u / 20.0) * oof[1][i] >= 0.5;
    best = std::max(best, oracle::positive_f1(y, pred));
  }
  EXPECT_EQ(f1_score(y, threshold_labels(blend(w.weights, oof), 0.5)), best);
}

TEST(Ensemble, ThreeModelSearchNeverWorseThanBestSingle) {
  Rng rng(23);
  const std::size_t n = 300;
  std::vector<int> y(n);
  std::vector<std::vector<double>> oof(3, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < 0.5 ? 1 : 0;
    for (std::size_t m = 0; m < 3; ++m) oof[m][i] = std::clamp(0.5 + (y[i] ? 0.15 : -0.15) + 0.3 * rng.normal(), 0.0, 1.0);
  }
  const auto w = fit_ensemble_weights({"a", "b", "c"}, oof, y, 0.1);
  const double chosen = f1_score(y, threshold_labels(blend(w.weights, oof), 0.5));
  // the search never ends below the best single model
  for (std::size_t m = 0; m < 3; ++m) EXPECT_GE(chosen, f1_score(y, threshold_labels(oof[m], 0.5)));
  for (double v : w.weights) {
    EXPECT_GE(v, 0.0);
    EXPECT_NEAR(v * 10, std::round(v * 10), 1e-12);
  }
}

TEST(Ensemble, PredictRequiresMatchingModels) {
  EnsembleWeights w{{"a", "b"}, {0.25, 0.75}};
  std::map<std::string, std::vector<double>> preds{{"a", {0.0, 1.0}}, {"b", {1.0, 0.0}}};
  const auto p = ensemble_predict(w, preds);
  EXPECT_DOUBLE_EQ(p[0], 0.75);
  EXPECT_DOUBLE_EQ(p[1], 0.25);
  preds["c"] = {0.5, 0.5};
  EXPECT_EQ(kind_of([&] { ensemble_predict(w, preds); }), ErrorKind::ModelMismatch);
  preds.erase("c");
  preds.erase("b");
  preds["x"] = {0.5, 0.5};
  EXPECT_EQ(kind_of([&] { ensemble_predict(w, preds); }), ErrorKind::ModelMismatch);
  const std::vector<std::vector<double>> oof{{0.5}};
  const std::vector<int> y{1};
  EXPECT_EQ(kind_of([&] { fit_ensemble_weights({"a", "b"}, oof, y, 0.05); }), ErrorKind::ModelMismatch);
}

// --- folds ------------------------------------------------------------------

namespace {

Corpus labelled(std::size_t n, const std::vector<std::string>& langs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CommentRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    CommentRecord r;
    r.id = "r" + std::to_string(i);
    r.raw_text = "text";
    r.language = LanguageTag(langs[i % langs.size()]);
    r.label = rng.uniform() < 0.3 ? 1 : 0;
    records.push_back(std::move(r));
  }
  return Corpus(Split::Train, std::move(records));
}

}  // namespace

TEST(Folds, LeaveOneOutAtKEqualsN) {
  const auto corpus = labelled(10, {"hi"}, 1);
  const auto folds = make_folds(corpus, 10, 7);
  std::vector<std::size_t> sizes(10, 0);
  for (auto f : folds.fold_of) ++sizes[f];
  EXPECT_EQ(sizes, std::vector<std::size_t>(10, 1));
}

TEST(Folds, BadK) {
  const auto corpus = labelled(10, {"hi"}, 1);
  EXPECT_EQ(kind_of([&] { make_folds(corpus, 1, 0); }), ErrorKind::BadK);
  EXPECT_EQ(kind_of([&] { make_folds(corpus, 11, 0); }), ErrorKind::BadK);
}

TEST(Folds, StratifiedByLabelAndLanguage) {
  const auto corpus = labelled(1003, {"hi", "ta", "te"}, 4);
  const std::size_t k = 7;
  const auto folds = make_folds(corpus, k, 99);
  std::map<std::pair<int, std::string>, std::vector<std::size_t>> cell_counts;
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto& counts = cell_counts[{*corpus[i].label, corpus[i].language.code()}];
    counts.resize(k, 0);
    ++counts[folds.fold_of[i]];
    ++sizes[folds.fold_of[i]];
  }
  for (const auto& [cell, counts] : cell_counts) {
    EXPECT_LE(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()), 1u);
  }
  EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1u);
  EXPECT_EQ(make_folds(corpus, k, 99), folds);
  EXPECT_NE(make_folds(corpus, k, 100), folds);
}

TEST(Folds, GroupedCopiesShareAFold) {
  SynthOptions options;
  options.n = 200;
  options.html_rate = 1.0;
  const auto original = synthesize_corpus(options).corpus;
  std::vector<CommentRecord> cleaned_records = original.records();
  for (auto& r : cleaned_records) r.raw_text = clean_text(r.raw_text);
  const auto merged = merge_oversample(original, Corpus(Split::Train, cleaned_records));
  ASSERT_GT(merged.size(), original.size());
  const auto folds = make_folds(merged, 5, 3, true);
  std::map<std::string, std::size_t> fold_of_base;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const auto [it, inserted] = fold_of_base.emplace(base_id(merged[i].id), folds.fold_of[i]);
    if (!inserted) EXPECT_EQ(it->second, folds.fold_of[i]) << merged[i].id;
  }
}
