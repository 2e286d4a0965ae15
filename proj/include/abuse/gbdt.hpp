#pragma once

// Histogram gradient-boosted decision trees for binary logistic loss.
//
// Trees grow leaf-wise (best-first). Split gain and leaf values come from the
// second-order expansion of the loss:
//   leaf value  = -G / (H + lambda)
//   split gain  = 1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)]
// Gradients are evaluated in a sign-symmetric form, so fitting on 1 - y yields
// the same trees with every leaf value and the base score negated bit for bit.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "abuse/error.hpp"
#include "abuse/features.hpp"
#include "abuse/format.hpp"
#include "abuse/parallel.hpp"
#include "abuse/random.hpp"

namespace abuse {

struct GbdtParams {
  int num_trees = 100;
  double learning_rate = 0.1;
  int max_leaves = 31;
  int min_data_in_leaf = 20;
  double lambda_l2 = 1.0;
  int max_bins = 255;
  std::uint64_t seed = 0;
  // Subsampling is off unless set below 1.
  double feature_fraction = 1.0;
  double bagging_fraction = 1.0;
  // Histogram construction workers; the fitted model does not depend on it.
  std::size_t num_threads = 1;

  void validate() const {
    if (num_trees < 1) fail(ErrorKind::BadParams, "num_trees must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail(ErrorKind::BadParams, "learning_rate must be positive");
    if (max_leaves < 2) fail(ErrorKind::BadParams, "max_leaves must be >= 2");
    if (min_data_in_leaf < 1) fail(ErrorKind::BadParams, "min_data_in_leaf must be positive");
    if (!(lambda_l2 >= 0.0)) fail(ErrorKind::BadParams, "lambda_l2 must be non-negative");
    if (max_bins < 2 || max_bins > 255) fail(ErrorKind::BadParams, "max_bins must be in [2, 255]");
    if (!(feature_fraction > 0.0 && feature_fraction <= 1.0)) fail(ErrorKind::BadParams, "feature_fraction must be in (0, 1]");
    if (!(bagging_fraction > 0.0 && bagging_fraction <= 1.0)) fail(ErrorKind::BadParams, "bagging_fraction must be in (0, 1]");
  }
};

inline constexpr double kProbabilityFloor = 1e-15;

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Pointwise logistic loss -[y log p + (1-y) log(1-p)] with p = sigmoid(score),
/// written as a softplus so it stays finite for any score.
inline double logistic_loss(double score, int label) {
  const double z = label == 1 ? -score : score;
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

/// d loss / d score. For y = 1 this is p - 1 = -sigmoid(-score); for y = 0 it
/// is p = sigmoid(score). Negating the score and flipping y negates the result
/// exactly.
inline double logistic_gradient(double score, int label) {
  return label == 1 ? -sigmoid(-score) : sigmoid(score);
}

/// d^2 loss / d score^2 = p (1 - p), symmetric in the score's sign.
inline double logistic_hessian(double score) { return sigmoid(score) * sigmoid(-score); }

// ---------------------------------------------------------------------------
// Binning.

/// Per-feature ascending bin upper edges. bin(x) counts the edges strictly
/// below x, so x <= edge[b] exactly when bin(x) <= b.
class BinMapper {
 public:
  BinMapper() = default;
  explicit BinMapper(std::vector<std::vector<double>> edges) : edges_(std::move(edges)) {
    for (const auto& e : edges_) {
      for (std::size_t i = 1; i < e.size(); ++i) {
        if (!(e[i - 1] < e[i])) fail(ErrorKind::BadModelFile, "bin edges must be strictly increasing");
      }
    }
  }

  /// Quantile edges over distinct values. Up to max_bins distinct values get
  /// one bin each; otherwise bins are closed greedily at the count quantiles.
  static BinMapper fit(const FeatureMatrix& x, int max_bins) {
    std::vector<std::vector<double>> edges(x.width());
    std::vector<double> column(x.rows());
    for (std::size_t f = 0; f < x.width(); ++f) {
      for (std::size_t r = 0; r < x.rows(); ++r) column[r] = x.at(r, f);
      edges[f] = fit_column(column, static_cast<std::size_t>(max_bins));
    }
    return BinMapper(std::move(edges));
  }

  static std::vector<double> fit_column(std::vector<double> column, std::size_t max_bins) {
    std::sort(column.begin(), column.end());
    std::vector<double> values;
    std::vector<std::size_t> counts;
    for (double v : column) {
      if (values.empty() || values.back() != v) {
        values.push_back(v);
        counts.push_back(1);
      } else {
        ++counts.back();
      }
    }
    std::vector<double> edges;
    if (values.size() <= 1) return edges;
    const auto boundary = [&](std::size_t i) {
      const double mid = values[i] + (values[i + 1] - values[i]) / 2.0;
      return mid < values[i + 1] ? mid : values[i];
    };
    if (values.size() <= max_bins) {
      for (std::size_t i = 0; i + 1 < values.size(); ++i) edges.push_back(boundary(i));
      return edges;
    }
    const std::size_t n = column.size();
    std::size_t cumulative = 0;
    for (std::size_t i = 0; i + 1 < values.size() && edges.size() + 1 < max_bins; ++i) {
      cumulative += counts[i];
      const std::size_t target = (edges.size() + 1) * n / max_bins;
      if (cumulative >= target) edges.push_back(boundary(i));
    }
    return edges;
  }

  std::size_t num_features() const noexcept { return edges_.size(); }
  std::size_t num_bins(std::size_t feature) const { return edges_[feature].size() + 1; }
  const std::vector<double>& edges(std::size_t feature) const { return edges_[feature]; }
  const std::vector<std::vector<double>>& all_edges() const noexcept { return edges_; }

  std::uint8_t bin(std::size_t feature, double x) const {
    const auto& e = edges_[feature];
    return static_cast<std::uint8_t>(std::lower_bound(e.begin(), e.end(), x) - e.begin());
  }

  friend bool operator==(const BinMapper&, const BinMapper&) = default;

 private:
  std::vector<std::vector<double>> edges_;
};

/// Column-major bin indices: bins[f * rows + r].
struct BinnedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bins;

  std::uint8_t at(std::size_t r, std::size_t f) const { return bins[f * rows + r]; }
};

inline BinnedMatrix apply_bins(const BinMapper& mapper, const FeatureMatrix& x) {
  if (x.width() != mapper.num_features()) fail(ErrorKind::DimMismatch, "feature width differs from bin mapper");
  BinnedMatrix out{x.rows(), x.width(), std::vector<std::uint8_t>(x.rows() * x.width())};
  for (std::size_t f = 0; f < x.width(); ++f) {
    for (std::size_t r = 0; r < x.rows(); ++r) out.bins[f * x.rows() + r] = mapper.bin(f, x.at(r, f));
  }
  return out;
}

inline std::pair<BinnedMatrix, BinMapper> bin_features(const FeatureMatrix& x, int max_bins) {
  auto mapper = BinMapper::fit(x, max_bins);
  auto binned = apply_bins(mapper, x);
  return {std::move(binned), std::move(mapper)};
}

// ---------------------------------------------------------------------------
// Trees and models.

struct TreeNode {
  // Internal nodes: feature >= 0, rows with bin <= threshold_bin (equivalently
  // value <= threshold) go left. Leaves: feature == -1.
  int feature = -1;
  int threshold_bin = 0;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t num_leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  double predict(std::span<const double> row) const {
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) {
      const auto& node = nodes[at];
      at = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
    }
    return nodes[at].value;
  }

  double predict_binned(const BinnedMatrix& binned, std::size_t r) const {
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) {
      const auto& node = nodes[at];
      at = static_cast<std::size_t>(binned.at(r, static_cast<std::size_t>(node.feature)) <= node.threshold_bin ? node.left
                                                                                                                : node.right);
    }
    return nodes[at].value;
  }

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct GbdtModel {
  std::size_t num_features = 0;
  double base_score = 0.0;
  double learning_rate = 0.1;
  BinMapper bin_mapper;
  std::vector<Tree> trees;

  /// base_score + learning_rate * sum of tree outputs, accumulated tree by tree.
  double raw_score(std::span<const double> row) const {
    double score = base_score;
    for (const auto& tree : trees) score += learning_rate * tree.predict(row);
    return score;
  }

  friend bool operator==(const GbdtModel&, const GbdtModel&) = default;
};

/// Optional per-round diagnostics from fit_gbdt.
struct FitTrace {
  std::vector<double> loss;  // mean training loss; loss[0] before any tree
};

namespace detail {

inline constexpr double kMinSplitGain = 1e-15;

struct SplitCandidate {
  double gain = -std::numeric_limits<double>::infinity();
  int feature = -1;
  int bin = -1;
};

/// Row-wise storage of the bins that differ from each feature's most frequent
/// (default) bin. Histograms accumulate only these entries; the default bin
/// is recovered as leaf total minus the rest.
struct SparseBins {
  std::vector<std::uint8_t> default_bin;  // per feature
  std::vector<std::size_t> offset;        // features + 1, into flat histograms
  std::vector<std::size_t> row_start;     // rows + 1
  std::vector<std::uint32_t> feature;     // ascending within a row
  std::vector<std::uint8_t> bin;

  std::size_t features() const noexcept { return default_bin.size(); }
};

inline SparseBins sparse_bins(const BinnedMatrix& binned, const BinMapper& mapper) {
  SparseBins s;
  s.default_bin.assign(binned.cols, 0);
  s.offset.assign(binned.cols + 1, 0);
  std::vector<std::size_t> counts;
  for (std::size_t f = 0; f < binned.cols; ++f) {
    const std::size_t bins = mapper.num_bins(f);
    s.offset[f + 1] = s.offset[f] + bins;
    counts.assign(bins, 0);
    for (std::size_t r = 0; r < binned.rows; ++r) ++counts[binned.at(r, f)];
    s.default_bin[f] = static_cast<std::uint8_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  s.row_start.assign(binned.rows + 1, 0);
  for (std::size_t r = 0; r < binned.rows; ++r) {
    for (std::size_t f = 0; f < binned.cols; ++f) {
      const auto b = binned.at(r, f);
      if (b == s.default_bin[f]) continue;
      s.feature.push_back(static_cast<std::uint32_t>(f));
      s.bin.push_back(b);
    }
    s.row_start[r + 1] = s.feature.size();
  }
  return s;
}

struct LeafState {
  std::vector<std::uint32_t> rows;
  int node = 0;
  SplitCandidate best;
};

class TreeBuilder {
 public:
  TreeBuilder(const BinnedMatrix& binned, const SparseBins& sparse, const BinMapper& mapper, const GbdtParams& params,
              std::span<const double> grad, std::span<const double> hess, std::span<const std::uint8_t> feature_mask)
      : binned_(binned),
        sparse_(sparse),
        mapper_(mapper),
        params_(params),
        grad_(grad),
        hess_(hess),
        feature_mask_(feature_mask),
        hg_(sparse.offset.back()),
        hh_(sparse.offset.back()),
        hc_(sparse.offset.back()) {}

  Tree build(std::vector<std::uint32_t> rows) {
    Tree tree;
    tree.nodes.emplace_back();
    std::vector<LeafState> leaves;
    leaves.push_back(LeafState{std::move(rows), 0, {}});
    leaves.back().best = find_split(leaves.back().rows);
    tree.nodes[0].value = leaf_value(leaves.back().rows);

    while (static_cast<int>(leaves.size()) < params_.max_leaves) {
      std::size_t chosen = leaves.size();
      double best_gain = kMinSplitGain;
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (leaves[i].best.gain > best_gain) {
          best_gain = leaves[i].best.gain;
          chosen = i;
        }
      }
      if (chosen == leaves.size()) break;

      LeafState parent = std::move(leaves[chosen]);
      const auto feature = static_cast<std::size_t>(parent.best.feature);
      const auto bin = static_cast<std::uint8_t>(parent.best.bin);
      std::vector<std::uint32_t> left_rows, right_rows;
      for (auto r : parent.rows) (binned_.at(r, feature) <= bin ? left_rows : right_rows).push_back(r);

      const int left_node = static_cast<int>(tree.nodes.size());
      const int right_node = left_node + 1;
      TreeNode& split = tree.nodes[static_cast<std::size_t>(parent.node)];
      split.feature = parent.best.feature;
      split.threshold_bin = parent.best.bin;
      split.threshold = mapper_.edges(feature)[bin];
      split.left = left_node;
      split.right = right_node;
      split.value = 0.0;
      TreeNode left_leaf, right_leaf;
      left_leaf.value = leaf_value(left_rows);
      right_leaf.value = leaf_value(right_rows);
      tree.nodes.push_back(left_leaf);
      tree.nodes.push_back(right_leaf);

      LeafState left{std::move(left_rows), left_node, {}};
      LeafState right{std::move(right_rows), right_node, {}};
      left.best = find_split(left.rows);
      right.best = find_split(right.rows);
      leaves[chosen] = std::move(left);
      leaves.push_back(std::move(right));
    }
    return tree;
  }

 private:
  double leaf_value(const std::vector<std::uint32_t>& rows) const {
    double g = 0.0, h = 0.0;
    for (auto r : rows) {
      g += grad_[r];
      h += hess_[r];
    }
    return -g / (h + params_.lambda_l2);
  }

  // Evaluates thresholds of one feature. `slots` are its non-empty,
  // non-default histogram slots in ascending bin order; the default bin holds
  // whatever remains of the leaf. Empty bins are skipped: they repeat the
  // previous candidate, which cannot win a strict comparison.
  void scan_feature(std::size_t f, std::span<const std::size_t> slots, std::size_t n, double g_total, double h_total,
                    double parent_term, SplitCandidate& best) const {
    const auto min_leaf = static_cast<std::size_t>(params_.min_data_in_leaf);
    const double lambda = params_.lambda_l2;
    const std::size_t base = sparse_.offset[f];
    const std::size_t d = sparse_.default_bin[f];
    double g_rest = 0.0, h_rest = 0.0;
    std::size_t c_rest = 0;
    for (auto slot : slots) {
      g_rest += hg_[slot];
      h_rest += hh_[slot];
      c_rest += hc_[slot];
    }
    const std::size_t cd = n - c_rest;
    const double gd = cd ? g_total - g_rest : 0.0;
    const double hd = cd ? h_total - h_rest : 0.0;

    double gl = 0.0, hl = 0.0;
    std::size_t cl = 0;
    bool default_done = cd == 0;
    std::size_t i = 0;
    while (i < slots.size() || !default_done) {
      std::size_t b;
      if (!default_done && (i == slots.size() || slots[i] - base > d)) {
        b = d;
        gl += gd;
        hl += hd;
        cl += cd;
        default_done = true;
      } else {
        b = slots[i] - base;
        gl += hg_[slots[i]];
        hl += hh_[slots[i]];
        cl += hc_[slots[i]];
        ++i;
      }
      const std::size_t cr = n - cl;
      if (cl < min_leaf) continue;
      if (cr < min_leaf) break;
      const double gr = g_total - gl;
      const double hr = h_total - hl;
      const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_term);
      if (gain > best.gain) best = {gain, static_cast<int>(f), static_cast<int>(b)};
    }
  }

  SplitCandidate find_split(const std::vector<std::uint32_t>& rows) {
    const auto min_leaf = static_cast<std::size_t>(params_.min_data_in_leaf);
    if (rows.size() < 2 * min_leaf) return {};
    double g_total = 0.0, h_total = 0.0;
    for (auto r : rows) {
      g_total += grad_[r];
      h_total += hess_[r];
    }
    const double parent_term = g_total * g_total / (h_total + params_.lambda_l2);
    const std::size_t features = sparse_.features();

    // Features are split into contiguous ranges; each range accumulates its
    // own histogram slice in row order, so results do not depend on the
    // number of ranges. Only non-default bins are stored; slots touched by
    // the leaf are tracked so that small leaves cost little.
    const std::size_t chunks = std::max<std::size_t>(1, std::min(params_.num_threads, features));
    if (touched_.size() < chunks) touched_.resize(chunks);
    std::vector<SplitCandidate> per_chunk(chunks);
    parallel_for(chunks, params_.num_threads, [&](std::size_t c) {
      const std::size_t f_lo = c * features / chunks;
      const std::size_t f_hi = (c + 1) * features / chunks;
      auto& touched = touched_[c];
      touched.clear();
      for (auto r : rows) {
        auto e = sparse_.row_start[r];
        const auto end = sparse_.row_start[r + 1];
        if (f_lo > 0) {
          e = static_cast<std::size_t>(
              std::lower_bound(sparse_.feature.begin() + static_cast<std::ptrdiff_t>(e),
                               sparse_.feature.begin() + static_cast<std::ptrdiff_t>(end), static_cast<std::uint32_t>(f_lo)) -
              sparse_.feature.begin());
        }
        const double g = grad_[r], h = hess_[r];
        for (; e < end && sparse_.feature[e] < f_hi; ++e) {
          const auto slot = sparse_.offset[sparse_.feature[e]] + sparse_.bin[e];
          if (hc_[slot]++ == 0) touched.push_back(slot);
          hg_[slot] += g;
          hh_[slot] += h;
        }
      }
      const std::size_t lo = sparse_.offset[f_lo], hi = sparse_.offset[f_hi];
      if (touched.size() * 16 > hi - lo) {
        touched.clear();
        for (std::size_t slot = lo; slot < hi; ++slot) {
          if (hc_[slot] != 0) touched.push_back(slot);
        }
      } else {
        std::sort(touched.begin(), touched.end());
      }

      SplitCandidate best;
      std::size_t f = f_lo;
      for (std::size_t i = 0; i < touched.size();) {
        while (sparse_.offset[f + 1] <= touched[i]) ++f;
        std::size_t j = i;
        while (j < touched.size() && touched[j] < sparse_.offset[f + 1]) ++j;
        if (feature_mask_.empty() || feature_mask_[f]) scan_feature(f, {touched.data() + i, j - i}, rows.size(), g_total, h_total, parent_term, best);
        i = j;
      }
      for (auto slot : touched) {
        hg_[slot] = 0.0;
        hh_[slot] = 0.0;
        hc_[slot] = 0;
      }
      per_chunk[c] = best;
    });
    // Lowest feature index wins ties; within a feature the lowest bin already won.
    SplitCandidate best;
    for (const auto& candidate : per_chunk) {
      if (candidate.feature >= 0 && candidate.gain > best.gain) best = candidate;
    }
    return best;
  }

  const BinnedMatrix& binned_;
  const SparseBins& sparse_;
  const BinMapper& mapper_;
  const GbdtParams& params_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  std::span<const std::uint8_t> feature_mask_;
  std::vector<double> hg_, hh_;
  std::vector<std::size_t> hc_;
  std::vector<std::vector<std::size_t>> touched_;
};

inline double mean_loss(std::span<const double> scores, std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) total += logistic_loss(scores[i], labels[i]);
  return total / static_cast<double>(scores.size());
}

}  // namespace detail

/// Prior log-odds from class counts: log(p1) - log(p0) with both class rates
/// clamped to [1e-15, 1 - 1e-15]. Equals logit(clamped mean) and swaps sign
/// exactly when the labels are flipped.
inline double base_score_from_counts(std::size_t positives, std::size_t total) {
  const auto clamp = [](double p) { return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); };
  const double p1 = clamp(static_cast<double>(positives) / static_cast<double>(total));
  const double p0 = clamp(static_cast<double>(total - positives) / static_cast<double>(total));
  return std::log(p1) - std::log(p0);
}

inline GbdtModel fit_gbdt(const FeatureMatrix& x, std::span<const int> y, const GbdtParams& params,
                          FitTrace* trace = nullptr) {
  params.validate();
  const std::size_t n = x.rows();
  if (n == 0) fail(ErrorKind::EmptyTrainingSet, "no training rows");
  if (y.size() != n) fail(ErrorKind::LengthMismatch, "labels and rows differ in count");
  std::size_t positives = 0;
  for (int label : y) {
    if (label != 0 && label != 1) fail(ErrorKind::LabelOutOfRange, "labels must be 0 or 1");
    positives += static_cast<std::size_t>(label);
  }

  GbdtModel model;
  model.num_features = x.width();
  model.learning_rate = params.learning_rate;
  model.bin_mapper = BinMapper::fit(x, params.max_bins);
  model.base_score = base_score_from_counts(positives, n);
  const BinnedMatrix binned = apply_bins(model.bin_mapper, x);
  const detail::SparseBins sparse = detail::sparse_bins(binned, model.bin_mapper);

  std::vector<double> scores(n, model.base_score);
  std::vector<double> grad(n), hess(n);
  if (trace) trace->loss.assign(1, detail::mean_loss(scores, y));

  const bool bagging = params.bagging_fraction < 1.0;
  const bool column_sampling = params.feature_fraction < 1.0;
  Rng rng(params.seed);
  std::vector<std::uint8_t> feature_mask;

  for (int round = 0; round < params.num_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = logistic_gradient(scores[i], y[i]);
      hess[i] = logistic_hessian(scores[i]);
    }
    std::vector<std::uint32_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0u);
    if (bagging) {
      rng.shuffle(rows);
      rows.resize(std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(params.bagging_fraction * static_cast<double>(n)))));
      std::sort(rows.begin(), rows.end());
    }
    if (column_sampling) {
      std::vector<std::size_t> features(x.width());
      std::iota(features.begin(), features.end(), 0);
      rng.shuffle(features);
      const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(params.feature_fraction * static_cast<double>(x.width()))));
      feature_mask.assign(x.width(), 0);
      for (std::size_t i = 0; i < keep && i < features.size(); ++i) feature_mask[features[i]] = 1;
    }

    detail::TreeBuilder builder(binned, sparse, model.bin_mapper, params, grad, hess, feature_mask);
    Tree tree = builder.build(std::move(rows));
    // A tree that cannot split ends boosting.
    if (tree.nodes.size() == 1) break;
    for (std::size_t i = 0; i < n; ++i) scores[i] += params.learning_rate * tree.predict_binned(binned, i);
    model.trees.push_back(std::move(tree));
    if (trace) trace->loss.push_back(detail::mean_loss(scores, y));
  }
  return model;
}

inline std::vector<double> predict_raw(const GbdtModel& model, const FeatureMatrix& x) {
  if (x.width() != model.num_features) {
    fail(ErrorKind::DimMismatch, "model expects " + std::to_string(model.num_features) + " features, got " +
                                     std::to_string(x.width()));
  }
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = model.raw_score(x.row(r));
  return out;
}

inline double probability_from_score(double score) {
  return std::clamp(sigmoid(score), kProbabilityFloor, 1.0 - kProbabilityFloor);
}

/// Probabilities clamped to [1e-15, 1 - 1e-15], so always inside (0, 1).
inline std::vector<double> predict_proba(const GbdtModel& model, const FeatureMatrix& x) {
  auto out = predict_raw(model, x);
  for (auto& v : out) v = probability_from_score(v);
  return out;
}

// ---------------------------------------------------------------------------
// Text serialization. One `key=value` header per line, then one line per bin
// edge list and per tree node. Doubles use shortest round-trip formatting.
//
//   abuse-gbdt v1
//   num_features=3
//   base_score=-0.4054651081081644
//   learning_rate=0.1
//   num_trees=1
//   edges feature=0 count=2 0.5 1.5
//   tree index=0 nodes=3
//   split node=0 feature=0 bin=1 threshold=1.5 left=1 right=2
//   leaf node=1 value=-0.25
//   leaf node=2 value=0.75
//   end

namespace detail {

/// Value of `key=...` among whitespace-separated tokens.
inline std::string_view field(const std::vector<std::string_view>& tokens, std::string_view key) {
  for (auto token : tokens) {
    if (token.size() > key.size() && token.substr(0, key.size()) == key && token[key.size()] == '=') {
      return token.substr(key.size() + 1);
    }
  }
  fail(ErrorKind::BadModelFile, "missing field '" + std::string(key) + "'");
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace detail

inline void write_gbdt(std::ostream& out, const GbdtModel& model) {
  out << "abuse-gbdt v1\n";
  out << "num_features=" << model.num_features << '\n';
  out << "base_score=" << format_double(model.base_score) << '\n';
  out << "learning_rate=" << format_double(model.learning_rate) << '\n';
  out << "num_trees=" << model.trees.size() << '\n';
  for (std::size_t f = 0; f < model.bin_mapper.num_features(); ++f) {
    const auto& edges = model.bin_mapper.edges(f);
    out << "edges feature=" << f << " count=" << edges.size();
    for (double e : edges) out << ' ' << format_double(e);
    out << '\n';
  }
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const auto& nodes = model.trees[t].nodes;
    out << "tree index=" << t << " nodes=" << nodes.size() << '\n';
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& node = nodes[i];
      if (node.is_leaf()) {
        out << "leaf node=" << i << " value=" << format_double(node.value) << '\n';
      } else {
        out << "split node=" << i << " feature=" << node.feature << " bin=" << node.threshold_bin
            << " threshold=" << format_double(node.threshold) << " left=" << node.left << " right=" << node.right << '\n';
      }
    }
  }
  out << "end\n";
}

inline std::string serialize_gbdt(const GbdtModel& model) {
  std::ostringstream out;
  write_gbdt(out, model);
  return out.str();
}

inline GbdtModel parse_gbdt(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    if (end > start) lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  std::size_t at = 0;
  const auto next = [&]() -> std::string_view {
    if (at >= lines.size()) fail(ErrorKind::BadModelFile, "unexpected end of model");
    return lines[at++];
  };
  if (next() != "abuse-gbdt v1") fail(ErrorKind::BadModelFile, "missing 'abuse-gbdt v1' header");
  const auto header = [&](std::string_view key) {
    const auto line = next();
    if (line.substr(0, key.size() + 1) != std::string(key) + "=") fail(ErrorKind::BadModelFile, "expected " + std::string(key));
    return line.substr(key.size() + 1);
  };
  GbdtModel model;
  model.num_features = static_cast<std::size_t>(parse_int(header("num_features"), ErrorKind::BadModelFile));
  model.base_score = parse_double(header("base_score"), ErrorKind::BadModelFile);
  model.learning_rate = parse_double(header("learning_rate"), ErrorKind::BadModelFile);
  const auto num_trees = static_cast<std::size_t>(parse_int(header("num_trees"), ErrorKind::BadModelFile));

  std::vector<std::vector<double>> edges(model.num_features);
  for (std::size_t f = 0; f < model.num_features; ++f) {
    const auto tokens = detail::split_ws(next());
    if (tokens.empty() || tokens[0] != "edges") fail(ErrorKind::BadModelFile, "expected edges line");
    if (static_cast<std::size_t>(parse_int(detail::field(tokens, "feature"), ErrorKind::BadModelFile)) != f) {
      fail(ErrorKind::BadModelFile, "edges out of order");
    }
    const auto count = static_cast<std::size_t>(parse_int(detail::field(tokens, "count"), ErrorKind::BadModelFile));
    if (tokens.size() != 3 + count) fail(ErrorKind::BadModelFile, "edge count mismatch");
    for (std::size_t i = 0; i < count; ++i) edges[f].push_back(parse_double(tokens[3 + i], ErrorKind::BadModelFile));
  }
  model.bin_mapper = BinMapper(std::move(edges));

  for (std::size_t t = 0; t < num_trees; ++t) {
    const auto tokens = detail::split_ws(next());
    if (tokens.empty() || tokens[0] != "tree") fail(ErrorKind::BadModelFile, "expected tree line");
    const auto count = static_cast<std::size_t>(parse_int(detail::field(tokens, "nodes"), ErrorKind::BadModelFile));
    Tree tree;
    tree.nodes.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto node_tokens = detail::split_ws(next());
      if (node_tokens.empty()) fail(ErrorKind::BadModelFile, "empty node line");
      const auto index = static_cast<std::size_t>(parse_int(detail::field(node_tokens, "node"), ErrorKind::BadModelFile));
      if (index >= count) fail(ErrorKind::BadModelFile, "node index out of range");
      TreeNode& node = tree.nodes[index];
      if (node_tokens[0] == "leaf") {
        node.value = parse_double(detail::field(node_tokens, "value"), ErrorKind::BadModelFile);
      } else if (node_tokens[0] == "split") {
        node.feature = static_cast<int>(parse_int(detail::field(node_tokens, "feature"), ErrorKind::BadModelFile));
        node.threshold_bin = static_cast<int>(parse_int(detail::field(node_tokens, "bin"), ErrorKind::BadModelFile));
        node.threshold = parse_double(detail::field(node_tokens, "threshold"), ErrorKind::BadModelFile);
        node.left = static_cast<int>(parse_int(detail::field(node_tokens, "left"), ErrorKind::BadModelFile));
        node.right = static_cast<int>(parse_int(detail::field(node_tokens, "right"), ErrorKind::BadModelFile));
        const auto valid_child = [&](int c) { return c > 0 && static_cast<std::size_t>(c) < count; };
        if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= model.num_features || !valid_child(node.left) ||
            !valid_child(node.right)) {
          fail(ErrorKind::BadModelFile, "split node references are out of range");
        }
      } else {
        fail(ErrorKind::BadModelFile, "unknown node kind '" + std::string(node_tokens[0]) + "'");
      }
    }
    model.trees.push_back(std::move(tree));
  }
  if (next() != "end") fail(ErrorKind::BadModelFile, "missing end marker");
  return model;
}

inline void save_gbdt(const std::string& path, const GbdtModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
  write_gbdt(out, model);
}

inline GbdtModel load_gbdt(const std::string& path) { return parse_gbdt(read_file(path)); }

}  // namespace abuse
