#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "abuse/diagnostics.hpp"
#include "abuse/preprocess.hpp"
#include "abuse/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace abuse;
using testutil::kind_of;

namespace {

std::vector<std::vector<std::string>> parse_tsv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

GbdtParams small() {
  GbdtParams p;
  p.num_trees = 10;
  p.max_leaves = 8;
  p.min_data_in_leaf = 5;
  return p;
}

}  // namespace

TEST(FlipLabels, IsAnInvolution) {
  SynthOptions options;
  options.n = 100;
  const auto corpus = synthesize_corpus(options).corpus;
  const auto flipped = flip_labels(corpus);
  for (std::size_t i = 0; i < corpus.size(); ++i) EXPECT_EQ(*flipped[i].label, 1 - *corpus[i].label);
  EXPECT_EQ(flip_labels(flipped).labels(), corpus.labels());
  options.split = Split::Test;
  const auto unlabeled = synthesize_corpus(options).corpus;
  EXPECT_EQ(kind_of([&] { flip_labels(unlabeled); }), ErrorKind::MissingLabel);
}

TEST(NoiseProbe, PerfectPredictionsLeaveNothingFlagged) {
  SynthOptions options;
  options.n = 120;
  const auto corpus = prepare_text(synthesize_corpus(options).corpus, {});
  const auto x = metadata_matrix(corpus);
  std::vector<double> oof;
  for (int y : corpus.labels()) oof.push_back(y);
  const auto report = noise_probe(corpus, x, oof, ThresholdMap{}, small());
  EXPECT_TRUE(report.no_misclassified);
  EXPECT_EQ(report.misclassified, 0u);
  EXPECT_EQ(report.misclassified_fraction, 0.0);
  std::ostringstream out;
  write_noise_report(out, report);
  EXPECT_NE(out.str().find("no_misclassified=1\n"), std::string::npos);
}

TEST(NoiseProbe, OracleScoresFindExactlyThePlantedFlips) {
  SynthOptions options;
  options.n = 400;
  options.noise_rate = 0.1;
  const auto synth = synthesize_corpus(options);
  const auto corpus = prepare_text(synth.corpus, {});
  const auto x = metadata_matrix(corpus);
  std::vector<double> oof;
  for (int t : synth.true_labels) oof.push_back(t ? 0.9 : 0.1);
  const auto report = noise_probe(corpus, x, oof, ThresholdMap{}, small(), synth.flipped);
  EXPECT_EQ(report.misclassified, synth.flipped.size());
  EXPECT_EQ(report.misclassified, 40u);
  ASSERT_TRUE(report.flip_recall && report.flip_precision);
  EXPECT_EQ(*report.flip_recall, 1.0);
  EXPECT_EQ(*report.flip_precision, 1.0);
  EXPECT_EQ(report.subset_positive + report.subset_negative, report.misclassified);
  EXPECT_GE(report.subset_opposite_rate, 0.0);
  EXPECT_LE(report.subset_opposite_rate, 1.0);
}

TEST(NoiseProbe, RejectsMisalignedInputs) {
  SynthOptions options;
  options.n = 20;
  const auto corpus = synthesize_corpus(options).corpus;
  const auto x = metadata_matrix(corpus);
  const std::vector<double> oof(19, 0.5);
  EXPECT_EQ(kind_of([&] { noise_probe(corpus, x, oof, ThresholdMap{}, small()); }), ErrorKind::LengthMismatch);
}

TEST(Scatter, RowsColumnsAndSeparation) {
  SynthOptions options;
  options.n = 200;
  const auto synth = synthesize_corpus(options);
  const auto e = synthesize_embeddings(synth.true_labels, 12, 6.0, 3);
  std::ostringstream out;
  write_pca_scatter(out, e, synth.true_labels, synth.flipped);
  const auto rows = parse_tsv(out.str());
  ASSERT_EQ(rows.size(), 201u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"x", "y", "label", "flagged"}));
  std::vector<std::pair<double, double>> points;
  std::vector<int> labels;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    ASSERT_EQ(rows[r].size(), 4u);
    points.emplace_back(std::stod(rows[r][0]), std::stod(rows[r][1]));
    labels.push_back(std::stoi(rows[r][2]));
    EXPECT_TRUE(rows[r][3] == "0" || rows[r][3] == "1");
  }
  EXPECT_EQ(labels, synth.true_labels);
  EXPECT_GT(oracle::silhouette(points, labels), 0.5);

  std::ostringstream again;
  write_pca_scatter(again, e, synth.true_labels, synth.flipped);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Scatter, FlaggedColumnEmptyWithoutFlipSet) {
  const EmbeddingMatrix e(3, 2, {0.0, 0.0, 1.0, 1.0, 2.0, 0.5});
  const std::vector<int> labels{0, 1, 0};
  std::ostringstream out;
  write_pca_scatter(out, e, labels);
  const auto rows = parse_tsv(out.str());
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    ASSERT_EQ(rows[r].size(), 4u);
    EXPECT_EQ(rows[r][3], "");
  }
  const std::vector<int> short_labels{0};
  std::ostringstream sink;
  EXPECT_EQ(kind_of([&] { write_pca_scatter(sink, e, short_labels); }), ErrorKind::LengthMismatch);
}
