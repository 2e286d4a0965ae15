#include <gtest/gtest.h>

#include <string>

#include "abuse/config.hpp"
#include "test_util.hpp"

using namespace abuse;
using testutil::kind_of;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& error) {
    return error.what();
  }
  return {};
}

}  // namespace

TEST(Config, MinimalUsesDefaults) {
  const auto c = parse_config_text(R"({"train_path": "train.csv", "output_dir": "out"})", "/data");
  EXPECT_EQ(c.train_path, std::filesystem::path("/data/train.csv"));
  EXPECT_EQ(c.output_dir, std::filesystem::path("/data/out"));
  EXPECT_FALSE(c.test_path);
  EXPECT_EQ(c.pipeline.k, 10u);
  EXPECT_EQ(c.pipeline.min_language_samples, 50u);
  EXPECT_EQ(c.pipeline.pseudo_max_iters, 3u);
  EXPECT_EQ(c.pipeline.pseudo_epsilon, 1e-4);
  EXPECT_EQ(c.pipeline.ensemble_grid_step, 0.05);
  EXPECT_EQ(c.thresholds.grid_step, 0.01);
  EXPECT_EQ(c.tfidf_max_features, 500u);
  EXPECT_EQ(c.pca_components, 200u);
  EXPECT_EQ(c.max_len, 150u);
  EXPECT_EQ(c.gbdt.num_trees, 100);
  EXPECT_EQ(c.averaging, Averaging::Positive);
  EXPECT_TRUE(c.stages.clean && c.stages.transliterate && c.stages.tfidf && c.stages.metadata);
  EXPECT_FALSE(c.stages.pca || c.stages.oversample);
}

TEST(Config, AbsolutePathsAreKept) {
  const auto c = parse_config_text(R"({"train_path": "/abs/train.csv", "output_dir": "o"})", "/data");
  EXPECT_EQ(c.train_path, std::filesystem::path("/abs/train.csv"));
}

TEST(Config, FullDocument) {
  const auto c = parse_config_text(R"({
    "train_path": "t.csv", "output_dir": "o", "seed": 7,
    "stages": {"pseudo": false, "oversample": true},
    "tfidf": {"max_features": 50},
    "metadata": {"transform": "raw"},
    "gbdt": {"num_trees": 20, "learning_rate": 0.2},
    "pipeline": {"k": 5, "pseudo_mode": "hard"},
    "thresholds": {"grid_step": 0.05, "min_count": 10},
    "metrics": {"averaging": "macro"},
    "synth": {"n": 500, "noise_rate": 0.1, "languages": {"hi": 0.6, "ta": 0.4}}
  })");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_FALSE(c.stages.pseudo);
  EXPECT_TRUE(c.stages.oversample);
  EXPECT_EQ(c.tfidf_max_features, 50u);
  EXPECT_EQ(c.metadata_transform, MetadataTransform::Raw);
  EXPECT_EQ(c.gbdt.num_trees, 20);
  EXPECT_EQ(c.gbdt.learning_rate, 0.2);
  EXPECT_EQ(c.pipeline.k, 5u);
  EXPECT_TRUE(c.pipeline.pseudo_hard);
  EXPECT_EQ(c.thresholds.min_count, 10u);
  EXPECT_EQ(c.averaging, Averaging::Macro);
  EXPECT_EQ(c.synth.train.n, 500u);
  ASSERT_EQ(c.synth.train.languages.size(), 2u);
}

TEST(Config, ParseError) {
  EXPECT_EQ(kind_of([] { parse_config_text("{not json"); }), ErrorKind::ParseError);
}

TEST(Config, UnknownKeysAreNamed) {
  EXPECT_EQ(kind_of([] { parse_config_text(R"({"train_path": "a", "output_dir": "b", "bogus": 1})"); }),
            ErrorKind::SchemaError);
  EXPECT_NE(message_of(R"({"train_path": "a", "output_dir": "b", "bogus": 1})").find("bogus"), std::string::npos);
  EXPECT_NE(message_of(R"({"train_path": "a", "output_dir": "b", "gbdt": {"trees": 1}})").find("gbdt.trees"),
            std::string::npos);
}

TEST(Config, SchemaErrors) {
  EXPECT_EQ(kind_of([] { parse_config_text(R"({"output_dir": "b"})"); }), ErrorKind::SchemaError);
  EXPECT_EQ(kind_of([] { parse_config_text(R"({"train_path": 3, "output_dir": "b"})"); }), ErrorKind::SchemaError);
  EXPECT_EQ(kind_of([] { parse_config_text(R"({"train_path": "a", "output_dir": "b", "pipeline": {"k": -2}})"); }),
            ErrorKind::SchemaError);
  EXPECT_EQ(kind_of([] { parse_config_text(R"({"train_path": "a", "output_dir": "b", "stages": {"pca": 1}})"); }),
            ErrorKind::SchemaError);
  EXPECT_EQ(kind_of([] { parse_config_text(R"({"train_path": "a", "output_dir": "b", "metrics": {"averaging": "micro"}})"); }),
            ErrorKind::SchemaError);
}

TEST(Config, ConstraintErrors) {
  EXPECT_EQ(kind_of([] { parse_config_text(R"({"train_path": "a", "output_dir": "b", "stages": {"pca": true}})"); }),
            ErrorKind::ConstraintError);
  EXPECT_EQ(kind_of([] { parse_config_text(R"({"train_path": "a", "output_dir": "b", "thresholds": {"grid_step": 0.2}})"); }),
            ErrorKind::ConstraintError);
  EXPECT_EQ(kind_of([] { parse_config_text(R"({"train_path": "a", "output_dir": "b", "pipeline": {"k": 1}})"); }),
            ErrorKind::ConstraintError);
  EXPECT_EQ(kind_of([] { parse_config_text(R"({"train_path": "a", "output_dir": "b", "gbdt": {"max_bins": 1000}})"); }),
            ErrorKind::ConstraintError);
  EXPECT_EQ(kind_of([] {
              parse_config_text(R"({"train_path": "a", "output_dir": "b", "stages": {"tfidf": false, "metadata": false}})");
            }),
            ErrorKind::ConstraintError);
  // embeddings present: pca is fine
  EXPECT_NO_THROW(parse_config_text(
      R"({"train_path": "a", "output_dir": "b", "train_embeddings": "e.bin", "stages": {"pca": true}})"));
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { parse_config("/nonexistent/config.json"); }), ErrorKind::Io);
}
