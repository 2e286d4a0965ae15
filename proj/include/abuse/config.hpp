#pragma once

// Run configuration: one JSON document, validated strictly.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "abuse/corpus.hpp"
#include "abuse/error.hpp"
#include "abuse/features.hpp"
#include "abuse/gbdt.hpp"
#include "abuse/metrics.hpp"
#include "abuse/synth.hpp"
#include "abuse/thresholds.hpp"

namespace abuse {

struct StageToggles {
  bool clean = true;
  bool transliterate = true;
  bool oversample = false;
  bool tfidf = true;
  bool pca = false;
  bool metadata = true;
  bool language_wise = true;
  bool pseudo = true;
  bool ensemble = true;
  bool thresholds = true;
};

struct PipelineSettings {
  std::size_t k = 10;
  std::size_t min_language_samples = 50;
  std::size_t pseudo_max_iters = 3;
  double pseudo_epsilon = 1e-4;
  double ensemble_grid_step = 0.05;
  bool pseudo_hard = false;
};

struct ThresholdSettings {
  double grid_step = 0.01;
  std::size_t min_count = 50;
};

struct SynthSettings {
  SynthOptions train;
  std::size_t test_n = 0;
  std::size_t embedding_dim = 16;
  double embedding_separation = 3.0;
};

struct RunConfig {
  std::filesystem::path train_path;
  std::optional<std::filesystem::path> test_path;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> train_embeddings;
  std::optional<std::filesystem::path> test_embeddings;
  std::optional<std::filesystem::path> flips_path;
  std::uint64_t seed = 0;
  StageToggles stages;
  std::size_t max_len = 150;
  std::vector<std::string> languages;  // empty: built-in registry
  std::size_t tfidf_max_features = 500;
  std::size_t pca_components = 200;
  MetadataTransform metadata_transform = MetadataTransform::Log1p;
  GbdtParams gbdt;
  PipelineSettings pipeline;
  ThresholdSettings thresholds;
  Averaging averaging = Averaging::Positive;
  SynthSettings synth;

  LanguageRegistry registry() const {
    return languages.empty() ? LanguageRegistry::defaults() : LanguageRegistry(languages);
  }
};

namespace detail {

using json = nlohmann::json;

inline std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline void check_keys(const json& object, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!object.is_object()) fail(ErrorKind::SchemaError, "'" + where + "' must be an object");
  for (const auto& [key, value] : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail(ErrorKind::SchemaError, "unknown key '" + join_path(where, key) + "'");
    }
  }
}

inline const json* member(const json& object, std::string_view key) {
  const auto it = object.find(std::string(key));
  return it == object.end() ? nullptr : &*it;
}

inline void read_bool(const json& object, const std::string& where, std::string_view key, bool& out) {
  if (const auto* v = member(object, key)) {
    if (!v->is_boolean()) fail(ErrorKind::SchemaError, "'" + join_path(where, std::string(key)) + "' must be a boolean");
    out = v->get<bool>();
  }
}

inline void read_string(const json& object, const std::string& where, std::string_view key, std::string& out) {
  if (const auto* v = member(object, key)) {
    if (!v->is_string()) fail(ErrorKind::SchemaError, "'" + join_path(where, std::string(key)) + "' must be a string");
    out = v->get<std::string>();
  }
}

template <typename Unsigned>
inline void read_unsigned(const json& object, const std::string& where, std::string_view key, Unsigned& out) {
  if (const auto* v = member(object, key)) {
    if (!v->is_number_unsigned()) {
      fail(ErrorKind::SchemaError, "'" + join_path(where, std::string(key)) + "' must be a non-negative integer");
    }
    out = static_cast<Unsigned>(v->get<std::uint64_t>());
  }
}

inline void read_int(const json& object, const std::string& where, std::string_view key, int& out) {
  if (const auto* v = member(object, key)) {
    if (!v->is_number_integer()) fail(ErrorKind::SchemaError, "'" + join_path(where, std::string(key)) + "' must be an integer");
    out = v->get<int>();
  }
}

inline void read_real(const json& object, const std::string& where, std::string_view key, double& out) {
  if (const auto* v = member(object, key)) {
    if (!v->is_number()) fail(ErrorKind::SchemaError, "'" + join_path(where, std::string(key)) + "' must be a number");
    out = v->get<double>();
  }
}

inline void read_path(const json& object, std::string_view key, const std::filesystem::path& base,
                      std::optional<std::filesystem::path>& out) {
  if (const auto* v = member(object, key)) {
    if (!v->is_string()) fail(ErrorKind::SchemaError, "'" + std::string(key) + "' must be a string");
    std::filesystem::path p = v->get<std::string>();
    out = p.is_absolute() ? p : base / p;
  }
}

inline void constrain(bool ok, const std::string& message) {
  if (!ok) fail(ErrorKind::ConstraintError, message);
}

}  // namespace detail

/// Relative paths resolve against `base_dir` (the config file's directory).
inline RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir = {}) {
  using detail::json;
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& error) {
    fail(ErrorKind::ParseError, std::string("config is not valid JSON: ") + error.what());
  }
  detail::check_keys(root, "", {"train_path", "test_path", "output_dir", "train_embeddings", "test_embeddings",
                                "flips_path", "seed", "stages", "text", "languages", "tfidf", "pca", "metadata",
                                "gbdt", "pipeline", "thresholds", "metrics", "synth"});
  RunConfig c;
  std::optional<std::filesystem::path> path;
  detail::read_path(root, "train_path", base_dir, path);
  if (!path) fail(ErrorKind::SchemaError, "missing required key 'train_path'");
  c.train_path = *path;
  path.reset();
  detail::read_path(root, "output_dir", base_dir, path);
  if (!path) fail(ErrorKind::SchemaError, "missing required key 'output_dir'");
  c.output_dir = *path;
  detail::read_path(root, "test_path", base_dir, c.test_path);
  detail::read_path(root, "train_embeddings", base_dir, c.train_embeddings);
  detail::read_path(root, "test_embeddings", base_dir, c.test_embeddings);
  detail::read_path(root, "flips_path", base_dir, c.flips_path);
  detail::read_unsigned(root, "", "seed", c.seed);

  if (const auto* s = detail::member(root, "stages")) {
    detail::check_keys(*s, "stages", {"clean", "transliterate", "oversample", "tfidf", "pca", "metadata",
                                      "language_wise", "pseudo", "ensemble", "thresholds"});
    auto& t = c.stages;
    for (auto [key, field] : std::initializer_list<std::pair<std::string_view, bool*>>{
             {"clean", &t.clean}, {"transliterate", &t.transliterate}, {"oversample", &t.oversample},
             {"tfidf", &t.tfidf}, {"pca", &t.pca}, {"metadata", &t.metadata},
             {"language_wise", &t.language_wise}, {"pseudo", &t.pseudo}, {"ensemble", &t.ensemble},
             {"thresholds", &t.thresholds}}) {
      detail::read_bool(*s, "stages", key, *field);
    }
  }
  if (const auto* s = detail::member(root, "text")) {
    detail::check_keys(*s, "text", {"max_len"});
    detail::read_unsigned(*s, "text", "max_len", c.max_len);
  }
  if (const auto* s = detail::member(root, "languages")) {
    if (!s->is_array()) fail(ErrorKind::SchemaError, "'languages' must be an array of strings");
    for (const auto& v : *s) {
      if (!v.is_string()) fail(ErrorKind::SchemaError, "'languages' must be an array of strings");
      c.languages.push_back(v.get<std::string>());
    }
  }
  if (const auto* s = detail::member(root, "tfidf")) {
    detail::check_keys(*s, "tfidf", {"max_features"});
    detail::read_unsigned(*s, "tfidf", "max_features", c.tfidf_max_features);
  }
  if (const auto* s = detail::member(root, "pca")) {
    detail::check_keys(*s, "pca", {"components"});
    detail::read_unsigned(*s, "pca", "components", c.pca_components);
  }
  if (const auto* s = detail::member(root, "metadata")) {
    detail::check_keys(*s, "metadata", {"transform"});
    std::string transform = "log1p";
    detail::read_string(*s, "metadata", "transform", transform);
    if (transform == "log1p") {
      c.metadata_transform = MetadataTransform::Log1p;
    } else if (transform == "raw") {
      c.metadata_transform = MetadataTransform::Raw;
    } else {
      fail(ErrorKind::SchemaError, "'metadata.transform' must be \"log1p\" or \"raw\"");
    }
  }
  if (const auto* s = detail::member(root, "gbdt")) {
    detail::check_keys(*s, "gbdt", {"num_trees", "learning_rate", "max_leaves", "min_data_in_leaf", "lambda_l2",
                                    "max_bins", "feature_fraction", "bagging_fraction"});
    auto& g = c.gbdt;
    detail::read_int(*s, "gbdt", "num_trees", g.num_trees);
    detail::read_real(*s, "gbdt", "learning_rate", g.learning_rate);
    detail::read_int(*s, "gbdt", "max_leaves", g.max_leaves);
    detail::read_int(*s, "gbdt", "min_data_in_leaf", g.min_data_in_leaf);
    detail::read_real(*s, "gbdt", "lambda_l2", g.lambda_l2);
    detail::read_int(*s, "gbdt", "max_bins", g.max_bins);
    detail::read_real(*s, "gbdt", "feature_fraction", g.feature_fraction);
    detail::read_real(*s, "gbdt", "bagging_fraction", g.bagging_fraction);
  }
  if (const auto* s = detail::member(root, "pipeline")) {
    detail::check_keys(*s, "pipeline", {"k", "min_language_samples", "pseudo_max_iters", "pseudo_epsilon",
                                        "ensemble_grid_step", "pseudo_mode"});
    auto& p = c.pipeline;
    detail::read_unsigned(*s, "pipeline", "k", p.k);
    detail::read_unsigned(*s, "pipeline", "min_language_samples", p.min_language_samples);
    detail::read_unsigned(*s, "pipeline", "pseudo_max_iters", p.pseudo_max_iters);
    detail::read_real(*s, "pipeline", "pseudo_epsilon", p.pseudo_epsilon);
    detail::read_real(*s, "pipeline", "ensemble_grid_step", p.ensemble_grid_step);
    std::string mode = "soft";
    detail::read_string(*s, "pipeline", "pseudo_mode", mode);
    if (mode != "soft" && mode != "hard") fail(ErrorKind::SchemaError, "'pipeline.pseudo_mode' must be \"soft\" or \"hard\"");
    p.pseudo_hard = mode == "hard";
  }
  if (const auto* s = detail::member(root, "thresholds")) {
    detail::check_keys(*s, "thresholds", {"grid_step", "min_count"});
    detail::read_real(*s, "thresholds", "grid_step", c.thresholds.grid_step);
    detail::read_unsigned(*s, "thresholds", "min_count", c.thresholds.min_count);
  }
  if (const auto* s = detail::member(root, "metrics")) {
    detail::check_keys(*s, "metrics", {"averaging"});
    std::string averaging = "positive";
    detail::read_string(*s, "metrics", "averaging", averaging);
    if (averaging != "positive" && averaging != "macro" && averaging != "weighted") {
      fail(ErrorKind::SchemaError, "'metrics.averaging' must be \"positive\", \"macro\" or \"weighted\"");
    }
    c.averaging = parse_averaging(averaging);
  }
  if (const auto* s = detail::member(root, "synth")) {
    detail::check_keys(*s, "synth", {"n", "test_n", "languages", "noise_rate", "abusive_rate", "benign_vocab",
                                     "abusive_vocab", "conflicting_lexicons", "conflict_rate", "html_rate",
                                     "embedding_dim", "embedding_separation"});
    auto& t = c.synth;
    detail::read_unsigned(*s, "synth", "n", t.train.n);
    detail::read_unsigned(*s, "synth", "test_n", t.test_n);
    if (const auto* langs = detail::member(*s, "languages")) {
      if (!langs->is_object()) fail(ErrorKind::SchemaError, "'synth.languages' must map language codes to proportions");
      t.train.languages.clear();
      for (const auto& [code, share] : langs->items()) {
        if (!share.is_number()) fail(ErrorKind::SchemaError, "'synth.languages." + code + "' must be a number");
        t.train.languages.push_back({LanguageTag(code), share.get<double>()});
      }
    }
    detail::read_real(*s, "synth", "noise_rate", t.train.noise_rate);
    detail::read_real(*s, "synth", "abusive_rate", t.train.abusive_rate);
    detail::read_unsigned(*s, "synth", "benign_vocab", t.train.benign_vocab);
    detail::read_unsigned(*s, "synth", "abusive_vocab", t.train.abusive_vocab);
    detail::read_bool(*s, "synth", "conflicting_lexicons", t.train.conflicting_lexicons);
    detail::read_real(*s, "synth", "conflict_rate", t.train.conflict_rate);
    detail::read_real(*s, "synth", "html_rate", t.train.html_rate);
    detail::read_unsigned(*s, "synth", "embedding_dim", t.embedding_dim);
    detail::read_real(*s, "synth", "embedding_separation", t.embedding_separation);
  }

  detail::constrain(c.pipeline.k >= 2, "pipeline.k must be at least 2");
  detail::constrain(c.pipeline.pseudo_max_iters >= 1, "pipeline.pseudo_max_iters must be positive");
  detail::constrain(c.pipeline.pseudo_epsilon > 0.0, "pipeline.pseudo_epsilon must be positive");
  detail::constrain(c.pipeline.ensemble_grid_step > 0.0 && c.pipeline.ensemble_grid_step <= 1.0,
                    "pipeline.ensemble_grid_step must be in (0, 1]");
  detail::constrain(c.thresholds.grid_step > 0.0 && c.thresholds.grid_step <= 0.5, "thresholds.grid_step must be in (0, 0.5]");
  detail::constrain(c.max_len > 0, "text.max_len must be positive");
  detail::constrain(c.tfidf_max_features > 0, "tfidf.max_features must be positive");
  detail::constrain(c.pca_components > 0, "pca.components must be positive");
  detail::constrain(!c.stages.pca || c.train_embeddings.has_value(), "stage 'pca' requires train_embeddings");
  detail::constrain(!c.test_embeddings || c.train_embeddings, "test_embeddings given without train_embeddings");
  detail::constrain(!(c.train_embeddings && c.test_path) || c.test_embeddings.has_value(),
                    "train_embeddings with a test corpus requires test_embeddings");
  detail::constrain(c.stages.tfidf || c.stages.metadata || c.train_embeddings.has_value(),
                    "no feature source enabled (tfidf, metadata or embeddings)");
  try {
    threshold_grid(c.thresholds.grid_step);
  } catch (const Error& error) {
    fail(ErrorKind::ConstraintError, std::string("thresholds.grid_step: ") + error.what());
  }
  try {
    c.gbdt.validate();
  } catch (const Error& error) {
    fail(ErrorKind::ConstraintError, error.what());
  }
  return c;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path.string());
  } catch (const Error& error) {
    fail(ErrorKind::Io, error.what());
  }
  return parse_config_text(text, path.parent_path());
}

}  // namespace abuse
