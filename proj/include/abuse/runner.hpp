#pragma once

// End-to-end runs behind the command-line tool: stage orchestration, the
// model bundle, and every artifact written under output_dir.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abuse/config.hpp"
#include "abuse/corpus.hpp"
#include "abuse/diagnostics.hpp"
#include "abuse/embeddings.hpp"
#include "abuse/ensemble.hpp"
#include "abuse/folds.hpp"
#include "abuse/format.hpp"
#include "abuse/metrics.hpp"
#include "abuse/parallel.hpp"
#include "abuse/preprocess.hpp"
#include "abuse/pseudo.hpp"
#include "abuse/stacking.hpp"
#include "abuse/synth.hpp"
#include "abuse/thresholds.hpp"

namespace abuse {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run report.

struct StageRecord {
  std::string stage;
  std::optional<double> oof_f1;
  double wall_ms = 0.0;
  std::vector<std::pair<std::string, std::string>> fields;
};

struct RunReport {
  std::string subcommand;
  Averaging averaging = Averaging::Positive;
  std::vector<StageRecord> stages;

  /// `stage=<name> oof_f1=<v|NA> wall_ms=<t> key=value...`, one line per stage.
  void write(std::ostream& out) const {
    out << "run_report v1\n"
        << "subcommand=" << subcommand << '\n'
        << "averaging=" << to_string(averaging) << '\n';
    for (const auto& s : stages) {
      out << "stage=" << s.stage << " oof_f1=" << (s.oof_f1 ? format_double(*s.oof_f1) : std::string("NA"))
          << " wall_ms=" << format_fixed(s.wall_ms, 1);
      for (const auto& [key, value] : s.fields) out << ' ' << key << '=' << value;
      out << '\n';
    }
  }
};

/// Tracks the stage in progress so a failure can be attributed to it.
class StageClock {
 public:
  explicit StageClock(RunReport& report) : report_(report) {}

  void begin(std::string name) {
    current_ = std::move(name);
    start_ = std::chrono::steady_clock::now();
  }

  StageRecord& end(std::optional<double> oof_f1 = std::nullopt) {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    report_.stages.push_back({current_, oof_f1, std::chrono::duration<double, std::milli>(elapsed).count(), {}});
    return report_.stages.back();
  }

  const std::string& current() const noexcept { return current_; }

 private:
  RunReport& report_;
  std::string current_ = "config";
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// Model bundle.

struct PipelineModel {
  TextOptions text;
  FeatureTransform features;
  std::vector<std::string> stack_ids;  // stacking stages in run order
  std::map<std::string, std::vector<FoldModel>> fold_models;
  std::set<LanguageTag> fallback;
  std::vector<PseudoChain> chains;  // empty without the pseudo stage
  bool pseudo_hard = false;
  std::optional<EnsembleWeights> ensemble;
  std::string final_stage;
  std::optional<ThresholdMap> thresholds;
};

namespace detail {

using json = nlohmann::json;

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

inline json feature_settings_json(const FeatureSettings& s) {
  return {{"tfidf", s.tfidf},
          {"max_features", s.max_features},
          {"max_len", s.max_len},
          {"embeddings", s.embeddings},
          {"pca", s.pca},
          {"pca_components", s.pca_components},
          {"metadata", s.metadata},
          {"metadata_transform", s.metadata_transform == MetadataTransform::Log1p ? "log1p" : "raw"}};
}

inline FeatureSettings feature_settings_from(const json& j) {
  FeatureSettings s;
  s.tfidf = j.at("tfidf").get<bool>();
  s.max_features = j.at("max_features").get<std::size_t>();
  s.max_len = j.at("max_len").get<std::size_t>();
  s.embeddings = j.at("embeddings").get<bool>();
  s.pca = j.at("pca").get<bool>();
  s.pca_components = j.at("pca_components").get<std::size_t>();
  s.metadata = j.at("metadata").get<bool>();
  s.metadata_transform = j.at("metadata_transform").get<std::string>() == "raw" ? MetadataTransform::Raw
                                                                                 : MetadataTransform::Log1p;
  return s;
}

inline std::string fold_model_file(const std::string& stage, std::size_t j) {
  return stage + "_fold" + std::to_string(j) + ".txt";
}

inline std::string chain_model_file(std::size_t j, std::size_t t) {
  return "pseudo_chain" + std::to_string(j) + "_iter" + std::to_string(t + 1) + ".txt";
}

}  // namespace detail

/// Directory bundle: manifest.json plus one text file per fold model.
inline void save_pipeline_model(const fs::path& dir, const PipelineModel& model) {
  using detail::json;
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "abuse-model v1";
  manifest["text"] = {{"clean", model.text.clean}, {"transliterate", model.text.transliterate}};
  manifest["features"] = detail::feature_settings_json(model.features.settings);
  if (const auto& v = model.features.vocabulary) {
    manifest["vocabulary"] = {{"terms", v->terms()}, {"doc_freq", v->doc_freq()}, {"n_docs", v->n_docs()}};
  }
  manifest["embedding_dim"] = model.features.embedding_dim;
  if (const auto& p = model.features.pca) {
    manifest["pca"] = {{"mean", p->mean}, {"components", p->components}, {"explained_variance", p->explained_variance}};
  }
  manifest["stack_ids"] = model.stack_ids;
  json folds = json::object();
  for (const auto& [stage, models] : model.fold_models) {
    folds[stage] = models.size();
    for (std::size_t j = 0; j < models.size(); ++j) {
      detail::write_text(dir / detail::fold_model_file(stage, j), serialize_fold_model(models[j]));
    }
  }
  manifest["fold_models"] = folds;
  std::vector<std::string> fallback;
  for (const auto& language : model.fallback) fallback.push_back(language.code());
  manifest["fallback"] = fallback;
  json chains = json::array();
  for (std::size_t j = 0; j < model.chains.size(); ++j) {
    const auto& chain = model.chains[j];
    chains.push_back({{"prior", chain.prior}, {"best_iteration", chain.best_iteration}, {"f1", chain.f1}});
    for (std::size_t t = 0; t < chain.models.size(); ++t) {
      detail::write_text(dir / detail::chain_model_file(j, t), serialize_fold_model(chain.models[t]));
    }
  }
  manifest["pseudo_chains"] = chains;
  manifest["pseudo_hard"] = model.pseudo_hard;
  if (model.ensemble) manifest["ensemble"] = {{"ids", model.ensemble->ids}, {"weights", model.ensemble->weights}};
  manifest["final_stage"] = model.final_stage;
  if (model.thresholds) {
    std::ostringstream t;
    write_thresholds(t, *model.thresholds);
    manifest["thresholds"] = t.str();
  }
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline PipelineModel load_pipeline_model(const fs::path& dir) {
  using detail::json;
  PipelineModel model;
  try {
    const auto manifest = json::parse(read_file((dir / "manifest.json").string()));
    if (manifest.at("format") != "abuse-model v1") fail(ErrorKind::BadModelFile, "unknown model bundle format");
    model.text.clean = manifest.at("text").at("clean").get<bool>();
    model.text.transliterate = manifest.at("text").at("transliterate").get<bool>();
    model.features.settings = detail::feature_settings_from(manifest.at("features"));
    if (manifest.contains("vocabulary")) {
      const auto& v = manifest["vocabulary"];
      model.features.vocabulary = Vocabulary(v.at("terms").get<std::vector<std::string>>(),
                                             v.at("doc_freq").get<std::vector<std::size_t>>(),
                                             v.at("n_docs").get<std::size_t>());
    }
    model.features.embedding_dim = manifest.at("embedding_dim").get<std::size_t>();
    if (manifest.contains("pca")) {
      const auto& p = manifest["pca"];
      model.features.pca = PcaModel{p.at("mean").get<std::vector<double>>(), p.at("components").get<std::vector<double>>(),
                                    p.at("explained_variance").get<std::vector<double>>()};
    }
    model.stack_ids = manifest.at("stack_ids").get<std::vector<std::string>>();
    for (const auto& [stage, count] : manifest.at("fold_models").items()) {
      auto& models = model.fold_models[stage];
      for (std::size_t j = 0; j < count.get<std::size_t>(); ++j) {
        models.push_back(parse_fold_model(read_file((dir / detail::fold_model_file(stage, j)).string())));
      }
    }
    for (const auto& code : manifest.at("fallback")) model.fallback.insert(LanguageTag(code.get<std::string>()));
    const auto& chains = manifest.at("pseudo_chains");
    for (std::size_t j = 0; j < chains.size(); ++j) {
      PseudoChain chain;
      chain.prior = chains[j].at("prior").get<std::size_t>();
      chain.best_iteration = chains[j].at("best_iteration").get<std::size_t>();
      chain.f1 = chains[j].at("f1").get<std::vector<double>>();
      for (std::size_t t = 0; t < chain.best_iteration; ++t) {
        chain.models.push_back(parse_fold_model(read_file((dir / detail::chain_model_file(j, t)).string())));
      }
      model.chains.push_back(std::move(chain));
    }
    model.pseudo_hard = manifest.at("pseudo_hard").get<bool>();
    if (manifest.contains("ensemble")) {
      model.ensemble = EnsembleWeights{manifest["ensemble"].at("ids").get<std::vector<std::string>>(),
                                       manifest["ensemble"].at("weights").get<std::vector<double>>()};
    }
    model.final_stage = manifest.at("final_stage").get<std::string>();
    if (manifest.contains("thresholds")) model.thresholds = parse_thresholds(manifest["thresholds"].get<std::string>());
  } catch (const json::exception& error) {
    fail(ErrorKind::BadModelFile, std::string("malformed model bundle: ") + error.what());
  }
  return model;
}

/// Test-time probabilities of every stage the model carries, keyed by stage id.
inline std::map<std::string, std::vector<double>> predict_stages(const PipelineModel& model, const FeatureMatrix& x,
                                                                 std::span<const LanguageTag> languages) {
  std::map<std::string, std::vector<double>> out;
  const auto rows = all_rows(x.rows());
  std::vector<std::vector<double>> priors;
  for (const auto& id : model.stack_ids) {
    const auto& models = model.fold_models.at(id);
    std::vector<std::vector<double>> parts;
    for (const auto& m : models) parts.push_back(predict_fold_model(m, x, languages, rows));
    out[id] = mean_of(parts, x.rows());
    priors.push_back(out[id]);
  }
  if (!model.chains.empty()) out["pseudo"] = pseudo_predict(model.chains, x, languages, priors, model.pseudo_hard);
  if (model.ensemble) {
    std::map<std::string, std::vector<double>> members;
    for (const auto& id : model.ensemble->ids) members[id] = out.at(id);
    out["ensemble"] = ensemble_predict(*model.ensemble, members);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Delimited outputs.

inline void write_probabilities(const fs::path& path, const Corpus& corpus, std::span<const double> probs) {
  std::ostringstream out;
  out << "id,probability\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) out << csv::quote(corpus[i].id) << ',' << format_double(probs[i]) << '\n';
  detail::write_text(path, out.str());
}

inline void write_labels(const fs::path& path, const Corpus& corpus, std::span<const int> labels) {
  std::ostringstream out;
  out << "id,label\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) out << csv::quote(corpus[i].id) << ',' << labels[i] << '\n';
  detail::write_text(path, out.str());
}

/// One record id per line.
inline std::vector<std::string> read_id_list(const fs::path& path) {
  std::vector<std::string> ids;
  std::istringstream in(read_file(path.string()));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Stages.

struct PreparedData {
  Corpus train;
  std::optional<Corpus> test;
  std::optional<EmbeddingMatrix> train_embeddings;
  std::optional<EmbeddingMatrix> test_embeddings;
  bool oversampled = false;
};

inline TextOptions text_options(const RunConfig& c) { return {c.stages.clean, c.stages.transliterate}; }

inline FeatureSettings feature_settings(const RunConfig& c) {
  FeatureSettings s;
  s.tfidf = c.stages.tfidf;
  s.max_features = c.tfidf_max_features;
  s.max_len = c.max_len;
  s.embeddings = c.train_embeddings.has_value();
  s.pca = c.stages.pca;
  s.pca_components = c.pca_components;
  s.metadata = c.stages.metadata;
  s.metadata_transform = c.metadata_transform;
  return s;
}

inline void check_paths_exist(const RunConfig& c, bool need_train, bool need_test) {
  const auto check = [](const fs::path& p) {
    if (!fs::exists(p)) fail(ErrorKind::ConstraintError, "referenced path does not exist: " + p.string());
  };
  if (need_train) check(c.train_path);
  if (need_train && c.train_embeddings) check(*c.train_embeddings);
  if (need_test && c.test_path) check(*c.test_path);
  if (need_test && c.test_embeddings) check(*c.test_embeddings);
  if (c.flips_path) check(*c.flips_path);
}

/// Load, clean, transliterate and (optionally) oversample.
inline PreparedData prepare_data(const RunConfig& c, StageClock& clock, bool with_test) {
  const auto registry = c.registry();
  const auto text = text_options(c);
  PreparedData d;

  clock.begin("load");
  const Corpus original = load_corpus(c.train_path.string(), Split::Train, registry);
  Corpus train = original;
  std::optional<Corpus> test;
  if (with_test && c.test_path) test = load_corpus(c.test_path->string(), Split::Test, registry);
  if (c.train_embeddings) d.train_embeddings = load_embeddings(c.train_embeddings->string(), train.size());
  if (test && c.test_embeddings) d.test_embeddings = load_embeddings(c.test_embeddings->string(), test->size());
  clock.end().fields = {{"train_records", std::to_string(train.size())},
                        {"test_records", std::to_string(test ? test->size() : 0)}};

  // Cleaning and transliteration are per-record maps; they run together but
  // are reported as separate stages.
  TextOptions applied{false, false};
  if (c.stages.clean) {
    clock.begin("clean");
    applied.clean = true;
    train = prepare_text(train, applied);
    if (test) test = prepare_text(*test, applied);
    clock.end();
  }
  if (c.stages.transliterate) {
    clock.begin("transliterate");
    applied.transliterate = true;
    train = prepare_text(train, applied);
    if (test) test = prepare_text(*test, applied);
    clock.end();
  }
  if (!c.stages.clean && !c.stages.transliterate) {
    train = prepare_text(train, applied);
    if (test) test = prepare_text(*test, applied);
  }
  if (c.stages.oversample) {
    clock.begin("oversample");
    const std::size_t n = train.size();
    train = oversample(original, text);
    if (d.train_embeddings) {
      std::vector<double> doubled = d.train_embeddings->values();
      doubled.insert(doubled.end(), d.train_embeddings->values().begin(), d.train_embeddings->values().end());
      d.train_embeddings = EmbeddingMatrix(2 * n, d.train_embeddings->dim(), std::move(doubled));
    }
    d.oversampled = true;
    clock.end().fields = {{"records", std::to_string(train.size())}};
  }
  d.train = std::move(train);
  d.test = std::move(test);
  return d;
}

struct TrainOutcome {
  PreparedData data;
  FeatureMatrix x;
  std::optional<FeatureMatrix> test_x;
  std::vector<int> y;
  std::vector<LanguageTag> languages;
  FoldAssignment folds;
  std::map<std::string, OofPredictions> stages;  // by producer id
  std::string final_stage;
  PipelineModel model;
  ThresholdMap thresholds;  // tuned, or the 0.5 default when disabled
};

inline double oof_score(const OofPredictions& oof, std::span<const int> y, Averaging averaging) {
  return oof_f1(oof, y, averaging);
}

/// featurize -> stack -> pseudo -> ensemble -> thresholds.
inline TrainOutcome train_pipeline(const RunConfig& c, StageClock& clock, bool with_test) {
  const std::size_t threads = configured_threads();
  TrainOutcome out;
  out.data = prepare_data(c, clock, with_test);
  const auto& train = out.data.train;
  const auto& test = out.data.test;

  clock.begin("featurize");
  out.model.text = text_options(c);
  out.model.features = fit_feature_transform(feature_settings(c), train, out.data.train_embeddings ? &*out.data.train_embeddings : nullptr);
  out.x = apply_feature_transform(out.model.features, train, out.data.train_embeddings ? &*out.data.train_embeddings : nullptr);
  if (test) {
    out.test_x = apply_feature_transform(out.model.features, *test, out.data.test_embeddings ? &*out.data.test_embeddings : nullptr);
  }
  out.y = train.labels();
  out.languages = train.languages();
  out.folds = make_folds(train, c.pipeline.k, c.seed, out.data.oversampled);
  clock.end().fields = {{"width", std::to_string(out.x.width())}, {"folds", std::to_string(c.pipeline.k)}};

  GbdtParams params = c.gbdt;
  params.seed = c.seed;
  params.num_threads = 1;
  const FeatureMatrix* test_x = out.test_x ? &*out.test_x : nullptr;
  std::vector<LanguageTag> test_languages;
  if (test) test_languages = test->languages();

  clock.begin("stack");
  {
    auto pooled = train_oof(Learner{params}, out.x, out.y, out.languages, out.folds, test_x, test_languages, threads, "pooled");
    out.model.stack_ids.push_back("pooled");
    out.model.fold_models["pooled"] = std::move(pooled.models);
    out.stages.emplace("pooled", std::move(pooled.predictions));
    out.final_stage = "pooled";
    auto& record = clock.end(oof_score(out.stages.at("pooled"), out.y, c.averaging));
    record.fields = {{"producer", "pooled"}};
  }
  if (c.stages.language_wise) {
    clock.begin("stack");
    auto wise = train_oof_language_wise(params, out.x, out.y, out.languages, out.folds, c.pipeline.min_language_samples,
                                        test_x, test_languages, threads);
    out.model.stack_ids.push_back("language_wise");
    out.model.fold_models["language_wise"] = std::move(wise.oof.models);
    out.model.fallback = wise.fallback;
    out.stages.emplace("language_wise", std::move(wise.oof.predictions));
    out.final_stage = "language_wise";
    auto& record = clock.end(oof_score(out.stages.at("language_wise"), out.y, c.averaging));
    std::string flags;
    for (const auto& language : wise.fallback) flags += (flags.empty() ? "" : ",") + language.code();
    record.fields = {{"producer", "language_wise"}, {"fallback", flags.empty() ? "none" : flags}};
  }

  if (c.stages.pseudo) {
    clock.begin("pseudo");
    std::vector<const OofPredictions*> candidates;
    for (const auto& id : out.model.stack_ids) candidates.push_back(&out.stages.at(id));
    Learner learner{params, c.stages.language_wise, out.model.fallback};
    PseudoOptions options{c.pipeline.pseudo_max_iters, c.pipeline.pseudo_epsilon, c.pipeline.pseudo_hard, c.averaging};
    auto result = pseudo_label(learner, out.x, out.y, out.languages, out.folds, candidates, options, test_x,
                               test_languages, threads);
    out.model.chains = std::move(result.chains);
    out.model.pseudo_hard = c.pipeline.pseudo_hard;
    out.stages.emplace("pseudo", std::move(result.predictions));
    out.final_stage = "pseudo";
    std::string best;
    for (const auto& chain : out.model.chains) best += (best.empty() ? "" : ",") + std::to_string(chain.best_iteration);
    clock.end(oof_score(out.stages.at("pseudo"), out.y, c.averaging)).fields = {
        {"iterations", std::to_string(result.iterations_run)}, {"best_iterations", best},
        {"mode", c.pipeline.pseudo_hard ? "hard" : "soft"}};
  }

  if (c.stages.ensemble) {
    clock.begin("ensemble");
    std::vector<const OofPredictions*> members;
    for (const auto& id : out.model.stack_ids) members.push_back(&out.stages.at(id));
    if (c.stages.pseudo) members.push_back(&out.stages.at("pseudo"));
    auto result = fit_crossfit_ensemble(members, out.y, c.pipeline.ensemble_grid_step, c.averaging);
    out.model.ensemble = result.weights;
    out.stages.emplace("ensemble", std::move(result.predictions));
    out.final_stage = "ensemble";
    std::string weights;
    for (std::size_t m = 0; m < result.weights.ids.size(); ++m) {
      weights += (m ? "," : "") + result.weights.ids[m] + ":" + format_double(result.weights.weights[m]);
    }
    clock.end(oof_score(out.stages.at("ensemble"), out.y, c.averaging)).fields = {{"weights", weights}};
  }
  out.model.final_stage = out.final_stage;

  const auto& final_oof = out.stages.at(out.final_stage);
  if (c.stages.thresholds) {
    clock.begin("thresholds");
    out.thresholds = tune_thresholds(final_oof.probs, out.y, out.languages, c.thresholds.grid_step, c.thresholds.min_count);
    out.model.thresholds = out.thresholds;
    const auto labels = apply_thresholds(final_oof.probs, out.languages, out.thresholds);
    clock.end(f1_score(out.y, labels, c.averaging)).fields = {
        {"global", format_double(out.thresholds.global_threshold)},
        {"languages", std::to_string(out.thresholds.per_language.size())}};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands.

namespace detail {

inline void write_report(const fs::path& dir, const RunReport& report) {
  std::ostringstream out;
  report.write(out);
  write_text(dir / "run_report.txt", out.str());
}

inline void write_train_outputs(const RunConfig& c, const TrainOutcome& t, StageClock& clock) {
  clock.begin("report");
  const auto& final_oof = t.stages.at(t.final_stage);
  write_probabilities(c.output_dir / "oof_predictions.csv", t.data.train, final_oof.probs);
  const auto oof_labels = apply_thresholds(final_oof.probs, t.languages, t.thresholds);
  std::ostringstream metrics;
  write_metrics(metrics, metric_report(t.y, oof_labels));
  write_text(c.output_dir / "metrics.txt", metrics.str());
  std::ostringstream thresholds;
  write_thresholds(thresholds, t.thresholds);
  write_text(c.output_dir / "thresholds.txt", thresholds.str());
  save_pipeline_model(c.output_dir / "model", t.model);
  if (t.data.test) {
    const auto& probs = final_oof.test;
    write_probabilities(c.output_dir / "predictions.csv", *t.data.test, probs);
    if (c.stages.thresholds) {
      write_labels(c.output_dir / "labels.csv", *t.data.test, apply_thresholds(probs, t.data.test->languages(), t.thresholds));
    }
  }
  clock.end(oof_score(final_oof, t.y, c.averaging)).fields = {{"final", t.final_stage}};
}

inline std::optional<std::vector<std::size_t>> flip_rows(const RunConfig& c, const Corpus& corpus) {
  if (!c.flips_path) return std::nullopt;
  std::set<std::string> ids;
  for (auto& id : read_id_list(*c.flips_path)) ids.insert(std::move(id));
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (ids.contains(base_id(corpus[i].id))) rows.push_back(i);
  }
  return rows;
}

inline void run_synth(const RunConfig& c, StageClock& clock) {
  clock.begin("synth");
  auto options = c.synth.train;
  options.seed = c.seed;
  options.split = Split::Train;
  const auto train = synthesize_corpus(options);
  save_corpus((c.output_dir / "train.csv").string(), train.corpus);
  std::ostringstream flips;
  for (auto i : train.flipped) flips << train.corpus[i].id << '\n';
  write_text(c.output_dir / "flips.txt", flips.str());
  save_embeddings((c.output_dir / "train.emb").string(),
                  synthesize_embeddings(train.true_labels, c.synth.embedding_dim, c.synth.embedding_separation, c.seed));
  std::size_t test_records = 0;
  if (c.synth.test_n > 0) {
    options.n = c.synth.test_n;
    options.seed = c.seed + 1;
    options.noise_rate = 0.0;
    options.split = Split::Test;
    options.id_prefix = "t";
    const auto test = synthesize_corpus(options);
    save_corpus((c.output_dir / "test.csv").string(), test.corpus);
    save_embeddings((c.output_dir / "test.emb").string(),
                    synthesize_embeddings(test.true_labels, c.synth.embedding_dim, c.synth.embedding_separation, c.seed));
    test_records = test.corpus.size();
  }
  clock.end().fields = {{"train_records", std::to_string(train.corpus.size())},
                        {"test_records", std::to_string(test_records)},
                        {"flipped", std::to_string(train.flipped.size())}};
}

inline void run_ingest(const RunConfig& c, StageClock& clock) {
  check_paths_exist(c, true, true);
  const auto d = prepare_data(c, clock, true);
  clock.begin("report");
  std::map<LanguageTag, std::array<std::size_t, 2>> counts;
  for (std::size_t i = 0; i < d.train.size(); ++i) ++counts[d.train[i].language][static_cast<std::size_t>(*d.train[i].label)];
  std::ostringstream out;
  out << "train_records=" << d.train.size() << '\n' << "test_records=" << (d.test ? d.test->size() : 0) << '\n';
  for (const auto& [language, c2] : counts) {
    out << "language=" << language.code() << " negative=" << c2[0] << " positive=" << c2[1] << '\n';
  }
  write_text(c.output_dir / "ingest_report.txt", out.str());
  clock.end();
}

inline void run_train(const RunConfig& c, StageClock& clock) {
  check_paths_exist(c, true, true);
  const auto t = train_pipeline(c, clock, true);
  write_train_outputs(c, t, clock);
}

inline void run_predict(const RunConfig& c, StageClock& clock) {
  if (!c.test_path) fail(ErrorKind::ConstraintError, "predict needs test_path");
  check_paths_exist(c, false, true);
  clock.begin("load");
  const auto model = load_pipeline_model(c.output_dir / "model");
  auto test = load_corpus(c.test_path->string(), Split::Test, c.registry());
  std::optional<EmbeddingMatrix> embeddings;
  if (c.test_embeddings) embeddings = load_embeddings(c.test_embeddings->string(), test.size());
  test = prepare_text(test, model.text);
  clock.end().fields = {{"test_records", std::to_string(test.size())}};
  clock.begin("featurize");
  const auto x = apply_feature_transform(model.features, test, embeddings ? &*embeddings : nullptr);
  clock.end();
  clock.begin("predict");
  const auto languages = test.languages();
  const auto probs = predict_stages(model, x, languages).at(model.final_stage);
  write_probabilities(c.output_dir / "predictions.csv", test, probs);
  if (model.thresholds) write_labels(c.output_dir / "labels.csv", test, apply_thresholds(probs, languages, *model.thresholds));
  clock.end().fields = {{"final", model.final_stage}};
}

inline void run_diagnose(const RunConfig& c, StageClock& clock) {
  check_paths_exist(c, true, false);
  const auto t = train_pipeline(c, clock, false);
  const auto& final_oof = t.stages.at(t.final_stage);

  clock.begin("noise_probe");
  GbdtParams params = c.gbdt;
  params.seed = c.seed;
  const auto report = noise_probe(t.data.train, t.x, final_oof.probs, t.thresholds, params, flip_rows(c, t.data.train));
  std::ostringstream out;
  write_noise_report(out, report);
  write_text(c.output_dir / "noise_report.txt", out.str());
  clock.end(oof_score(final_oof, t.y, c.averaging)).fields = {
      {"misclassified_fraction", format_double(report.misclassified_fraction)}};

  // Refit on flipped labels with the same folds: the fit-vs-own-labels
  // score should not move.
  clock.begin("label_flip");
  std::vector<int> flipped(t.y.size());
  for (std::size_t i = 0; i < t.y.size(); ++i) flipped[i] = 1 - t.y[i];
  const auto original = train_oof(Learner{params}, t.x, t.y, t.languages, t.folds, nullptr, {}, configured_threads());
  const auto inverted = train_oof(Learner{params}, t.x, flipped, t.languages, t.folds, nullptr, {}, configured_threads());
  const double f1_original = oof_f1(original.predictions, t.y, Averaging::Macro);
  const double f1_flipped = oof_f1(inverted.predictions, flipped, Averaging::Macro);
  std::ostringstream flip;
  flip << "macro_f1_original=" << format_double(f1_original) << '\n'
       << "macro_f1_flipped=" << format_double(f1_flipped) << '\n'
       << "difference=" << format_double(f1_flipped - f1_original) << '\n';
  write_text(c.output_dir / "flip_report.txt", flip.str());
  clock.end(f1_flipped);
}

inline void run_plot(const RunConfig& c, StageClock& clock) {
  if (!c.train_embeddings) fail(ErrorKind::ConstraintError, "plot needs train_embeddings");
  check_paths_exist(c, true, false);
  clock.begin("plot");
  const auto corpus = load_corpus(c.train_path.string(), Split::Train, c.registry());
  const auto e = load_embeddings(c.train_embeddings->string(), corpus.size());
  pca_scatter_export(e, corpus.labels(), flip_rows(c, corpus), (c.output_dir / "scatter.tsv").string());
  clock.end();
}

}  // namespace detail

inline constexpr std::array<std::string_view, 6> kSubcommands = {"ingest", "train", "predict", "diagnose", "plot", "synth"};

/// Runs one subcommand. Returns the process exit status; on failure the
/// diagnostic names the failing stage and output_dir gets a `.partial` marker.
inline int run(std::string_view subcommand, const RunConfig& c, std::ostream& err = std::cerr) {
  RunReport report;
  report.subcommand = std::string(subcommand);
  report.averaging = c.averaging;
  StageClock clock(report);
  const fs::path partial = c.output_dir / ".partial";
  try {
    fs::create_directories(c.output_dir);
    if (fs::exists(partial)) fs::remove(partial);
    if (subcommand == "synth") {
      detail::run_synth(c, clock);
    } else if (subcommand == "ingest") {
      detail::run_ingest(c, clock);
    } else if (subcommand == "train") {
      detail::run_train(c, clock);
    } else if (subcommand == "predict") {
      detail::run_predict(c, clock);
    } else if (subcommand == "diagnose") {
      detail::run_diagnose(c, clock);
    } else if (subcommand == "plot") {
      detail::run_plot(c, clock);
    } else {
      fail(ErrorKind::SchemaError, "unknown subcommand '" + std::string(subcommand) + "'");
    }
    detail::write_report(c.output_dir, report);
    return 0;
  } catch (const std::exception& error) {
    const Error* typed = dynamic_cast<const Error*>(&error);
    const std::string kind = typed ? std::string(to_string(typed->kind())) : std::string("Internal");
    err << "abuse-pipeline: stage '" << clock.current() << "' failed: " << error.what() << '\n';
    try {
      fs::create_directories(c.output_dir);
      detail::write_text(partial, "stage=" + clock.current() + "\nerror=" + kind + "\nmessage=" + error.what() + "\n");
      detail::write_report(c.output_dir, report);
    } catch (...) {
    }
    return 1;
  }
}

}  // namespace abuse
