#pragma once

// Text preparation and the fitted feature transform shared by train and test.

#include <optional>
#include <string>
#include <vector>

#include "abuse/corpus.hpp"
#include "abuse/embeddings.hpp"
#include "abuse/error.hpp"
#include "abuse/features.hpp"
#include "abuse/pca.hpp"
#include "abuse/transliteration.hpp"

namespace abuse {

struct TextOptions {
  bool clean = true;
  bool transliterate = true;
};

/// Fills clean_text (raw text when cleaning is off) and translit_text
/// (empty when transliteration is off).
inline Corpus prepare_text(const Corpus& corpus, const TextOptions& options,
                           const TransliteratorSet& transliterators = TransliteratorSet::defaults()) {
  std::vector<CommentRecord> records = corpus.records();
  for (auto& record : records) {
    record.clean_text = options.clean ? clean_text(record.raw_text) : record.raw_text;
    record.translit_text =
        options.transliterate ? transliterators.for_language(record.language).apply(record.clean_text) : std::string();
  }
  return Corpus(corpus.split(), std::move(records));
}

/// Oversampling: the raw-text copy plus the cleaned copy of every record.
/// The raw copy keeps its markup in clean_text; the cleaned copy's raw_text
/// is already clean.
inline Corpus oversample(const Corpus& corpus, const TextOptions& options,
                         const TransliteratorSet& transliterators = TransliteratorSet::defaults()) {
  std::vector<CommentRecord> cleaned = corpus.records();
  for (auto& record : cleaned) record.raw_text = clean_text(record.raw_text);
  TextOptions raw_options = options;
  raw_options.clean = false;
  return merge_oversample(prepare_text(corpus, raw_options, transliterators),
                          prepare_text(Corpus(corpus.split(), std::move(cleaned)), options, transliterators));
}

struct FeatureSettings {
  bool tfidf = true;
  std::size_t max_features = 500;
  std::size_t max_len = 150;
  bool embeddings = false;  // use the embedding matrix at all
  bool pca = false;         // reduce it first
  std::size_t pca_components = 200;
  bool metadata = true;
  MetadataTransform metadata_transform = MetadataTransform::Log1p;
};

struct FeatureTransform {
  FeatureSettings settings;
  std::optional<Vocabulary> vocabulary;
  std::optional<PcaModel> pca;
  std::size_t embedding_dim = 0;
};

inline std::vector<std::string> model_texts(const Corpus& corpus, std::size_t max_len) {
  std::vector<std::string> out;
  out.reserve(corpus.size());
  for (const auto& record : corpus.records()) out.push_back(compose_model_text(record, max_len));
  return out;
}

/// Fits on the training corpus only. Blocks are laid out as
/// tfidf | embedding-or-pca | metadata.
inline FeatureTransform fit_feature_transform(const FeatureSettings& settings, const Corpus& train,
                                              const EmbeddingMatrix* embeddings = nullptr) {
  if (!settings.tfidf && !settings.embeddings && !settings.metadata) fail(ErrorKind::BadParams, "no feature block enabled");
  if (settings.pca && !settings.embeddings) fail(ErrorKind::BadParams, "PCA needs embeddings");
  FeatureTransform out;
  out.settings = settings;
  if (settings.tfidf) out.vocabulary = fit_tfidf(model_texts(train, settings.max_len), settings.max_features);
  if (settings.embeddings) {
    if (!embeddings) fail(ErrorKind::BadParams, "embedding features requested without embeddings");
    if (embeddings->rows() != train.size()) fail(ErrorKind::RowCountMismatch, "embeddings and corpus differ in rows");
    out.embedding_dim = embeddings->dim();
    if (settings.pca) out.pca = fit_pca(*embeddings, settings.pca_components);
  }
  return out;
}

inline FeatureMatrix apply_feature_transform(const FeatureTransform& transform, const Corpus& corpus,
                                             const EmbeddingMatrix* embeddings = nullptr) {
  std::vector<FeatureMatrix> parts;
  if (transform.vocabulary) parts.push_back(transform_tfidf(*transform.vocabulary, model_texts(corpus, transform.settings.max_len)));
  if (transform.settings.embeddings) {
    if (!embeddings) fail(ErrorKind::BadParams, "embedding features requested without embeddings");
    if (embeddings->rows() != corpus.size()) fail(ErrorKind::RowCountMismatch, "embeddings and corpus differ in rows");
    if (embeddings->dim() != transform.embedding_dim) fail(ErrorKind::DimMismatch, "embedding width differs from training");
    if (transform.pca) {
      parts.push_back(apply_pca(*transform.pca, *embeddings));
    } else {
      parts.push_back(FeatureMatrix(embeddings->rows(), BlockKind::Embedding, embeddings->dim(), embeddings->values()));
    }
  }
  if (transform.settings.metadata) parts.push_back(metadata_matrix(corpus, transform.settings.metadata_transform));
  return assemble_features(parts);
}

}  // namespace abuse
