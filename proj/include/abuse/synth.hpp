#pragma once

// Synthetic comment corpora with planted, lexicon-determined labels and a
// known set of flipped (noisy) labels. Used by tests, the acceptance suite,
// and the `synth` subcommand.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "abuse/corpus.hpp"
#include "abuse/embeddings.hpp"
#include "abuse/error.hpp"
#include "abuse/features.hpp"
#include "abuse/random.hpp"

namespace abuse {

struct LanguageShare {
  LanguageTag language;
  double proportion = 0.0;
};

struct SynthOptions {
  std::size_t n = 1000;
  std::vector<LanguageShare> languages = {{LanguageTag("hi"), 0.5},
                                          {LanguageTag("ta"), 0.2},
                                          {LanguageTag("te"), 0.15},
                                          {LanguageTag("ml"), 0.15}};
  double noise_rate = 0.0;
  std::uint64_t seed = 0;
  Split split = Split::Train;
  std::string id_prefix = "c";

  double abusive_rate = 0.35;
  std::size_t benign_vocab = 60;
  std::size_t abusive_vocab = 10;
  // Frequency skew of abusive words (0 = uniform, larger = heavier head).
  double abusive_zipf = 0.0;
  // Languages are paired (0,1), (2,3), ...; benign comments of one language
  // then carry the partner's abusive words with this probability.
  bool conflicting_lexicons = false;
  double conflict_rate = 0.5;
  double html_rate = 0.1;
  double like_rate = 4.0;
  double report_rate_abusive = 2.0;
  double report_rate_benign = 0.3;
};

struct SynthLexicon {
  LanguageTag language;
  std::vector<std::string> benign;
  std::vector<std::string> abusive;
};

struct SynthCorpus {
  Corpus corpus;
  std::vector<std::size_t> flipped;  // ascending row indices whose label was flipped
  std::vector<int> true_labels;      // lexicon-implied labels
  std::vector<SynthLexicon> lexicons;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t hash = 1469598103934665603ull;
  for (char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ull;
  }
  return hash;
}

inline const std::vector<std::string_view>& syllables() {
  static const std::vector<std::string_view> list = {
      "ka", "ri", "to", "man", "su", "le", "pa", "dhi", "ro", "ve", "na", "ji", "ku", "sha", "te", "bo", "gi", "lu",
      "mo", "ya", "chi", "de", "har", "ni", "pu", "sa", "ti", "vaa", "kal", "ber", "go", "zu", "ram", "thi", "ne", "lo"};
  return list;
}

inline std::size_t weighted_pick(Rng& rng, const std::vector<double>& cumulative) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace detail

/// Per-language vocabularies. They depend only on the language list and the
/// vocabulary sizes, never on the corpus seed, so train and test corpora
/// generated with different seeds share lexicons.
inline std::vector<SynthLexicon> synth_lexicons(const SynthOptions& options) {
  std::set<std::string> used = {"amp", "lt", "gt", "quot", "apos", "b", "br", "i"};
  std::vector<SynthLexicon> out;
  for (const auto& share : options.languages) {
    SynthLexicon lexicon{share.language, {}, {}};
    Rng rng(detail::fnv1a(share.language.code()) ^ 0x9e3779b97f4a7c15ull);
    const auto make_word = [&] {
      while (true) {
        std::string word;
        const auto parts = 2 + rng.index(2);
        for (std::uint64_t p = 0; p < parts; ++p) word += detail::syllables()[rng.index(detail::syllables().size())];
        if (used.insert(word).second) return word;
      }
    };
    for (std::size_t i = 0; i < options.abusive_vocab; ++i) lexicon.abusive.push_back(make_word());
    for (std::size_t i = 0; i < options.benign_vocab; ++i) lexicon.benign.push_back(make_word());
    out.push_back(std::move(lexicon));
  }
  return out;
}

/// 1 iff the cleaned, tokenized text contains a word of the lexicon's abusive list.
inline int lexicon_label(std::string_view raw_text, const SynthLexicon& lexicon) {
  for (const auto& token : tokenize(clean_text(raw_text))) {
    if (std::find(lexicon.abusive.begin(), lexicon.abusive.end(), token) != lexicon.abusive.end()) return 1;
  }
  return 0;
}

inline SynthCorpus synthesize_corpus(const SynthOptions& options) {
  if (options.languages.empty()) fail(ErrorKind::BadProportions, "no languages given");
  double total = 0.0;
  for (const auto& share : options.languages) {
    if (!(share.proportion >= 0.0)) fail(ErrorKind::BadProportions, "negative proportion");
    total += share.proportion;
  }
  if (std::abs(total - 1.0) > 1e-9) fail(ErrorKind::BadProportions, "proportions sum to " + std::to_string(total));
  if (!(options.noise_rate >= 0.0 && options.noise_rate <= 1.0)) fail(ErrorKind::BadParams, "noise_rate outside [0,1]");
  if (options.benign_vocab == 0 || options.abusive_vocab == 0) fail(ErrorKind::BadParams, "vocabularies must be non-empty");

  SynthCorpus out;
  out.lexicons = synth_lexicons(options);
  std::vector<double> language_cdf;
  double running = 0.0;
  for (const auto& share : options.languages) language_cdf.push_back(running += share.proportion);

  std::vector<double> abusive_cdf;
  running = 0.0;
  for (std::size_t k = 0; k < options.abusive_vocab; ++k) {
    abusive_cdf.push_back(running += 1.0 / std::pow(static_cast<double>(k + 1), options.abusive_zipf));
  }

  Rng rng(options.seed);
  std::vector<CommentRecord> records;
  records.reserve(options.n);
  const std::size_t id_width = std::max<std::size_t>(6, std::to_string(options.n).size());
  for (std::size_t i = 0; i < options.n; ++i) {
    const std::size_t lang = detail::weighted_pick(rng, language_cdf);
    const auto& lexicon = out.lexicons[lang];
    const int truth = rng.uniform() < options.abusive_rate ? 1 : 0;

    std::vector<std::string> words;
    const auto length = 5 + rng.index(8);
    for (std::uint64_t w = 0; w < length; ++w) words.push_back(lexicon.benign[rng.index(lexicon.benign.size())]);
    if (truth == 1) {
      const auto count = 1 + rng.index(2);
      for (std::uint64_t a = 0; a < count; ++a) {
        const auto pos = rng.index(words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), lexicon.abusive[detail::weighted_pick(rng, abusive_cdf)]);
      }
    } else if (options.conflicting_lexicons && out.lexicons.size() > 1) {
      const std::size_t partner = lang ^ 1u;
      if (partner < out.lexicons.size() && rng.uniform() < options.conflict_rate) {
        const auto& foreign = out.lexicons[partner].abusive;
        const auto pos = rng.index(words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), foreign[rng.index(foreign.size())]);
      }
    }
    if (rng.uniform() < options.html_rate) {
      const auto pos = rng.index(words.size());
      words[pos] = rng.uniform() < 0.5 ? "<b>" + words[pos] + "</b>" : words[pos] + " &amp;";
    }
    std::string text;
    for (std::size_t w = 0; w < words.size(); ++w) text += (w ? " " : "") + words[w];

    CommentRecord record;
    const std::string number = std::to_string(i);
    record.id = options.id_prefix + std::string(id_width - number.size(), '0') + number;
    record.raw_text = std::move(text);
    record.language = lexicon.language;
    record.like_count = static_cast<std::uint64_t>(rng.poisson(options.like_rate));
    record.report_count = static_cast<std::uint64_t>(
        rng.poisson(truth == 1 ? options.report_rate_abusive : options.report_rate_benign));
    record.label = truth;
    out.true_labels.push_back(truth);
    records.push_back(std::move(record));
  }

  // Flips use their own stream so the text does not depend on the noise rate.
  const auto flips = static_cast<std::size_t>(std::llround(options.noise_rate * static_cast<double>(options.n)));
  std::vector<std::size_t> order(options.n);
  for (std::size_t i = 0; i < options.n; ++i) order[i] = i;
  Rng flip_rng(options.seed ^ 0xd1b54a32d192ed03ull);
  flip_rng.shuffle(order);
  order.resize(flips);
  std::sort(order.begin(), order.end());
  for (auto i : order) records[i].label = 1 - *records[i].label;
  out.flipped = std::move(order);

  if (options.split == Split::Test) {
    for (auto& record : records) record.label.reset();
  }
  out.corpus = Corpus(options.split, std::move(records));
  return out;
}

/// Two Gaussian clusters along a random unit direction, separated by
/// `separation` and centred on the true label; unit noise per coordinate.
inline EmbeddingMatrix synthesize_embeddings(const std::vector<int>& true_labels, std::size_t dim, double separation,
                                             std::uint64_t seed) {
  Rng rng(seed ^ 0x2545f4914f6cdd1dull);
  std::vector<double> direction(dim);
  double norm = 0.0;
  for (auto& d : direction) {
    d = rng.normal();
    norm += d * d;
  }
  norm = std::sqrt(norm);
  for (auto& d : direction) d /= norm;
  std::vector<double> values;
  values.reserve(true_labels.size() * dim);
  for (int label : true_labels) {
    const double offset = (label == 1 ? 0.5 : -0.5) * separation;
    for (std::size_t j = 0; j < dim; ++j) values.push_back(offset * direction[j] + rng.normal());
  }
  return EmbeddingMatrix(true_labels.size(), dim, std::move(values));
}

}  // namespace abuse
