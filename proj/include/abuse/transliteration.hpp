#pragma once

// Romanized-to-native-script rewriting. A table transliterator applies
// longest-match rules over runs of ASCII Latin letters; everything else passes
// through untouched.

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "abuse/corpus.hpp"
#include "abuse/error.hpp"

namespace abuse {

struct TransliterationRule {
  std::string source;  // lowercase ASCII Latin letters
  std::string target;  // UTF-8 target-script text
};

class TransliterationTable {
 public:
  TransliterationTable(LanguageTag target, std::vector<TransliterationRule> rules)
      : target_(std::move(target)), rules_(std::move(rules)) {
    if (rules_.empty()) fail(ErrorKind::BadTable, "transliteration table has no rules");
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      const auto& source = rules_[i].source;
      if (source.empty()) fail(ErrorKind::BadTable, "rule " + std::to_string(i) + " has an empty source");
      for (char c : source) {
        if (c < 'a' || c > 'z') fail(ErrorKind::BadTable, "rule source '" + source + "' is not lowercase Latin");
      }
      // Earlier rules win over later duplicates.
      lookup_.try_emplace(source, i);
      longest_ = std::max(longest_, source.size());
    }
  }

  const LanguageTag& target() const noexcept { return target_; }
  const std::vector<TransliterationRule>& rules() const noexcept { return rules_; }

  /// Rule matching the longest prefix of `text` (already lowercased), if any.
  const TransliterationRule* match(std::string_view text) const {
    for (std::size_t len = std::min(longest_, text.size()); len > 0; --len) {
      const auto it = lookup_.find(std::string(text.substr(0, len)));
      if (it != lookup_.end()) return &rules_[it->second];
    }
    return nullptr;
  }

 private:
  LanguageTag target_;
  std::vector<TransliterationRule> rules_;
  std::unordered_map<std::string, std::size_t> lookup_;
  std::size_t longest_ = 0;
};

inline bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

inline std::string transliterate(std::string_view text, const TransliterationTable& table) {
  std::string out;
  out.reserve(text.size() * 2);
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_ascii_letter(text[i])) {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t run_end = i;
    while (run_end < text.size() && is_ascii_letter(text[run_end])) ++run_end;
    std::string run(text.substr(i, run_end - i));
    for (auto& c : run) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::size_t pos = 0;
    while (pos < run.size()) {
      if (const auto* rule = table.match(std::string_view(run).substr(pos))) {
        out += rule->target;
        pos += rule->source.size();
      } else {
        out.push_back(text[i + pos]);
        ++pos;
      }
    }
    i = run_end;
  }
  return out;
}

class Transliterator {
 public:
  virtual ~Transliterator() = default;
  virtual std::string apply(std::string_view text) const = 0;
};

class IdentityTransliterator final : public Transliterator {
 public:
  std::string apply(std::string_view text) const override { return std::string(text); }
};

class TableTransliterator final : public Transliterator {
 public:
  explicit TableTransliterator(TransliterationTable table) : table_(std::move(table)) {}
  std::string apply(std::string_view text) const override { return transliterate(text, table_); }
  const TransliterationTable& table() const noexcept { return table_; }

 private:
  TransliterationTable table_;
};

/// Hinglish to Devanagari. Each consonant gets the bare form (with virama)
/// plus one rule per vowel sign; standalone vowels map to independent vowels.
/// Longest match makes "kha" beat "k" + "ha".
inline TransliterationTable hindi_table() {
  static const std::vector<std::pair<std::string, std::string>> consonants = {
      {"k", "क"},   {"kh", "ख"},  {"g", "ग"},   {"gh", "घ"},  {"ch", "च"},  {"chh", "छ"}, {"c", "क"},
      {"j", "ज"},   {"jh", "झ"},  {"t", "त"},   {"th", "थ"},  {"d", "द"},   {"dh", "ध"},  {"n", "न"},
      {"p", "प"},   {"ph", "फ"},  {"f", "फ़"},   {"b", "ब"},   {"bh", "भ"},  {"m", "म"},   {"y", "य"},
      {"r", "र"},   {"l", "ल"},   {"v", "व"},   {"w", "व"},   {"sh", "श"},  {"s", "स"},   {"h", "ह"},
      {"z", "ज़"},   {"q", "क़"},   {"x", "क्स"}};
  // (romanization, vowel sign after a consonant, independent vowel)
  static const std::vector<std::tuple<std::string, std::string, std::string>> vowels = {
      {"a", "", "अ"},     {"aa", "ा", "आ"},  {"i", "ि", "इ"},   {"ee", "ी", "ई"},  {"ii", "ी", "ई"},
      {"u", "ु", "उ"},    {"oo", "ू", "ऊ"},  {"uu", "ू", "ऊ"},  {"e", "े", "ए"},   {"ai", "ै", "ऐ"},
      {"o", "ो", "ओ"},   {"au", "ौ", "औ"}};
  static const std::string virama = "्";

  std::vector<TransliterationRule> rules;
  for (const auto& [latin, native] : consonants) {
    rules.push_back({latin, native + virama});
    for (const auto& [vowel, sign, independent] : vowels) rules.push_back({latin + vowel, native + sign});
  }
  for (const auto& [vowel, sign, independent] : vowels) rules.push_back({vowel, independent});
  return TransliterationTable(LanguageTag("hi"), std::move(rules));
}

/// Language -> transliterator. Languages without an entry pass through.
class TransliteratorSet {
 public:
  static TransliteratorSet defaults() {
    TransliteratorSet set;
    set.add(LanguageTag("hi"), std::make_shared<TableTransliterator>(hindi_table()));
    return set;
  }

  void add(LanguageTag language, std::shared_ptr<const Transliterator> transliterator) {
    by_language_[std::move(language)] = std::move(transliterator);
  }

  const Transliterator& for_language(const LanguageTag& language) const {
    static const IdentityTransliterator identity;
    const auto it = by_language_.find(language);
    return it == by_language_.end() ? identity : *it->second;
  }

 private:
  std::map<LanguageTag, std::shared_ptr<const Transliterator>> by_language_;
};

}  // namespace abuse
