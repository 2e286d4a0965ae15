#include <gtest/gtest.h>

#include <algorithm>
#include <string>

#include "abuse/corpus.hpp"
#include "abuse/random.hpp"
#include "abuse/synth.hpp"
#include "abuse/transliteration.hpp"

using namespace abuse;

namespace {

constexpr const char* kHeader = "id,text,language,like_count,report_count,label\n";

ErrorKind kind_of(const std::function<void()>& body) {
  try {
    body();
  } catch (const Error& error) {
    return error.kind();
  }
  ADD_FAILURE() << "expected an abuse::Error";
  return ErrorKind::Io;
}

}  // namespace

TEST(LoadCorpus, TwoRowsInFileOrder) {
  const auto corpus = parse_corpus(std::string(kHeader) + "c2,hello,hi,3,0,1\nc1,\"a, \"\"quoted\"\" one\",ta,0,2,0\n",
                                   Split::Train);
  ASSERT_EQ(corpus.size(), 2u);
  EXPECT_EQ(corpus[0].id, "c2");
  EXPECT_EQ(corpus[1].id, "c1");
  EXPECT_EQ(corpus[1].raw_text, "a, \"quoted\" one");
  EXPECT_EQ(corpus[0].language.code(), "hi");
  EXPECT_EQ(corpus[0].like_count, 3u);
  EXPECT_EQ(corpus[1].report_count, 2u);
  EXPECT_EQ(corpus[0].label, 1);
  EXPECT_EQ(corpus[1].label, 0);
}

TEST(LoadCorpus, EmptyLabelAllowedOnTestSplit) {
  const auto corpus = parse_corpus(std::string(kHeader) + "t1,text,hi,0,0,\n", Split::Test);
  ASSERT_EQ(corpus.size(), 1u);
  EXPECT_FALSE(corpus[0].label.has_value());
  EXPECT_EQ(kind_of([] { parse_corpus(std::string(kHeader) + "t1,text,hi,0,0,\n", Split::Train); }), ErrorKind::BadLabel);
}

TEST(LoadCorpus, QuotedFieldMaySpanLines) {
  const auto corpus = parse_corpus(std::string(kHeader) + "c1,\"line one\nline two\",hi,0,0,1\n", Split::Train);
  EXPECT_EQ(corpus[0].raw_text, "line one\nline two");
}

TEST(LoadCorpus, Errors) {
  EXPECT_EQ(kind_of([] { parse_corpus(std::string(kHeader) + "c1,a,hi,0,0,1\nc1,b,hi,0,0,0\n", Split::Train); }),
            ErrorKind::DuplicateId);
  EXPECT_EQ(kind_of([] { parse_corpus(std::string(kHeader) + "c1,a,hi,-1,0,1\n", Split::Train); }),
            ErrorKind::NegativeCount);
  EXPECT_EQ(kind_of([] { parse_corpus(std::string(kHeader) + "c1,a,hi,0,0,2\n", Split::Train); }), ErrorKind::BadLabel);
  EXPECT_EQ(kind_of([] { parse_corpus(std::string(kHeader) + "c1,a,hi,0,1\n", Split::Train); }),
            ErrorKind::MalformedRow);
  EXPECT_EQ(kind_of([] { parse_corpus(std::string(kHeader) + "c1,\xff\xfe,hi,0,0,1\n", Split::Train); }),
            ErrorKind::MalformedRow);
  EXPECT_EQ(kind_of([] { parse_corpus("id,text\nc1,a\n", Split::Train); }), ErrorKind::MalformedRow);
  EXPECT_EQ(kind_of([] { parse_corpus(std::string(kHeader) + "c1,\"open,hi,0,0,1\n", Split::Train); }),
            ErrorKind::MalformedRow);
}

TEST(LoadCorpus, UnknownLanguageMapsToOther) {
  const auto corpus = parse_corpus(std::string(kHeader) + "c1,a,Klingon,0,0,1\nc2,b, TA ,0,0,1\n", Split::Train);
  EXPECT_EQ(corpus[0].language.code(), "other");
  EXPECT_EQ(corpus[1].language.code(), "ta");
}

TEST(LoadCorpus, WriteThenParseRestoresRecords) {
  SynthOptions options;
  options.n = 50;
  options.seed = 3;
  const auto synth = synthesize_corpus(options);
  std::ostringstream out;
  write_corpus(out, synth.corpus);
  const auto again = parse_corpus(out.str(), Split::Train);
  ASSERT_EQ(again.size(), synth.corpus.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].id, synth.corpus[i].id);
    EXPECT_EQ(again[i].raw_text, synth.corpus[i].raw_text);
    EXPECT_EQ(again[i].label, synth.corpus[i].label);
    EXPECT_EQ(again[i].report_count, synth.corpus[i].report_count);
  }
}

TEST(LanguageTagTest, RejectsNonLowercase) {
  EXPECT_EQ(kind_of([] { LanguageTag("HI"); }), ErrorKind::BadLanguageTag);
  EXPECT_EQ(kind_of([] { LanguageTag(""); }), ErrorKind::BadLanguageTag);
}

TEST(CleanText, Examples) {
  EXPECT_EQ(clean_text("<b>nice</b>"), "nice");
  EXPECT_EQ(clean_text("hello   world \n"), "hello world");
  EXPECT_EQ(clean_text("&amp; chill"), "& chill");
}

TEST(CleanText, FiveEntityReferenceTable) {
  const std::vector<std::pair<std::string, std::string>> table = {
      {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&apos;", "'"}};
  for (const auto& [entity, decoded] : table) EXPECT_EQ(clean_text("x " + entity + " y"), "x " + decoded + " y");
  // Anything else stays literal.
  EXPECT_EQ(clean_text("&nbsp; &amp"), "&nbsp; &amp");
}

TEST(CleanText, IdempotentOnTrickyAndRandomInputs) {
  const std::vector<std::string> tricky = {"&amp;lt;b&amp;gt;x", "&lt;b&gt;bold&lt;/b&gt;", "a < b > c", "<<a>>",
                                           "  \t\n ", "", "&amp;amp;amp;", "<unterminated", "x&quot;&quot;y"};
  for (const auto& text : tricky) EXPECT_EQ(clean_text(clean_text(text)), clean_text(text)) << text;

  const std::string alphabet = "ab <>&;ltgmpquos\n\t";
  Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text;
    const auto len = rng.index(24);
    for (std::uint64_t i = 0; i < len; ++i) text.push_back(alphabet[rng.index(alphabet.size())]);
    const auto once = clean_text(text);
    ASSERT_EQ(clean_text(once), once) << "input: " << text;
  }
}

TEST(Transliterate, EmptyAndTargetScriptPassThrough) {
  const auto table = hindi_table();
  EXPECT_EQ(transliterate("", table), "");
  EXPECT_EQ(transliterate("नमस्ते दुनिया", table), "नमस्ते दुनिया");
}

TEST(Transliterate, NamasteMatchesHandAppliedTable) {
  // Longest-match by hand over the shipped rules:
  //   "na" -> न, "ma" -> म, "s" (no "st" rule) -> स + virama, "te" -> त + े.
  const std::string expected = "न" "म" "स" "्" "त" "े";
  EXPECT_EQ(transliterate("namaste", hindi_table()), expected);
  EXPECT_EQ(transliterate("Namaste!", hindi_table()), expected + "!");
}

TEST(Transliterate, LongestMatchThenRuleOrder) {
  const TransliterationTable table(LanguageTag("hi"), {{"k", "A"}, {"kh", "B"}, {"kh", "C"}, {"a", "D"}});
  EXPECT_EQ(transliterate("kha", table), "BD");
  EXPECT_EQ(transliterate("kxa 1", table), "AxD 1");
}

TEST(Transliterate, InvalidTablesRejected) {
  EXPECT_EQ(kind_of([] { TransliterationTable(LanguageTag("hi"), {}); }), ErrorKind::BadTable);
  EXPECT_EQ(kind_of([] { TransliterationTable(LanguageTag("hi"), {{"", "x"}}); }), ErrorKind::BadTable);
}

TEST(Transliterate, ApplyingTwiceEqualsOnce) {
  const auto table = hindi_table();
  Rng rng(5);
  const std::string alphabet = "abcdeghijklmnoprstuvyz AEI,.";
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const auto len = rng.index(30);
    for (std::uint64_t i = 0; i < len; ++i) text.push_back(alphabet[rng.index(alphabet.size())]);
    const auto once = transliterate(text, table);
    ASSERT_EQ(transliterate(once, table), once);
    ASSERT_EQ(once, transliterate(text, table));
  }
}

TEST(ComposeModelText, JoinAndTruncate) {
  CommentRecord record;
  record.clean_text = "ab";
  record.translit_text = "cd";
  EXPECT_EQ(compose_model_text(record, 150), "ab cd");

  record.clean_text = std::string(100, 'x');
  record.translit_text = std::string(100, 'y');
  EXPECT_EQ(compose_model_text(record, 150), std::string(100, 'x') + " " + std::string(49, 'y'));

  record.clean_text = "";
  record.translit_text = "नमस्ते";
  EXPECT_EQ(compose_model_text(record, 150), "नमस्ते");
  // Code points, not bytes.
  EXPECT_EQ(compose_model_text(record, 2), "नम");

  EXPECT_THROW(compose_model_text(record, 0), Error);
}

namespace {

Corpus tiny(Split split, std::vector<std::string> ids, std::vector<int> labels) {
  std::vector<CommentRecord> records;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CommentRecord record;
    record.id = ids[i];
    record.raw_text = "text " + ids[i];
    record.label = labels[i];
    record.report_count = i;
    records.push_back(record);
  }
  return Corpus(split, records);
}

}  // namespace

TEST(MergeOversample, DoublesSizeAndKeepsIdsUnique) {
  const auto original = tiny(Split::Train, {"a", "b", "c"}, {1, 0, 1});
  const auto merged = merge_oversample(original, original);
  ASSERT_EQ(merged.size(), 6u);
  EXPECT_EQ(merged[0].id, "a#raw");
  EXPECT_EQ(merged[3].id, "a#clean");
  for (std::size_t i = 0; i < merged.size(); ++i) {
    EXPECT_EQ(merged[i].label, original[i % 3].label);
    EXPECT_EQ(merged[i].report_count, original[i % 3].report_count);
    EXPECT_EQ(base_id(merged[i].id), original[i % 3].id);
  }
  EXPECT_EQ(merge_oversample(Corpus(Split::Train, {}), Corpus(Split::Train, {})).size(), 0u);
}

TEST(MergeOversample, Errors) {
  const auto a = tiny(Split::Train, {"a", "b"}, {1, 0});
  EXPECT_EQ(kind_of([&] { merge_oversample(a, tiny(Split::Test, {"a", "b"}, {1, 0})); }), ErrorKind::SplitMismatch);
  EXPECT_EQ(kind_of([&] { merge_oversample(a, tiny(Split::Train, {"a", "z"}, {1, 0})); }), ErrorKind::IdMismatch);
  EXPECT_EQ(kind_of([&] { merge_oversample(a, tiny(Split::Train, {"a"}, {1})); }), ErrorKind::IdMismatch);
}

TEST(PartitionByLanguage, SizesAndOrder) {
  std::vector<CommentRecord> records(3);
  records[0].id = "x";
  records[0].language = LanguageTag("hi");
  records[1].id = "y";
  records[1].language = LanguageTag("ta");
  records[2].id = "z";
  records[2].language = LanguageTag("hi");
  const auto parts = partition_by_language(Corpus(Split::Test, records));
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts.at(LanguageTag("hi")).size(), 2u);
  EXPECT_EQ(parts.at(LanguageTag("hi"))[1].id, "z");
  EXPECT_EQ(parts.at(LanguageTag("ta")).size(), 1u);
  EXPECT_TRUE(partition_by_language(Corpus(Split::Test, {})).empty());
}

TEST(PartitionByLanguage, RegistryOrderConcatenationIsPermutation) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthOptions options;
    options.n = 300;
    options.seed = seed;
    const auto corpus = synthesize_corpus(options).corpus;
    const auto parts = partition_by_language(corpus);
    std::vector<std::string> ids;
    for (const auto& tag : LanguageRegistry::defaults().tags()) {
      const auto it = parts.find(tag);
      if (it == parts.end()) continue;
      for (const auto& record : it->second.records()) ids.push_back(record.id);
    }
    ASSERT_EQ(ids.size(), corpus.size());
    std::vector<std::string> expected;
    for (const auto& record : corpus.records()) expected.push_back(record.id);
    std::sort(ids.begin(), ids.end());
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(ids, expected);
  }
}
