#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "gda/corpus.hpp"
#include "gda/error.hpp"
#include "synthetic.hpp"

using namespace gda;
using namespace gda::corpus;

namespace {

std::size_t parse_error_line(std::string_view text) {
  try {
    parse_conll(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(ConllParse, ReadsTokensSpansAndIds) {
  const auto s = parse_conll(
      "-DOCSTART- O\n\nAcme B-ORG\nBank I-ORG\nlends O\nto O\nBob B-PER\n\n"
      "Hi O\r\n",
      "x:");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].id, "x:0");
  EXPECT_EQ(s[1].id, "x:1");
  EXPECT_EQ(s[0].words(), (std::vector<std::string>{"Acme", "Bank", "lends", "to", "Bob"}));
  ASSERT_EQ(s[0].entities.size(), 2u);
  EXPECT_EQ(s[0].entities[0], (EntitySpan{0, 2, "ORG"}));
  EXPECT_EQ(s[0].entities[1], (EntitySpan{4, 5, "PER"}));
  EXPECT_EQ(s[1].words(), std::vector<std::string>{"Hi"});
}

TEST(ConllParse, AdjacentSpansOfSameType) {
  const auto s = parse_conll("a B-X\nb B-X\nc I-X\n");
  ASSERT_EQ(s[0].entities.size(), 2u);
  EXPECT_EQ(s[0].entities[0], (EntitySpan{0, 1, "X"}));
  EXPECT_EQ(s[0].entities[1], (EntitySpan{1, 3, "X"}));
}

TEST(ConllParse, EmptyInputHasNoSentences) {
  EXPECT_TRUE(parse_conll("").empty());
  EXPECT_TRUE(parse_conll("\n\n  \n").empty());
}

TEST(ConllParse, ErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error_line("a O\nb I-X\n"), 2u);
  EXPECT_EQ(parse_error_line("a O\n\nb I-X\n"), 3u);
  EXPECT_EQ(parse_error_line("a B-X\nb I-Y\n"), 2u);
  EXPECT_EQ(parse_error_line("a O\nb O extra\n"), 2u);
  EXPECT_EQ(parse_error_line("a\n"), 1u);
  EXPECT_EQ(parse_error_line("a O\nb Q-X\n"), 2u);
  EXPECT_EQ(parse_error_line("a O\nb B-\n"), 2u);
}

TEST(ConllParse, ErrorMessageMentionsLine) {
  try {
    parse_conll("a O\nb I-X\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Bio, EncodeDecodeAgree) {
  Sentence s;
  for (std::size_t i = 0; i < 5; ++i) s.tokens.push_back({"w", i});
  s.entities = {{0, 1, "A"}, {1, 3, "A"}, {4, 5, "B"}};
  const auto tags = encode_bio(s);
  EXPECT_EQ(tags, (TagSequence{"B-A", "B-A", "I-A", "O", "B-B"}));
  EXPECT_EQ(decode_bio(5, tags), s.entities);
}

TEST(Bio, DecodeRejectsBadSequences) {
  EXPECT_THROW(decode_bio(2, {"O", "I-A"}), InvalidArgument);
  EXPECT_THROW(decode_bio(2, {"B-A", "I-B"}), InvalidArgument);
  EXPECT_THROW(decode_bio(3, {"O", "O"}), InvalidArgument);
}

TEST(CheckSentence, FindsInvariantViolations) {
  Sentence s;
  s.id = "s";
  s.tokens = {{"a", 0}, {"b", 1}};
  EXPECT_FALSE(check_sentence(s));
  Sentence bad = s;
  bad.entities = {{1, 3, "X"}};
  EXPECT_TRUE(check_sentence(bad));
  bad.entities = {{0, 2, "X"}, {1, 2, "Y"}};
  EXPECT_TRUE(check_sentence(bad));
  bad.entities = {{1, 1, "X"}};
  EXPECT_TRUE(check_sentence(bad));
  bad = s;
  bad.tokens[1].index = 5;
  EXPECT_TRUE(check_sentence(bad));
  bad = s;
  bad.tokens[0].text = "a b";
  EXPECT_TRUE(check_sentence(bad));
  bad = s;
  bad.entities = {{0, 1, "X"}};
  const Inventory inv({"Y"});
  EXPECT_TRUE(check_sentence(bad, &inv));
  bad.provenance = {Method::kEda, std::nullopt};
  EXPECT_TRUE(check_sentence(bad));
  bad.provenance = {Method::kSeed, std::string("p")};
  EXPECT_TRUE(check_sentence(bad));
  bad.provenance = {Method::kGda, std::nullopt};
  EXPECT_FALSE(check_sentence(bad));
}

TEST(Methods, NamesRoundTrip) {
  for (auto m : {Method::kSeed, Method::kEda, Method::kWordnet, Method::kNaive,
                 Method::kGda}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_THROW(parse_method("bert"), InvalidArgument);
}

TEST(Text, TokenizePeelsTrailingPunctuation) {
  EXPECT_EQ(tokenize("Hello, world.  Done?!"),
            (std::vector<std::string>{"Hello", ",", "world", ".", "Done", "?", "!"}));
  EXPECT_EQ(tokenize(" . "), std::vector<std::string>{"."});
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(Text, SentenceTextAttachesPunctuation) {
  auto s = parse_conll("We O\nwin O\n, O\nfine O\n. O\n");
  EXPECT_EQ(sentence_text(s[0]), "We win, fine.");
  EXPECT_EQ(tokenize(sentence_text(s[0])), s[0].words());
  EXPECT_EQ(normalize_text("  A  b\tC "), "a b c");
}

TEST(Dataset, LoadsFinShapedSplits) {
  const auto ds = load_dataset(GDA_FIXTURES "/fin_shaped", "fin");
  EXPECT_EQ(ds.train.size(), 1018u);
  EXPECT_EQ(ds.dev.size(), 150u);
  EXPECT_EQ(ds.test.size(), 305u);
  EXPECT_EQ(ds.train[3].id, "fin:train:3");
  EXPECT_EQ(ds.dev[0].id, "fin:dev:0");
  const std::set<std::string> labels(ds.inventory.labels().begin(),
                                     ds.inventory.labels().end());
  EXPECT_EQ(labels, (std::set<std::string>{"PER", "ORG", "LOC", "MISC"}));
}

TEST(Dataset, ParseErrorNamesFileAndLine) {
  const auto dir = std::filesystem::temp_directory_path() / "gda_corpus_test";
  std::filesystem::create_directories(dir);
  write_file(dir / "bad.conll", "a O\n\nb O\nc I-X\n");
  try {
    load_dataset(dir / "bad.conll", "bad");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bad.conll"), std::string::npos);
    EXPECT_EQ(msg.find("line 4"), msg.rfind("line 4"));
  }
}

TEST(Seeds, SampleIsDeterministicSortedAndUnique) {
  const auto ds = load_dataset(GDA_FIXTURES "/fin_shaped", "fin");
  const auto a = sample_seeds(ds, 200, 42);
  const auto b = sample_seeds(ds, 200, 42);
  const auto c = sample_seeds(ds, 200, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  ASSERT_EQ(a.size(), 200u);
  std::set<std::string> ids;
  std::size_t last = 0;
  for (const auto& s : a) {
    ids.insert(s.id);
    const std::size_t ord = std::stoul(s.id.substr(s.id.rfind(':') + 1));
    EXPECT_GE(ord, last);
    last = ord;
  }
  EXPECT_EQ(ids.size(), 200u);
  EXPECT_THROW(sample_seeds(ds, 1019, 1), InvalidArgument);
  EXPECT_EQ(sample_seeds(ds, 0, 1).size(), 0u);
}

TEST(RoundTrip, ParseSerializeIsIdentityOnRandomCorpora) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    gda::testing::CorpusShape shape;
    shape.sentences = 1 + trial % 17;
    const auto sentences = gda::testing::random_sentences(rng, shape, "r:");
    const auto text = serialize_conll(sentences);
    const auto back = parse_conll(text, "r:");
    ASSERT_EQ(back, sentences);
    ASSERT_EQ(serialize_conll(back), text);
  }
}
