#include <gtest/gtest.h>

#include <atomic>

#include "gda/error.hpp"
#include "gda/pipeline.hpp"
#include "synthetic.hpp"

using namespace gda;
using namespace gda::pipeline;
using corpus::Method;
using corpus::Sentence;
using nlohmann::json;

namespace {

const corpus::Dataset& sci_single() {
  static const auto ds = corpus::load_dataset(GDA_FIXTURES "/sci_single/seed.conll",
                                              "sci_single");
  return ds;
}

const corpus::Dataset& fin() {
  static const auto ds = corpus::load_dataset(GDA_FIXTURES "/fin_shaped", "fin");
  return ds;
}

llm::MockBackend sci_mock() {
  return llm::MockBackend(llm::MockBackend::load_script(
      GDA_FIXTURES "/sci_single/mock_script.json"));
}

RunConfig small(Method method, std::size_t seeds, std::size_t target) {
  RunConfig cfg;
  cfg.method = method;
  cfg.seed_count = seeds;
  cfg.target_augmented = target;
  cfg.backend = llm::BackendKind::kMock;
  return cfg;
}

std::string fenced(const json& j) { return "```json\n" + j.dump() + "\n```"; }

Sentence sentence(const std::string& id, const std::string& text) {
  Sentence s;
  s.id = id;
  const auto words = corpus::tokenize(text);
  for (std::size_t i = 0; i < words.size(); ++i) s.tokens.push_back({words[i], i});
  return s;
}

}  // namespace

TEST(Gda, SciSingleChainRejectsMissingSurface) {
  auto mock = sci_mock();
  const auto templates = prompt::TemplateSet::defaults();
  const RunInputs in{&sci_single(), &mock, &templates, nullptr};
  const auto r = run(small(Method::kGda, 1, 2), in);
  ASSERT_EQ(r.status, RunStatus::kOk);
  ASSERT_EQ(r.selected.size(), 2u);
  EXPECT_EQ(r.selected[0].id, "gda:sci_single:train:0:0");
  EXPECT_EQ(r.selected[0].provenance.method, Method::kGda);
  EXPECT_FALSE(r.selected[0].provenance.parent_id);
  EXPECT_EQ(corpus::sentence_text(r.selected[1]).rfind("Researchers who", 0), 0u);

  const auto& log = r.manifest["seed_logs"][0];
  EXPECT_EQ(log["status"], "ok");
  ASSERT_EQ(log["stages"].size(), 3u);
  EXPECT_EQ(log["stages"][0]["stage"], "seed_generation");
  EXPECT_EQ(log["stages"][1]["stage"], "abstraction");
  EXPECT_EQ(log["stages"][1]["abstraction"]["source_seed_ids"][0], "sci_single:train:0");
  const auto& verdicts = log["stages"][2]["verdicts"];
  ASSERT_EQ(verdicts.size(), 3u);
  EXPECT_EQ(verdicts[0]["verdict"], "rejected");
  EXPECT_EQ(verdicts[0]["reason"], "surface-missing");
  EXPECT_EQ(verdicts[1]["verdict"], "accepted");
  EXPECT_EQ(r.manifest["selected"][0]["seed_id"], "sci_single:train:0");
  EXPECT_EQ(r.manifest["usage"]["calls"], 3);
  EXPECT_TRUE(validate_manifest(r.manifest).empty());

  // The guidance request carries no seed text.
  const std::string guidance = log["stages"][2]["messages"].dump();
  EXPECT_EQ(guidance.find("who take machine translation"), std::string::npos);
}

TEST(Gda, ShortfallWhenTooFewAccepted) {
  auto mock = sci_mock();
  const auto templates = prompt::TemplateSet::defaults();
  const auto r = run(small(Method::kGda, 1, 3), {&sci_single(), &mock, &templates, nullptr});
  EXPECT_EQ(r.status, RunStatus::kShortfall);
  EXPECT_TRUE(r.selected.empty());
  EXPECT_EQ(r.manifest["status"], "shortfall");
  EXPECT_EQ(r.manifest["shortfall"]["available"], 2);
  EXPECT_EQ(r.manifest["shortfall"]["target"], 3);
  EXPECT_TRUE(validate_manifest(r.manifest).empty());
}

TEST(Naive, SciSingleRowsAccepted) {
  auto mock = sci_mock();
  const auto templates = prompt::TemplateSet::defaults();
  const auto r = run(small(Method::kNaive, 1, 3), {&sci_single(), &mock, &templates, nullptr});
  ASSERT_EQ(r.status, RunStatus::kOk);
  ASSERT_EQ(r.selected.size(), 3u);
  for (const auto& s : r.selected) {
    EXPECT_EQ(s.provenance.parent_id, "sci_single:train:0");
  }
  EXPECT_EQ(r.manifest["seed_logs"][0]["stages"].size(), 1u);
}

TEST(Gda, RetriesInvalidRepliesThenSkips) {
  const auto& ds = sci_single();
  int calls = 0;
  llm::FunctionBackend flaky([&](const llm::CompletionRequest& req) {
    ++calls;
    if (req.request_tag.find("#0") != std::string::npos) return std::string("no idea");
    return gda::testing::SyntheticLlm(ds)(req);
  });
  const auto templates = prompt::TemplateSet::defaults();
  auto r = run(small(Method::kGda, 1, 3), {&ds, &flaky, &templates, nullptr});
  ASSERT_EQ(r.status, RunStatus::kOk);
  EXPECT_EQ(calls, 6);
  EXPECT_EQ(r.manifest["seed_logs"][0]["stages"][1]["attempt"], 1);

  calls = 0;
  llm::FunctionBackend broken([&](const llm::CompletionRequest&) {
    ++calls;
    return std::string("```json\n[]\n```");
  });
  r = run(small(Method::kGda, 1, 0), {&ds, &broken, &templates, nullptr});
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(r.manifest["seed_logs"][0]["status"], "skipped");
  EXPECT_EQ(r.manifest["seed_logs"][0]["reason"], "seed_generation: retries exhausted");
  EXPECT_EQ(r.status, RunStatus::kOk);
}

TEST(Gda, AbstractionRepeatingSeedIsRejected) {
  const auto& ds = sci_single();
  const std::string seed_text = corpus::sentence_text(ds.train[0]);
  llm::FunctionBackend leaky([&](const llm::CompletionRequest& req) {
    if (req.request_tag.rfind("abstraction", 0) == 0) {
      return fenced({{"context", "About: " + seed_text},
                     {"structure", "s"},
                     {"roles", {{"Task", "t"}}}});
    }
    return gda::testing::SyntheticLlm(ds)(req);
  });
  const auto templates = prompt::TemplateSet::defaults();
  const auto r = run(small(Method::kGda, 1, 0), {&ds, &leaky, &templates, nullptr});
  const auto& log = r.manifest["seed_logs"][0];
  EXPECT_EQ(log["status"], "skipped");
  EXPECT_EQ(log["stages"][1]["error"]["field"], "seed-text");
}

TEST(Gda, BackendErrorsPropagate) {
  llm::FunctionBackend failing([](const llm::CompletionRequest& req) -> std::string {
    throw llm::ReplayMiss(req.request_tag, "abc");
  });
  const auto templates = prompt::TemplateSet::defaults();
  EXPECT_THROW(run(small(Method::kGda, 5, 5), {&fin(), &failing, &templates, nullptr}),
               llm::ReplayMiss);
}

TEST(Gda, SeedsWithoutEntitiesAreSkipped) {
  corpus::Dataset ds;
  ds.name = "d";
  ds.train = corpus::parse_conll("plain O\nwords O\n", "d:train:");
  llm::FunctionBackend never([](const llm::CompletionRequest&) -> std::string {
    throw std::logic_error("unexpected call");
  });
  const auto templates = prompt::TemplateSet::defaults();
  const auto r = run(small(Method::kGda, 1, 0), {&ds, &never, &templates, nullptr});
  EXPECT_EQ(r.manifest["seed_logs"][0]["reason"], "no-entities");
}

TEST(Gda, OutputsIndependentOfJobs) {
  gda::testing::SyntheticLlm llm(fin());
  llm::FunctionBackend backend([&](const llm::CompletionRequest& r) { return llm(r); });
  const auto templates = prompt::TemplateSet::defaults();
  auto cfg = small(Method::kGda, 200, 600);
  cfg.jobs = 1;
  const auto a = run(cfg, {&fin(), &backend, &templates, nullptr});
  cfg.jobs = 4;
  const auto b = run(cfg, {&fin(), &backend, &templates, nullptr});
  ASSERT_EQ(a.status, RunStatus::kOk);
  EXPECT_EQ(a.selected.size(), 600u);
  EXPECT_EQ(manifest_text(a.manifest), manifest_text(b.manifest));
  EXPECT_TRUE(validate_manifest(a.manifest).empty());
  const auto text = training_set_text(a.seeds, a.selected, fin().inventory);
  EXPECT_EQ(corpus::parse_conll(text).size(), 800u);
}

TEST(Select, DedupesThenRoundRobins) {
  std::vector<SeedPool> pool{
      {"s1", {sentence("a0", "One two ."), sentence("a1", "Three ."), sentence("a2", "one   TWO .")}},
      {"s2", {sentence("b0", "Four ."), sentence("b1", "three .")}},
      {"s3", {sentence("c0", "Five ."), sentence("c1", "Six ."), sentence("c2", "Seven .")}}};
  const auto got = select_responses(pool, 6);
  std::vector<std::string> ids;
  for (const auto& s : got) ids.push_back(s.id);
  EXPECT_EQ(ids, (std::vector<std::string>{"a0", "b0", "c0", "a1", "c1", "c2"}));
  try {
    select_responses(pool, 7);
    FAIL();
  } catch (const ShortfallError& e) {
    EXPECT_EQ(e.available(), 6u);
    EXPECT_EQ(e.target(), 7u);
  }
  EXPECT_TRUE(select_responses(pool, 0).empty());
}

TEST(Rules, EdaBudgetAndSpread) {
  const auto lex = rules::load_lexicon(GDA_SOURCE_DIR "/data/lexicon/demo.tsv");
  auto cfg = small(Method::kEda, 200, 600);
  const auto r = run(cfg, {&fin(), nullptr, nullptr, &lex});
  ASSERT_EQ(r.status, RunStatus::kOk);
  ASSERT_EQ(r.selected.size(), 600u);
  for (const auto& log : r.manifest["seed_logs"]) EXPECT_EQ(log["variants"].size(), 3u);
  EXPECT_TRUE(validate_manifest(r.manifest).empty());
  EXPECT_EQ(corpus::parse_conll(training_set_text(r.seeds, r.selected, fin().inventory))
                .size(),
            800u);

  cfg.target_augmented = 250;
  const auto uneven = run(cfg, {&fin(), nullptr, nullptr, &lex});
  EXPECT_EQ(uneven.selected.size(), 250u);
  EXPECT_EQ(uneven.manifest["seed_logs"][0]["variants"].size(), 2u);
  EXPECT_EQ(uneven.manifest["seed_logs"][199]["variants"].size(), 1u);
}

TEST(Rules, EmptyLexiconWarnsAboutCopies) {
  const rules::SynonymLexicon empty;
  const auto r = run(small(Method::kWordnet, 10, 20), {&fin(), nullptr, nullptr, &empty});
  ASSERT_EQ(r.manifest["warnings"].size(), 1u);
  EXPECT_EQ(r.manifest["warnings"][0], "20 of 20 outputs are unchanged copies of their seed");
}

TEST(Config, Validation) {
  RunConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.method = Method::kSeed;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.candidates_per_seed = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.temperature = -1;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  const auto lex = rules::SynonymLexicon{};
  EXPECT_THROW(run(small(Method::kEda, 2000, 1), {&fin(), nullptr, nullptr, &lex}),
               InvalidArgument);
  EXPECT_THROW(run(small(Method::kEda, 2, 1), {&fin(), nullptr, nullptr, nullptr}),
               InvalidArgument);
  EXPECT_FALSE(RunConfig{}.to_json().contains("jobs"));
}

TEST(Manifest, ValidationCatchesBrokenManifests) {
  const auto lex = rules::load_lexicon(GDA_SOURCE_DIR "/data/lexicon/demo.tsv");
  const auto r = run(small(Method::kEda, 5, 10), {&fin(), nullptr, nullptr, &lex});
  ASSERT_TRUE(validate_manifest(r.manifest).empty());

  auto m = r.manifest;
  m.erase("schema");
  EXPECT_FALSE(validate_manifest(m).empty());
  m = r.manifest;
  m["selected"][0]["id"] = "eda:nowhere:0";
  EXPECT_FALSE(validate_manifest(m).empty());
  m = r.manifest;
  m["selected"].erase(0);
  EXPECT_FALSE(validate_manifest(m).empty());
  m = r.manifest;
  m["selected"][1]["id"] = m["selected"][0]["id"];
  EXPECT_FALSE(validate_manifest(m).empty());
  m = r.manifest;
  m["seed_logs"][0]["seed_id"] = "ghost";
  EXPECT_FALSE(validate_manifest(m).empty());
  m = r.manifest;
  m["usage"]["calls"] = -1;
  EXPECT_FALSE(validate_manifest(m).empty());
  EXPECT_FALSE(validate_manifest(json::array()).empty());
}

TEST(Export, RevalidatesEverySentence) {
  const auto lex = rules::load_lexicon(GDA_SOURCE_DIR "/data/lexicon/demo.tsv");
  const auto r = run(small(Method::kEda, 5, 10), {&fin(), nullptr, nullptr, &lex});
  EXPECT_NO_THROW(training_set_text(r.seeds, r.selected, fin().inventory));

  auto altered = r.selected;
  const auto& span = altered[0].entities.at(0);
  altered[0].tokens[span.start].text = "Changed";
  EXPECT_THROW(training_set_text(r.seeds, altered, fin().inventory), Error);

  auto orphan = r.selected;
  orphan[0].provenance.parent_id = "fin:train:99999";
  EXPECT_THROW(training_set_text(r.seeds, orphan, fin().inventory), Error);

  auto dup = r.selected;
  dup[1].id = dup[0].id;
  EXPECT_THROW(training_set_text(r.seeds, dup, fin().inventory), Error);

  auto typed = r.selected;
  typed[0].entities[0].entity_type = "Disease";
  EXPECT_THROW(training_set_text(r.seeds, typed, fin().inventory), Error);
}
