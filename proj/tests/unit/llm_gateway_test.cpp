#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include "gda/corpus.hpp"
#include "gda/error.hpp"
#include "gda/llm_gateway.hpp"
#include "httplib.h"

using namespace gda;
using namespace gda::llm;
using nlohmann::json;

namespace {

CompletionRequest request(const std::string& tag = "guidance:s1#0") {
  CompletionRequest r;
  r.model_id = "gpt-3.5-turbo-0125";
  r.messages = {{"system", "You write sentences."}, {"user", "Write 3."}};
  r.temperature = 1.0;
  r.request_tag = tag;
  return r;
}

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "gda_llm_test";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Fingerprint, CoversIdentityFieldsOnly) {
  const auto base = fingerprint(request());
  EXPECT_EQ(base.size(), 64u);
  auto r = request();
  r.max_tokens = 256;
  EXPECT_EQ(fingerprint(r), base);
  r = request();
  r.temperature = 0.7;
  EXPECT_NE(fingerprint(r), base);
  EXPECT_NE(fingerprint(request("guidance:s1#1")), base);
  r = request();
  r.messages[1].content += " ";
  EXPECT_NE(fingerprint(r), base);
  r = request();
  r.model_id = "gpt-4";
  EXPECT_NE(fingerprint(r), base);
}

TEST(Fingerprint, IndependentOfJsonFieldOrder) {
  const json a = json::parse(
      R"({"temperature":1.0,"request_tag":"t#0","model_id":"m",)"
      R"("messages":[{"content":"hi","role":"user"}]})");
  const json b = json::parse(
      R"({"model_id":"m","messages":[{"role":"user","content":"hi"}],)"
      R"("request_tag":"t#0","temperature":1.0})");
  EXPECT_EQ(fingerprint(request_from_json(a)), fingerprint(request_from_json(b)));
}

TEST(Request, ValidateRejectsBadInput) {
  auto r = request();
  EXPECT_NO_THROW(r.validate());
  r.messages.clear();
  EXPECT_THROW(r.validate(), InvalidArgument);
  r = request();
  r.messages[0].role = "tool";
  EXPECT_THROW(r.validate(), InvalidArgument);
  r = request();
  r.temperature = -0.1;
  EXPECT_THROW(r.validate(), InvalidArgument);
}

TEST(Cassette, ParseSkipsBlankLinesAndReportsCorruptLine) {
  CassetteRecord rec{fingerprint(request()), request(), {}};
  rec.response.text = "reply";
  const std::string line = record_to_json(rec).dump();
  const auto c = Cassette::parse(line + "\n\n" + line + "\n");
  EXPECT_EQ(c.size(), 2u);
  ASSERT_NE(c.find(rec.fingerprint), nullptr);
  EXPECT_EQ(c.find(rec.fingerprint)->response.text, "reply");
  try {
    Cassette::parse(line + "\n\n{not json\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Cassette, FirstRecordWins) {
  CassetteRecord a{fingerprint(request()), request(), {}};
  a.response.text = "first";
  CassetteRecord b = a;
  b.response.text = "second";
  const auto c = Cassette::parse(record_to_json(a).dump() + "\n" +
                                 record_to_json(b).dump() + "\n");
  EXPECT_EQ(c.find(a.fingerprint)->response.text, "first");
}

TEST(Replay, HitReturnsRecordedResponseMissThrows) {
  CassetteRecord rec{fingerprint(request()), request(), {}};
  rec.response.text = "recorded";
  rec.response.usage = {10, 5, 15};
  Cassette c;
  c.add(rec);
  ReplayBackend replay(std::move(c));
  const auto out = replay.complete(request());
  EXPECT_EQ(out.text, "recorded");
  EXPECT_EQ(out.usage.total_tokens, 15);
  EXPECT_EQ(out.backend, BackendKind::kReplay);
  try {
    replay.complete(request("guidance:s2#0"));
    FAIL();
  } catch (const ReplayMiss& e) {
    EXPECT_EQ(e.request_tag(), "guidance:s2#0");
    EXPECT_EQ(e.fingerprint(), fingerprint(request("guidance:s2#0")));
  }
}

TEST(Replay, MissingCassetteIsIoError) {
  EXPECT_THROW(open_replay(temp_file("absent.jsonl")), IoError);
}

TEST(Record, AppendsThenReplays) {
  const auto path = temp_file("record.jsonl");
  int calls = 0;
  auto inner = std::make_unique<FunctionBackend>([&](const CompletionRequest& r) {
    ++calls;
    return "echo " + r.request_tag;
  });
  auto recorder = record_session(std::move(inner), path);
  EXPECT_EQ(recorder->complete(request("a#0")).text, "echo a#0");
  EXPECT_EQ(recorder->complete(request("b#0")).text, "echo b#0");
  EXPECT_EQ(calls, 2);

  auto replay = open_replay(path);
  EXPECT_EQ(replay->complete(request("b#0")).text, "echo b#0");
  EXPECT_EQ(replay->complete(request("a#0")).text, "echo a#0");
  EXPECT_EQ(calls, 2);
}

TEST(Record, FailedRequestsAreNotRecorded) {
  const auto path = temp_file("record_fail.jsonl");
  auto inner = std::make_unique<FunctionBackend>(
      [](const CompletionRequest& r) -> std::string {
        throw TransportError(r.request_tag, "boom", 500);
      });
  auto recorder = record_session(std::move(inner), path);
  EXPECT_THROW(recorder->complete(request()), TransportError);
  EXPECT_EQ(corpus::read_file(path), "");
}

TEST(Mock, ExactTagThenBaseTagThenExhausted) {
  MockBackend mock(MockBackend::script_from_json(json::parse(
      R"({"guidance:s1#1": "exact", "guidance:s1": ["base-a", "base-b"]})")));
  EXPECT_EQ(mock.complete(request("guidance:s1#1")).text, "exact");
  EXPECT_EQ(mock.complete(request("guidance:s1#1")).text, "base-a");
  EXPECT_EQ(mock.complete(request("guidance:s1#0")).text, "base-b");
  EXPECT_THROW(mock.complete(request("guidance:s1#0")), MockExhausted);
  EXPECT_THROW(mock.complete(request("naive:s1#0")), MockExhausted);
}

TEST(Mock, ScriptMustBeObjectOfStrings) {
  EXPECT_THROW(MockBackend::script_from_json(json::array()), InvalidArgument);
  EXPECT_THROW(MockBackend::script_from_json(json::parse(R"({"t": 3})")),
               InvalidArgument);
}

TEST(Retry, DelayDoublesUpToCap) {
  RetryPolicy p;
  p.base_delay = std::chrono::milliseconds(100);
  p.max_delay = std::chrono::milliseconds(500);
  EXPECT_EQ(p.delay(1).count(), 100);
  EXPECT_EQ(p.delay(2).count(), 200);
  EXPECT_EQ(p.delay(3).count(), 400);
  EXPECT_EQ(p.delay(4).count(), 500);
  EXPECT_TRUE(RetryPolicy::retryable(429));
  EXPECT_TRUE(RetryPolicy::retryable(503));
  EXPECT_TRUE(RetryPolicy::retryable(0));
  EXPECT_FALSE(RetryPolicy::retryable(400));
  EXPECT_FALSE(RetryPolicy::retryable(401));
}

TEST(Wire, RequestBodyShape) {
  auto r = request();
  r.max_tokens = 64;
  const json body = chat_request_body(r);
  EXPECT_EQ(body["model"], "gpt-3.5-turbo-0125");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], "Write 3.");
  EXPECT_EQ(body["temperature"], 1.0);
  EXPECT_EQ(body["max_tokens"], 64);
  EXPECT_FALSE(body.contains("request_tag"));
}

TEST(Wire, SplitBaseUrl) {
  EXPECT_EQ(split_base_url("https://api.openai.com/v1"),
            (std::pair<std::string, std::string>{"https://api.openai.com", "/v1"}));
  EXPECT_EQ(split_base_url("http://localhost:8080"),
            (std::pair<std::string, std::string>{"http://localhost:8080", ""}));
  EXPECT_EQ(split_base_url("http://h/a/b/"),
            (std::pair<std::string, std::string>{"http://h", "/a/b"}));
  EXPECT_THROW(split_base_url("localhost"), InvalidArgument);
}

class LocalServer : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                               httplib::Response& res) {
      const int n = ++hits_;
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      if (n <= failures_) {
        res.status = fail_status_;
        res.set_content(R"({"error":"busy"})", "application/json");
        return;
      }
      res.set_content(
          R"({"model":"gpt-3.5-turbo-0125","choices":[{"message":{"role":"assistant","content":"hello"}}],)"
          R"("usage":{"prompt_tokens":7,"completion_tokens":2,"total_tokens":9}})",
          "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  std::unique_ptr<LiveBackend> backend(int max_attempts) {
    LiveConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    cfg.retry.max_attempts = max_attempts;
    cfg.timeout = std::chrono::seconds(5);
    auto b = std::make_unique<LiveBackend>(
        cfg, make_http_transport("http://127.0.0.1:" + std::to_string(port_),
                                 cfg.timeout),
        "test-key");
    b->set_sleeper([this](std::chrono::milliseconds d) { slept_.push_back(d); });
    return b;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  int failures_ = 0;
  int fail_status_ = 429;
  std::string last_body_;
  std::string last_auth_;
  std::vector<std::chrono::milliseconds> slept_;
};

TEST_F(LocalServer, ParsesCompletionAndSendsWireBody) {
  auto r = request();
  r.max_tokens = 32;
  const auto out = backend(3)->complete(r);
  EXPECT_EQ(out.text, "hello");
  EXPECT_EQ(out.usage.total_tokens, 9);
  EXPECT_EQ(out.backend, BackendKind::kLive);
  EXPECT_EQ(last_auth_, "Bearer test-key");
  EXPECT_EQ(json::parse(last_body_), chat_request_body(r));
}

TEST_F(LocalServer, RetriesRateLimitsWithBackoff) {
  failures_ = 2;
  const auto out = backend(5)->complete(request());
  EXPECT_EQ(out.text, "hello");
  EXPECT_EQ(hits_.load(), 3);
  ASSERT_EQ(slept_.size(), 2u);
  EXPECT_EQ(slept_[0].count(), 1000);
  EXPECT_EQ(slept_[1].count(), 2000);
}

TEST_F(LocalServer, GivesUpAfterMaxAttempts) {
  failures_ = 100;
  fail_status_ = 503;
  try {
    backend(3)->complete(request());
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 503);
  }
  EXPECT_EQ(hits_.load(), 3);
}

TEST_F(LocalServer, ClientErrorsAreNotRetried) {
  failures_ = 100;
  fail_status_ = 401;
  EXPECT_THROW(backend(5)->complete(request()), TransportError);
  EXPECT_EQ(hits_.load(), 1);
}

TEST(Live, ConnectionFailureIsTransportError) {
  LiveConfig cfg;
  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.retry.max_attempts = 2;
  LiveBackend b(cfg, make_http_transport("http://127.0.0.1:1", std::chrono::seconds(2)),
                "k");
  b.set_sleeper([](std::chrono::milliseconds) {});
  try {
    b.complete(request());
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 0);
  }
}

TEST(Live, MissingApiKeyIsReported) {
  LiveConfig cfg;
  cfg.api_key_env = "GDA_TEST_UNSET_KEY_VARIABLE";
  EXPECT_THROW(LiveBackend{cfg}, Error);
}
