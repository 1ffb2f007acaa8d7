#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "gda/error.hpp"
#include "json.hpp"

namespace gda::llm {

struct Message {
  std::string role;  // system | user | assistant
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

struct CompletionRequest {
  std::string model_id;
  std::vector<Message> messages;
  double temperature = 1.0;
  std::optional<int> max_tokens;
  std::string request_tag;

  // Throws InvalidArgument on empty messages, unknown roles or a negative
  // temperature.
  void validate() const;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t total_tokens = 0;
};

enum class BackendKind { kLive, kRecord, kReplay, kMock };

std::string_view backend_name(BackendKind kind);
BackendKind parse_backend(std::string_view name);

struct CompletionResult {
  std::string text;
  std::string model_id;
  Usage usage;
  std::chrono::milliseconds latency{0};
  BackendKind backend = BackendKind::kLive;
};

// Base of the backend failures; each carries the request tag it belongs to.
class BackendError : public Error {
 public:
  BackendError(std::string request_tag, const std::string& message)
      : Error("[" + request_tag + "] " + message),
        request_tag_(std::move(request_tag)) {}
  const std::string& request_tag() const { return request_tag_; }

 private:
  std::string request_tag_;
};

class TransportError : public BackendError {
 public:
  TransportError(std::string tag, const std::string& message, int status)
      : BackendError(std::move(tag), message), status_(status) {}
  // Last HTTP status, 0 for connection-level failures.
  int status() const { return status_; }

 private:
  int status_;
};

class ReplayMiss : public BackendError {
 public:
  ReplayMiss(std::string tag, std::string fingerprint)
      : BackendError(std::move(tag),
                     "replay miss: fingerprint " + fingerprint +
                         " not in cassette"),
        fingerprint_(std::move(fingerprint)) {}
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::string fingerprint_;
};

class MockExhausted : public BackendError {
 public:
  explicit MockExhausted(std::string tag)
      : BackendError(tag, "mock script exhausted") {}
};

// SHA-256 hex of the canonical JSON of (model_id, messages, temperature,
// request_tag). Canonical JSON sorts object keys, so field order is
// irrelevant.
std::string fingerprint(const CompletionRequest& request);

nlohmann::json request_to_json(const CompletionRequest& request);
CompletionRequest request_from_json(const nlohmann::json& j);

std::string sha256_hex(std::string_view data);

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
  virtual BackendKind kind() const = 0;
};

// ---------------------------------------------------------------------------
// Cassette: JSON-lines log of {fingerprint, request, response}.

struct CassetteRecord {
  std::string fingerprint;
  CompletionRequest request;
  CompletionResult response;
};

nlohmann::json record_to_json(const CassetteRecord& record);
CassetteRecord record_from_json(const nlohmann::json& j);

class Cassette {
 public:
  // Throws ParseError naming the first corrupted line.
  static Cassette load(const std::filesystem::path& path);
  static Cassette parse(std::string_view text);

  const CassetteRecord* find(const std::string& fingerprint) const;
  std::size_t size() const { return records_.size(); }
  void add(CassetteRecord record);

 private:
  std::vector<CassetteRecord> records_;
  std::map<std::string, std::size_t> index_;
};

class ReplayBackend : public CompletionBackend {
 public:
  explicit ReplayBackend(Cassette cassette) : cassette_(std::move(cassette)) {}
  CompletionResult complete(const CompletionRequest& request) override;
  BackendKind kind() const override { return BackendKind::kReplay; }

 private:
  const Cassette cassette_;
};

// Forwards to an inner backend and appends each successful exchange to the
// cassette file. Appends are serialized; failed requests are not recorded.
class RecordingBackend : public CompletionBackend {
 public:
  RecordingBackend(std::unique_ptr<CompletionBackend> inner,
                   const std::filesystem::path& cassette_path);
  CompletionResult complete(const CompletionRequest& request) override;
  BackendKind kind() const override { return BackendKind::kRecord; }

 private:
  std::unique_ptr<CompletionBackend> inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
};

std::unique_ptr<CompletionBackend> open_replay(
    const std::filesystem::path& cassette_path);
std::unique_ptr<CompletionBackend> record_session(
    std::unique_ptr<CompletionBackend> inner,
    const std::filesystem::path& cassette_path);

// ---------------------------------------------------------------------------
// Mock: replies scripted per request tag. A tag "stage:id#attempt" falls back
// to the queue for "stage:id" when no exact entry exists.

class MockBackend : public CompletionBackend {
 public:
  using Script = std::map<std::string, std::deque<std::string>>;

  explicit MockBackend(Script script) : script_(std::move(script)) {}
  // JSON object: {"<tag>": ["reply", ...], ...}
  static Script script_from_json(const nlohmann::json& j);
  static Script load_script(const std::filesystem::path& path);

  CompletionResult complete(const CompletionRequest& request) override;
  BackendKind kind() const override { return BackendKind::kMock; }

 private:
  Script script_;
  std::mutex mutex_;
};

// Adapts a function into a backend; used for synthetic responders.
class FunctionBackend : public CompletionBackend {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
  CompletionResult complete(const CompletionRequest& request) override;
  BackendKind kind() const override { return BackendKind::kMock; }

 private:
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Live chat-completions transport.

struct HttpResponse {
  int status = 0;  // 0 when the connection failed
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& path,
                            const std::map<std::string, std::string>& headers,
                            const std::string& body) = 0;
};

// cpp-httplib client bound to scheme://host[:port].
std::unique_ptr<HttpTransport> make_http_transport(
    const std::string& origin, std::chrono::seconds timeout);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  std::chrono::milliseconds max_delay{30000};

  // Delay before attempt number `attempt` (1-based retry index).
  std::chrono::milliseconds delay(int attempt) const;
  static bool retryable(int status) {
    return status == 0 || status == 429 || (status >= 500 && status < 600);
  }
};

struct LiveConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
  int max_in_flight = 4;
};

// Wire body for POST <base_url>/chat/completions.
nlohmann::json chat_request_body(const CompletionRequest& request);

class LiveBackend : public CompletionBackend {
 public:
  // Reads the API key from the configured environment variable.
  explicit LiveBackend(LiveConfig config);
  LiveBackend(LiveConfig config, std::unique_ptr<HttpTransport> transport,
              std::string api_key);

  CompletionResult complete(const CompletionRequest& request) override;
  BackendKind kind() const override { return BackendKind::kLive; }

  // Replaces the sleep between retries; tests use it to skip real waits.
  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) {
    sleep_ = std::move(sleeper);
  }

 private:
  LiveConfig config_;
  std::string path_prefix_;
  std::unique_ptr<HttpTransport> transport_;
  std::string api_key_;
  std::counting_semaphore<> in_flight_;
  std::function<void(std::chrono::milliseconds)> sleep_;
};

// Splits "https://host:port/v1" into origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& url);

}  // namespace gda::llm
