#include "gda/llm_gateway.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "gda/corpus.hpp"

namespace gda::llm {

using nlohmann::json;

namespace {

std::string base_tag(const std::string& tag) {
  const auto hash = tag.rfind('#');
  return hash == std::string::npos ? tag : tag.substr(0, hash);
}

json usage_to_json(const Usage& u) {
  return json{{"prompt_tokens", u.prompt_tokens},
              {"completion_tokens", u.completion_tokens},
              {"total_tokens", u.total_tokens}};
}

Usage usage_from_json(const json& j) {
  Usage u;
  if (!j.is_object()) return u;
  u.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
  u.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  u.total_tokens = j.value("total_tokens", u.prompt_tokens + u.completion_tokens);
  return u;
}

}  // namespace

std::string_view backend_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kLive:
      return "live";
    case BackendKind::kRecord:
      return "record";
    case BackendKind::kReplay:
      return "replay";
    case BackendKind::kMock:
      return "mock";
  }
  return "live";
}

BackendKind parse_backend(std::string_view name) {
  for (auto k : {BackendKind::kLive, BackendKind::kRecord, BackendKind::kReplay,
                 BackendKind::kMock}) {
    if (backend_name(k) == name) return k;
  }
  throw InvalidArgument("unknown backend '" + std::string(name) + "'");
}

void CompletionRequest::validate() const {
  if (messages.empty()) throw InvalidArgument("request has no messages");
  for (const auto& m : messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant") {
      throw InvalidArgument("unknown message role '" + m.role + "'");
    }
  }
  if (!(temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

json request_to_json(const CompletionRequest& r) {
  json messages = json::array();
  for (const auto& m : r.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  json j{{"model_id", r.model_id},
         {"messages", std::move(messages)},
         {"temperature", r.temperature},
         {"request_tag", r.request_tag}};
  if (r.max_tokens) j["max_tokens"] = *r.max_tokens;
  return j;
}

CompletionRequest request_from_json(const json& j) {
  CompletionRequest r;
  r.model_id = j.at("model_id").get<std::string>();
  for (const auto& m : j.at("messages")) {
    r.messages.push_back(
        {m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  }
  r.temperature = j.at("temperature").get<double>();
  r.request_tag = j.at("request_tag").get<std::string>();
  if (j.contains("max_tokens") && !j["max_tokens"].is_null()) {
    r.max_tokens = j["max_tokens"].get<int>();
  }
  return r;
}

std::string fingerprint(const CompletionRequest& request) {
  json key = request_to_json(request);
  key.erase("max_tokens");
  return sha256_hex(key.dump());
}

json record_to_json(const CassetteRecord& rec) {
  return json{
      {"fingerprint", rec.fingerprint},
      {"request", request_to_json(rec.request)},
      {"response",
       {{"text", rec.response.text},
        {"model_id", rec.response.model_id},
        {"usage", usage_to_json(rec.response.usage)},
        {"latency_ms", rec.response.latency.count()}}}};
}

CassetteRecord record_from_json(const json& j) {
  CassetteRecord rec;
  rec.fingerprint = j.at("fingerprint").get<std::string>();
  rec.request = request_from_json(j.at("request"));
  const auto& resp = j.at("response");
  rec.response.text = resp.at("text").get<std::string>();
  rec.response.model_id = resp.value("model_id", rec.request.model_id);
  rec.response.usage = usage_from_json(resp.value("usage", json::object()));
  rec.response.latency =
      std::chrono::milliseconds(resp.value("latency_ms", std::int64_t{0}));
  return rec;
}

// ---------------------------------------------------------------------------

Cassette Cassette::parse(std::string_view text) {
  Cassette c;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      c.add(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("corrupted cassette record: ") +
                                    e.what());
    }
  }
  return c;
}

Cassette Cassette::load(const std::filesystem::path& path) {
  const std::string text = corpus::read_file(path);
  try {
    return parse(text);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.detail());
  }
}

const CassetteRecord* Cassette::find(const std::string& fp) const {
  auto it = index_.find(fp);
  return it == index_.end() ? nullptr : &records_[it->second];
}

void Cassette::add(CassetteRecord record) {
  // First record wins; later duplicates stay in the log but are unreachable.
  index_.emplace(record.fingerprint, records_.size());
  records_.push_back(std::move(record));
}

CompletionResult ReplayBackend::complete(const CompletionRequest& request) {
  request.validate();
  const std::string fp = fingerprint(request);
  const CassetteRecord* rec = cassette_.find(fp);
  if (!rec) throw ReplayMiss(request.request_tag, fp);
  CompletionResult out = rec->response;
  out.backend = BackendKind::kReplay;
  return out;
}

RecordingBackend::RecordingBackend(std::unique_ptr<CompletionBackend> inner,
                                   const std::filesystem::path& cassette_path)
    : inner_(std::move(inner)), path_(cassette_path) {
  std::ofstream probe(path_, std::ios::app);
  if (!probe) throw IoError("cannot open cassette " + path_.string());
}

CompletionResult RecordingBackend::complete(const CompletionRequest& request) {
  CompletionResult result = inner_->complete(request);
  CassetteRecord rec{fingerprint(request), request, result};
  const std::string line = record_to_json(rec).dump() + "\n";
  {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << line;
    out.flush();
    if (!out) throw IoError("cannot append to cassette " + path_.string());
  }
  result.backend = BackendKind::kRecord;
  return result;
}

std::unique_ptr<CompletionBackend> open_replay(
    const std::filesystem::path& cassette_path) {
  return std::make_unique<ReplayBackend>(Cassette::load(cassette_path));
}

std::unique_ptr<CompletionBackend> record_session(
    std::unique_ptr<CompletionBackend> inner,
    const std::filesystem::path& cassette_path) {
  return std::make_unique<RecordingBackend>(std::move(inner), cassette_path);
}

// ---------------------------------------------------------------------------

MockBackend::Script MockBackend::script_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("mock script must be a JSON object");
  Script script;
  for (const auto& [tag, replies] : j.items()) {
    auto& queue = script[tag];
    if (replies.is_string()) {
      queue.push_back(replies.get<std::string>());
      continue;
    }
    if (!replies.is_array()) {
      throw InvalidArgument("mock script entry '" + tag +
                            "' must be a string or array of strings");
    }
    for (const auto& r : replies) queue.push_back(r.get<std::string>());
  }
  return script;
}

MockBackend::Script MockBackend::load_script(
    const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(corpus::read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
  return script_from_json(j);
}

CompletionResult MockBackend::complete(const CompletionRequest& request) {
  request.validate();
  std::string text;
  {
    std::lock_guard lock(mutex_);
    auto it = script_.find(request.request_tag);
    if (it == script_.end() || it->second.empty()) {
      it = script_.find(base_tag(request.request_tag));
    }
    if (it == script_.end() || it->second.empty()) {
      throw MockExhausted(request.request_tag);
    }
    text = std::move(it->second.front());
    it->second.pop_front();
  }
  CompletionResult out;
  out.text = std::move(text);
  out.model_id = request.model_id;
  out.backend = BackendKind::kMock;
  return out;
}

CompletionResult FunctionBackend::complete(const CompletionRequest& request) {
  request.validate();
  CompletionResult out;
  out.text = fn_(request);
  out.model_id = request.model_id;
  out.backend = BackendKind::kMock;
  return out;
}

// ---------------------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::delay(int attempt) const {
  auto d = base_delay;
  for (int i = 1; i < attempt && d < max_delay; ++i) d *= 2;
  return std::min(d, max_delay);
}

json chat_request_body(const CompletionRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  json body{{"model", request.model_id},
            {"messages", std::move(messages)},
            {"temperature", request.temperature}};
  if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
  return body;
}

std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw InvalidArgument("base URL needs a scheme: " + url);
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

LiveBackend::LiveBackend(LiveConfig config)
    : LiveBackend(config,
                  make_http_transport(split_base_url(config.base_url).first,
                                      config.timeout),
                  [&] {
                    const char* key = std::getenv(config.api_key_env.c_str());
                    if (!key || !*key) {
                      throw Error("environment variable " +
                                  config.api_key_env +
                                  " is not set; live backend needs a key");
                    }
                    return std::string(key);
                  }()) {}

LiveBackend::LiveBackend(LiveConfig config,
                         std::unique_ptr<HttpTransport> transport,
                         std::string api_key)
    : config_(std::move(config)),
      path_prefix_(split_base_url(config_.base_url).second),
      transport_(std::move(transport)),
      api_key_(std::move(api_key)),
      in_flight_(std::max(1, config_.max_in_flight)),
      sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
}

CompletionResult LiveBackend::complete(const CompletionRequest& request) {
  request.validate();
  const std::string body = chat_request_body(request).dump();
  const std::map<std::string, std::string> headers{
      {"Authorization", "Bearer " + api_key_}};
  const std::string path = path_prefix_ + "/chat/completions";

  struct Slot {
    std::counting_semaphore<>& sem;
    explicit Slot(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
    ~Slot() { sem.release(); }
  } slot(in_flight_);

  const auto started = std::chrono::steady_clock::now();
  HttpResponse resp;
  const int attempts = std::max(1, config_.retry.max_attempts);
  for (int attempt = 1;; ++attempt) {
    resp = transport_->post(path, headers, body);
    if (resp.status == 200) break;
    const std::string what =
        resp.status == 0 ? "connection failed: " + resp.error
                         : "HTTP " + std::to_string(resp.status) + ": " +
                               resp.body.substr(0, 300);
    if (!RetryPolicy::retryable(resp.status)) {
      throw TransportError(request.request_tag, what, resp.status);
    }
    if (attempt >= attempts) {
      throw TransportError(request.request_tag,
                           "giving up after " + std::to_string(attempts) +
                               " attempts; last " + what,
                           resp.status);
    }
    sleep_(config_.retry.delay(attempt));
  }

  CompletionResult out;
  out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  out.backend = BackendKind::kLive;
  try {
    const json j = json::parse(resp.body);
    out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    out.model_id = j.value("model", request.model_id);
    out.usage = usage_from_json(j.value("usage", json::object()));
  } catch (const json::exception& e) {
    throw TransportError(request.request_tag,
                         std::string("malformed completion body: ") + e.what(),
                         resp.status);
  }
  return out;
}

}  // namespace gda::llm
