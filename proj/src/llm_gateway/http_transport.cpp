#include "httplib.h"

#include "gda/llm_gateway.hpp"

namespace gda::llm {

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(std::string origin, std::chrono::seconds timeout)
      : origin_(std::move(origin)), timeout_(timeout) {}

  HttpResponse post(const std::string& path,
                    const std::map<std::string, std::string>& headers,
                    const std::string& body) override {
    // One client per call: httplib::Client is not safe for concurrent use.
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = client.Post(path, h, body, "application/json");
    if (!res) return HttpResponse{0, "", httplib::to_string(res.error())};
    return HttpResponse{res->status, res->body, ""};
  }

 private:
  std::string origin_;
  std::chrono::seconds timeout_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& origin,
                                                   std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(origin, timeout);
}

}  // namespace gda::llm
