#pragma once

#include <chrono>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace lemcts {

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HttpConfig {
  std::string endpoint;       // e.g. "http://127.0.0.1:8080"
  int timeout_ms = 30000;
  int retries = 3;            // total attempts
  int backoff_ms = 250;       // doubles per retry
  int max_in_flight = 8;
  std::string auth_token;     // optional bearer token
};

/**
 * Minimal JSON-over-HTTP client: bounded in-flight requests, retry with
 * exponential backoff on transport errors, non-2xx statuses, and unparsable
 * bodies. Shared by the completion and scoring backends.
 *
 * One connection per request; httplib::Client serializes requests on a
 * shared socket, which would defeat the in-flight bound.
 */
class HttpJsonClient {
public:
  explicit HttpJsonClient(HttpConfig cfg)
      : cfg_(std::move(cfg)), slots_(cfg_.max_in_flight > 0 ? cfg_.max_in_flight : 1) {}

  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    std::string payload = body.dump();
    std::string last_error;
    int backoff = cfg_.backoff_ms;
    int attempts = cfg_.retries > 0 ? cfg_.retries : 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
      }
      slots_.acquire();
      httplib::Result res = do_post(path, payload);
      slots_.release();
      if (!res) {
        last_error = "transport: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
      if (parsed.is_discarded()) {
        last_error = "malformed response body";
        continue;
      }
      return parsed;
    }
    throw TransportError("POST " + cfg_.endpoint + path + " failed after " +
                         std::to_string(attempts) + " attempts: " + last_error);
  }

  const HttpConfig& config() const { return cfg_; }

private:
  httplib::Result do_post(const std::string& path, const std::string& payload) {
    httplib::Client client(cfg_.endpoint);
    client.set_connection_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    client.set_write_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    if (!cfg_.auth_token.empty())
      client.set_default_headers({{"Authorization", "Bearer " + cfg_.auth_token}});
    return client.Post(path, payload, "application/json");
  }

  HttpConfig cfg_;
  std::counting_semaphore<4096> slots_;
};

}  // namespace lemcts
