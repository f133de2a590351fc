#include <cstdlib>
#include <mutex>
#include <random>
#include <semaphore>
#include <thread>

#include <fmt/format.h>
#include "httplib.h"

#include "jobclf/errors.hpp"
#include "jobclf/llm_client.hpp"

namespace jobclf {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw UsageError(fmt::format("endpoint '{}' has no scheme", url));
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw UsageError(fmt::format("unsupported endpoint scheme '{}'", scheme));
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool transient_status(int status) { return status == 429 || status == 408 || (status >= 500 && status <= 599); }

}  // namespace

struct RemoteBackend::Impl {
  RemoteConfig config;
  Sleeper sleeper;
  ParsedUrl url;
  std::string api_key;
  std::counting_semaphore<> in_flight;
  std::mutex rng_mutex;
  std::mt19937_64 rng;

  Impl(RemoteConfig cfg, Sleeper s)
      : config(std::move(cfg)),
        sleeper(std::move(s)),
        url(split_url(config.endpoint)),
        in_flight(std::max(1, config.max_in_flight)),
        rng(config.jitter_seed) {}

  std::chrono::milliseconds jittered(int attempt) {
    const auto base = static_cast<double>(config.retry.base_delay(attempt).count());
    double factor = 1.0;
    if (config.retry.jitter > 0.0) {
      std::lock_guard lock(rng_mutex);
      const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
      factor = 1.0 + config.retry.jitter * (2.0 * unit - 1.0);
    }
    return std::chrono::milliseconds(static_cast<std::int64_t>(base * factor));
  }
};

RemoteBackend::RemoteBackend(RemoteConfig config, Sleeper sleeper) {
  if (config.max_in_flight < 1) throw UsageError("max_in_flight must be at least 1");
  if (config.retry.max_attempts < 1) throw UsageError("retry.max_attempts must be at least 1");
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw AuthError(fmt::format("missing credential: environment variable {} is not set", config.api_key_env));
  }
  if (!sleeper) sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  impl_ = std::make_unique<Impl>(std::move(config), std::move(sleeper));
  impl_->api_key = key;
}

RemoteBackend::~RemoteBackend() = default;

std::string RemoteBackend::descriptor() const { return fmt::format("remote({})", impl_->config.endpoint); }

ChatResponse RemoteBackend::complete(const ChatRequest& request) {
  auto& impl = *impl_;
  impl.in_flight.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{impl.in_flight};

  const std::string body = request.canonical_json();
  const httplib::Headers headers = {{"Authorization", "Bearer " + impl.api_key}};
  std::string last_error;

  for (int attempt = 1; attempt <= impl.config.retry.max_attempts; ++attempt) {
    ++attempts_;
    httplib::Client client(impl.url.origin);
    client.set_connection_timeout(impl.config.timeout);
    client.set_read_timeout(impl.config.timeout);
    client.set_write_timeout(impl.config.timeout);
    auto result = client.Post(impl.url.path, headers, body, "application/json");

    if (!result) {
      last_error = fmt::format("transport error: {}", httplib::to_string(result.error()));
    } else if (result->status == 200) {
      return parse_completion_payload(result->body);
    } else if (result->status == 401 || result->status == 403) {
      throw AuthError(fmt::format("backend rejected the credential (HTTP {})", result->status));
    } else if (transient_status(result->status)) {
      last_error = fmt::format("HTTP {}", result->status);
    } else {
      throw BackendError(fmt::format("backend returned HTTP {}: {}", result->status, result->body.substr(0, 200)));
    }
    if (attempt < impl.config.retry.max_attempts) impl.sleeper(impl.jittered(attempt));
  }
  throw RetriesExhaustedError(
      fmt::format("gave up after {} attempts: {}", impl.config.retry.max_attempts, last_error),
      impl.config.retry.max_attempts);
}

}  // namespace jobclf
