#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "jobclf/prompt_catalog.hpp"

namespace jobclf {

/// A chat-completion request. Temperature is always 0; the constructor
/// rejects anything else.
class ChatRequest {
 public:
  static constexpr int kDefaultMaxOutputTokens = 512;

  ChatRequest(std::string model_id, std::vector<Message> messages, int max_output_tokens = kDefaultMaxOutputTokens,
              double temperature = 0.0);

  const std::string& model_id() const { return model_id_; }
  const std::vector<Message>& messages() const { return messages_; }
  double temperature() const { return temperature_; }
  int max_output_tokens() const { return max_output_tokens_; }

  /// Canonical JSON: sorted keys, no whitespace. Also the wire body.
  std::string canonical_json() const;

 private:
  std::string model_id_;
  std::vector<Message> messages_;
  double temperature_;
  int max_output_tokens_;
};

enum class FinishReason { Stop, Length, Other };
std::string_view to_string(FinishReason reason);
FinishReason parse_finish_reason(std::string_view text);

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::Stop;
  int prompt_tokens = 0;
  int completion_tokens = 0;

  friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

/// SHA-256 over the canonical request serialization.
std::string cache_key(const ChatRequest& request);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  /// Human-readable description for manifests and reports.
  virtual std::string descriptor() const = 0;
};

/// Free-function form of Backend::complete.
ChatResponse complete(Backend& backend, const ChatRequest& request);

// ---------------------------------------------------------------------------
// Response cache

struct CacheStats {
  std::size_t entries = 0;
  std::uintmax_t bytes = 0;
  std::size_t hits = 0;
  std::size_t misses = 0;
};

/// One JSON file per key at <dir>/<k[0:2]>/<k[2:4]>/<k>.json holding the
/// full request and response. Writes are atomic (temp file + rename).
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_for(const std::string& key) const;

  /// Counts a hit or a miss.
  std::optional<ChatResponse> lookup(const std::string& key);
  void store(const ChatRequest& request, const ChatResponse& response);
  bool contains(const std::string& key) const;

  /// Entries and bytes on disk plus this object's hit/miss counters.
  CacheStats stats() const;
  /// Removes every entry; returns how many were deleted.
  std::size_t clear();

 private:
  std::filesystem::path dir_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

/// Entry and byte counts for a cache directory. Throws DataError when the
/// directory cannot be read.
CacheStats cache_stats(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Backends

/// Scripted responses: exact request keys first, then matcher rules (every
/// `contains` string must occur in the flattened prompt), then the default.
class MockBackend final : public Backend {
 public:
  struct Rule {
    std::vector<std::string> contains;
    std::string response;
  };

  MockBackend() = default;
  MockBackend(std::map<std::string, std::string> by_key, std::vector<Rule> rules,
              std::optional<std::string> fallback = std::nullopt);
  MockBackend(MockBackend&& other) noexcept
      : by_key_(std::move(other.by_key_)),
        rules_(std::move(other.rules_)),
        fallback_(std::move(other.fallback_)),
        calls_(other.calls_.load()) {}

  /// {"responses": {key: text}, "rules": [{"contains": [...], "response": "..."}], "default": "..."}
  static MockBackend from_json(std::string_view text);
  static MockBackend load(const std::filesystem::path& path);
  std::string to_json() const;

  void set_response(std::string key, std::string text);
  void add_rule(Rule rule);

  ChatResponse complete(const ChatRequest& request) override;
  std::string descriptor() const override { return "mock"; }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::map<std::string, std::string> by_key_;
  std::vector<Rule> rules_;
  std::optional<std::string> fallback_;
  std::atomic<std::size_t> calls_{0};
};

/// Cache-first backend. A hit returns the stored response. On a miss a
/// strict replay raises CacheMissError; otherwise the request goes to
/// `upstream` and the response is stored before it is returned.
class ReplayBackend final : public Backend {
 public:
  ReplayBackend(std::shared_ptr<ResponseCache> cache, bool strict, std::shared_ptr<Backend> upstream = nullptr);

  ChatResponse complete(const ChatRequest& request) override;
  std::string descriptor() const override;

  ResponseCache& cache() { return *cache_; }
  bool strict() const { return strict_; }

 private:
  std::shared_ptr<ResponseCache> cache_;
  bool strict_;
  std::shared_ptr<Backend> upstream_;
};

struct RetryPolicy {
  std::chrono::milliseconds initial_delay{1000};
  double multiplier = 2.0;
  double jitter = 0.2;  // +/- fraction of each delay
  int max_attempts = 6;

  /// Delay before attempt `attempt + 1`, attempt counted from 1, before jitter.
  std::chrono::milliseconds base_delay(int attempt) const;
};

struct RemoteConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "HARNESS_API_KEY";
  RetryPolicy retry;
  int max_in_flight = 4;
  std::chrono::seconds timeout{120};
  std::uint64_t jitter_seed = 7;
};

/// OpenAI-style chat completions over HTTP(S). Retries 429, 5xx and transport
/// failures with exponential backoff; 401/403 fail immediately. The
/// credential is read from the environment once and never logged.
class RemoteBackend final : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  /// Throws AuthError when the credential variable is unset or empty.
  explicit RemoteBackend(RemoteConfig config, Sleeper sleeper = {});
  ~RemoteBackend() override;

  ChatResponse complete(const ChatRequest& request) override;
  std::string descriptor() const override;

  /// HTTP attempts made, including retries.
  std::size_t attempts() const { return attempts_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<std::size_t> attempts_{0};
};

/// Parses a chat-completions response body. Throws MalformedPayloadError.
ChatResponse parse_completion_payload(std::string_view body);

}  // namespace jobclf
