#include "jobclf/llm_client.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

#include <fmt/format.h>
#include <unistd.h>
#include "json.hpp"

#include "jobclf/digest.hpp"
#include "jobclf/errors.hpp"

namespace fs = std::filesystem;

namespace jobclf {

using json = nlohmann::json;

namespace {

json messages_json(const std::vector<Message>& messages) {
  json arr = json::array();
  for (const auto& m : messages) arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return arr;
}

json response_json(const ChatResponse& r) {
  return {{"text", r.text},
          {"finish_reason", to_string(r.finish_reason)},
          {"prompt_tokens", r.prompt_tokens},
          {"completion_tokens", r.completion_tokens}};
}

ChatResponse response_from_json(const json& j) {
  ChatResponse r;
  r.text = j.at("text").get<std::string>();
  r.finish_reason = parse_finish_reason(j.at("finish_reason").get<std::string>());
  r.prompt_tokens = j.value("prompt_tokens", 0);
  r.completion_tokens = j.value("completion_tokens", 0);
  return r;
}

std::string flatten(const ChatRequest& request) {
  std::string out;
  for (const auto& m : request.messages()) {
    if (!out.empty()) out += "\n\n";
    out += m.content;
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::atomic<std::uint64_t> g_temp_counter{0};

}  // namespace

ChatRequest::ChatRequest(std::string model_id, std::vector<Message> messages, int max_output_tokens, double temperature)
    : model_id_(std::move(model_id)),
      messages_(std::move(messages)),
      temperature_(temperature),
      max_output_tokens_(max_output_tokens) {
  if (temperature_ != 0.0) throw UsageError("harness requests must use temperature 0");
  if (messages_.empty()) throw UsageError("a chat request needs at least one message");
  if (max_output_tokens_ <= 0) throw UsageError("max_output_tokens must be positive");
  if (model_id_.empty()) throw UsageError("model id must not be empty");
}

std::string ChatRequest::canonical_json() const {
  json j = {{"model", model_id_},
            {"messages", messages_json(messages_)},
            {"temperature", temperature_},
            {"max_tokens", max_output_tokens_}};
  return j.dump();
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Other: return "other";
  }
  return "other";
}

FinishReason parse_finish_reason(std::string_view text) {
  if (text == "stop") return FinishReason::Stop;
  if (text == "length") return FinishReason::Length;
  return FinishReason::Other;
}

std::string cache_key(const ChatRequest& request) { return sha256_hex(request.canonical_json()); }

ChatResponse complete(Backend& backend, const ChatRequest& request) { return backend.complete(request); }

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw DataError(fmt::format("cannot create cache directory '{}': {}", dir_.string(), ec.message()));
}

fs::path ResponseCache::path_for(const std::string& key) const {
  if (key.size() < 4) throw UsageError("cache keys are hex digests");
  return dir_ / key.substr(0, 2) / key.substr(2, 2) / (key + ".json");
}

bool ResponseCache::contains(const std::string& key) const { return fs::exists(path_for(key)); }

std::optional<ChatResponse> ResponseCache::lookup(const std::string& key) {
  const auto path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ++misses_;
    return std::nullopt;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    auto j = json::parse(buf.str());
    auto response = response_from_json(j.at("response"));
    ++hits_;
    return response;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("corrupt cache entry '{}': {}", path.string(), e.what()));
  }
}

void ResponseCache::store(const ChatRequest& request, const ChatResponse& response) {
  const auto key = cache_key(request);
  const auto path = path_for(key);
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw DataError(fmt::format("cannot create '{}': {}", path.parent_path().string(), ec.message()));

  json envelope = {{"key", key},
                   {"request", json::parse(request.canonical_json())},
                   {"response", response_json(response)}};
  const auto tmp = path.parent_path() /
                   fmt::format(".{}.{}.{}.tmp", key, ::getpid(), g_temp_counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write cache entry '{}'", tmp.string()));
    out << envelope.dump(1) << '\n';
    out.flush();
    if (!out) throw DataError(fmt::format("cannot write cache entry '{}'", tmp.string()));
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError(fmt::format("cannot commit cache entry '{}': {}", path.string(), ec.message()));
  }
}

CacheStats cache_stats(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError(fmt::format("cache directory '{}' does not exist", dir.string()));
  CacheStats stats;
  fs::recursive_directory_iterator it(dir, ec), end;
  if (ec) throw DataError(fmt::format("cannot read cache directory '{}': {}", dir.string(), ec.message()));
  for (; it != end; it.increment(ec)) {
    if (ec) throw DataError(fmt::format("cannot read cache directory '{}': {}", dir.string(), ec.message()));
    if (!it->is_regular_file()) continue;
    const auto name = it->path().filename().string();
    if (name.starts_with(".") || it->path().extension() != ".json") continue;
    ++stats.entries;
    stats.bytes += it->file_size();
  }
  return stats;
}

CacheStats ResponseCache::stats() const {
  auto s = cache_stats(dir_);
  s.hits = hits_.load();
  s.misses = misses_.load();
  return s;
}

std::size_t ResponseCache::clear() {
  const auto before = cache_stats(dir_).entries;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_, ec)) fs::remove_all(entry.path(), ec);
  if (ec) throw DataError(fmt::format("cannot clear cache '{}': {}", dir_.string(), ec.message()));
  return before;
}

// ---------------------------------------------------------------------------

MockBackend::MockBackend(std::map<std::string, std::string> by_key, std::vector<Rule> rules,
                         std::optional<std::string> fallback)
    : by_key_(std::move(by_key)), rules_(std::move(rules)), fallback_(std::move(fallback)) {}

MockBackend MockBackend::from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    std::map<std::string, std::string> by_key;
    if (j.contains("responses")) by_key = j.at("responses").get<std::map<std::string, std::string>>();
    std::vector<Rule> rules;
    if (j.contains("rules")) {
      for (const auto& r : j.at("rules")) {
        rules.push_back({r.at("contains").get<std::vector<std::string>>(), r.at("response").get<std::string>()});
      }
    }
    std::optional<std::string> fallback;
    if (j.contains("default") && !j.at("default").is_null()) fallback = j.at("default").get<std::string>();
    return MockBackend(std::move(by_key), std::move(rules), std::move(fallback));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed mock script: {}", e.what()));
  }
}

MockBackend MockBackend::load(const fs::path& path) { return from_json(read_text(path)); }

std::string MockBackend::to_json() const {
  json j;
  j["responses"] = by_key_;
  j["rules"] = json::array();
  for (const auto& r : rules_) j["rules"].push_back({{"contains", r.contains}, {"response", r.response}});
  j["default"] = fallback_ ? json(*fallback_) : json(nullptr);
  return j.dump() + "\n";
}

void MockBackend::set_response(std::string key, std::string text) { by_key_[std::move(key)] = std::move(text); }

void MockBackend::add_rule(Rule rule) { rules_.push_back(std::move(rule)); }

ChatResponse MockBackend::complete(const ChatRequest& request) {
  ++calls_;
  const auto key = cache_key(request);
  auto respond = [](const std::string& text) {
    return ChatResponse{text, FinishReason::Stop, 0, 0};
  };
  if (auto it = by_key_.find(key); it != by_key_.end()) return respond(it->second);
  if (!rules_.empty()) {
    const auto flat = flatten(request);
    for (const auto& rule : rules_) {
      bool all = true;
      for (const auto& needle : rule.contains) {
        if (flat.find(needle) == std::string::npos) {
          all = false;
          break;
        }
      }
      if (all) return respond(rule.response);
    }
  }
  if (fallback_) return respond(*fallback_);
  throw BackendError("mock backend has no scripted response for request " + key);
}

// ---------------------------------------------------------------------------

ReplayBackend::ReplayBackend(std::shared_ptr<ResponseCache> cache, bool strict, std::shared_ptr<Backend> upstream)
    : cache_(std::move(cache)), strict_(strict), upstream_(std::move(upstream)) {
  if (!cache_) throw UsageError("replay backend needs a cache");
}

ChatResponse ReplayBackend::complete(const ChatRequest& request) {
  const auto key = cache_key(request);
  if (auto hit = cache_->lookup(key)) return *hit;
  if (strict_ || !upstream_) throw CacheMissError(key);
  auto response = upstream_->complete(request);
  cache_->store(request, response);
  return response;
}

std::string ReplayBackend::descriptor() const {
  if (strict_ || !upstream_) return fmt::format("replay(strict={})", strict_);
  return fmt::format("cached({})", upstream_->descriptor());
}

std::chrono::milliseconds RetryPolicy::base_delay(int attempt) const {
  const double ms = static_cast<double>(initial_delay.count()) * std::pow(multiplier, attempt - 1);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(ms)));
}

ChatResponse parse_completion_payload(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw MalformedPayloadError(fmt::format("backend returned invalid JSON: {}", e.what()));
  }
  try {
    const auto& choice = j.at("choices").at(0);
    ChatResponse r;
    const auto& content = choice.at("message").at("content");
    r.text = content.is_null() ? std::string() : content.get<std::string>();
    const auto reason = choice.value("finish_reason", json(nullptr));
    r.finish_reason = reason.is_string() ? parse_finish_reason(reason.get<std::string>()) : FinishReason::Other;
    if (auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
      r.prompt_tokens = usage->value("prompt_tokens", 0);
      r.completion_tokens = usage->value("completion_tokens", 0);
    }
    if (r.text.empty() && r.finish_reason == FinishReason::Stop) {
      throw MalformedPayloadError("backend returned an empty completion with finish_reason=stop");
    }
    return r;
  } catch (const json::exception& e) {
    throw MalformedPayloadError(fmt::format("unexpected completion payload shape: {}", e.what()));
  }
}

}  // namespace jobclf
