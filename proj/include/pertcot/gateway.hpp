#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "pertcot/errors.hpp"
#include "pertcot/response_cache.hpp"

namespace pertcot {

struct ChatRequest {
  std::string model_name;
  std::string system_text;
  std::string user_text;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  std::optional<std::int64_t> seed_hint;

  /// Throws ConfigError unless temperature is finite and >= 0 and
  /// max_output_tokens >= 1.
  void validate() const;
};

enum class FinishReason { Stop, Length, Error };

std::string_view to_string(FinishReason reason);

enum class FailureKind {
  Timeout,
  RateLimited,
  ServerError,
  Connection,
  Auth,
  Malformed,
  Rejected,     // other 4xx
  FixtureMiss,  // mock backend had no scripted reply
  Invalid,      // request failed validation
};

std::string_view to_string(FailureKind kind);

/// Timeouts, 429, 5xx and dropped connections.
bool is_transient(FailureKind kind);

struct ChatResult {
  std::string raw_text;
  FinishReason finish_reason = FinishReason::Error;
  std::chrono::milliseconds latency{0};
  bool from_cache = false;
  int attempts = 0;  // network attempts made; 0 for cache hits
  std::string cache_key;
  std::optional<FailureKind> failure;
  std::string error_message;

  bool ok() const { return finish_reason != FinishReason::Error; }
};

class GatewayError : public NetworkError {
 public:
  GatewayError(FailureKind kind, int attempts, const std::string& what)
      : NetworkError(what), kind_(kind), attempts_(attempts) {}

  FailureKind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }

 private:
  FailureKind kind_;
  int attempts_;
};

struct GatewayConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string api_key_env_var = "OPENAI_API_KEY";
  int max_in_flight = 8;
  int retry_budget = 3;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds request_timeout{120000};
  std::filesystem::path cache_dir;  // empty disables caching
  std::optional<int> requests_per_minute;

  void validate() const;
};

/// One attempt's outcome as seen by a backend.
struct BackendReply {
  std::string text;
  FinishReason finish_reason = FinishReason::Stop;
  std::optional<FailureKind> failure;
  std::string detail;

  static BackendReply success(std::string text, FinishReason reason = FinishReason::Stop) {
    return {std::move(text), reason, std::nullopt, {}};
  }
  static BackendReply fail(FailureKind kind, std::string detail) {
    return {{}, FinishReason::Error, kind, std::move(detail)};
  }
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Must be callable concurrently.
  virtual BackendReply send(const ChatRequest& request) = 0;
};

struct BatchProgress {
  std::size_t total = 0;
  std::size_t done = 0;
  std::size_t failed = 0;
  std::size_t cached = 0;
};

using ProgressCallback = std::function<void(const BatchProgress&)>;

/// Client for chat-completion endpoints: caching, bounded in-flight requests
/// (shared by every caller of this instance), retries with exponential backoff
/// and jitter, optional per-minute rate cap.
class Gateway {
 public:
  Gateway(GatewayConfig config, std::shared_ptr<ChatBackend> backend);

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Throws GatewayError when the retry budget is exhausted or the failure is
  /// not retryable.
  ChatResult complete(const ChatRequest& request);

  /// Results in input order. Item failures come back as finish_reason Error
  /// with `failure` set; the batch itself never throws for them.
  std::vector<ChatResult> complete_batch(std::span<const ChatRequest> requests,
                                         const ProgressCallback& on_progress = {});

  /// Cache key: digest of model, prompts, temperature, token limit (and the
  /// seed hint when set).
  static std::string cache_key(const ChatRequest& request);

  const GatewayConfig& config() const { return config_; }

  /// Replaces the backoff sleeper; tests use it to avoid real waits.
  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper);

  /// Retries performed over the gateway's lifetime.
  std::size_t retries() const { return retries_.load(); }

 private:
  std::chrono::milliseconds backoff_delay(int attempt);
  void pace();

  GatewayConfig config_;
  std::shared_ptr<ChatBackend> backend_;
  std::optional<ResponseCache> cache_;
  std::counting_semaphore<> in_flight_;
  std::function<void(std::chrono::milliseconds)> sleeper_;
  std::atomic<std::size_t> retries_{0};
  std::mutex pace_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
  std::mutex jitter_mutex_;
  std::uint64_t jitter_state_;
};

}  // namespace pertcot
