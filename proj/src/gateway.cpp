#include "pertcot/gateway.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <thread>

#include "pertcot/digest.hpp"

namespace pertcot {
namespace {

nlohmann::json key_inputs(const ChatRequest& request) {
  nlohmann::json inputs = {{"model", request.model_name},
                           {"system", request.system_text},
                           {"user", request.user_text},
                           {"temperature", request.temperature},
                           {"max_tokens", request.max_output_tokens}};
  if (request.seed_hint) inputs["seed"] = *request.seed_hint;
  return inputs;
}

std::optional<FinishReason> parse_finish_reason(std::string_view text) {
  if (text == "stop") return FinishReason::Stop;
  if (text == "length") return FinishReason::Length;
  return std::nullopt;
}

struct SemaphoreGuard {
  explicit SemaphoreGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
  std::counting_semaphore<>& sem;
};

}  // namespace

void ChatRequest::validate() const {
  if (!std::isfinite(temperature) || temperature < 0.0) {
    throw ConfigError("temperature must be finite and non-negative");
  }
  if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be at least 1");
  if (model_name.empty()) throw ConfigError("model name must be non-empty");
}

void GatewayConfig::validate() const {
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
  if (retry_budget < 0) throw ConfigError("retry_budget must be non-negative");
  if (backoff_base.count() < 0) throw ConfigError("backoff base must be non-negative");
  if (requests_per_minute && *requests_per_minute < 1) {
    throw ConfigError("requests_per_minute must be at least 1");
  }
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::Stop:
      return "stop";
    case FinishReason::Length:
      return "length";
    case FinishReason::Error:
      return "error";
  }
  return "error";
}

std::string_view to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::Timeout:
      return "timeout";
    case FailureKind::RateLimited:
      return "rate_limited";
    case FailureKind::ServerError:
      return "server_error";
    case FailureKind::Connection:
      return "connection";
    case FailureKind::Auth:
      return "auth";
    case FailureKind::Malformed:
      return "malformed_response";
    case FailureKind::Rejected:
      return "rejected";
    case FailureKind::FixtureMiss:
      return "fixture_miss";
    case FailureKind::Invalid:
      return "invalid_request";
  }
  return "unknown";
}

bool is_transient(FailureKind kind) {
  switch (kind) {
    case FailureKind::Timeout:
    case FailureKind::RateLimited:
    case FailureKind::ServerError:
    case FailureKind::Connection:
      return true;
    default:
      return false;
  }
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<ChatBackend> backend)
    : config_((config.validate(), std::move(config))),
      backend_(std::move(backend)),
      in_flight_(config_.max_in_flight),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      jitter_state_(static_cast<std::uint64_t>(
          std::chrono::steady_clock::now().time_since_epoch().count())) {
  if (!backend_) throw ConfigError("gateway requires a backend");
  if (!config_.cache_dir.empty()) cache_.emplace(config_.cache_dir);
}

void Gateway::set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) {
  sleeper_ = std::move(sleeper);
}

std::string Gateway::cache_key(const ChatRequest& request) {
  return sha256_hex(key_inputs(request).dump());
}

std::chrono::milliseconds Gateway::backoff_delay(int attempt) {
  const auto base = config_.backoff_base.count();
  if (base == 0) return std::chrono::milliseconds(0);
  std::uint64_t jitter;
  {
    // splitmix64 step
    std::lock_guard lock(jitter_mutex_);
    std::uint64_t z = (jitter_state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    jitter = (z ^ (z >> 31)) % static_cast<std::uint64_t>(base);
  }
  const auto exponent = std::min(attempt - 1, 16);
  return std::chrono::milliseconds(base * (std::int64_t{1} << exponent) +
                                   static_cast<std::int64_t>(jitter));
}

void Gateway::pace() {
  if (!config_.requests_per_minute) return;
  const auto interval = std::chrono::microseconds(60'000'000 / *config_.requests_per_minute);
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(pace_mutex_);
    slot = std::max(std::chrono::steady_clock::now(), next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

ChatResult Gateway::complete(const ChatRequest& request) {
  request.validate();
  const auto started = std::chrono::steady_clock::now();
  ChatResult result;
  result.cache_key = cache_key(request);

  if (cache_) {
    if (auto hit = cache_->load(result.cache_key)) {
      result.raw_text = std::move(hit->raw_text);
      result.finish_reason = parse_finish_reason(hit->finish_reason).value_or(FinishReason::Stop);
      result.from_cache = true;
      return result;
    }
  }

  for (int attempt = 1;; ++attempt) {
    pace();
    BackendReply reply;
    {
      SemaphoreGuard guard(in_flight_);
      reply = backend_->send(request);
    }
    result.attempts = attempt;
    if (!reply.failure) {
      result.raw_text = std::move(reply.text);
      result.finish_reason =
          reply.finish_reason == FinishReason::Error ? FinishReason::Stop : reply.finish_reason;
      result.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);
      if (cache_) {
        cache_->store(result.cache_key, key_inputs(request),
                      {result.raw_text, std::string(to_string(result.finish_reason))});
      }
      return result;
    }
    const auto kind = *reply.failure;
    if (!is_transient(kind)) {
      throw GatewayError(kind, attempt,
                         std::string(to_string(kind)) + " (not retryable): " + reply.detail);
    }
    if (attempt > config_.retry_budget) {
      throw GatewayError(kind, attempt,
                         "retry budget exhausted after " + std::to_string(attempt) +
                             " attempt(s); last failure " + std::string(to_string(kind)) + ": " +
                             reply.detail);
    }
    ++retries_;
    sleeper_(backoff_delay(attempt));
  }
}

std::vector<ChatResult> Gateway::complete_batch(std::span<const ChatRequest> requests,
                                                const ProgressCallback& on_progress) {
  std::vector<ChatResult> results(requests.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  BatchProgress progress;
  progress.total = requests.size();

  auto worker = [&] {
    for (auto i = next++; i < requests.size(); i = next++) {
      auto& slot = results[i];
      try {
        slot = complete(requests[i]);
      } catch (const GatewayError& e) {
        slot.failure = e.kind();
        slot.attempts = e.attempts();
        slot.error_message = e.what();
      } catch (const std::exception& e) {
        slot.failure = FailureKind::Invalid;
        slot.error_message = e.what();
      }
      if (!slot.ok()) slot.cache_key = cache_key(requests[i]);
      std::lock_guard lock(progress_mutex);
      ++progress.done;
      if (!slot.ok()) ++progress.failed;
      if (slot.from_cache) ++progress.cached;
      if (on_progress) on_progress(progress);
    }
  };

  const auto n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(config_.max_in_flight), requests.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }
  return results;
}

}  // namespace pertcot
