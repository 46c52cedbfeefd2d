#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pertcot/gateway.hpp"

namespace pertcot {

/// Deterministic reply function over (system text, user text, temperature).
/// nullopt means "no scripted reply".
using ResponseScript =
    std::function<std::optional<std::string>(std::string_view, std::string_view, double)>;

/// A scripted reply selected by substring or exact matches on the prompts.
/// All given conditions must hold; the first matching rule wins.
struct FixtureRule {
  std::vector<std::string> system_contains;
  std::vector<std::string> user_contains;
  std::optional<std::string> system_equals;
  std::optional<std::string> user_equals;
  std::string response;

  bool matches(std::string_view system, std::string_view user) const;
};

/// File form of a mock script:
///   {"default": "<answer>...</answer>",
///    "rules": [{"system_contains": ["..."], "user_contains": ["..."], "response": "..."}]}
struct MockFixture {
  std::vector<FixtureRule> rules;
  std::optional<std::string> fallback;

  std::optional<std::string> lookup(std::string_view system, std::string_view user) const;

  static MockFixture from_json(const nlohmann::json& doc);
  static MockFixture load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;
};

/// In-process stand-in for a model endpoint, with instrumentation for tests.
class MockBackend : public ChatBackend {
 public:
  explicit MockBackend(ResponseScript script, std::optional<std::string> fallback = std::nullopt);
  explicit MockBackend(MockFixture fixture);

  BackendReply send(const ChatRequest& request) override;

  /// The next `kinds.size()` sends fail with these kinds, in order, before any
  /// scripted reply is produced.
  void queue_failures(std::vector<FailureKind> kinds);
  /// Artificial per-request latency, e.g. randomized to shuffle completion order.
  void set_delay(std::function<std::chrono::milliseconds(const ChatRequest&)> delay);

  std::size_t calls() const { return calls_.load(); }
  std::size_t peak_in_flight() const { return peak_.load(); }

 private:
  ResponseScript script_;
  std::optional<std::string> fallback_;
  std::function<std::chrono::milliseconds(const ChatRequest&)> delay_;
  std::mutex failures_mutex_;
  std::deque<FailureKind> failures_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_{0};
};

/// Gateway wired to a mock backend; the backend stays observable through the
/// shared pointer.
std::unique_ptr<Gateway> make_mock_gateway(GatewayConfig config,
                                           std::shared_ptr<MockBackend> backend);

}  // namespace pertcot
