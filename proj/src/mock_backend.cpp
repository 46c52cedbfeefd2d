#include "pertcot/mock_backend.hpp"

#include <fstream>
#include <thread>

namespace pertcot {
namespace {

std::vector<std::string> string_list(const nlohmann::json& node, const char* key) {
  std::vector<std::string> out;
  if (!node.contains(key)) return out;
  const auto& value = node.at(key);
  if (value.is_string()) {
    out.push_back(value.get<std::string>());
  } else if (value.is_array()) {
    for (const auto& item : value) out.push_back(item.get<std::string>());
  } else {
    throw ConfigError(std::string("mock fixture: '") + key + "' must be a string or list");
  }
  return out;
}

}  // namespace

bool FixtureRule::matches(std::string_view system, std::string_view user) const {
  if (system_equals && system != *system_equals) return false;
  if (user_equals && user != *user_equals) return false;
  for (const auto& needle : system_contains) {
    if (system.find(needle) == std::string_view::npos) return false;
  }
  for (const auto& needle : user_contains) {
    if (user.find(needle) == std::string_view::npos) return false;
  }
  return true;
}

std::optional<std::string> MockFixture::lookup(std::string_view system,
                                               std::string_view user) const {
  for (const auto& rule : rules) {
    if (rule.matches(system, user)) return rule.response;
  }
  return fallback;
}

MockFixture MockFixture::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("mock fixture must be a JSON object");
  MockFixture fixture;
  try {
    if (doc.contains("default") && !doc["default"].is_null()) {
      fixture.fallback = doc["default"].get<std::string>();
    }
    for (const auto& node : doc.value("rules", nlohmann::json::array())) {
      FixtureRule rule;
      rule.system_contains = string_list(node, "system_contains");
      rule.user_contains = string_list(node, "user_contains");
      if (node.contains("system_equals")) rule.system_equals = node["system_equals"].get<std::string>();
      if (node.contains("user_equals")) rule.user_equals = node["user_equals"].get<std::string>();
      rule.response = node.at("response").get<std::string>();
      fixture.rules.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mock fixture: ") + e.what());
  }
  return fixture;
}

MockFixture MockFixture::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read mock fixture '" + path.string() + "'");
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("mock fixture '" + path.string() + "' is not JSON");
  return from_json(doc);
}

nlohmann::json MockFixture::to_json() const {
  nlohmann::json doc = {{"rules", nlohmann::json::array()}};
  if (fallback) doc["default"] = *fallback;
  for (const auto& rule : rules) {
    nlohmann::json node = {{"response", rule.response}};
    if (!rule.system_contains.empty()) node["system_contains"] = rule.system_contains;
    if (!rule.user_contains.empty()) node["user_contains"] = rule.user_contains;
    if (rule.system_equals) node["system_equals"] = *rule.system_equals;
    if (rule.user_equals) node["user_equals"] = *rule.user_equals;
    doc["rules"].push_back(std::move(node));
  }
  return doc;
}

void MockFixture::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << to_json().dump(2) << '\n';
  if (!out) throw ConfigError("cannot write mock fixture '" + path.string() + "'");
}

MockBackend::MockBackend(ResponseScript script, std::optional<std::string> fallback)
    : script_(std::move(script)), fallback_(std::move(fallback)) {}

MockBackend::MockBackend(MockFixture fixture)
    : MockBackend(
          [f = std::make_shared<MockFixture>(std::move(fixture))](
              std::string_view system, std::string_view user, double) {
            return f->lookup(system, user);
          }) {}

void MockBackend::queue_failures(std::vector<FailureKind> kinds) {
  std::lock_guard lock(failures_mutex_);
  failures_.insert(failures_.end(), kinds.begin(), kinds.end());
}

void MockBackend::set_delay(std::function<std::chrono::milliseconds(const ChatRequest&)> delay) {
  delay_ = std::move(delay);
}

BackendReply MockBackend::send(const ChatRequest& request) {
  ++calls_;
  const auto now = ++in_flight_;
  auto peak = peak_.load();
  while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
  }
  struct Leave {
    std::atomic<std::size_t>& counter;
    ~Leave() { --counter; }
  } leave{in_flight_};

  if (delay_) std::this_thread::sleep_for(delay_(request));
  {
    std::lock_guard lock(failures_mutex_);
    if (!failures_.empty()) {
      const auto kind = failures_.front();
      failures_.pop_front();
      return BackendReply::fail(kind, "scripted failure");
    }
  }
  auto reply = script_ ? script_(request.system_text, request.user_text, request.temperature)
                       : std::nullopt;
  if (!reply) reply = fallback_;
  if (!reply) return BackendReply::fail(FailureKind::FixtureMiss, "no scripted reply for request");
  return BackendReply::success(std::move(*reply));
}

std::unique_ptr<Gateway> make_mock_gateway(GatewayConfig config,
                                           std::shared_ptr<MockBackend> backend) {
  return std::make_unique<Gateway>(std::move(config), std::move(backend));
}

}  // namespace pertcot
