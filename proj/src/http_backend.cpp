#include "pertcot/http_backend.hpp"

#include <httplib.h>

#include <cstdlib>
#include <regex>

namespace pertcot {

nlohmann::json chat_completion_body(const ChatRequest& request) {
  nlohmann::json body = {
      {"model", request.model_name},
      {"messages",
       {{{"role", "system"}, {"content", request.system_text}},
        {{"role", "user"}, {"content", request.user_text}}}},
      {"temperature", request.temperature},
      {"max_tokens", request.max_output_tokens},
  };
  if (request.seed_hint) body["seed"] = *request.seed_hint;
  return body;
}

BackendReply parse_chat_completion(std::string_view body) {
  const auto doc = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    return BackendReply::fail(FailureKind::Malformed, "response body is not a JSON object");
  }
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    return BackendReply::fail(FailureKind::Malformed, "response has no choices");
  }
  const auto& choice = choices->front();
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) {
    return BackendReply::fail(FailureKind::Malformed, "choice has no message");
  }
  const auto& message = choice["message"];
  if (!message.contains("content") || !message["content"].is_string()) {
    return BackendReply::fail(FailureKind::Malformed, "message content is missing or not text");
  }
  auto reason = FinishReason::Stop;
  if (choice.contains("finish_reason") && choice["finish_reason"] == "length") {
    reason = FinishReason::Length;
  }
  return BackendReply::success(message["content"].get<std::string>(), reason);
}

HttpChatBackend::HttpChatBackend(std::string base_url, std::string api_key,
                                 std::chrono::milliseconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch match;
  if (!std::regex_match(base_url, match, kUrl)) {
    throw ConfigError("base URL must look like http(s)://host[:port][/prefix], got '" + base_url +
                      "'");
  }
  origin_ = match[1].str();
  std::string prefix = match[2].str();
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/v1/chat/completions";
}

BackendReply HttpChatBackend::send(const ChatRequest& request) {
  // httplib::Client is not safe for concurrent use; one per call.
  httplib::Client client(origin_);
  const auto secs = timeout_.count() / 1000;
  const auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto result =
      client.Post(path_, headers, chat_completion_body(request).dump(), "application/json");
  if (!result) {
    const auto err = result.error();
    const auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                          ? FailureKind::Timeout
                          : FailureKind::Connection;
    return BackendReply::fail(kind, httplib::to_string(err));
  }
  const int status = result->status;
  const std::string detail = "HTTP " + std::to_string(status);
  if (status == 401 || status == 403) return BackendReply::fail(FailureKind::Auth, detail);
  if (status == 408) return BackendReply::fail(FailureKind::Timeout, detail);
  if (status == 429) return BackendReply::fail(FailureKind::RateLimited, detail);
  if (status >= 500) return BackendReply::fail(FailureKind::ServerError, detail);
  if (status < 200 || status >= 300) return BackendReply::fail(FailureKind::Rejected, detail);
  return parse_chat_completion(result->body);
}

std::unique_ptr<Gateway> make_http_gateway(const GatewayConfig& config) {
  std::string key;
  if (!config.api_key_env_var.empty()) {
    if (const char* value = std::getenv(config.api_key_env_var.c_str())) key = value;
  }
  return std::make_unique<Gateway>(
      config, std::make_shared<HttpChatBackend>(config.base_url, key, config.request_timeout));
}

}  // namespace pertcot
