#pragma once

#include <chrono>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>

#include "pertcot/gateway.hpp"

namespace pertcot {

/// Request body for POST {base_url}/v1/chat/completions.
nlohmann::json chat_completion_body(const ChatRequest& request);

/// Extracts choices[0].message.content and finish_reason; a Malformed failure
/// if the shape is wrong.
BackendReply parse_chat_completion(std::string_view body);

/// Chat-completions endpoint over HTTP(S), bearer-token auth.
class HttpChatBackend : public ChatBackend {
 public:
  HttpChatBackend(std::string base_url, std::string api_key, std::chrono::milliseconds timeout);

  BackendReply send(const ChatRequest& request) override;

  const std::string& endpoint_path() const { return path_; }

 private:
  std::string origin_;  // scheme://host[:port]
  std::string path_;
  std::string api_key_;
  std::chrono::milliseconds timeout_;
};

/// Gateway against config.base_url, API key read from config.api_key_env_var
/// (an unset variable sends no Authorization header).
std::unique_ptr<Gateway> make_http_gateway(const GatewayConfig& config);

}  // namespace pertcot
