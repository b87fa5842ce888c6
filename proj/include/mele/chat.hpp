#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mele {

struct ChatMessage {
    std::string role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

/// Every message sent and received in one exchange, replies included.
using Transcript = std::vector<ChatMessage>;

void to_json(nlohmann::json& j, const ChatMessage& m);
void from_json(const nlohmann::json& j, ChatMessage& m);

/// A chat-completions style model: role/content messages in, reply text out.
/// Implementations throw Error(Transport) on failure.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct ChatConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4-turbo";
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 0.0;
    int max_in_flight = 4;
    int max_retries = 3;
    int backoff_ms = 500;
    int timeout_s = 60;
};

void to_json(nlohmann::json& j, const ChatConfig& c);
void from_json(const nlohmann::json& j, ChatConfig& c);

/// HTTP JSON client for `<base_url>/chat/completions`. Bounds concurrent
/// requests to max_in_flight and retries transport errors, 429 and 5xx with
/// exponential backoff. The bearer token is read from `api_key_env`.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ChatConfig config);

    std::string complete(const std::vector<ChatMessage>& messages) override;

    /// Request body for `messages`; exposed for wire-format tests.
    nlohmann::json request_body(const std::vector<ChatMessage>& messages) const;

private:
    ChatConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
    std::counting_semaphore<1024> in_flight_;
};

/// Reply text from a chat-completions response body. Throws Error(Transport)
/// when the body lacks choices[0].message.content.
std::string extract_reply(const nlohmann::json& response);

/// First case-insensitive standalone YES or NO token: 1 for yes, 0 for no.
std::optional<int> parse_yes_no(std::string_view reply);

}  // namespace mele
