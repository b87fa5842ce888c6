#include "mele/chat.hpp"

#include <cctype>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "mele/error.hpp"

namespace mele {

using nlohmann::json;

void to_json(json& j, const ChatMessage& m) { j = json{{"role", m.role}, {"content", m.content}}; }

void from_json(const json& j, ChatMessage& m) {
    m.role = j.at("role").get<std::string>();
    m.content = j.at("content").get<std::string>();
}

void to_json(json& j, const ChatConfig& c) {
    j = json{{"base_url", c.base_url},       {"model", c.model},
             {"api_key_env", c.api_key_env}, {"temperature", c.temperature},
             {"max_in_flight", c.max_in_flight}, {"max_retries", c.max_retries},
             {"backoff_ms", c.backoff_ms},   {"timeout_s", c.timeout_s}};
}

void from_json(const json& j, ChatConfig& c) {
    ChatConfig d;
    c.base_url = j.value("base_url", d.base_url);
    c.model = j.value("model", d.model);
    c.api_key_env = j.value("api_key_env", d.api_key_env);
    c.temperature = j.value("temperature", d.temperature);
    c.max_in_flight = j.value("max_in_flight", d.max_in_flight);
    c.max_retries = j.value("max_retries", d.max_retries);
    c.backoff_ms = j.value("backoff_ms", d.backoff_ms);
    c.timeout_s = j.value("timeout_s", d.timeout_s);
}

namespace {

int clamp_in_flight(int n) { return n < 1 ? 1 : (n > 1024 ? 1024 : n); }

// RAII slot on the in-flight semaphore.
class Slot {
public:
    explicit Slot(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
    ~Slot() { s_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

private:
    std::counting_semaphore<1024>& s_;
};

}  // namespace

HttpChatClient::HttpChatClient(ChatConfig config)
    : config_(std::move(config)), in_flight_(clamp_in_flight(config_.max_in_flight)) {
    const auto scheme_end = config_.base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::InvalidConfig, "base_url needs a scheme: " + config_.base_url);
    }
    const auto path_start = config_.base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_port_ = config_.base_url;
    } else {
        scheme_host_port_ = config_.base_url.substr(0, path_start);
        path_prefix_ = config_.base_url.substr(path_start);
    }
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

json HttpChatClient::request_body(const std::vector<ChatMessage>& messages) const {
    return json{{"model", config_.model}, {"messages", messages}, {"temperature", config_.temperature}};
}

std::string extract_reply(const json& response) {
    try {
        return response.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Transport, std::string("unexpected chat response shape: ") + e.what());
    }
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
    Slot slot(in_flight_);
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout_s, 0);
    client.set_read_timeout(config_.timeout_s, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string body = request_body(messages).dump();
    const std::string path = path_prefix_ + "/chat/completions";

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms) * (1 << (attempt - 1)));
        }
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw Error(ErrorCode::Transport, "HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) throw Error(ErrorCode::Transport, "chat response is not JSON");
        return extract_reply(parsed);
    }
    throw Error(ErrorCode::Transport, "chat request failed after " + std::to_string(config_.max_retries + 1) +
                                          " attempts: " + last_error);
}

std::optional<int> parse_yes_no(std::string_view reply) {
    std::size_t i = 0;
    while (i < reply.size()) {
        while (i < reply.size() && !std::isalnum(static_cast<unsigned char>(reply[i]))) ++i;
        std::size_t j = i;
        while (j < reply.size() && std::isalnum(static_cast<unsigned char>(reply[j]))) ++j;
        std::string token;
        for (std::size_t k = i; k < j; ++k) token += static_cast<char>(std::tolower(static_cast<unsigned char>(reply[k])));
        if (token == "yes") return 1;
        if (token == "no") return 0;
        i = j;
    }
    return std::nullopt;
}

}  // namespace mele
