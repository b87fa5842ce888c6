#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "mele/chat.hpp"
#include "mele/error.hpp"

using namespace mele;
using nlohmann::json;

namespace {

/// Minimal chat-completions endpoint on a random local port.
class LocalServer {
public:
    LocalServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mu_);
            ++hits;
            last_body = req.body;
            last_auth = req.get_header_value("Authorization");
            if (failures_left > 0) {
                --failures_left;
                res.status = fail_status;
                return;
            }
            json reply = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", "YES"}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        port = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }

    ChatConfig config() const {
        ChatConfig c;
        c.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
        c.model = "test-model";
        c.api_key_env = "MELE_TEST_CHAT_KEY";
        c.backoff_ms = 1;
        c.max_retries = 2;
        c.timeout_s = 5;
        return c;
    }

    int port = 0;
    int hits = 0;
    int failures_left = 0;
    int fail_status = 503;
    std::string last_body;
    std::string last_auth;

private:
    httplib::Server server_;
    std::thread thread_;
    std::mutex mu_;
};

}  // namespace

TEST_CASE("request body has model, messages and temperature") {
    HttpChatClient client(ChatConfig{});
    auto body = client.request_body({{"system", "s"}, {"user", "u"}});
    CHECK(body["model"] == "gpt-4-turbo");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["messages"] == json::parse(R"([{"role":"system","content":"s"},{"role":"user","content":"u"}])"));
}

TEST_CASE("extract_reply") {
    CHECK(extract_reply(json::parse(R"({"choices":[{"message":{"content":"No."}}]})")) == "No.");
    CHECK_THROWS_AS(extract_reply(json::parse(R"({"error":"x"})")), Error);
}

TEST_CASE("base url needs a scheme") { CHECK_THROWS_AS(HttpChatClient(ChatConfig{"localhost:1"}), Error); }

TEST_CASE("client posts to the completions path with a bearer token") {
    LocalServer server;
    ::setenv("MELE_TEST_CHAT_KEY", "sk-test", 1);
    HttpChatClient client(server.config());
    CHECK(client.complete({{"user", "Is there a mug?"}}) == "YES");
    CHECK(server.hits == 1);
    CHECK(server.last_auth == "Bearer sk-test");
    auto body = json::parse(server.last_body);
    CHECK(body["model"] == "test-model");
    CHECK(body["messages"][0]["content"] == "Is there a mug?");
    ::unsetenv("MELE_TEST_CHAT_KEY");
}

TEST_CASE("server errors are retried") {
    LocalServer server;
    server.failures_left = 2;
    HttpChatClient client(server.config());
    CHECK(client.complete({{"user", "hi"}}) == "YES");
    CHECK(server.hits == 3);
}

TEST_CASE("exhausted retries and client errors raise Transport") {
    LocalServer server;
    server.failures_left = 10;
    HttpChatClient client(server.config());
    try {
        client.complete({{"user", "hi"}});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Transport);
    }
    CHECK(server.hits == 3);

    LocalServer bad;
    bad.failures_left = 1;
    bad.fail_status = 400;
    HttpChatClient c2(bad.config());
    CHECK_THROWS_AS(c2.complete({{"user", "hi"}}), Error);
    CHECK(bad.hits == 1);
}

TEST_CASE("unreachable endpoint raises Transport") {
    ChatConfig c;
    c.base_url = "http://127.0.0.1:1/v1";
    c.max_retries = 1;
    c.backoff_ms = 1;
    c.timeout_s = 1;
    HttpChatClient client(c);
    try {
        client.complete({{"user", "hi"}});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Transport);
    }
}
