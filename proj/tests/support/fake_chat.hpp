#pragma once

#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include "mele/chat.hpp"
#include "mele/error.hpp"

namespace testing_support {

/// Replays canned replies in order and records every request.
class ScriptedChat : public mele::ChatClient {
public:
    explicit ScriptedChat(std::vector<std::string> replies = {}) : replies_(replies.begin(), replies.end()) {}

    std::string complete(const std::vector<mele::ChatMessage>& messages) override {
        std::lock_guard lock(mu_);
        requests.push_back(messages);
        if (replies_.empty()) {
            if (fallback.empty()) throw mele::Error(mele::ErrorCode::Transport, "scripted chat exhausted");
            return fallback;
        }
        std::string r = replies_.front();
        replies_.pop_front();
        return r;
    }

    std::vector<std::vector<mele::ChatMessage>> requests;
    /// Returned once the script runs out; empty means throw instead.
    std::string fallback;

private:
    std::deque<std::string> replies_;
    std::mutex mu_;
};

}  // namespace testing_support
