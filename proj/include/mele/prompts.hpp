#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

/// Every prompt string sent to a chat model lives here. Bracketed
/// placeholders are substituted with fill().
namespace mele::prompts {

// Question answering.
extern const std::string_view kAnswerSystem;
extern const std::string_view kAnswerUser;
extern const std::string_view kAnswerReprompt;

// Debate.
extern const std::string_view kDebateSystem;
extern const std::string_view kDebateHistoryLead;
extern const std::string_view kDebateNoHistory;
extern const std::string_view kDebateTurn;
extern const std::string_view kDebateFinal;

// Exploration.
extern const std::string_view kExploreSystem;
extern const std::string_view kExploreUser;
extern const std::string_view kExploreReprompt;

/// Replaces each placeholder occurrence with its value, left to right.
std::string fill(std::string_view tmpl, const std::vector<std::pair<std::string_view, std::string>>& values);

std::string answer_system(const std::string& observation_dictionary);
std::string answer_user(const std::string& item, const std::string& room);

/// An empty history swaps the closing sentence for kDebateNoHistory.
std::string debate_system(int agent_id, const std::string& observation_dictionary, const std::string& object,
                          const std::string& room, int initial_answer, const std::string& history);

std::string explore_user(const std::string& current_room, const std::string& observation_dictionary,
                         const std::vector<std::string>& candidate_rooms);

}  // namespace mele::prompts
