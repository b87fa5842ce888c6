#include "mele/prompts.hpp"

namespace mele::prompts {

const std::string_view kAnswerSystem =
    "You are an embodied agent that has explored a house. I prefer definite answers to questions. "
    "The observations are: [OBSERVATION DICTIONARY]";
const std::string_view kAnswerUser =
    "Do you think there is a [ITEM] in the [ROOM]? Use both common-sense reasoning about the object and room "
    "and the observation list given. Even if the relevant information is not in your observations, the answer "
    "can still be YES. Respond with YES or NO.";
const std::string_view kAnswerReprompt = "Respond with YES or NO only.";

const std::string_view kDebateSystem =
    "You are an embodied agent in a house. Your id is [INDEX]. Here are your observations from exploring the "
    "house: [OBSERVATION DICTIONARY].  Your initial answer to whether or not there was a [OBJECT] in the [ROOM] "
    "was [INITIAL ANSWER]. Other agents may have different answers. Please debate with the other agents to come "
    "to a consensus. Here is the conversation history: [CONVERSATION HISTORY]";
const std::string_view kDebateHistoryLead = "Here is the conversation history: [CONVERSATION HISTORY]";
const std::string_view kDebateNoHistory = "This is the beginning of the conversation.";
const std::string_view kDebateTurn = "It is your turn to speak. Use your observation and conversation history to help.";
const std::string_view kDebateFinal = "Please give your final \"Yes/No\" answer. Give a definite answer.";

const std::string_view kExploreSystem =
    "You are an embodied agent in a house. You want to aggressively explore the house and you want to find as "
    "many unique objects as you can.";
const std::string_view kExploreUser =
    "You are in the [CURRENT ROOM]. Your observations so far are: [OBSERVATION DICTIONARY]. You can move to one "
    "of these rooms: [ROOM LIST]. Reply with the name of the room you want to move to.";
const std::string_view kExploreReprompt = "Reply with exactly one room name from the list.";

std::string fill(std::string_view tmpl, const std::vector<std::pair<std::string_view, std::string>>& values) {
    std::string out(tmpl);
    for (const auto& [key, value] : values) {
        std::size_t pos = 0;
        while ((pos = out.find(key, pos)) != std::string::npos) {
            out.replace(pos, key.size(), value);
            pos += value.size();
        }
    }
    return out;
}

std::string answer_system(const std::string& observation_dictionary) {
    return fill(kAnswerSystem, {{"[OBSERVATION DICTIONARY]", observation_dictionary}});
}

std::string answer_user(const std::string& item, const std::string& room) {
    return fill(kAnswerUser, {{"[ITEM]", item}, {"[ROOM]", room}});
}

std::string debate_system(int agent_id, const std::string& observation_dictionary, const std::string& object,
                          const std::string& room, int initial_answer, const std::string& history) {
    std::string tmpl(kDebateSystem);
    if (history.empty()) tmpl.replace(tmpl.find(kDebateHistoryLead), kDebateHistoryLead.size(), kDebateNoHistory);
    return fill(tmpl, {{"[INDEX]", std::to_string(agent_id)},
                       {"[OBSERVATION DICTIONARY]", observation_dictionary},
                       {"[OBJECT]", object},
                       {"[ROOM]", room},
                       {"[INITIAL ANSWER]", initial_answer ? "Yes" : "No"},
                       {"[CONVERSATION HISTORY]", history}});
}

std::string explore_user(const std::string& current_room, const std::string& observation_dictionary,
                         const std::vector<std::string>& candidate_rooms) {
    std::string list;
    for (std::size_t i = 0; i < candidate_rooms.size(); ++i) {
        if (i) list += ", ";
        list += candidate_rooms[i];
    }
    return fill(kExploreUser, {{"[CURRENT ROOM]", current_room},
                               {"[OBSERVATION DICTIONARY]", observation_dictionary},
                               {"[ROOM LIST]", list}});
}

}  // namespace mele::prompts
