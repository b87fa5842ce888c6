#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mele/chat.hpp"
#include "mele/env.hpp"
#include "mele/percept.hpp"

namespace mele {

struct TrajectoryStep {
    int step = 0;
    NodeId node;

    bool operator==(const TrajectoryStep&) const = default;
};

/// One agent's memory: items seen per room, plus the walk that produced it.
/// Rooms visited without detections are kept with an empty item set.
struct ObservationDict {
    std::map<RoomId, std::set<ObjectId>> room_items;
    std::vector<TrajectoryStep> trajectory;

    bool saw(RoomId room, ObjectId object) const;
    void merge(RoomId room, const std::vector<Detection>& detections);

    bool operator==(const ObservationDict&) const = default;
};

enum class PolicyKind { random_walk, greedy_novelty, llm_guided, scripted };

std::string_view to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view name);

struct Policy {
    PolicyKind kind = PolicyKind::greedy_novelty;
    /// Full node sequence for `scripted`, starting at the start node.
    std::vector<NodeId> script;
    std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const Policy& p);
void from_json(const nlohmann::json& j, Policy& p);

/// Walks `steps` moves from `start`, detecting at every visited node.
///
/// greedy_novelty moves to the neighbor maximizing (never-visited nodes in
/// its room, neighbor itself unvisited), lowest NodeId on ties.
/// llm_guided asks `chat` to pick a neighboring room; one reprompt, then
/// the greedy choice. Every exchange is appended to `log` when given.
ObservationDict explore_run(const HouseGraph& house, NodeId start, const Policy& policy, int steps,
                            const NoiseParams& noise, ChatClient* chat = nullptr, std::vector<Transcript>* log = nullptr);

/// Oracle observation restricted to `rooms`: detections at every node of
/// each listed room. The trajectory is left empty.
ObservationDict observe_rooms(const HouseGraph& house, const std::vector<RoomId>& rooms, const NoiseParams& noise);

/// Checks catalog resolution and trajectory shape; throws InvariantViolation.
void validate(const HouseGraph& house, const ObservationDict& obs);

/// Observation dictionary in the {'room': ['item', ...]} form handed to models.
std::string observation_dictionary_text(const HouseGraph& house, const ObservationDict& obs);

/// {"observations": {room name: [item names]}, "trajectory": [[step, node], ...]}
nlohmann::json observations_to_json(const HouseGraph& house, const ObservationDict& obs);
/// Accepts the form above, or a bare {room name: [item names]} mapping.
ObservationDict observations_from_json(const HouseGraph& house, const nlohmann::json& j);
void save_observations(const HouseGraph& house, const ObservationDict& obs, const std::filesystem::path& path);
ObservationDict load_observations(const HouseGraph& house, const std::filesystem::path& path);

}  // namespace mele
