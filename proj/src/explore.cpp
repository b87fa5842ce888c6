#include "mele/explore.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <tuple>

#include "mele/error.hpp"
#include "mele/prompts.hpp"
#include "mele/rng.hpp"

namespace mele {

using nlohmann::json;

bool ObservationDict::saw(RoomId room, ObjectId object) const {
    auto it = room_items.find(room);
    return it != room_items.end() && it->second.count(object) != 0;
}

void ObservationDict::merge(RoomId room, const std::vector<Detection>& detections) {
    room_items.try_emplace(room);
    for (const auto& d : detections) room_items[d.room].insert(d.object);
}

std::string_view to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::random_walk: return "random_walk";
        case PolicyKind::greedy_novelty: return "greedy_novelty";
        case PolicyKind::llm_guided: return "llm_guided";
        case PolicyKind::scripted: return "scripted";
    }
    return "?";
}

PolicyKind policy_kind_from_string(std::string_view name) {
    for (auto k : {PolicyKind::random_walk, PolicyKind::greedy_novelty, PolicyKind::llm_guided, PolicyKind::scripted}) {
        if (to_string(k) == name) return k;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown policy '" + std::string(name) + "'");
}

void to_json(json& j, const Policy& p) {
    j = json{{"kind", to_string(p.kind)}, {"seed", p.seed}};
    if (p.kind == PolicyKind::scripted) {
        json script = json::array();
        for (NodeId n : p.script) script.push_back(n.value);
        j["script"] = script;
    }
}

void from_json(const json& j, Policy& p) {
    p = Policy{};
    p.kind = policy_kind_from_string(j.value("kind", std::string("greedy_novelty")));
    p.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("script")) {
        for (const auto& n : j.at("script")) p.script.push_back(NodeId{n.get<int>()});
    }
    if (p.kind == PolicyKind::scripted && p.script.empty()) {
        throw Error(ErrorCode::InvalidConfig, "scripted policy needs a non-empty 'script'");
    }
}

namespace {

class Walker {
public:
    Walker(const HouseGraph& house, const NoiseParams& noise) : house_(house), noise_(noise) {
        unvisited_in_room_.resize(house.num_rooms());
        for (std::size_t r = 0; r < house.num_rooms(); ++r) {
            unvisited_in_room_[r] = static_cast<int>(house.room_nodes(RoomId{static_cast<int>(r)}).size());
        }
        visited_.assign(house.num_nodes(), 0);
    }

    void visit(int step, NodeId node) {
        obs_.trajectory.push_back({step, node});
        if (!visited_[node.index()]) {
            visited_[node.index()] = 1;
            --unvisited_in_room_[house_.room_of(node).index()];
        }
        obs_.merge(house_.room_of(node), detect_at_node(house_, node, noise_, step));
    }

    std::tuple<int, int> novelty(NodeId n) const {
        return {unvisited_in_room_[house_.room_of(n).index()], visited_[n.index()] ? 0 : 1};
    }

    /// Best-scoring candidate; candidates are ascending so strict > keeps the lowest id.
    NodeId greedy_pick(const std::vector<NodeId>& candidates) const {
        NodeId best = candidates.front();
        auto best_score = novelty(best);
        for (NodeId n : candidates) {
            if (novelty(n) > best_score) {
                best = n;
                best_score = novelty(n);
            }
        }
        return best;
    }

    ObservationDict& obs() { return obs_; }

private:
    const HouseGraph& house_;
    const NoiseParams& noise_;
    ObservationDict obs_;
    std::vector<int> unvisited_in_room_;
    std::vector<char> visited_;
};

// Earliest-occurring candidate in the reply; longer names win at equal position.
std::optional<std::string> match_room(const std::string& reply, const std::vector<std::string>& candidates) {
    auto lower = [](std::string s) {
        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    const std::string text = lower(reply);
    std::optional<std::string> best;
    std::size_t best_pos = std::string::npos;
    for (const auto& name : candidates) {
        const auto pos = text.find(lower(name));
        if (pos == std::string::npos) continue;
        if (pos < best_pos || (pos == best_pos && best && name.size() > best->size())) {
            best = name;
            best_pos = pos;
        }
    }
    return best;
}

std::string transcript_dump(const Transcript& t) { return json(t).dump(); }

}  // namespace

ObservationDict explore_run(const HouseGraph& house, NodeId start, const Policy& policy, int steps,
                            const NoiseParams& noise, ChatClient* chat, std::vector<Transcript>* log) {
    if (!house.has_node(start)) throw Error(ErrorCode::UnknownId, "unknown start node " + std::to_string(start.value));
    if (steps < 0) throw Error(ErrorCode::InvalidArgument, "steps must be >= 0");
    validate(noise);
    if (policy.kind == PolicyKind::llm_guided && chat == nullptr) {
        throw Error(ErrorCode::InvalidConfig, "llm_guided exploration needs a chat backend");
    }
    if (policy.kind == PolicyKind::scripted) {
        if (policy.script.size() < static_cast<std::size_t>(steps) + 1) {
            throw Error(ErrorCode::InvalidArgument, "script shorter than steps + 1 nodes");
        }
        if (policy.script.front() != start) throw Error(ErrorCode::InvalidArgument, "script must begin at the start node");
        for (std::size_t i = 0; i <= static_cast<std::size_t>(steps); ++i) {
            NodeId n = policy.script[i];
            if (!house.has_node(n)) throw Error(ErrorCode::InvalidArgument, "script node " + std::to_string(n.value) + " not in house");
            if (i > 0) {
                NodeId prev = policy.script[i - 1];
                const auto& adj = house.neighbors(prev);
                if (n != prev && !std::binary_search(adj.begin(), adj.end(), n)) {
                    throw Error(ErrorCode::InvalidArgument, "script not graph-valid: " + std::to_string(prev.value) + " -> " +
                                                                std::to_string(n.value));
                }
            }
        }
    }

    Walker walker(house, noise);
    Rng rng(policy.seed);
    NodeId current = start;
    walker.visit(0, current);

    for (int step = 1; step <= steps; ++step) {
        const auto& adj = house.neighbors(current);
        NodeId next = current;
        switch (policy.kind) {
            case PolicyKind::scripted:
                next = policy.script[static_cast<std::size_t>(step)];
                break;
            case PolicyKind::random_walk:
                if (!adj.empty()) next = adj[rng.index(adj.size())];
                break;
            case PolicyKind::greedy_novelty:
                if (!adj.empty()) next = walker.greedy_pick(adj);
                break;
            case PolicyKind::llm_guided: {
                if (adj.empty()) break;
                std::vector<std::string> rooms;
                for (NodeId n : adj) rooms.push_back(house.room(house.room_of(n)).name);
                std::sort(rooms.begin(), rooms.end());
                rooms.erase(std::unique(rooms.begin(), rooms.end()), rooms.end());

                Transcript t{{"system", std::string(prompts::kExploreSystem)},
                             {"user", prompts::explore_user(house.room(house.room_of(current)).name,
                                                            observation_dictionary_text(house, walker.obs()), rooms)}};
                std::optional<std::string> choice;
                try {
                    for (int attempt = 0; attempt < 2 && !choice; ++attempt) {
                        if (attempt == 1) t.push_back({"user", std::string(prompts::kExploreReprompt)});
                        std::string reply = chat->complete(t);
                        t.push_back({"assistant", reply});
                        choice = match_room(reply, rooms);
                    }
                } catch (const Error& e) {
                    throw Error(e.code(), "exploration step " + std::to_string(step) + ": " + e.what() +
                                              "; transcript: " + transcript_dump(t));
                }
                if (log) log->push_back(t);
                if (choice) {
                    std::vector<NodeId> in_room;
                    for (NodeId n : adj) {
                        if (house.room(house.room_of(n)).name == *choice) in_room.push_back(n);
                    }
                    next = walker.greedy_pick(in_room);
                } else {
                    next = walker.greedy_pick(adj);
                }
                break;
            }
        }
        current = next;
        walker.visit(step, current);
    }
    return std::move(walker.obs());
}

ObservationDict observe_rooms(const HouseGraph& house, const std::vector<RoomId>& rooms, const NoiseParams& noise) {
    ObservationDict obs;
    for (RoomId r : rooms) {
        if (!house.has_room(r)) throw Error(ErrorCode::UnknownId, "unknown room id " + std::to_string(r.value));
        for (NodeId n : house.room_nodes(r)) obs.merge(r, detect_at_node(house, n, noise, 0));
    }
    return obs;
}

void validate(const HouseGraph& house, const ObservationDict& obs) {
    for (const auto& [room, items] : obs.room_items) {
        if (!house.has_room(room)) throw Error(ErrorCode::InvariantViolation, "observation names unknown room " + std::to_string(room.value));
        for (ObjectId o : items) {
            if (!house.catalog().contains(o)) {
                throw Error(ErrorCode::InvariantViolation, "observation names unknown object " + std::to_string(o.value));
            }
        }
    }
    for (std::size_t i = 0; i < obs.trajectory.size(); ++i) {
        const auto& s = obs.trajectory[i];
        if (!house.has_node(s.node)) throw Error(ErrorCode::InvariantViolation, "trajectory names unknown node " + std::to_string(s.node.value));
        if (s.step != static_cast<int>(i)) throw Error(ErrorCode::InvariantViolation, "trajectory steps must run 0,1,2,...");
        if (i > 0) {
            NodeId prev = obs.trajectory[i - 1].node;
            const auto& adj = house.neighbors(prev);
            if (prev != s.node && !std::binary_search(adj.begin(), adj.end(), s.node)) {
                throw Error(ErrorCode::InvariantViolation, "trajectory jumps between non-adjacent nodes " +
                                                               std::to_string(prev.value) + " and " + std::to_string(s.node.value));
            }
        }
    }
}

std::string observation_dictionary_text(const HouseGraph& house, const ObservationDict& obs) {
    std::string out = "{";
    bool first_room = true;
    for (const auto& [room, items] : obs.room_items) {
        if (!first_room) out += ", ";
        first_room = false;
        out += "'" + house.room(room).name + "': [";
        bool first_item = true;
        for (ObjectId o : items) {
            if (!first_item) out += ", ";
            first_item = false;
            out += "'" + house.catalog().name(o) + "'";
        }
        out += "]";
    }
    return out + "}";
}

json observations_to_json(const HouseGraph& house, const ObservationDict& obs) {
    json rooms = json::object();
    for (const auto& [room, items] : obs.room_items) {
        json names = json::array();
        for (ObjectId o : items) names.push_back(house.catalog().name(o));
        rooms[house.room(room).name] = names;
    }
    json traj = json::array();
    for (const auto& s : obs.trajectory) traj.push_back({s.step, s.node.value});
    return json{{"observations", rooms}, {"trajectory", traj}};
}

ObservationDict observations_from_json(const HouseGraph& house, const json& j) {
    ObservationDict obs;
    try {
        const bool wrapped = j.contains("observations");
        const json& rooms = wrapped ? j.at("observations") : j;
        for (const auto& [name, items] : rooms.items()) {
            RoomId room = house.room_id(name);
            auto& bucket = obs.room_items[room];
            for (const auto& item : items) bucket.insert(house.catalog().id_of(item.get<std::string>()));
        }
        if (wrapped && j.contains("trajectory")) {
            for (const auto& s : j.at("trajectory")) obs.trajectory.push_back({s.at(0).get<int>(), NodeId{s.at(1).get<int>()}});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedFile, std::string("malformed observation file: ") + e.what());
    }
    validate(house, obs);
    return obs;
}

void save_observations(const HouseGraph& house, const ObservationDict& obs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << observations_to_json(house, obs).dump(2) << '\n';
}

ObservationDict load_observations(const HouseGraph& house, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedFile, path.string() + " is not valid JSON");
    return observations_from_json(house, j);
}

}  // namespace mele
