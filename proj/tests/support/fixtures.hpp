#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mele/env.hpp"

namespace testing_support {

struct RoomSpec {
    std::string name;
    std::string type;
    std::vector<std::string> objects;
};

/// Hand-built house over the household catalog. `node_room[i]` indexes
/// `rooms`; room ids follow the listed order, so list rooms by sorted name.
inline mele::HouseGraph make_house(const std::vector<RoomSpec>& rooms, const std::vector<int>& node_room,
                                   const std::vector<std::pair<int, int>>& edges) {
    mele::HouseParts parts;
    parts.catalog = mele::ObjectCatalog::household();
    parts.num_nodes = node_room.size();
    for (int r : node_room) parts.node_room.push_back(mele::RoomId{r});
    for (auto [a, b] : edges) parts.edges.emplace_back(mele::NodeId{a}, mele::NodeId{b});
    for (const auto& r : rooms) {
        parts.rooms.push_back({r.name, r.type});
        std::set<mele::ObjectId> placed;
        for (const auto& o : r.objects) placed.insert(parts.catalog.id_of(o));
        parts.placements.push_back(std::move(placed));
    }
    return mele::HouseGraph::build(std::move(parts));
}

/// Path 0-1-...-(n-1), one node per room, rooms named "room_00".. in order.
inline mele::HouseGraph path_house(int n, const std::vector<std::vector<std::string>>& objects = {}) {
    std::vector<RoomSpec> rooms;
    std::vector<int> node_room;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) {
        std::string name = std::string("room_") + (i < 10 ? "0" : "") + std::to_string(i);
        rooms.push_back({name, "office", i < static_cast<int>(objects.size()) ? objects[static_cast<std::size_t>(i)]
                                                                            : std::vector<std::string>{}});
        node_room.push_back(i);
        if (i > 0) edges.emplace_back(i - 1, i);
    }
    return make_house(rooms, node_room, edges);
}

}  // namespace testing_support
