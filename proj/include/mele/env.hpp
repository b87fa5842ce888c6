#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mele/ids.hpp"

namespace mele {

/// Bijective object-name <-> ObjectId table.
///
/// The default catalog holds the 40 household labels with their fixed
/// encodings (appliance = 0 ... wristwatch = 39); extra objects take ids
/// from 40 upward.
class ObjectCatalog {
public:
    ObjectCatalog() = default;

    /// Throws CatalogNotBijective on a repeated name or id.
    explicit ObjectCatalog(const std::vector<std::pair<ObjectId, std::string>>& entries);

    static ObjectCatalog household();
    /// Household labels plus synthetic "item_<id>" entries up to `total` objects.
    static ObjectCatalog household_with_extras(std::size_t total);

    std::size_t size() const { return names_.size(); }
    bool contains(ObjectId id) const { return names_.count(id) != 0; }
    std::optional<ObjectId> find(const std::string& name) const;
    /// Throws UnknownId.
    ObjectId id_of(const std::string& name) const;
    /// Throws UnknownId.
    const std::string& name(ObjectId id) const;
    /// Adds a new name with the next free id (>= 40) and returns it.
    ObjectId add(const std::string& name);

    const std::map<ObjectId, std::string>& entries() const { return names_; }
    std::vector<ObjectId> ids() const;

    bool operator==(const ObjectCatalog& other) const { return names_ == other.names_; }

private:
    std::map<ObjectId, std::string> names_;
    std::unordered_map<std::string, ObjectId> ids_;
};

/// Probability that an object sits in a room of a given type, keyed by names.
/// Missing entries read as 0.
class PriorTable {
public:
    double get(const std::string& room_type, const std::string& object) const;
    void set(const std::string& room_type, const std::string& object, double p);
    std::size_t size() const { return table_.size(); }
    const std::map<std::pair<std::string, std::string>, double>& entries() const { return table_; }

    /// Hand-written household statistics for the default catalog.
    static PriorTable household();
    /// Every (type, object) pair set to the same probability.
    static PriorTable uniform(const std::vector<std::string>& room_types, const ObjectCatalog& catalog,
                              double p);

    bool operator==(const PriorTable&) const = default;

private:
    std::map<std::pair<std::string, std::string>, double> table_;
};

void to_json(nlohmann::json& j, const PriorTable& t);
void from_json(const nlohmann::json& j, PriorTable& t);

struct RoomInfo {
    std::string name;
    std::string type;

    bool operator==(const RoomInfo&) const = default;
};

/// Raw parts of a house before validation.
struct HouseParts {
    std::size_t num_nodes = 0;
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::vector<RoomId> node_room;
    std::vector<RoomInfo> rooms;
    std::vector<std::set<ObjectId>> placements;
    ObjectCatalog catalog;
    std::uint64_t seed = 0;
};

/// Topological household: nodes grouped into rooms, with ground-truth
/// object placements per room. Immutable once built.
class HouseGraph {
public:
    /// Validates every invariant; throws DanglingId, Disconnected,
    /// CatalogNotBijective or InvariantViolation naming the offending entity.
    static HouseGraph build(HouseParts parts);

    std::size_t num_nodes() const { return adjacency_.size(); }
    std::size_t num_rooms() const { return rooms_.size(); }
    bool has_node(NodeId n) const { return n.value >= 0 && n.index() < adjacency_.size(); }
    bool has_room(RoomId r) const { return r.value >= 0 && r.index() < rooms_.size(); }

    /// Sorted neighbor list.
    const std::vector<NodeId>& neighbors(NodeId n) const { return adjacency_.at(n.index()); }
    RoomId room_of(NodeId n) const { return node_room_.at(n.index()); }
    const std::vector<NodeId>& room_nodes(RoomId r) const { return room_nodes_.at(r.index()); }
    const RoomInfo& room(RoomId r) const { return rooms_.at(r.index()); }
    const std::vector<RoomInfo>& rooms() const { return rooms_; }
    /// Throws UnknownId.
    RoomId room_id(const std::string& name) const;
    const std::set<ObjectId>& placements(RoomId r) const { return placements_.at(r.index()); }
    const ObjectCatalog& catalog() const { return catalog_; }
    std::uint64_t seed() const { return seed_; }
    std::vector<std::pair<NodeId, NodeId>> edges() const;
    std::size_t placement_count() const;

    bool operator==(const HouseGraph&) const = default;

private:
    HouseGraph() = default;

    std::vector<std::vector<NodeId>> adjacency_;
    std::vector<RoomId> node_room_;
    std::vector<RoomInfo> rooms_;
    std::vector<std::vector<NodeId>> room_nodes_;
    std::vector<std::set<ObjectId>> placements_;
    ObjectCatalog catalog_;
    std::uint64_t seed_ = 0;
};

struct NodeRange {
    int min = 1;
    int max = 3;
};

struct GenConfig {
    int num_rooms = 6;
    NodeRange nodes_per_room;
    std::vector<std::string> room_type_mix = {"hallway", "kitchen", "bedroom", "bathroom", "living room", "dining room", "office"};
    PriorTable prior_table = PriorTable::household();
    /// Catalog size; values above 40 add synthetic objects.
    std::size_t num_objects = 40;
    /// Probability of each extra intra-room edge beyond the room's chain.
    double extra_edge_prob = 0.3;
    std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const GenConfig& c);
void from_json(const nlohmann::json& j, GenConfig& c);

/// Throws InvalidConfig when a GenConfig invariant fails.
void validate(const GenConfig& cfg);

/// Deterministic synthetic house. Room i gets type room_type_mix[i % n];
/// rooms are joined by a random spanning tree, each room's nodes by a chain
/// plus random extra edges, and every object lands in room R independently
/// with probability prior(type(R), object).
HouseGraph generate_house(const GenConfig& cfg);

/// Rooms whose placements include `object`. Throws UnknownId.
std::set<RoomId> containing_rooms(const HouseGraph& house, ObjectId object);

nlohmann::json house_to_json(const HouseGraph& house);
HouseGraph house_from_json(const nlohmann::json& j);
void save_house(const HouseGraph& house, const std::filesystem::path& path);
HouseGraph load_house(const std::filesystem::path& path);

/// Builds a house from pre-extracted per-node detections:
/// {"nodes": [{room name: [item names]}, ...], "edges": [[a, b], ...],
///  "room_types": {room name: type} (optional)}.
/// Unknown item names extend the catalog; room ids follow sorted names.
HouseGraph import_observations(const nlohmann::json& j, std::uint64_t seed = 0);

/// Strips a trailing numeric suffix: "bedroom 2" -> "bedroom".
std::string room_type_from_name(const std::string& name);

}  // namespace mele
