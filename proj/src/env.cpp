#include "mele/env.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <queue>
#include <sstream>

#include "mele/error.hpp"
#include "mele/rng.hpp"

namespace mele {

using nlohmann::json;

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::UnknownId: return "UnknownId";
        case ErrorCode::DanglingId: return "DanglingId";
        case ErrorCode::CatalogNotBijective: return "CatalogNotBijective";
        case ErrorCode::Disconnected: return "Disconnected";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::MalformedFile: return "MalformedFile";
        case ErrorCode::NoNegativeRoom: return "NoNegativeRoom";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::WrongArity: return "WrongArity";
        case ErrorCode::UntrainedModel: return "UntrainedModel";
        case ErrorCode::AnswerUnparseable: return "AnswerUnparseable";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

namespace {

constexpr const char* kHouseholdLabels[] = {
    "appliance", "armchair",  "bathtub",      "bed",       "board",      "bookcase",  "books",
    "cabinet",   "chair",     "clothes",      "counter",   "curtain",    "cushion",   "desk",
    "dresser",   "dumbells",  "hairbrush",    "headphones", "jumprope",  "mirror",    "mug",
    "nightstand", "phone",    "picture",      "plant",     "playing cards", "refrigerator", "sink",
    "sofa",      "table",     "television",   "toilet",    "toothbrush", "towel",     "tv remote",
    "wallet",    "water bottle", "whiteboard", "window",   "wristwatch",
};
constexpr int kHouseholdCount = 40;

struct PriorRow {
    const char* object;
    std::initializer_list<std::pair<const char*, double>> rooms;
};

// Rough household co-occurrence statistics; unlisted pairs are 0.
const PriorRow kHouseholdPrior[] = {
    {"appliance", {{"kitchen", 0.85}, {"laundry room", 0.8}, {"living room", 0.15}}},
    {"armchair", {{"living room", 0.6}, {"bedroom", 0.2}, {"office", 0.3}}},
    {"bathtub", {{"bathroom", 0.6}}},
    {"bed", {{"bedroom", 0.95}}},
    {"board", {{"office", 0.4}, {"kitchen", 0.1}}},
    {"bookcase", {{"living room", 0.4}, {"office", 0.6}, {"bedroom", 0.2}}},
    {"books", {{"living room", 0.5}, {"office", 0.7}, {"bedroom", 0.45}}},
    {"cabinet", {{"kitchen", 0.9}, {"bathroom", 0.6}, {"dining room", 0.3}, {"office", 0.3}, {"laundry room", 0.5}}},
    {"chair", {{"dining room", 0.9}, {"office", 0.85}, {"kitchen", 0.4}, {"bedroom", 0.3}, {"living room", 0.3}}},
    {"clothes", {{"bedroom", 0.7}, {"laundry room", 0.8}, {"bathroom", 0.15}}},
    {"counter", {{"kitchen", 0.9}, {"bathroom", 0.55}}},
    {"curtain", {{"living room", 0.6}, {"bedroom", 0.6}, {"bathroom", 0.35}, {"dining room", 0.4}}},
    {"cushion", {{"living room", 0.75}, {"bedroom", 0.4}}},
    {"desk", {{"office", 0.95}, {"bedroom", 0.3}}},
    {"dresser", {{"bedroom", 0.75}}},
    {"dumbells", {{"bedroom", 0.1}, {"living room", 0.05}, {"garage", 0.3}}},
    {"hairbrush", {{"bathroom", 0.5}, {"bedroom", 0.3}}},
    {"headphones", {{"office", 0.4}, {"bedroom", 0.3}, {"living room", 0.1}}},
    {"jumprope", {{"garage", 0.2}, {"bedroom", 0.05}}},
    {"mirror", {{"bathroom", 0.9}, {"bedroom", 0.5}, {"hallway", 0.3}}},
    {"mug", {{"kitchen", 0.8}, {"office", 0.4}, {"dining room", 0.2}, {"living room", 0.1}}},
    {"nightstand", {{"bedroom", 0.85}}},
    {"phone", {{"office", 0.4}, {"living room", 0.3}, {"bedroom", 0.3}, {"kitchen", 0.1}}},
    {"picture", {{"living room", 0.7}, {"hallway", 0.5}, {"bedroom", 0.5}, {"dining room", 0.5}, {"office", 0.3}}},
    {"plant", {{"living room", 0.55}, {"dining room", 0.3}, {"office", 0.3}, {"kitchen", 0.2}, {"hallway", 0.2}}},
    {"playing cards", {{"living room", 0.1}, {"dining room", 0.05}}},
    {"refrigerator", {{"kitchen", 0.95}}},
    {"sink", {{"kitchen", 0.95}, {"bathroom", 0.95}, {"laundry room", 0.5}}},
    {"sofa", {{"living room", 0.9}, {"office", 0.1}}},
    {"table", {{"dining room", 0.95}, {"kitchen", 0.5}, {"living room", 0.5}, {"office", 0.2}}},
    {"television", {{"living room", 0.85}, {"bedroom", 0.3}}},
    {"toilet", {{"bathroom", 0.95}}},
    {"toothbrush", {{"bathroom", 0.8}}},
    {"towel", {{"bathroom", 0.9}, {"kitchen", 0.3}, {"laundry room", 0.3}}},
    {"tv remote", {{"living room", 0.6}, {"bedroom", 0.15}}},
    {"wallet", {{"bedroom", 0.2}, {"hallway", 0.1}, {"office", 0.1}}},
    {"water bottle", {{"kitchen", 0.3}, {"office", 0.3}, {"bedroom", 0.15}}},
    {"whiteboard", {{"office", 0.35}, {"kitchen", 0.05}}},
    {"window", {{"living room", 0.9}, {"bedroom", 0.85}, {"kitchen", 0.7}, {"dining room", 0.7}, {"office", 0.75}, {"bathroom", 0.4}}},
    {"wristwatch", {{"bedroom", 0.2}, {"bathroom", 0.05}}},
};

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

std::vector<std::string> sorted_unique_check(std::vector<std::string> names, const char* what) {
    std::sort(names.begin(), names.end());
    auto dup = std::adjacent_find(names.begin(), names.end());
    if (dup != names.end()) {
        fail(ErrorCode::CatalogNotBijective, std::string(what) + " catalog not bijective: duplicate name '" + *dup + "'");
    }
    return names;
}

}  // namespace

// ---------------------------------------------------------------- catalog --

ObjectCatalog::ObjectCatalog(const std::vector<std::pair<ObjectId, std::string>>& entries) {
    for (const auto& [id, name] : entries) {
        if (id.value < 0) fail(ErrorCode::InvariantViolation, "negative object id " + std::to_string(id.value));
        if (names_.count(id)) {
            fail(ErrorCode::CatalogNotBijective, "object catalog not bijective: duplicate id " + std::to_string(id.value));
        }
        if (ids_.count(name)) {
            fail(ErrorCode::CatalogNotBijective, "object catalog not bijective: duplicate name '" + name + "'");
        }
        names_.emplace(id, name);
        ids_.emplace(name, id);
    }
}

ObjectCatalog ObjectCatalog::household() {
    std::vector<std::pair<ObjectId, std::string>> entries;
    for (int i = 0; i < kHouseholdCount; ++i) entries.emplace_back(ObjectId{i}, kHouseholdLabels[i]);
    return ObjectCatalog(entries);
}

ObjectCatalog ObjectCatalog::household_with_extras(std::size_t total) {
    ObjectCatalog cat = household();
    for (std::size_t i = kHouseholdCount; i < total; ++i) cat.add("item_" + std::to_string(i));
    return cat;
}

std::optional<ObjectId> ObjectCatalog::find(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

ObjectId ObjectCatalog::id_of(const std::string& name) const {
    auto id = find(name);
    if (!id) fail(ErrorCode::UnknownId, "unknown object '" + name + "'");
    return *id;
}

const std::string& ObjectCatalog::name(ObjectId id) const {
    auto it = names_.find(id);
    if (it == names_.end()) fail(ErrorCode::UnknownId, "unknown object id " + std::to_string(id.value));
    return it->second;
}

ObjectId ObjectCatalog::add(const std::string& name) {
    if (ids_.count(name)) {
        fail(ErrorCode::CatalogNotBijective, "object catalog not bijective: duplicate name '" + name + "'");
    }
    int next = kHouseholdCount;
    if (!names_.empty()) next = std::max(next, names_.rbegin()->first.value + 1);
    ObjectId id{next};
    names_.emplace(id, name);
    ids_.emplace(name, id);
    return id;
}

std::vector<ObjectId> ObjectCatalog::ids() const {
    std::vector<ObjectId> out;
    out.reserve(names_.size());
    for (const auto& [id, _] : names_) out.push_back(id);
    return out;
}

// ------------------------------------------------------------------ prior --

double PriorTable::get(const std::string& room_type, const std::string& object) const {
    auto it = table_.find({room_type, object});
    return it == table_.end() ? 0.0 : it->second;
}

void PriorTable::set(const std::string& room_type, const std::string& object, double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        fail(ErrorCode::InvalidConfig, "prior(" + room_type + ", " + object + ") out of [0,1]");
    }
    table_[{room_type, object}] = p;
}

PriorTable PriorTable::household() {
    PriorTable t;
    for (const auto& row : kHouseholdPrior) {
        for (const auto& [room, p] : row.rooms) t.set(room, row.object, p);
    }
    return t;
}

PriorTable PriorTable::uniform(const std::vector<std::string>& room_types, const ObjectCatalog& catalog, double p) {
    PriorTable t;
    for (const auto& type : room_types) {
        for (const auto& [_, name] : catalog.entries()) t.set(type, name, p);
    }
    return t;
}

void to_json(json& j, const PriorTable& t) {
    j = json::object();
    for (const auto& [key, p] : t.entries()) j[key.first][key.second] = p;
}

void from_json(const json& j, PriorTable& t) {
    t = PriorTable{};
    for (const auto& [type, row] : j.items()) {
        for (const auto& [object, p] : row.items()) t.set(type, object, p.get<double>());
    }
}

// ------------------------------------------------------------------ house --

HouseGraph HouseGraph::build(HouseParts parts) {
    HouseGraph h;
    const std::size_t n = parts.num_nodes;
    const std::size_t num_rooms = parts.rooms.size();
    if (n == 0) fail(ErrorCode::InvariantViolation, "house has no nodes");
    if (num_rooms == 0) fail(ErrorCode::InvariantViolation, "house has no rooms");
    if (parts.node_room.size() != n) {
        fail(ErrorCode::InvariantViolation, "node_room has " + std::to_string(parts.node_room.size()) +
                                                " entries for " + std::to_string(n) + " nodes");
    }
    if (parts.placements.size() != num_rooms) parts.placements.resize(num_rooms);

    std::vector<std::string> names;
    for (const auto& r : parts.rooms) names.push_back(r.name);
    sorted_unique_check(names, "room");

    h.room_nodes_.assign(num_rooms, {});
    for (std::size_t i = 0; i < n; ++i) {
        RoomId r = parts.node_room[i];
        if (r.value < 0 || r.index() >= num_rooms) {
            fail(ErrorCode::DanglingId, "dangling room id " + std::to_string(r.value) + " on node " + std::to_string(i));
        }
        h.room_nodes_[r.index()].push_back(NodeId{static_cast<int>(i)});
    }
    for (std::size_t r = 0; r < num_rooms; ++r) {
        if (h.room_nodes_[r].empty()) {
            fail(ErrorCode::InvariantViolation, "room '" + parts.rooms[r].name + "' has no nodes");
        }
    }

    h.adjacency_.assign(n, {});
    for (const auto& [a, b] : parts.edges) {
        for (NodeId x : {a, b}) {
            if (x.value < 0 || x.index() >= n) fail(ErrorCode::DanglingId, "dangling node id " + std::to_string(x.value) + " in edge");
        }
        if (a == b) continue;
        h.adjacency_[a.index()].push_back(b);
        h.adjacency_[b.index()].push_back(a);
    }
    for (auto& adj : h.adjacency_) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }

    std::vector<char> seen(n, 0);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = 1;
    while (!frontier.empty()) {
        std::size_t u = frontier.front();
        frontier.pop();
        for (NodeId v : h.adjacency_[u]) {
            if (!seen[v.index()]) {
                seen[v.index()] = 1;
                frontier.push(v.index());
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!seen[i]) fail(ErrorCode::Disconnected, "graph disconnected: node " + std::to_string(i) + " unreachable from node 0");
    }

    for (std::size_t r = 0; r < num_rooms; ++r) {
        for (ObjectId o : parts.placements[r]) {
            if (!parts.catalog.contains(o)) {
                fail(ErrorCode::DanglingId, "dangling object id " + std::to_string(o.value) + " in room '" + parts.rooms[r].name + "'");
            }
        }
    }

    h.node_room_ = std::move(parts.node_room);
    h.rooms_ = std::move(parts.rooms);
    h.placements_ = std::move(parts.placements);
    h.catalog_ = std::move(parts.catalog);
    h.seed_ = parts.seed;
    return h;
}

RoomId HouseGraph::room_id(const std::string& name) const {
    for (std::size_t i = 0; i < rooms_.size(); ++i) {
        if (rooms_[i].name == name) return RoomId{static_cast<int>(i)};
    }
    fail(ErrorCode::UnknownId, "unknown room '" + name + "'");
}

std::vector<std::pair<NodeId, NodeId>> HouseGraph::edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (std::size_t a = 0; a < adjacency_.size(); ++a) {
        for (NodeId b : adjacency_[a]) {
            if (static_cast<int>(a) < b.value) out.emplace_back(NodeId{static_cast<int>(a)}, b);
        }
    }
    return out;
}

std::size_t HouseGraph::placement_count() const {
    std::size_t total = 0;
    for (const auto& p : placements_) total += p.size();
    return total;
}

// ------------------------------------------------------------- generation --

void to_json(json& j, const GenConfig& c) {
    j = json{{"num_rooms", c.num_rooms},
             {"nodes_per_room", {c.nodes_per_room.min, c.nodes_per_room.max}},
             {"room_type_mix", c.room_type_mix},
             {"prior_table", c.prior_table},
             {"num_objects", c.num_objects},
             {"extra_edge_prob", c.extra_edge_prob},
             {"seed", c.seed}};
}

void from_json(const json& j, GenConfig& c) {
    GenConfig d;
    c.num_rooms = j.value("num_rooms", d.num_rooms);
    if (j.contains("nodes_per_room")) {
        const auto& r = j.at("nodes_per_room");
        c.nodes_per_room = {r.at(0).get<int>(), r.at(1).get<int>()};
    } else {
        c.nodes_per_room = d.nodes_per_room;
    }
    c.room_type_mix = j.value("room_type_mix", d.room_type_mix);
    c.prior_table = j.contains("prior_table") ? j.at("prior_table").get<PriorTable>() : d.prior_table;
    c.num_objects = j.value("num_objects", d.num_objects);
    c.extra_edge_prob = j.value("extra_edge_prob", d.extra_edge_prob);
    c.seed = j.value("seed", d.seed);
}

void validate(const GenConfig& cfg) {
    if (cfg.num_rooms < 1) fail(ErrorCode::InvalidConfig, "num_rooms must be >= 1");
    if (cfg.nodes_per_room.min < 1 || cfg.nodes_per_room.max < cfg.nodes_per_room.min) {
        fail(ErrorCode::InvalidConfig, "nodes_per_room must satisfy 1 <= min <= max");
    }
    if (cfg.room_type_mix.empty()) fail(ErrorCode::InvalidConfig, "empty room mix");
    for (const auto& [key, p] : cfg.prior_table.entries()) {
        if (!(p >= 0.0 && p <= 1.0)) {
            fail(ErrorCode::InvalidConfig, "probability out of range for (" + key.first + ", " + key.second + ")");
        }
    }
    if (!(cfg.extra_edge_prob >= 0.0 && cfg.extra_edge_prob <= 1.0)) {
        fail(ErrorCode::InvalidConfig, "extra_edge_prob out of range");
    }
}

HouseGraph generate_house(const GenConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed);

    // Names: repeated types get a numeric suffix ("bedroom", "bedroom 2").
    std::map<std::string, int> type_count;
    std::vector<RoomInfo> unsorted;
    for (int i = 0; i < cfg.num_rooms; ++i) {
        const std::string& type = cfg.room_type_mix[static_cast<std::size_t>(i) % cfg.room_type_mix.size()];
        int k = ++type_count[type];
        unsorted.push_back({k == 1 ? type : type + " " + std::to_string(k), type});
    }
    std::sort(unsorted.begin(), unsorted.end(), [](const RoomInfo& a, const RoomInfo& b) { return a.name < b.name; });

    HouseParts parts;
    parts.rooms = unsorted;
    parts.catalog = ObjectCatalog::household_with_extras(cfg.num_objects);
    parts.seed = cfg.seed;

    const std::size_t num_rooms = parts.rooms.size();
    std::vector<std::vector<NodeId>> members(num_rooms);
    const auto span = static_cast<std::size_t>(cfg.nodes_per_room.max - cfg.nodes_per_room.min + 1);
    int next_node = 0;
    for (std::size_t r = 0; r < num_rooms; ++r) {
        const int count = cfg.nodes_per_room.min + static_cast<int>(rng.index(span));
        for (int i = 0; i < count; ++i) {
            members[r].push_back(NodeId{next_node++});
            parts.node_room.push_back(RoomId{static_cast<int>(r)});
        }
    }
    parts.num_nodes = static_cast<std::size_t>(next_node);

    for (const auto& nodes : members) {
        for (std::size_t i = 1; i < nodes.size(); ++i) parts.edges.emplace_back(nodes[i - 1], nodes[i]);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            for (std::size_t j = i + 2; j < nodes.size(); ++j) {
                if (rng.bernoulli(cfg.extra_edge_prob)) parts.edges.emplace_back(nodes[i], nodes[j]);
            }
        }
    }

    std::vector<std::size_t> order(num_rooms);
    for (std::size_t i = 0; i < num_rooms; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 1; i < num_rooms; ++i) {
        const auto& a = members[order[i]];
        const auto& b = members[order[rng.index(i)]];
        parts.edges.emplace_back(a[rng.index(a.size())], b[rng.index(b.size())]);
    }

    parts.placements.assign(num_rooms, {});
    for (std::size_t r = 0; r < num_rooms; ++r) {
        for (const auto& [id, name] : parts.catalog.entries()) {
            if (rng.bernoulli(cfg.prior_table.get(parts.rooms[r].type, name))) parts.placements[r].insert(id);
        }
    }
    return HouseGraph::build(std::move(parts));
}

std::set<RoomId> containing_rooms(const HouseGraph& house, ObjectId object) {
    if (!house.catalog().contains(object)) fail(ErrorCode::UnknownId, "unknown object id " + std::to_string(object.value));
    std::set<RoomId> out;
    for (std::size_t r = 0; r < house.num_rooms(); ++r) {
        RoomId id{static_cast<int>(r)};
        if (house.placements(id).count(object)) out.insert(id);
    }
    return out;
}

// -------------------------------------------------------------------- I/O --

json house_to_json(const HouseGraph& house) {
    json j;
    std::vector<int> nodes(house.num_nodes());
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = static_cast<int>(i);
    j["nodes"] = nodes;
    json edges = json::array();
    for (const auto& [a, b] : house.edges()) edges.push_back({a.value, b.value});
    j["edges"] = edges;
    json node_room = json::array();
    for (std::size_t i = 0; i < house.num_nodes(); ++i) node_room.push_back(house.room_of(NodeId{static_cast<int>(i)}).value);
    j["node_room"] = node_room;
    json rooms = json::object();
    json placements = json::object();
    for (std::size_t r = 0; r < house.num_rooms(); ++r) {
        RoomId id{static_cast<int>(r)};
        const auto key = std::to_string(r);
        rooms[key] = {{"name", house.room(id).name}, {"type", house.room(id).type}};
        json items = json::array();
        for (ObjectId o : house.placements(id)) items.push_back(house.catalog().name(o));
        placements[key] = items;
    }
    j["rooms"] = rooms;
    j["placements"] = placements;
    json catalog = json::array();
    for (const auto& [id, name] : house.catalog().entries()) catalog.push_back({{"id", id.value}, {"name", name}});
    j["object_catalog"] = catalog;
    j["seed"] = house.seed();
    return j;
}

namespace {

int parse_room_key(const std::string& key) {
    std::size_t pos = 0;
    int v = -1;
    try {
        v = std::stoi(key, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != key.size() || v < 0) fail(ErrorCode::MalformedFile, "room key '" + key + "' is not a non-negative integer");
    return v;
}

}  // namespace

HouseGraph house_from_json(const json& j) {
    for (const char* key : {"nodes", "edges", "node_room", "rooms", "placements", "object_catalog"}) {
        if (!j.contains(key)) fail(ErrorCode::MalformedFile, std::string("house file missing key '") + key + "'");
    }
    try {
        HouseParts parts;
        parts.num_nodes = j.at("nodes").size();
        for (std::size_t i = 0; i < parts.num_nodes; ++i) {
            if (j.at("nodes").at(i).get<int>() != static_cast<int>(i)) {
                fail(ErrorCode::MalformedFile, "nodes must be listed as 0..n-1");
            }
        }
        for (const auto& e : j.at("edges")) parts.edges.emplace_back(NodeId{e.at(0).get<int>()}, NodeId{e.at(1).get<int>()});
        for (const auto& r : j.at("node_room")) parts.node_room.push_back(RoomId{r.get<int>()});

        std::vector<std::pair<ObjectId, std::string>> entries;
        for (const auto& e : j.at("object_catalog")) {
            entries.emplace_back(ObjectId{e.at("id").get<int>()}, e.at("name").get<std::string>());
        }
        parts.catalog = ObjectCatalog(entries);

        const auto& rooms = j.at("rooms");
        parts.rooms.resize(rooms.size());
        std::vector<char> filled(rooms.size(), 0);
        for (const auto& [key, info] : rooms.items()) {
            const int id = parse_room_key(key);
            if (static_cast<std::size_t>(id) >= rooms.size() || filled[static_cast<std::size_t>(id)]) {
                fail(ErrorCode::MalformedFile, "room ids must be contiguous 0..n-1 (got " + key + ")");
            }
            filled[static_cast<std::size_t>(id)] = 1;
            parts.rooms[static_cast<std::size_t>(id)] = {info.at("name").get<std::string>(), info.at("type").get<std::string>()};
        }
        parts.placements.assign(rooms.size(), {});
        for (const auto& [key, items] : j.at("placements").items()) {
            const int id = parse_room_key(key);
            if (static_cast<std::size_t>(id) >= rooms.size()) fail(ErrorCode::DanglingId, "dangling room id " + key + " in placements");
            for (const auto& item : items) {
                const auto name = item.get<std::string>();
                auto o = parts.catalog.find(name);
                if (!o) fail(ErrorCode::DanglingId, "dangling object '" + name + "' in placements of room " + key);
                parts.placements[static_cast<std::size_t>(id)].insert(*o);
            }
        }
        parts.seed = j.value("seed", std::uint64_t{0});
        return HouseGraph::build(std::move(parts));
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedFile, std::string("malformed house file: ") + e.what());
    }
}

void save_house(const HouseGraph& house, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out << house_to_json(house).dump(2) << '\n';
}

HouseGraph load_house(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedFile, path.string() + ": " + e.what());
    }
    return house_from_json(j);
}

std::string room_type_from_name(const std::string& name) {
    std::string s = name;
    while (!s.empty() && (std::isdigit(static_cast<unsigned char>(s.back())) || s.back() == ' ' || s.back() == '_')) {
        s.pop_back();
    }
    return s.empty() ? name : s;
}

HouseGraph import_observations(const json& j, std::uint64_t seed) {
    if (!j.contains("nodes") || !j.at("nodes").is_array()) fail(ErrorCode::MalformedFile, "observation import needs a 'nodes' array");
    try {
        const auto& nodes = j.at("nodes");
        std::vector<std::string> node_room_name;
        std::map<std::string, std::set<std::string>> items_by_room;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& entry = nodes[i];
            if (!entry.is_object() || entry.size() != 1) {
                fail(ErrorCode::MalformedFile, "node " + std::to_string(i) + " must map exactly one room name to its items");
            }
            const auto& [room, items] = *entry.items().begin();
            node_room_name.push_back(room);
            auto& bucket = items_by_room[room];
            for (const auto& it : items) bucket.insert(it.get<std::string>());
        }

        HouseParts parts;
        parts.num_nodes = nodes.size();
        parts.seed = seed;
        parts.catalog = ObjectCatalog::household();
        std::map<std::string, int> room_index;
        for (const auto& [room, items] : items_by_room) {
            room_index[room] = static_cast<int>(parts.rooms.size());
            std::string type = room_type_from_name(room);
            if (j.contains("room_types") && j.at("room_types").contains(room)) {
                type = j.at("room_types").at(room).get<std::string>();
            }
            parts.rooms.push_back({room, type});
            std::set<ObjectId> placed;
            for (const auto& item : items) {
                auto id = parts.catalog.find(item);
                placed.insert(id ? *id : parts.catalog.add(item));
            }
            parts.placements.push_back(std::move(placed));
        }
        for (const auto& name : node_room_name) parts.node_room.push_back(RoomId{room_index.at(name)});
        if (j.contains("edges")) {
            for (const auto& e : j.at("edges")) parts.edges.emplace_back(NodeId{e.at(0).get<int>()}, NodeId{e.at(1).get<int>()});
        }
        return HouseGraph::build(std::move(parts));
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedFile, std::string("malformed observation import: ") + e.what());
    }
}

}  // namespace mele
