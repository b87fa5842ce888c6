#include "mele/queries.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mele/error.hpp"
#include "mele/rng.hpp"

namespace mele {

using nlohmann::json;

QuerySet generate_queries(const HouseGraph& house, std::uint64_t seed) {
    if (house.num_rooms() < 2) throw Error(ErrorCode::InvalidArgument, "query generation needs at least 2 rooms");
    if (house.placement_count() == 0) throw Error(ErrorCode::InvalidArgument, "query generation needs at least 1 placement");

    std::string everywhere;
    for (ObjectId o : house.catalog().ids()) {
        if (containing_rooms(house, o).size() == house.num_rooms()) {
            everywhere += (everywhere.empty() ? "" : ", ") + house.catalog().name(o);
        }
    }
    if (!everywhere.empty()) {
        throw Error(ErrorCode::NoNegativeRoom, "no room lacks these objects, so no negative query exists: " + everywhere);
    }

    Rng rng(seed);
    QuerySet qs;
    for (ObjectId o : house.catalog().ids()) {
        const auto holding = containing_rooms(house, o);
        if (holding.empty()) continue;
        std::vector<RoomId> free_rooms;
        for (std::size_t r = 0; r < house.num_rooms(); ++r) {
            RoomId id{static_cast<int>(r)};
            if (!holding.count(id)) free_rooms.push_back(id);
        }
        for (RoomId r : holding) {
            if (free_rooms.empty()) {
                qs.warnings.push_back("dropped (" + house.catalog().name(o) + ", " + house.room(r).name +
                                      "): every room without the object is already a negative for it");
                continue;
            }
            const std::size_t pick = rng.index(free_rooms.size());
            const RoomId negative = free_rooms[pick];
            free_rooms.erase(free_rooms.begin() + static_cast<std::ptrdiff_t>(pick));
            qs.queries.push_back({o, r, 1});
            qs.queries.push_back({o, negative, 0});
        }
    }
    return qs;
}

QuerySet train_test_split(QuerySet qs, double test_fraction, std::uint64_t seed) {
    const std::size_t n = qs.size();
    if (n == 0) throw Error(ErrorCode::EmptyInput, "cannot split an empty query set");
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 queries to split");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "test_fraction must lie strictly between 0 and 1");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

    Split split;
    split.seed = seed;
    split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.train.begin(), split.train.end());
    qs.split = std::move(split);
    return qs;
}

QuerySet subset(const QuerySet& qs, const std::vector<std::size_t>& indices) {
    QuerySet out;
    out.queries.reserve(indices.size());
    for (std::size_t i : indices) out.queries.push_back(qs.queries.at(i));
    return out;
}

void save_queries(const HouseGraph& house, const QuerySet& qs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    for (const auto& q : qs.queries) {
        out << json{{"object", house.catalog().name(q.object)}, {"room", house.room(q.room).name}, {"label", q.label}}.dump()
            << '\n';
    }
}

QuerySet load_queries(const HouseGraph& house, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    QuerySet qs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(ErrorCode::MalformedFile, path.string() + ":" + std::to_string(line_no) + ": not a JSON object");
        }
        try {
            Query q{house.catalog().id_of(j.at("object").get<std::string>()), house.room_id(j.at("room").get<std::string>()),
                    j.at("label").get<int>()};
            if (q.label != 0 && q.label != 1) throw Error(ErrorCode::MalformedFile, "label must be 0 or 1");
            qs.queries.push_back(q);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedFile, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return qs;
}

void save_split(const Split& split, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << json{{"seed", split.seed}, {"test_indices", split.test}}.dump() << '\n';
}

Split load_split(const std::filesystem::path& path, std::size_t n) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedFile, path.string() + " is not valid JSON");
    Split split;
    try {
        split.seed = j.at("seed").get<std::uint64_t>();
        split.test = j.at("test_indices").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedFile, path.string() + ": " + e.what());
    }
    std::sort(split.test.begin(), split.test.end());
    if (std::adjacent_find(split.test.begin(), split.test.end()) != split.test.end()) {
        throw Error(ErrorCode::MalformedFile, "split repeats a test index");
    }
    std::vector<char> in_test(n, 0);
    for (std::size_t i : split.test) {
        if (i >= n) throw Error(ErrorCode::MalformedFile, "test index " + std::to_string(i) + " out of range");
        in_test[i] = 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!in_test[i]) split.train.push_back(i);
    }
    return split;
}

}  // namespace mele
