#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mele/env.hpp"

namespace mele {

/// Binary question "is `object` in `room`?" with its ground-truth label.
struct Query {
    ObjectId object;
    RoomId room;
    int label = 0;

    bool operator==(const Query&) const = default;
};

struct Split {
    std::vector<std::size_t> train;  ///< ascending
    std::vector<std::size_t> test;   ///< ascending
    std::uint64_t seed = 0;

    bool operator==(const Split&) const = default;
};

struct QuerySet {
    std::vector<Query> queries;
    std::optional<Split> split;
    /// Pairs dropped during generation, one line each.
    std::vector<std::string> warnings;

    std::size_t size() const { return queries.size(); }
};

/// One positive per placement, each followed by a negative for the same
/// object in a uniformly drawn room that does not hold it. A room is used at
/// most once as a negative per object; when an object runs out of such
/// rooms its remaining positives are dropped with a warning, so the set
/// stays exactly balanced.
/// Throws NoNegativeRoom listing every object placed in all rooms, and
/// InvalidArgument when the house has < 2 rooms or no placements.
QuerySet generate_queries(const HouseGraph& house, std::uint64_t seed);

/// Seeded shuffle; the test part has round(fraction * N) rows, at least 1
/// and at most N - 1.
QuerySet train_test_split(QuerySet qs, double test_fraction, std::uint64_t seed);

/// Queries at `indices`, in that order, without a split.
QuerySet subset(const QuerySet& qs, const std::vector<std::size_t>& indices);

/// JSON Lines: {"object": name, "room": name, "label": 0|1} per line.
void save_queries(const HouseGraph& house, const QuerySet& qs, const std::filesystem::path& path);
QuerySet load_queries(const HouseGraph& house, const std::filesystem::path& path);

/// Split sidecar: {"seed": n, "test_indices": [...]}.
void save_split(const Split& split, const std::filesystem::path& path);
/// Rebuilds the train part as the complement of test_indices within [0, n).
Split load_split(const std::filesystem::path& path, std::size_t n);

}  // namespace mele
