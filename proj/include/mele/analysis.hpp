#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mele/aggregate.hpp"
#include "mele/learners.hpp"
#include "mele/queries.hpp"

namespace mele {

/// Fraction of positions where preds and labels agree. Throws
/// LengthMismatch or EmptyInput.
double accuracy(std::span<const int> preds, std::span<const int> labels);

/// Fraction of queries where one agent's answer equals the final answer.
double agreement(std::span<const int> agent_answers, std::span<const int> finals);

/// "object", "room", "agent_0", ..., "agent_{k-1}".
std::vector<std::string> cam_feature_names(std::size_t k);

/// Per-repeat |base accuracy - accuracy with column i permuted|. Repeat r
/// permutes rows with a stream keyed on (seed, r) only, so every column
/// sees the same permutation. Throws InvalidArgument when i >= arity.
std::vector<double> pfi_samples(const CamModel& model, const Dataset& val, std::size_t i, int repeats, std::uint64_t seed);

/// Mean of pfi_samples.
double pfi(const CamModel& model, const Dataset& val, std::size_t i, int repeats = 5, std::uint64_t seed = 0);

struct PfiEntry {
    std::string feature;
    double mean = 0.0;
    double std = 0.0;
};

struct PfiReport {
    double base_accuracy = 0.0;
    int repeats = 0;
    std::uint64_t seed = 0;
    std::vector<PfiEntry> features;
};

PfiReport pfi_all(const CamModel& model, const Dataset& val, const std::vector<std::string>& names, int repeats = 5,
                  std::uint64_t seed = 0);

/// Columns feature_name, pfi_mean, pfi_std.
void save_pfi_csv(const PfiReport& report, const std::filesystem::path& path);

struct RoomPfiParams {
    int trials = 5;
    int repeats = 5;
    double val_fraction = 0.2;
    double flag_threshold = 0.9;
    std::uint64_t seed = 0;
    nlohmann::json dt_hyper = nlohmann::json::object();
};

struct RoomPfiResult {
    RoomId room;
    std::size_t queries = 0;
    /// Features [object, agent_0..agent_{K-1}], averaged over trials
    /// (mean of per-trial means; std across trials).
    PfiReport report;
    /// Share of the filtered queries given the agent's more common answer.
    std::vector<double> majority_share;
    std::vector<bool> flagged;
    /// Tree of the first trial, for export.
    CamModel first_model;
};

/// Restricts the queries to `room`, drops the room column and trains a DT
/// CAM on [object, s_1..s_K] per trial (seeded train/validation split), then
/// averages PFI over the trials. Agents answering one class at least
/// flag_threshold of the time are flagged. Throws EmptyInput when no query
/// targets the room and InvalidArgument when fewer than 2 do.
RoomPfiResult per_room_pfi_experiment(const QuerySet& qs, const std::vector<std::vector<int>>& per_query, RoomId room,
                                      const RoomPfiParams& params = {});

/// Graphviz digraph of a dt model. Internal nodes read
/// "name <= threshold\ngini = g\nsamples = n", leaves add "class = c", and
/// edges are labeled true (left) / false (right). Throws InvalidArgument for
/// other algorithms.
std::string tree_to_dot(const CamModel& model, const std::vector<std::string>& feature_names = {});

}  // namespace mele
