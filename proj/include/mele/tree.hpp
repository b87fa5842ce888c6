#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace mele {

/// Labeled rows of uniform arity with binary labels.
struct Dataset {
    std::vector<std::vector<double>> x;
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
    std::size_t arity() const { return x.empty() ? 0 : x.front().size(); }
    void add(std::vector<double> row, int label) {
        x.push_back(std::move(row));
        y.push_back(label);
    }
};

/// Throws EmptyInput, WrongArity (ragged rows) or InvalidArgument (label not 0/1).
void validate(const Dataset& ds);

/// x[feature] <= threshold goes left ("true"), everything else right.
struct TreeNode {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  ///< leaf output: class for CART, weight for boosting
    int samples = 0;
    double impurity = 0.0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  ///< nodes[0] is the root

    double predict(std::span<const double> x) const;
    int depth() const;
    bool operator==(const Tree&) const = default;
};

void to_json(nlohmann::json& j, const Tree& t);
void from_json(const nlohmann::json& j, Tree& t);

/// 1 - p0^2 - p1^2, evaluated as 2*c0*c1/n^2 so that swapping the classes
/// gives a bitwise-identical value. Throws InvalidArgument on (0, 0).
double gini(std::size_t count0, std::size_t count1);

struct SplitChoice {
    std::size_t feature = 0;
    double threshold = 0.0;
    double decrease = 0.0;

    bool operator==(const SplitChoice&) const = default;
};

/// Exhaustive Gini split over `features` (scanned in ascending order) at
/// midpoints between consecutive distinct values of the `rows` subset.
/// Ties go to the lower feature, then the lower threshold. Returns nullopt
/// when no split strictly reduces impurity.
std::optional<SplitChoice> best_split(const Dataset& ds, std::span<const std::size_t> rows,
                                      std::span<const std::size_t> features);

/// Same search, but also returns the best zero-gain split when no split
/// helps; nullopt only when every candidate feature is constant on `rows`.
std::optional<SplitChoice> best_split_any(const Dataset& ds, std::span<const std::size_t> rows,
                                          std::span<const std::size_t> features);

struct CartParams {
    int max_depth = -1;  ///< < 0 means unbounded
    int min_samples_split = 2;
    /// Features examined per node; 0 examines all of them.
    std::size_t max_features = 0;
};

/// Grows a CART classifier on `rows` (duplicates allowed, as in a bootstrap
/// sample). Stops at purity, max_depth, min_samples_split, or when no
/// feature varies; impure nodes otherwise split even without Gini gain.
/// Leaves hold the majority class, ties -> 0. With max_features > 0 the
/// features are visited in a random order drawn from `seed` until that many
/// non-constant ones are found; the order is keyed on the node's row multiset,
/// so a tree grown on mirrored data draws the same features at mirrored nodes.
Tree grow_cart(const Dataset& ds, std::span<const std::size_t> rows, const CartParams& params, std::uint64_t seed = 0);

struct BoostTreeParams {
    int max_depth = 6;
    double lambda = 1.0;
    double min_child_weight = 1.0;
};

/// Second-order regression tree on per-row gradients and hessians. Splits
/// require positive gain; leaves hold -G / (H + lambda).
Tree grow_boost_tree(const Dataset& ds, std::span<const double> grad, std::span<const double> hess,
                     const BoostTreeParams& params);

}  // namespace mele
