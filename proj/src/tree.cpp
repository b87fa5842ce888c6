#include "mele/tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "mele/error.hpp"
#include "mele/rng.hpp"

namespace mele {

using nlohmann::json;

namespace {

constexpr double kMinGain = 1e-12;

struct Counts {
    std::size_t c0 = 0;
    std::size_t c1 = 0;
    std::size_t total() const { return c0 + c1; }
};

Counts count_labels(const Dataset& ds, std::span<const std::size_t> rows) {
    Counts c;
    for (std::size_t r : rows) (ds.y[r] ? c.c1 : c.c0)++;
    return c;
}

double gini_counts(const Counts& c) { return gini(c.c0, c.c1); }

std::optional<SplitChoice> scan_gini(const Dataset& ds, std::span<const std::size_t> rows,
                                     std::span<const std::size_t> features) {
    if (rows.empty()) return std::nullopt;
    std::vector<std::size_t> order(features.begin(), features.end());
    std::sort(order.begin(), order.end());

    const Counts parent = count_labels(ds, rows);
    const double parent_gini = gini_counts(parent);
    const double n = static_cast<double>(parent.total());

    std::optional<SplitChoice> best;
    std::vector<std::pair<double, int>> column(rows.size());
    for (std::size_t f : order) {
        for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {ds.x[rows[i]][f], ds.y[rows[i]]};
        std::sort(column.begin(), column.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        Counts left;
        for (std::size_t i = 0; i + 1 < column.size(); ++i) {
            (column[i].second ? left.c1 : left.c0)++;
            if (column[i].first == column[i + 1].first) continue;
            const Counts right{parent.c0 - left.c0, parent.c1 - left.c1};
            const double weighted =
                (static_cast<double>(left.total()) * gini_counts(left) + static_cast<double>(right.total()) * gini_counts(right)) / n;
            const double decrease = parent_gini - weighted;
            if (!best || decrease > best->decrease) {
                best = SplitChoice{f, (column[i].first + column[i + 1].first) / 2.0, decrease};
            }
        }
    }
    return best;
}

int majority_class(const Counts& c) { return c.c1 > c.c0 ? 1 : 0; }

class CartBuilder {
public:
    CartBuilder(const Dataset& ds, const CartParams& params, std::uint64_t seed)
        : ds_(ds), params_(params), seed_(seed) {}

    Tree build(std::vector<std::size_t> rows) {
        grow(std::move(rows), 0);
        return std::move(tree_);
    }

private:
    bool is_constant(std::size_t f, const std::vector<std::size_t>& rows) const {
        const double v = ds_.x[rows.front()][f];
        for (std::size_t r : rows) {
            if (ds_.x[r][f] != v) return false;
        }
        return true;
    }

    std::vector<std::size_t> candidates(const std::vector<std::size_t>& rows) {
        const std::size_t d = ds_.arity();
        std::vector<std::size_t> all(d);
        std::iota(all.begin(), all.end(), 0);
        if (params_.max_features == 0 || params_.max_features >= d) return all;
        // Keyed on the node's row multiset rather than visit order, so mirrored
        // trees draw the same features.
        std::vector<std::size_t> sorted(rows);
        std::sort(sorted.begin(), sorted.end());
        std::uint64_t key = seed_;
        for (std::size_t r : sorted) key = splitmix64(key ^ r);
        Rng rng(key);
        rng.shuffle(std::span<std::size_t>(all));
        std::vector<std::size_t> picked;
        for (std::size_t f : all) {
            if (is_constant(f, rows)) continue;
            picked.push_back(f);
            if (picked.size() == params_.max_features) break;
        }
        return picked;
    }

    int grow(std::vector<std::size_t> rows, int depth) {
        const Counts c = count_labels(ds_, rows);
        const int index = static_cast<int>(tree_.nodes.size());
        TreeNode node;
        node.samples = static_cast<int>(c.total());
        node.impurity = gini_counts(c);
        node.value = majority_class(c);
        tree_.nodes.push_back(node);

        const bool pure = c.c0 == 0 || c.c1 == 0;
        const bool depth_cap = params_.max_depth >= 0 && depth >= params_.max_depth;
        const bool too_small = rows.size() < static_cast<std::size_t>(std::max(2, params_.min_samples_split));
        if (pure || depth_cap || too_small) return index;

        const auto features = candidates(rows);
        const auto split = best_split_any(ds_, rows, features);
        if (!split) return index;

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            (ds_.x[r][split->feature] <= split->threshold ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int left = grow(std::move(left_rows), depth + 1);
        const int right = grow(std::move(right_rows), depth + 1);
        TreeNode& n = tree_.nodes[static_cast<std::size_t>(index)];
        n.feature = static_cast<int>(split->feature);
        n.threshold = split->threshold;
        n.left = left;
        n.right = right;
        return index;
    }

    const Dataset& ds_;
    CartParams params_;
    std::uint64_t seed_;
    Tree tree_;
};

struct GradSums {
    double g = 0.0;
    double h = 0.0;
};

class BoostTreeBuilder {
public:
    BoostTreeBuilder(const Dataset& ds, std::span<const double> grad, std::span<const double> hess, const BoostTreeParams& p)
        : ds_(ds), grad_(grad), hess_(hess), params_(p) {}

    Tree build() {
        std::vector<std::size_t> rows(ds_.size());
        std::iota(rows.begin(), rows.end(), 0);
        grow(rows, 0);
        return std::move(tree_);
    }

private:
    double score(const GradSums& s) const { return s.g * s.g / (s.h + params_.lambda); }

    // Sums are accumulated per distinct value in row order, then combined
    // from the low end for the left child and from the high end for the
    // right child, so mirroring a binary column mirrors the sums exactly.
    std::optional<SplitChoice> find_split(const std::vector<std::size_t>& rows, const GradSums& total) const {
        std::optional<SplitChoice> best;
        std::vector<std::size_t> order;
        for (std::size_t f = 0; f < ds_.arity(); ++f) {
            order = rows;
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return ds_.x[a][f] < ds_.x[b][f]; });
            std::vector<double> values;
            std::vector<GradSums> buckets;
            for (std::size_t r : order) {
                const double v = ds_.x[r][f];
                if (values.empty() || values.back() != v) {
                    values.push_back(v);
                    buckets.emplace_back();
                }
                buckets.back().g += grad_[r];
                buckets.back().h += hess_[r];
            }
            const std::size_t m = buckets.size();
            if (m < 2) continue;
            std::vector<GradSums> prefix(m), suffix(m);
            for (std::size_t b = 0; b < m; ++b) {
                prefix[b] = buckets[b];
                if (b > 0) {
                    prefix[b].g = prefix[b - 1].g + buckets[b].g;
                    prefix[b].h = prefix[b - 1].h + buckets[b].h;
                }
            }
            for (std::size_t b = m; b-- > 0;) {
                suffix[b] = buckets[b];
                if (b + 1 < m) {
                    suffix[b].g = suffix[b + 1].g + buckets[b].g;
                    suffix[b].h = suffix[b + 1].h + buckets[b].h;
                }
            }
            for (std::size_t b = 0; b + 1 < m; ++b) {
                const GradSums& l = prefix[b];
                const GradSums& r = suffix[b + 1];
                if (l.h < params_.min_child_weight || r.h < params_.min_child_weight) continue;
                const double gain = 0.5 * (score(l) + score(r) - score(total));
                if (!(gain > kMinGain)) continue;
                if (!best || gain > best->decrease) best = SplitChoice{f, (values[b] + values[b + 1]) / 2.0, gain};
            }
        }
        return best;
    }

    int grow(const std::vector<std::size_t>& rows, int depth) {
        GradSums total;
        for (std::size_t r : rows) {
            total.g += grad_[r];
            total.h += hess_[r];
        }
        const int index = static_cast<int>(tree_.nodes.size());
        TreeNode node;
        node.samples = static_cast<int>(rows.size());
        node.value = -total.g / (total.h + params_.lambda);
        tree_.nodes.push_back(node);
        if (depth >= params_.max_depth || rows.size() < 2) return index;

        const auto split = find_split(rows, total);
        if (!split) return index;
        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) (ds_.x[r][split->feature] <= split->threshold ? left_rows : right_rows).push_back(r);
        const int left = grow(left_rows, depth + 1);
        const int right = grow(right_rows, depth + 1);
        TreeNode& n = tree_.nodes[static_cast<std::size_t>(index)];
        n.feature = static_cast<int>(split->feature);
        n.threshold = split->threshold;
        n.impurity = split->decrease;
        n.left = left;
        n.right = right;
        return index;
    }

    const Dataset& ds_;
    std::span<const double> grad_;
    std::span<const double> hess_;
    BoostTreeParams params_;
    Tree tree_;
};

}  // namespace

void validate(const Dataset& ds) {
    if (ds.size() == 0) throw Error(ErrorCode::EmptyInput, "empty dataset");
    if (ds.x.size() != ds.y.size()) throw Error(ErrorCode::LengthMismatch, "dataset has mismatched x and y");
    const std::size_t d = ds.arity();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.x[i].size() != d) {
            throw Error(ErrorCode::WrongArity, "row " + std::to_string(i) + " has arity " + std::to_string(ds.x[i].size()) +
                                                   ", expected " + std::to_string(d));
        }
        if (ds.y[i] != 0 && ds.y[i] != 1) throw Error(ErrorCode::InvalidArgument, "non-binary label at row " + std::to_string(i));
    }
}

double Tree::predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
}

int Tree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

void to_json(json& j, const Tree& t) {
    j = json::array();
    for (const auto& n : t.nodes) {
        j.push_back(json{{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"value", n.value},
                         {"samples", n.samples},
                         {"impurity", n.impurity}});
    }
}

void from_json(const json& j, Tree& t) {
    t.nodes.clear();
    for (const auto& e : j) {
        TreeNode n;
        n.feature = e.at("feature").get<int>();
        n.threshold = e.at("threshold").get<double>();
        n.left = e.at("left").get<int>();
        n.right = e.at("right").get<int>();
        n.value = e.at("value").get<double>();
        n.samples = e.at("samples").get<int>();
        n.impurity = e.at("impurity").get<double>();
        t.nodes.push_back(n);
    }
    const int count = static_cast<int>(t.nodes.size());
    if (count == 0) throw Error(ErrorCode::MalformedFile, "tree has no nodes");
    for (const auto& n : t.nodes) {
        if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count)) {
            throw Error(ErrorCode::MalformedFile, "tree child index out of range");
        }
    }
}

double gini(std::size_t count0, std::size_t count1) {
    if (count0 == 0 && count1 == 0) throw Error(ErrorCode::InvalidArgument, "gini of an empty node");
    const double n = static_cast<double>(count0 + count1);
    return 2.0 * static_cast<double>(count0) * static_cast<double>(count1) / (n * n);
}

std::optional<SplitChoice> best_split(const Dataset& ds, std::span<const std::size_t> rows,
                                      std::span<const std::size_t> features) {
    auto best = scan_gini(ds, rows, features);
    if (best && best->decrease > kMinGain) return best;
    return std::nullopt;
}

std::optional<SplitChoice> best_split_any(const Dataset& ds, std::span<const std::size_t> rows,
                                          std::span<const std::size_t> features) {
    return scan_gini(ds, rows, features);
}

Tree grow_cart(const Dataset& ds, std::span<const std::size_t> rows, const CartParams& params, std::uint64_t seed) {
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, "cannot grow a tree on zero rows");
    return CartBuilder(ds, params, seed).build(std::vector<std::size_t>(rows.begin(), rows.end()));
}

Tree grow_boost_tree(const Dataset& ds, std::span<const double> grad, std::span<const double> hess,
                     const BoostTreeParams& params) {
    if (grad.size() != ds.size() || hess.size() != ds.size()) {
        throw Error(ErrorCode::LengthMismatch, "gradient/hessian length differs from dataset size");
    }
    return BoostTreeBuilder(ds, grad, hess, params).build();
}

}  // namespace mele
