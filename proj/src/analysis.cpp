#include "mele/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mele/error.hpp"
#include "mele/rng.hpp"

namespace mele {

namespace {

double match_rate(std::span<const int> a, std::span<const int> b, const char* what) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::LengthMismatch, std::string(what) + ": lengths " + std::to_string(a.size()) + " and " +
                                                   std::to_string(b.size()) + " differ");
    }
    if (a.empty()) throw Error(ErrorCode::EmptyInput, std::string(what) + " of empty vectors");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
    return static_cast<double>(same) / static_cast<double>(a.size());
}

std::pair<double, double> mean_std(std::span<const double> v) {
    if (v.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

double accuracy(std::span<const int> preds, std::span<const int> labels) { return match_rate(preds, labels, "accuracy"); }

double agreement(std::span<const int> agent_answers, std::span<const int> finals) {
    return match_rate(agent_answers, finals, "agreement");
}

std::vector<std::string> cam_feature_names(std::size_t k) {
    std::vector<std::string> names = {"object", "room"};
    for (std::size_t i = 0; i < k; ++i) names.push_back("agent_" + std::to_string(i));
    return names;
}

std::vector<double> pfi_samples(const CamModel& model, const Dataset& val, std::size_t i, int repeats, std::uint64_t seed) {
    if (val.size() == 0) throw Error(ErrorCode::EmptyInput, "PFI on an empty validation set");
    if (i >= val.arity()) {
        throw Error(ErrorCode::InvalidArgument,
                    "feature index " + std::to_string(i) + " out of range for arity " + std::to_string(val.arity()));
    }
    if (repeats < 1) throw Error(ErrorCode::InvalidArgument, "PFI needs at least one repeat");
    const double base = accuracy(predict_all(model, val), val.y);
    std::vector<double> out;
    Dataset shuffled = val;
    std::vector<std::size_t> perm(val.size());
    for (int r = 0; r < repeats; ++r) {
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(derive_seed({seed, static_cast<std::uint64_t>(r)}));
        rng.shuffle(std::span<std::size_t>(perm));
        for (std::size_t row = 0; row < val.size(); ++row) shuffled.x[row][i] = val.x[perm[row]][i];
        out.push_back(std::abs(base - accuracy(predict_all(model, shuffled), val.y)));
    }
    return out;
}

double pfi(const CamModel& model, const Dataset& val, std::size_t i, int repeats, std::uint64_t seed) {
    return mean_std(pfi_samples(model, val, i, repeats, seed)).first;
}

PfiReport pfi_all(const CamModel& model, const Dataset& val, const std::vector<std::string>& names, int repeats,
                  std::uint64_t seed) {
    if (names.size() != val.arity()) throw Error(ErrorCode::WrongArity, "one feature name per column required");
    PfiReport report;
    report.base_accuracy = accuracy(predict_all(model, val), val.y);
    report.repeats = repeats;
    report.seed = seed;
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto [mean, sd] = mean_std(pfi_samples(model, val, i, repeats, seed));
        report.features.push_back({names[i], mean, sd});
    }
    return report;
}

void save_pfi_csv(const PfiReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << "feature_name,pfi_mean,pfi_std\n";
    for (const auto& f : report.features) out << f.feature << ',' << fmt("%.6f", f.mean) << ',' << fmt("%.6f", f.std) << '\n';
}

RoomPfiResult per_room_pfi_experiment(const QuerySet& qs, const std::vector<std::vector<int>>& per_query, RoomId room,
                                      const RoomPfiParams& params) {
    if (per_query.size() != qs.size()) throw Error(ErrorCode::LengthMismatch, "answers do not cover the query set");
    if (params.trials < 1) throw Error(ErrorCode::InvalidConfig, "per-room PFI needs at least one trial");
    Dataset all;
    for (std::size_t i = 0; i < qs.size(); ++i) {
        if (qs.queries[i].room != room) continue;
        std::vector<double> row{static_cast<double>(qs.queries[i].object.value)};
        for (int a : per_query[i]) row.push_back(a);
        all.add(std::move(row), qs.queries[i].label);
    }
    if (all.size() == 0) throw Error(ErrorCode::EmptyInput, "no query targets room " + std::to_string(room.value));
    if (all.size() < 2) throw Error(ErrorCode::InvalidArgument, "room " + std::to_string(room.value) + " has a single query");

    const std::size_t k = all.arity() - 1;
    std::vector<std::string> names{"object"};
    for (std::size_t a = 0; a < k; ++a) names.push_back("agent_" + std::to_string(a));

    RoomPfiResult result;
    result.room = room;
    result.queries = all.size();
    result.report.repeats = params.repeats;
    result.report.seed = params.seed;
    for (std::size_t a = 0; a < k; ++a) {
        std::size_t ones = 0;
        for (const auto& row : all.x) ones += row[a + 1] == 1.0;
        const double share = static_cast<double>(std::max(ones, all.size() - ones)) / static_cast<double>(all.size());
        result.majority_share.push_back(share);
        result.flagged.push_back(share >= params.flag_threshold);
    }

    const std::size_t n = all.size();
    const auto n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(params.val_fraction * n)), 1, n - 1);
    std::vector<std::vector<double>> per_trial(names.size());
    std::vector<double> base;
    for (int t = 0; t < params.trials; ++t) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed({params.seed, static_cast<std::uint64_t>(t), 0x70f1ULL}));
        rng.shuffle(std::span<std::size_t>(order));
        Dataset train, val;
        for (std::size_t i = 0; i < n; ++i) {
            auto& target = i < n_val ? val : train;
            target.add(all.x[order[i]], all.y[order[i]]);
        }
        CamModel model = fit(Algo::dt, train, params.dt_hyper, derive_seed({params.seed, static_cast<std::uint64_t>(t)}));
        PfiReport trial = pfi_all(model, val, names, params.repeats, derive_seed({params.seed, static_cast<std::uint64_t>(t), 1}));
        base.push_back(trial.base_accuracy);
        for (std::size_t f = 0; f < names.size(); ++f) per_trial[f].push_back(trial.features[f].mean);
        if (t == 0) result.first_model = model;
    }
    result.report.base_accuracy = mean_std(base).first;
    for (std::size_t f = 0; f < names.size(); ++f) {
        auto [mean, sd] = mean_std(per_trial[f]);
        result.report.features.push_back({names[f], mean, sd});
    }
    return result;
}

std::string tree_to_dot(const CamModel& model, const std::vector<std::string>& feature_names) {
    if (model.algo() != Algo::dt) {
        throw Error(ErrorCode::InvalidArgument, "DOT export needs a dt model, got " + std::string(to_string(model.algo())));
    }
    const auto* tm = std::get_if<TreeModel>(&model.params());
    if (!tm) throw Error(ErrorCode::InvalidArgument, "dt model holds no tree");
    const auto& nodes = tm->tree.nodes;

    auto name = [&](int f) {
        if (static_cast<std::size_t>(f) < feature_names.size()) return feature_names[static_cast<std::size_t>(f)];
        return "x[" + std::to_string(f) + "]";
    };
    std::ostringstream out;
    out << "digraph Tree {\n";
    out << "node [shape=box] ;\n";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        std::string label;
        if (!n.is_leaf()) label = dot_escape(name(n.feature)) + " <= " + fmt("%.6g", n.threshold) + "\\n";
        label += "gini = " + fmt("%.3f", n.impurity) + "\\nsamples = " + std::to_string(n.samples);
        if (n.is_leaf()) label += "\\nclass = " + std::to_string(static_cast<int>(n.value));
        out << i << " [label=\"" << label << "\"] ;\n";
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        if (n.is_leaf()) continue;
        out << i << " -> " << n.left << " [label=\"true\"] ;\n";
        out << i << " -> " << n.right << " [label=\"false\"] ;\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace mele
