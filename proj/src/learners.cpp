#include "mele/learners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "mele/error.hpp"
#include "mele/rng.hpp"

namespace mele {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DtHyper, max_depth, min_samples_split)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RfHyper, n_trees, max_depth, min_samples_split, max_features, threads)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GbtHyper, rounds, learning_rate, max_depth, lambda, min_child_weight)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LrHyper, learning_rate, l2, max_iter, tol)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SvmLinearHyper, lambda, iterations)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SvmRbfHyper, c, gamma, tol, max_iter)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MlpHyper, learning_rate, epochs, batch_size)

std::string_view to_string(Algo algo) {
    switch (algo) {
        case Algo::dt: return "dt";
        case Algo::rf: return "rf";
        case Algo::gbt: return "gbt";
        case Algo::lr: return "lr";
        case Algo::svm_linear: return "svm_linear";
        case Algo::svm_rbf: return "svm_rbf";
        case Algo::mlp: return "mlp";
    }
    return "?";
}

const std::vector<Algo>& all_algos() {
    static const std::vector<Algo> algos = {Algo::dt, Algo::rf, Algo::gbt, Algo::lr, Algo::svm_linear, Algo::svm_rbf, Algo::mlp};
    return algos;
}

Algo algo_from_string(std::string_view name) {
    for (Algo a : all_algos()) {
        if (to_string(a) == name) return a;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown CAM algorithm '" + std::string(name) + "'");
}

namespace {

json default_hyper(Algo algo) {
    switch (algo) {
        case Algo::dt: return DtHyper{};
        case Algo::rf: return RfHyper{};
        case Algo::gbt: return GbtHyper{};
        case Algo::lr: return LrHyper{};
        case Algo::svm_linear: return SvmLinearHyper{};
        case Algo::svm_rbf: return SvmRbfHyper{};
        case Algo::mlp: return MlpHyper{};
    }
    return json::object();
}

void check_arity(std::size_t expected, std::size_t got) {
    if (expected != got) {
        throw Error(ErrorCode::WrongArity, "feature vector has arity " + std::to_string(got) + ", model expects " +
                                               std::to_string(expected));
    }
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double bce_from_logit(double z, int y) { return softplus(z) - (y ? z : 0.0); }

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// ---------------------------------------------------------------- trees --

TreeModel fit_dt(const Dataset& ds, const DtHyper& h) {
    std::vector<std::size_t> rows(ds.size());
    std::iota(rows.begin(), rows.end(), 0);
    return {grow_cart(ds, rows, CartParams{h.max_depth, h.min_samples_split, 0})};
}

ForestModel fit_rf(const Dataset& ds, const RfHyper& h, std::uint64_t seed) {
    if (h.n_trees < 1) throw Error(ErrorCode::InvalidConfig, "rf needs n_trees >= 1");
    const std::size_t d = ds.arity();
    const std::size_t max_features =
        h.max_features > 0 ? static_cast<std::size_t>(h.max_features)
                           : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    const CartParams params{h.max_depth, h.min_samples_split, max_features};
    const std::size_t n_trees = static_cast<std::size_t>(h.n_trees);

    ForestModel forest;
    forest.trees.resize(n_trees);
    auto grow_one = [&](std::size_t t) {
        Rng boot(derive_seed({seed, t, 1}));
        std::vector<std::size_t> rows(ds.size());
        for (auto& r : rows) r = boot.index(ds.size());
        forest.trees[t] = grow_cart(ds, rows, params, derive_seed({seed, t, 2}));
    };

    std::size_t workers = h.threads > 0 ? static_cast<std::size_t>(h.threads) : std::thread::hardware_concurrency();
    workers = std::clamp<std::size_t>(workers, 1, n_trees);
    if (workers == 1) {
        for (std::size_t t = 0; t < n_trees; ++t) grow_one(t);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t t = w; t < n_trees; t += workers) grow_one(t);
            });
        }
        for (auto& th : pool) th.join();
    }
    return forest;
}

BoostModel fit_gbt(const Dataset& ds, const GbtHyper& h) {
    const std::size_t n = ds.size();
    double positives = 0.0;
    for (int y : ds.y) positives += y;
    const double base_rate = positives / static_cast<double>(n);

    BoostModel model;
    model.base_score = std::log(base_rate / (1.0 - base_rate));
    model.learning_rate = h.learning_rate;
    std::vector<double> raw(n, model.base_score), grad, hess;
    const BoostTreeParams params{h.max_depth, h.lambda, h.min_child_weight};
    for (int round = 0; round < h.rounds; ++round) {
        logistic_loss_raw(raw, ds.y, &grad, &hess);
        Tree tree = grow_boost_tree(ds, grad, hess, params);
        for (std::size_t i = 0; i < n; ++i) raw[i] += h.learning_rate * tree.predict(ds.x[i]);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

// --------------------------------------------------------------- linear --

double logistic_objective_z(std::span<const double> w, double b, const Dataset& z, double l2, std::vector<double>* grad) {
    const std::size_t d = w.size();
    const double n = static_cast<double>(z.size());
    double loss = 0.0;
    if (grad) grad->assign(d + 1, 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double m = dot(w, z.x[i]) + b;
        loss += bce_from_logit(m, z.y[i]);
        if (grad) {
            const double r = sigmoid(m) - z.y[i];
            for (std::size_t k = 0; k < d; ++k) (*grad)[k] += r * z.x[i][k];
            (*grad)[d] += r;
        }
    }
    loss /= n;
    double reg = 0.0;
    for (double v : w) reg += v * v;
    loss += 0.5 * l2 * reg;
    if (grad) {
        for (std::size_t k = 0; k < d; ++k) (*grad)[k] = (*grad)[k] / n + l2 * w[k];
        (*grad)[d] /= n;
    }
    return loss;
}

LinearModel fit_lr(const Dataset& ds, const LrHyper& h) {
    LinearModel model;
    model.scaler = Standardizer::fit(ds);
    const Dataset z = model.scaler.apply(ds);
    const std::size_t d = ds.arity();
    model.weights.assign(d, 0.0);
    std::vector<double> grad;
    for (int it = 0; it < h.max_iter; ++it) {
        logistic_objective_z(model.weights, model.bias, z, h.l2, &grad);
        double worst = 0.0;
        for (double g : grad) worst = std::max(worst, std::abs(g));
        if (worst < h.tol) break;
        for (std::size_t k = 0; k < d; ++k) model.weights[k] -= h.learning_rate * grad[k];
        model.bias -= h.learning_rate * grad[d];
    }
    return model;
}

// Full-batch Pegasos on standardized inputs with a constant bias feature.
LinearModel fit_svm_linear(const Dataset& ds, const SvmLinearHyper& h) {
    if (!(h.lambda > 0.0)) throw Error(ErrorCode::InvalidConfig, "svm_linear needs lambda > 0");
    LinearModel model;
    model.scaler = Standardizer::fit(ds);
    const Dataset z = model.scaler.apply(ds);
    const std::size_t d = ds.arity();
    const double n = static_cast<double>(ds.size());
    const double radius = 1.0 / std::sqrt(h.lambda);

    std::vector<double> w(d + 1, 0.0), g(d + 1), best_w = w;
    auto objective = [&](const std::vector<double>& v) {
        double hinge = 0.0, reg = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double y = z.y[i] ? 1.0 : -1.0;
            const double m = dot(std::span(v).first(d), z.x[i]) + v[d];
            hinge += std::max(0.0, 1.0 - y * m);
        }
        for (double x : v) reg += x * x;
        return 0.5 * h.lambda * reg + hinge / n;
    };
    double best_obj = objective(w);
    for (int t = 1; t <= h.iterations; ++t) {
        for (std::size_t k = 0; k <= d; ++k) g[k] = h.lambda * w[k];
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double y = z.y[i] ? 1.0 : -1.0;
            const double m = dot(std::span(w).first(d), z.x[i]) + w[d];
            if (y * m < 1.0) {
                for (std::size_t k = 0; k < d; ++k) g[k] -= y * z.x[i][k] / n;
                g[d] -= y / n;
            }
        }
        const double eta = 1.0 / (h.lambda * t);
        double norm = 0.0;
        for (std::size_t k = 0; k <= d; ++k) {
            w[k] -= eta * g[k];
            norm += w[k] * w[k];
        }
        norm = std::sqrt(norm);
        if (norm > radius) {
            for (double& x : w) x *= radius / norm;
        }
        const double obj = objective(w);
        if (obj < best_obj) {
            best_obj = obj;
            best_w = w;
        }
    }
    model.weights.assign(best_w.begin(), best_w.begin() + static_cast<std::ptrdiff_t>(d));
    model.bias = best_w[d];
    return model;
}

// ------------------------------------------------------------ kernel svm --

// Dual SMO with maximal-violating-pair selection.
KernelSvmModel fit_svm_rbf(const Dataset& ds, const SvmRbfHyper& h) {
    const std::size_t n = ds.size();
    const std::size_t d = ds.arity();
    double gamma = h.gamma;
    if (gamma <= 0.0) {
        double sum = 0.0, sq = 0.0;
        for (const auto& row : ds.x) {
            for (double v : row) {
                sum += v;
                sq += v * v;
            }
        }
        const double count = static_cast<double>(n * d);
        const double var = sq / count - (sum / count) * (sum / count);
        gamma = var > 0.0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
    }
    auto kernel = [&](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
        return std::exp(-gamma * s);
    };

    std::vector<double> y(n), alpha(n, 0.0), g(n, -1.0), K(n * n);
    for (std::size_t i = 0; i < n; ++i) y[i] = ds.y[i] ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) K[i * n + j] = K[j * n + i] = kernel(ds.x[i], ds.x[j]);
    }
    auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * K[i * n + j]; };
    const double C = h.c;
    constexpr double kTau = 1e-12;

    auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0); };
    auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C); };

    for (int iter = 0; iter < h.max_iter; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * g[t];
            if (in_up(t) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (in_low(t) && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        if (i == n || j == n || gmax - gmin < h.tol) break;

        const double ai_old = alpha[i], aj_old = alpha[j];
        if (y[i] != y[j]) {
            double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if (quad <= 0) quad = kTau;
            const double delta = (-g[i] - g[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = C - diff;
                }
            } else if (alpha[j] > C) {
                alpha[j] = C;
                alpha[i] = C + diff;
            }
        } else {
            double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if (quad <= 0) quad = kTau;
            const double delta = (g[i] - g[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = sum - C;
                }
            } else if (alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = sum;
            }
            if (sum > C) {
                if (alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = sum - C;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = sum;
            }
        }
        const double dai = alpha[i] - ai_old, daj = alpha[j] - aj_old;
        for (std::size_t t = 0; t < n; ++t) g[t] += q(i, t) * dai + q(j, t) * daj;
    }

    double ub = std::numeric_limits<double>::infinity(), lb = -ub, free_sum = 0.0;
    int free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * g[t];
        if (alpha[t] >= C) {
            if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0) {
            if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++free_count;
            free_sum += yg;
        }
    }
    KernelSvmModel model;
    model.gamma = gamma;
    model.rho = free_count > 0 ? free_sum / free_count : (ub + lb) / 2.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] > 0) {
            model.support.push_back(ds.x[t]);
            model.coef.push_back(alpha[t] * y[t]);
        }
    }
    return model;
}

// ------------------------------------------------------------------ mlp --

constexpr std::size_t H1 = MlpModel::kHidden1;
constexpr std::size_t H2 = MlpModel::kHidden2;

struct MlpActivations {
    std::array<double, H1> a1{}, h1{};
    std::array<double, H2> a2{}, h2{};
    double a3 = 0.0;
};

void mlp_pass(const MlpModel& m, std::span<const double> z, MlpActivations& act) {
    const std::size_t d = z.size();
    for (std::size_t u = 0; u < H1; ++u) {
        double s = m.b1[u];
        for (std::size_t k = 0; k < d; ++k) s += m.w1[u * d + k] * z[k];
        act.a1[u] = s;
        act.h1[u] = s > 0 ? s : 0.0;
    }
    for (std::size_t u = 0; u < H2; ++u) {
        double s = m.b2[u];
        for (std::size_t k = 0; k < H1; ++k) s += m.w2[u * H1 + k] * act.h1[k];
        act.a2[u] = s;
        act.h2[u] = s > 0 ? s : 0.0;
    }
    double s = m.b3;
    for (std::size_t k = 0; k < H2; ++k) s += m.w3[k] * act.h2[k];
    act.a3 = s;
}

std::size_t mlp_param_count(std::size_t d) { return H1 * d + H1 + H2 * H1 + H2 + H2 + 1; }

// Adds scale * d(loss)/d(params) for one standardized row into `grad`
// (flat order w1, b1, w2, b2, w3, b3) and returns the row's loss.
double mlp_accumulate(const MlpModel& m, std::span<const double> z, int y, double scale, std::vector<double>& grad) {
    const std::size_t d = z.size();
    MlpActivations act;
    mlp_pass(m, z, act);
    const double delta3 = (sigmoid(act.a3) - y) * scale;

    const std::size_t o_b1 = H1 * d, o_w2 = o_b1 + H1, o_b2 = o_w2 + H2 * H1, o_w3 = o_b2 + H2, o_b3 = o_w3 + H2;
    std::array<double, H2> delta2{};
    for (std::size_t u = 0; u < H2; ++u) {
        grad[o_w3 + u] += delta3 * act.h2[u];
        delta2[u] = act.a2[u] > 0 ? delta3 * m.w3[u] : 0.0;
    }
    grad[o_b3] += delta3;
    std::array<double, H1> delta1{};
    for (std::size_t u = 0; u < H2; ++u) {
        for (std::size_t k = 0; k < H1; ++k) {
            grad[o_w2 + u * H1 + k] += delta2[u] * act.h1[k];
            delta1[k] += m.w2[u * H1 + k] * delta2[u];
        }
        grad[o_b2 + u] += delta2[u];
    }
    for (std::size_t u = 0; u < H1; ++u) {
        const double du = act.a1[u] > 0 ? delta1[u] : 0.0;
        for (std::size_t k = 0; k < d; ++k) grad[u * d + k] += du * z[k];
        grad[o_b1 + u] += du;
    }
    return bce_from_logit(act.a3, y);
}

MlpModel fit_mlp(const Dataset& ds, const MlpHyper& h, std::uint64_t seed) {
    if (h.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "mlp batch_size must be >= 1");
    const std::size_t d = ds.arity();
    MlpModel model = mlp_init(d, seed);
    model.scaler = Standardizer::fit(ds);
    const Dataset z = model.scaler.apply(ds);

    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed({seed, 0x5eedULL}));
    std::vector<double> grad(mlp_param_count(d));
    const auto batch = static_cast<std::size_t>(h.batch_size);
    for (int epoch = 0; epoch < h.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            const double scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i) mlp_accumulate(model, z.x[order[i]], z.y[order[i]], scale, grad);
            auto params = mlp_flat_params(model);
            for (std::size_t p = 0; p < params.size(); ++p) params[p] -= h.learning_rate * grad[p];
            mlp_set_flat_params(model, params);
        }
    }
    return model;
}

// ------------------------------------------------------------ serialize --

json scaler_json(const Standardizer& s) { return json{{"mean", s.mean}, {"scale", s.scale}}; }

Standardizer scaler_from(const json& j) {
    return Standardizer{j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
}

struct ParamsToJson {
    json operator()(const ConstantModel& m) const { return {{"kind", "constant"}, {"score", m.score}}; }
    json operator()(const TreeModel& m) const { return {{"kind", "tree"}, {"tree", m.tree}}; }
    json operator()(const ForestModel& m) const { return {{"kind", "forest"}, {"trees", m.trees}}; }
    json operator()(const BoostModel& m) const {
        return {{"kind", "boost"}, {"base_score", m.base_score}, {"learning_rate", m.learning_rate}, {"trees", m.trees}};
    }
    json operator()(const LinearModel& m) const {
        return {{"kind", "linear"}, {"scaler", scaler_json(m.scaler)}, {"weights", m.weights}, {"bias", m.bias}};
    }
    json operator()(const KernelSvmModel& m) const {
        return {{"kind", "kernel_svm"}, {"support", m.support}, {"coef", m.coef}, {"rho", m.rho}, {"gamma", m.gamma}};
    }
    json operator()(const MlpModel& m) const {
        return {{"kind", "mlp"}, {"scaler", scaler_json(m.scaler)}, {"w1", m.w1}, {"b1", m.b1}, {"w2", m.w2},
                {"b2", m.b2},    {"w3", m.w3},                      {"b3", m.b3}};
    }
};

FittedParams params_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "constant") return ConstantModel{j.at("score").get<double>()};
    if (kind == "tree") return TreeModel{j.at("tree").get<Tree>()};
    if (kind == "forest") return ForestModel{j.at("trees").get<std::vector<Tree>>()};
    if (kind == "boost") {
        return BoostModel{j.at("base_score").get<double>(), j.at("learning_rate").get<double>(),
                          j.at("trees").get<std::vector<Tree>>()};
    }
    if (kind == "linear") {
        return LinearModel{scaler_from(j.at("scaler")), j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>()};
    }
    if (kind == "kernel_svm") {
        return KernelSvmModel{j.at("support").get<std::vector<std::vector<double>>>(), j.at("coef").get<std::vector<double>>(),
                              j.at("rho").get<double>(), j.at("gamma").get<double>()};
    }
    if (kind == "mlp") {
        MlpModel m;
        m.scaler = scaler_from(j.at("scaler"));
        m.w1 = j.at("w1").get<std::vector<double>>();
        m.b1 = j.at("b1").get<std::vector<double>>();
        m.w2 = j.at("w2").get<std::vector<double>>();
        m.b2 = j.at("b2").get<std::vector<double>>();
        m.w3 = j.at("w3").get<std::vector<double>>();
        m.b3 = j.at("b3").get<double>();
        return m;
    }
    throw Error(ErrorCode::MalformedFile, "unknown model kind '" + kind + "'");
}

}  // namespace

json resolve_hyper(Algo algo, const json& overrides) {
    json merged = default_hyper(algo);
    if (!overrides.is_null()) {
        if (!overrides.is_object()) throw Error(ErrorCode::InvalidConfig, "hyperparameters must be a JSON object");
        for (const auto& [key, value] : overrides.items()) {
            if (!merged.contains(key)) {
                throw Error(ErrorCode::InvalidConfig, "unknown hyperparameter '" + key + "' for " + std::string(to_string(algo)));
            }
            merged[key] = value;
        }
    }
    return merged;
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Standardizer Standardizer::fit(const Dataset& ds) {
    const std::size_t d = ds.arity();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    const double n = static_cast<double>(ds.size());
    for (const auto& row : ds.x) {
        for (std::size_t k = 0; k < d; ++k) s.mean[k] += row[k];
    }
    for (auto& m : s.mean) m /= n;
    std::vector<double> var(d, 0.0);
    for (const auto& row : ds.x) {
        for (std::size_t k = 0; k < d; ++k) var[k] += (row[k] - s.mean[k]) * (row[k] - s.mean[k]);
    }
    for (std::size_t k = 0; k < d; ++k) {
        const double sd = std::sqrt(var[k] / n);
        s.scale[k] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

Standardizer Standardizer::identity(std::size_t d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}; }

std::vector<double> Standardizer::apply(std::span<const double> x) const {
    std::vector<double> z(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - mean[k]) / scale[k];
    return z;
}

Dataset Standardizer::apply(const Dataset& ds) const {
    Dataset out;
    out.y = ds.y;
    out.x.reserve(ds.size());
    for (const auto& row : ds.x) out.x.push_back(apply(std::span<const double>(row)));
    return out;
}

double BoostModel::raw(std::span<const double> x) const {
    double s = base_score;
    for (const auto& t : trees) s += learning_rate * t.predict(x);
    return s;
}

double LinearModel::margin(std::span<const double> x) const {
    return dot(weights, scaler.apply(x)) + bias;
}

double KernelSvmModel::decision(std::span<const double> x) const {
    double s = -rho;
    for (std::size_t i = 0; i < support.size(); ++i) {
        double dist = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) dist += (support[i][k] - x[k]) * (support[i][k] - x[k]);
        s += coef[i] * std::exp(-gamma * dist);
    }
    return s;
}

double MlpModel::forward(std::span<const double> z) const {
    MlpActivations act;
    mlp_pass(*this, z, act);
    constexpr double kEdge = 0x1.0p-53;
    return std::clamp(sigmoid(act.a3), kEdge, 1.0 - kEdge);
}

CamModel::CamModel(Algo algo, json hyper, std::size_t arity, std::uint64_t seed, FittedParams params)
    : algo_(algo), hyper_(std::move(hyper)), arity_(arity), seed_(seed), params_(std::move(params)), trained_(true) {}

CamModel CamModel::constant(Algo algo, std::size_t arity, double score) {
    return CamModel(algo, resolve_hyper(algo), arity, 0, ConstantModel{score});
}

double CamModel::predict_proba(std::span<const double> x) const {
    if (!trained_) throw Error(ErrorCode::UntrainedModel, "model has not been trained");
    check_arity(arity_, x.size());
    struct Visitor {
        std::span<const double> x;
        double operator()(const ConstantModel& m) const { return m.score; }
        double operator()(const TreeModel& m) const { return m.tree.predict(x); }
        double operator()(const ForestModel& m) const {
            double votes = 0.0;
            for (const auto& t : m.trees) votes += t.predict(x);
            return votes / static_cast<double>(m.trees.size());
        }
        double operator()(const BoostModel& m) const { return sigmoid(m.raw(x)); }
        double operator()(const LinearModel& m) const { return sigmoid(m.margin(x)); }
        double operator()(const KernelSvmModel& m) const { return sigmoid(m.decision(x)); }
        double operator()(const MlpModel& m) const { return m.forward(m.scaler.apply(x)); }
    };
    return std::visit(Visitor{x}, params_);
}

int CamModel::predict(std::span<const double> x) const { return predict_proba(x) >= 0.5 ? 1 : 0; }

json CamModel::to_json() const {
    if (!trained_) throw Error(ErrorCode::UntrainedModel, "cannot serialize an untrained model");
    return json{{"algo", to_string(algo_)},
                {"hyper", hyper_},
                {"arity", arity_},
                {"seed", seed_},
                {"params", std::visit(ParamsToJson{}, params_)}};
}

CamModel CamModel::from_json(const json& j) {
    try {
        return CamModel(algo_from_string(j.at("algo").get<std::string>()), j.at("hyper"), j.at("arity").get<std::size_t>(),
                        j.at("seed").get<std::uint64_t>(), params_from_json(j.at("params")));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedFile, std::string("malformed model: ") + e.what());
    }
}

CamModel fit(Algo algo, const Dataset& ds, const json& hyper, std::uint64_t seed) {
    validate(ds);
    const json resolved = resolve_hyper(algo, hyper);
    const std::size_t d = ds.arity();
    const auto positives = static_cast<std::size_t>(std::count(ds.y.begin(), ds.y.end(), 1));
    const bool one_class = positives == 0 || positives == ds.size();
    if (one_class && algo != Algo::dt) {
        return CamModel(algo, resolved, d, seed, ConstantModel{positives == 0 ? 0.0 : 1.0});
    }
    try {
        switch (algo) {
            case Algo::dt: return CamModel(algo, resolved, d, seed, fit_dt(ds, resolved.get<DtHyper>()));
            case Algo::rf: return CamModel(algo, resolved, d, seed, fit_rf(ds, resolved.get<RfHyper>(), seed));
            case Algo::gbt: return CamModel(algo, resolved, d, seed, fit_gbt(ds, resolved.get<GbtHyper>()));
            case Algo::lr: return CamModel(algo, resolved, d, seed, fit_lr(ds, resolved.get<LrHyper>()));
            case Algo::svm_linear: return CamModel(algo, resolved, d, seed, fit_svm_linear(ds, resolved.get<SvmLinearHyper>()));
            case Algo::svm_rbf: return CamModel(algo, resolved, d, seed, fit_svm_rbf(ds, resolved.get<SvmRbfHyper>()));
            case Algo::mlp: return CamModel(algo, resolved, d, seed, fit_mlp(ds, resolved.get<MlpHyper>(), seed));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("bad hyperparameter: ") + e.what());
    }
    throw Error(ErrorCode::InvalidConfig, "unhandled algorithm");
}

std::vector<int> predict_all(const CamModel& model, const Dataset& ds) {
    std::vector<int> out;
    out.reserve(ds.size());
    for (const auto& row : ds.x) out.push_back(model.predict(row));
    return out;
}

void save_model(const CamModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << model.to_json().dump() << '\n';
}

CamModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedFile, path.string() + " is not valid JSON");
    return CamModel::from_json(j);
}

double logistic_objective(const LinearModel& model, const Dataset& ds, double l2, std::vector<double>* grad) {
    return logistic_objective_z(model.weights, model.bias, model.scaler.apply(ds), l2, grad);
}

double logistic_loss_raw(std::span<const double> raw, std::span<const int> y, std::vector<double>* grad,
                         std::vector<double>* hess) {
    if (raw.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "raw scores and labels differ in length");
    if (grad) grad->resize(raw.size());
    if (hess) hess->resize(raw.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        loss += bce_from_logit(raw[i], y[i]);
        const double p = sigmoid(raw[i]);
        if (grad) (*grad)[i] = p - y[i];
        if (hess) (*hess)[i] = p * (1.0 - p);
    }
    return loss;
}

double mlp_objective(const MlpModel& model, const Dataset& ds, std::vector<double>* grad) {
    const std::size_t d = ds.arity();
    std::vector<double> local(mlp_param_count(d), 0.0);
    const double scale = 1.0 / static_cast<double>(ds.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        loss += mlp_accumulate(model, model.scaler.apply(std::span<const double>(ds.x[i])), ds.y[i], scale, local);
    }
    if (grad) *grad = std::move(local);
    return loss * scale;
}

std::vector<double> mlp_flat_params(const MlpModel& m) {
    std::vector<double> p;
    p.reserve(m.w1.size() + m.b1.size() + m.w2.size() + m.b2.size() + m.w3.size() + 1);
    for (const auto* v : {&m.w1, &m.b1, &m.w2, &m.b2, &m.w3}) p.insert(p.end(), v->begin(), v->end());
    p.push_back(m.b3);
    return p;
}

void mlp_set_flat_params(MlpModel& m, std::span<const double> params) {
    std::size_t off = 0;
    for (auto* v : {&m.w1, &m.b1, &m.w2, &m.b2, &m.w3}) {
        if (off + v->size() > params.size()) throw Error(ErrorCode::LengthMismatch, "flat parameter vector too short");
        std::copy(params.begin() + static_cast<std::ptrdiff_t>(off), params.begin() + static_cast<std::ptrdiff_t>(off + v->size()),
                  v->begin());
        off += v->size();
    }
    if (off + 1 != params.size()) throw Error(ErrorCode::LengthMismatch, "flat parameter vector has wrong length");
    m.b3 = params[off];
}

MlpModel mlp_init(std::size_t d, std::uint64_t seed) {
    MlpModel m;
    m.scaler = Standardizer::identity(d);
    Rng rng(derive_seed({seed, 0x1417ULL}));
    auto he = [&](std::vector<double>& w, std::size_t rows, std::size_t fan_in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        w.resize(rows * fan_in);
        for (auto& v : w) v = (2.0 * rng.uniform() - 1.0) * limit;
    };
    he(m.w1, H1, d);
    he(m.w2, H2, H1);
    he(m.w3, 1, H2);
    m.b1.assign(H1, 0.0);
    m.b2.assign(H2, 0.0);
    m.b3 = 0.0;
    return m;
}

}  // namespace mele
