#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mele/tree.hpp"

namespace mele {

enum class Algo { dt, rf, gbt, lr, svm_linear, svm_rbf, mlp };

std::string_view to_string(Algo algo);
Algo algo_from_string(std::string_view name);
const std::vector<Algo>& all_algos();

// Hyperparameters. Every field has a pinned default and can be overridden
// from JSON by name.

struct DtHyper {
    int max_depth = -1;
    int min_samples_split = 2;
};

struct RfHyper {
    int n_trees = 1000;
    int max_depth = -1;
    int min_samples_split = 2;
    int max_features = 0;  ///< 0 -> ceil(sqrt(d))
    int threads = 0;       ///< 0 -> hardware concurrency
};

struct GbtHyper {
    int rounds = 100;
    double learning_rate = 0.3;
    int max_depth = 6;
    double lambda = 1.0;
    double min_child_weight = 1.0;
};

struct LrHyper {
    double learning_rate = 0.5;
    double l2 = 1e-3;
    int max_iter = 20000;
    double tol = 1e-7;
};

struct SvmLinearHyper {
    double lambda = 1e-2;
    int iterations = 2000;
};

struct SvmRbfHyper {
    double c = 1.0;
    double gamma = 0.0;  ///< 0 -> 1 / (d * variance of all training entries)
    double tol = 1e-3;
    int max_iter = 100000;
};

struct MlpHyper {
    double learning_rate = 0.05;
    int epochs = 500;
    int batch_size = 1;
};

/// Defaults for `algo` with `overrides` applied; unknown keys throw InvalidConfig.
nlohmann::json resolve_hyper(Algo algo, const nlohmann::json& overrides = nlohmann::json::object());

/// Per-feature z-scoring fitted on training rows; constant columns keep scale 1.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const Dataset& ds);
    static Standardizer identity(std::size_t d);
    std::vector<double> apply(std::span<const double> x) const;
    Dataset apply(const Dataset& ds) const;

    bool operator==(const Standardizer&) const = default;
};

struct ConstantModel {
    double score = 0.0;
    bool operator==(const ConstantModel&) const = default;
};

struct TreeModel {
    Tree tree;
    bool operator==(const TreeModel&) const = default;
};

struct ForestModel {
    std::vector<Tree> trees;
    bool operator==(const ForestModel&) const = default;
};

struct BoostModel {
    double base_score = 0.0;  ///< raw log-odds
    double learning_rate = 0.3;
    std::vector<Tree> trees;

    /// Raw additive score before the logistic map.
    double raw(std::span<const double> x) const;
    bool operator==(const BoostModel&) const = default;
};

/// Logistic regression and linear SVM share this shape.
struct LinearModel {
    Standardizer scaler;
    std::vector<double> weights;
    double bias = 0.0;

    double margin(std::span<const double> x) const;
    bool operator==(const LinearModel&) const = default;
};

struct KernelSvmModel {
    std::vector<std::vector<double>> support;
    std::vector<double> coef;  ///< alpha_i * y_i
    double rho = 0.0;
    double gamma = 1.0;

    double decision(std::span<const double> x) const;
    bool operator==(const KernelSvmModel&) const = default;
};

/// d -> 16 -> 8 -> 1, ReLU hidden layers, sigmoid output.
struct MlpModel {
    static constexpr std::size_t kHidden1 = 16;
    static constexpr std::size_t kHidden2 = 8;

    Standardizer scaler;
    std::vector<double> w1, b1;  ///< kHidden1 x d, row-major
    std::vector<double> w2, b2;  ///< kHidden2 x kHidden1
    std::vector<double> w3;      ///< 1 x kHidden2
    double b3 = 0.0;

    /// Output probability for an already-standardized input.
    double forward(std::span<const double> z) const;
    bool operator==(const MlpModel&) const = default;
};

using FittedParams = std::variant<ConstantModel, TreeModel, ForestModel, BoostModel, LinearModel, KernelSvmModel, MlpModel>;

/// A trained answer-aggregation classifier over [object, room, s_1..s_K].
class CamModel {
public:
    CamModel() = default;
    CamModel(Algo algo, nlohmann::json hyper, std::size_t arity, std::uint64_t seed, FittedParams params);

    /// Constant model emitting `score` for every input.
    static CamModel constant(Algo algo, std::size_t arity, double score);

    bool trained() const { return trained_; }
    Algo algo() const { return algo_; }
    std::size_t arity() const { return arity_; }
    std::uint64_t seed() const { return seed_; }
    const nlohmann::json& hyper() const { return hyper_; }
    const FittedParams& params() const { return params_; }

    /// Score in [0, 1]. Throws UntrainedModel or WrongArity.
    double predict_proba(std::span<const double> x) const;
    /// 1 iff predict_proba(x) >= 0.5.
    int predict(std::span<const double> x) const;

    nlohmann::json to_json() const;
    static CamModel from_json(const nlohmann::json& j);

private:
    Algo algo_ = Algo::dt;
    nlohmann::json hyper_;
    std::size_t arity_ = 0;
    std::uint64_t seed_ = 0;
    FittedParams params_;
    bool trained_ = false;
};

/// Trains one classifier. Deterministic in (ds, hyper, seed). A dataset
/// with a single label yields a constant model of that label.
/// Throws EmptyInput, WrongArity or InvalidArgument (non-binary label).
CamModel fit(Algo algo, const Dataset& ds, const nlohmann::json& hyper = nlohmann::json::object(), std::uint64_t seed = 0);

std::vector<int> predict_all(const CamModel& model, const Dataset& ds);

void save_model(const CamModel& model, const std::filesystem::path& path);
CamModel load_model(const std::filesystem::path& path);

double sigmoid(double z);

// Loss functions with analytic gradients, exposed for finite-difference checks.

/// Mean binary cross-entropy of a logistic model plus (l2/2)||w||^2, with
/// inputs standardized by the model's scaler. `grad` receives
/// d/d[w..., b] when non-null.
double logistic_objective(const LinearModel& model, const Dataset& ds, double l2, std::vector<double>* grad);

/// Summed logistic loss of raw scores; per-row first and second
/// derivatives go to `grad` and `hess` when non-null.
double logistic_loss_raw(std::span<const double> raw, std::span<const int> y, std::vector<double>* grad,
                         std::vector<double>* hess);

/// Mean binary cross-entropy of the network; `grad` receives the gradient
/// with respect to mlp_flat_params order when non-null.
double mlp_objective(const MlpModel& model, const Dataset& ds, std::vector<double>* grad);
std::vector<double> mlp_flat_params(const MlpModel& model);
void mlp_set_flat_params(MlpModel& model, std::span<const double> params);
/// Seeded He-uniform initialization for input arity d.
MlpModel mlp_init(std::size_t d, std::uint64_t seed);

}  // namespace mele
