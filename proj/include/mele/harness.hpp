#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mele/aggregate.hpp"
#include "mele/analysis.hpp"
#include "mele/answer.hpp"
#include "mele/env.hpp"
#include "mele/explore.hpp"
#include "mele/learners.hpp"

namespace mele {

enum class BackendKind { heuristic, llm };

struct AgentSpec {
    Policy policy;
    /// Start node; unset draws one from the trial seed.
    std::optional<int> start;
    /// Room names observed exhaustively instead of exploring. Empty means
    /// explore, unless the experiment assigns disjoint coverage.
    std::vector<std::string> rooms;
    BackendKind backend = BackendKind::heuristic;
    bool malicious = false;
};

struct ExperimentConfig {
    GenConfig house;
    /// When set, the house is loaded from this file instead of generated.
    std::string house_file;
    /// Generated houses take a fresh seed per trial.
    bool house_per_seed = true;

    std::vector<AgentSpec> agents = std::vector<AgentSpec>(3);
    int steps = 10;
    /// "explore" or "disjoint" (room-restricted oracle views, round robin over rooms).
    std::string coverage = "explore";
    NoiseParams noise;
    HeuristicParams heuristic;
    ChatConfig chat;

    /// Subset of {"mv", "debate", "cam"}.
    std::vector<std::string> methods = {"mv", "debate", "cam"};
    std::vector<Algo> cam_algos = {Algo::dt, Algo::rf, Algo::gbt, Algo::lr, Algo::svm_linear, Algo::svm_rbf, Algo::mlp};
    std::map<std::string, nlohmann::json> cam_hyper;

    int mv_tie = 0;
    int debate_rounds = 2;
    double stubbornness = 0.5;
    DebateMode debate_mode = DebateMode::simulated;

    double test_fraction = 0.10;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    bool parallel = true;
    std::string output_dir = "out";
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
/// Throws InvalidConfig.
void validate(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Method column names in configured order: "mv", "debate", "cam_<algo>".
std::vector<std::string> method_names(const ExperimentConfig& c);

struct MethodResult {
    std::string method;
    double accuracy = 0.0;
    std::vector<double> agreement;  ///< per agent
    std::vector<int> predictions;   ///< per test query
};

struct TrialReport {
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;  ///< "<stage>: <message>" when !ok
    std::size_t num_queries = 0;
    std::size_t num_train = 0;
    std::size_t num_test = 0;
    std::vector<double> agent_accuracy;  ///< per agent, on the test split
    std::vector<MethodResult> methods;
    std::vector<std::string> warnings;
};

nlohmann::json trial_to_json(const TrialReport& t);

/// Everything a trial produced, for callers that need more than metrics.
struct TrialArtifacts {
    HouseGraph house;
    std::vector<ObservationDict> observations;
    QuerySet queries;
    std::vector<AnswerRecord> answers;
    std::map<std::string, CamModel> models;
    std::vector<nlohmann::json> debates;
};

/// House -> observations -> queries -> split -> answers -> aggregation on
/// the test split -> metrics. Stage errors are caught and recorded in the
/// report; `chat` overrides the HTTP client for llm backends and debate.
TrialReport run_trial(const ExperimentConfig& cfg, std::uint64_t seed, TrialArtifacts* artifacts = nullptr,
                      ChatClient* chat = nullptr);

struct Summary {
    std::string method;
    double mean = 0.0;
    double std = 0.0;
    std::size_t completed = 0;
    std::vector<double> agreement_mean;  ///< per agent
};

struct Report {
    nlohmann::json config;
    std::string config_hash;
    std::string run_id;
    std::vector<TrialReport> trials;
    std::vector<Summary> summary;
    std::vector<std::string> warnings;

    const Summary* find(const std::string& method) const;
};

/// One trial per seed, in parallel when cfg.parallel; the result does not
/// depend on the execution order.
Report run_experiment(const ExperimentConfig& cfg, ChatClient* chat = nullptr);

/// Re-runs `cfg` with agent `agent` marked malicious.
ExperimentConfig with_malicious(ExperimentConfig cfg, std::size_t agent);
/// Keeps only the first agent.
ExperimentConfig single_agent(ExperimentConfig cfg);

nlohmann::json report_to_json(const Report& r);
/// seed,method,accuracy, plus mean and std rows per method.
std::string results_csv(const Report& r);
/// seed,method,agent,agreement.
std::string agreement_csv(const Report& r);
/// Method x (mean, std) table in Markdown.
std::string summary_table(const Report& r);
/// Writes report.json, results.csv, agreement.csv and summary.md under `dir`.
void write_report(const Report& r, const std::filesystem::path& dir);

/// 16 hex digits of FNV-1a over the canonical dump of `j`.
std::string content_hash(const nlohmann::json& j);

/// Synthetic benchmark prior: every object has one home room type with
/// probability `home_p`, other non-hallway types `other_p`, hallway 0.
PriorTable benchmark_prior(const ObjectCatalog& catalog, const std::vector<std::string>& types, double home_p,
                           double other_p, std::uint64_t seed);

/// Three heuristic agents with disjoint room coverage over a generated
/// house of `num_rooms` rooms (a hallway first), flip noise 0.1.
ExperimentConfig benchmark_config(int num_rooms);

}  // namespace mele
