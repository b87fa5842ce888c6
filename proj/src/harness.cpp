#include "mele/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "mele/error.hpp"
#include "mele/rng.hpp"

namespace mele {

using nlohmann::json;

namespace {

std::string_view to_string(BackendKind b) { return b == BackendKind::heuristic ? "heuristic" : "llm"; }

BackendKind backend_from_string(const std::string& s) {
    if (s == "heuristic") return BackendKind::heuristic;
    if (s == "llm") return BackendKind::llm;
    throw Error(ErrorCode::InvalidConfig, "unknown answer backend '" + s + "'");
}

json agent_to_json(const AgentSpec& a) {
    json j{{"policy", a.policy},
           {"rooms", a.rooms},
           {"backend", to_string(a.backend)},
           {"malicious", a.malicious}};
    j["start"] = a.start ? json(*a.start) : json(nullptr);
    return j;
}

AgentSpec agent_from_json(const json& j) {
    static const std::set<std::string> known = {"policy", "start", "rooms", "backend", "malicious"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw Error(ErrorCode::InvalidConfig, "unknown agent key '" + key + "'");
    }
    AgentSpec a;
    if (j.contains("policy")) a.policy = j.at("policy").get<Policy>();
    if (j.contains("start") && !j.at("start").is_null()) a.start = j.at("start").get<int>();
    a.rooms = j.value("rooms", std::vector<std::string>{});
    a.backend = backend_from_string(j.value("backend", std::string("heuristic")));
    a.malicious = j.value("malicious", false);
    return a;
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

bool has_method(const ExperimentConfig& c, const std::string& m) {
    return std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end();
}

struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& what) : std::runtime_error(stage + ": " + what) {}
};

template <class F>
auto stage(const std::string& name, F&& body) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
    json agents = json::array();
    for (const auto& a : c.agents) agents.push_back(agent_to_json(a));
    json algos = json::array();
    for (Algo a : c.cam_algos) algos.push_back(to_string(a));
    json hyper = json::object();
    for (Algo a : c.cam_algos) {
        auto it = c.cam_hyper.find(std::string(to_string(a)));
        hyper[std::string(to_string(a))] = resolve_hyper(a, it == c.cam_hyper.end() ? json::object() : it->second);
    }
    j = json{{"house", c.house},
             {"house_file", c.house_file},
             {"house_per_seed", c.house_per_seed},
             {"agents", agents},
             {"steps", c.steps},
             {"coverage", c.coverage},
             {"noise", c.noise},
             {"heuristic", c.heuristic},
             {"chat", c.chat},
             {"methods", c.methods},
             {"cam_algos", algos},
             {"cam_hyper", hyper},
             {"mv_tie", c.mv_tie},
             {"debate_rounds", c.debate_rounds},
             {"stubbornness", c.stubbornness},
             {"debate_mode", c.debate_mode == DebateMode::simulated ? "simulated" : "llm"},
             {"test_fraction", c.test_fraction},
             {"seeds", c.seeds},
             {"parallel", c.parallel},
             {"output_dir", c.output_dir}};
}

void from_json(const json& j, ExperimentConfig& c) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "experiment config must be a JSON object");
    const json defaults = ExperimentConfig{};
    for (const auto& [key, _] : j.items()) {
        if (!defaults.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    }
    try {
        ExperimentConfig d;
        c = d;
        if (j.contains("house")) c.house = j.at("house").get<GenConfig>();
        c.house_file = j.value("house_file", d.house_file);
        c.house_per_seed = j.value("house_per_seed", d.house_per_seed);
        if (j.contains("agents")) {
            c.agents.clear();
            for (const auto& a : j.at("agents")) c.agents.push_back(agent_from_json(a));
        }
        c.steps = j.value("steps", d.steps);
        c.coverage = j.value("coverage", d.coverage);
        if (j.contains("noise")) c.noise = j.at("noise").get<NoiseParams>();
        if (j.contains("heuristic")) c.heuristic = j.at("heuristic").get<HeuristicParams>();
        if (j.contains("chat")) c.chat = j.at("chat").get<ChatConfig>();
        c.methods = j.value("methods", d.methods);
        if (j.contains("cam_algos")) {
            c.cam_algos.clear();
            for (const auto& a : j.at("cam_algos")) c.cam_algos.push_back(algo_from_string(a.get<std::string>()));
        }
        if (j.contains("cam_hyper")) {
            for (const auto& [key, value] : j.at("cam_hyper").items()) {
                resolve_hyper(algo_from_string(key), value);
                c.cam_hyper[key] = value;
            }
        }
        c.mv_tie = j.value("mv_tie", d.mv_tie);
        c.debate_rounds = j.value("debate_rounds", d.debate_rounds);
        c.stubbornness = j.value("stubbornness", d.stubbornness);
        const std::string mode = j.value("debate_mode", std::string("simulated"));
        if (mode != "simulated" && mode != "llm") throw Error(ErrorCode::InvalidConfig, "unknown debate_mode '" + mode + "'");
        c.debate_mode = mode == "llm" ? DebateMode::llm : DebateMode::simulated;
        c.test_fraction = j.value("test_fraction", d.test_fraction);
        c.seeds = j.value("seeds", d.seeds);
        c.parallel = j.value("parallel", d.parallel);
        c.output_dir = j.value("output_dir", d.output_dir);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("bad config value: ") + e.what());
    }
}

void validate(const ExperimentConfig& c) {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (c.agents.empty()) bad("at least one agent required");
    if (c.seeds.empty()) bad("seeds must be non-empty");
    if (c.methods.empty()) bad("at least one aggregation method required");
    for (const auto& m : c.methods) {
        if (m != "mv" && m != "debate" && m != "cam") bad("unknown method '" + m + "'");
    }
    if (has_method(c, "cam") && c.cam_algos.empty()) bad("method cam needs at least one algorithm");
    if (c.steps < 0) bad("steps must be >= 0");
    if (c.coverage != "explore" && c.coverage != "disjoint") bad("coverage must be 'explore' or 'disjoint'");
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) bad("test_fraction must lie in (0, 1)");
    if (c.mv_tie != 0 && c.mv_tie != 1) bad("mv_tie must be 0 or 1");
    if (c.debate_rounds < 0) bad("debate_rounds must be >= 0");
    if (!(c.stubbornness >= 0.0 && c.stubbornness <= 1.0)) bad("stubbornness must lie in [0, 1]");
    if (c.house_file.empty()) validate(c.house);
    validate(c.noise);
    validate(c.heuristic);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedFile, path.string() + " is not valid JSON");
    ExperimentConfig c = j.get<ExperimentConfig>();
    validate(c);
    return c;
}

std::vector<std::string> method_names(const ExperimentConfig& c) {
    std::vector<std::string> out;
    for (const auto& m : c.methods) {
        if (m == "cam") {
            for (Algo a : c.cam_algos) out.push_back("cam_" + std::string(to_string(a)));
        } else {
            out.push_back(m);
        }
    }
    return out;
}

json trial_to_json(const TrialReport& t) {
    json methods = json::array();
    for (const auto& m : t.methods) {
        methods.push_back({{"method", m.method}, {"accuracy", m.accuracy}, {"agreement", m.agreement}});
    }
    json j{{"seed", t.seed},
           {"ok", t.ok},
           {"num_queries", t.num_queries},
           {"num_train", t.num_train},
           {"num_test", t.num_test},
           {"agent_accuracy", t.agent_accuracy},
           {"methods", methods},
           {"warnings", t.warnings}};
    if (!t.ok) j["error"] = t.error;
    return j;
}

TrialReport run_trial(const ExperimentConfig& cfg, std::uint64_t seed, TrialArtifacts* artifacts, ChatClient* chat) {
    TrialReport report;
    report.seed = seed;
    const std::size_t k_count = cfg.agents.size();
    try {
        validate(cfg);
        std::unique_ptr<ChatClient> owned;
        const bool needs_chat = cfg.debate_mode == DebateMode::llm && has_method(cfg, "debate");
        bool any_llm = needs_chat;
        for (const auto& a : cfg.agents) {
            any_llm = any_llm || a.backend == BackendKind::llm || a.policy.kind == PolicyKind::llm_guided;
        }
        if (any_llm && !chat) {
            owned = std::make_unique<HttpChatClient>(cfg.chat);
            chat = owned.get();
        }

        HouseGraph house = stage("house", [&] {
            if (!cfg.house_file.empty()) return load_house(cfg.house_file);
            GenConfig g = cfg.house;
            if (cfg.house_per_seed) g.seed = derive_seed({cfg.house.seed, seed});
            return generate_house(g);
        });

        std::vector<ObservationDict> observations = stage("explore", [&] {
            std::vector<ObservationDict> out;
            for (std::size_t k = 0; k < k_count; ++k) {
                const AgentSpec& spec = cfg.agents[k];
                NoiseParams noise = cfg.noise;
                noise.seed = derive_seed({cfg.noise.seed, seed, k});
                if (cfg.coverage == "disjoint" || !spec.rooms.empty()) {
                    std::vector<RoomId> rooms;
                    if (!spec.rooms.empty()) {
                        for (const auto& name : spec.rooms) rooms.push_back(house.room_id(name));
                    } else {
                        for (std::size_t r = k; r < house.num_rooms(); r += k_count) rooms.push_back(RoomId{static_cast<int>(r)});
                    }
                    out.push_back(observe_rooms(house, rooms, noise));
                } else {
                    const int start = spec.start ? *spec.start
                                                 : static_cast<int>(Rng(derive_seed({seed, k, 0x57a7ULL})).index(house.num_nodes()));
                    Policy policy = spec.policy;
                    policy.seed = derive_seed({spec.policy.seed, seed, k});
                    out.push_back(explore_run(house, NodeId{start}, policy, cfg.steps, noise, chat));
                }
            }
            return out;
        });

        QuerySet qs = stage("queries", [&] { return generate_queries(house, derive_seed({seed, 0x9e7ULL})); });
        report.warnings = qs.warnings;
        qs = stage("split", [&] { return train_test_split(std::move(qs), cfg.test_fraction, seed); });
        const Split& split = *qs.split;
        report.num_queries = qs.size();
        report.num_train = split.train.size();
        report.num_test = split.test.size();

        std::vector<AnswerRecord> records = stage("answer", [&] {
            std::vector<AnswerRecord> out;
            for (std::size_t k = 0; k < k_count; ++k) {
                const AgentSpec& spec = cfg.agents[k];
                std::unique_ptr<AnswerBackend> backend;
                if (spec.backend == BackendKind::heuristic) {
                    HeuristicParams hp = cfg.heuristic;
                    hp.seed = derive_seed({cfg.heuristic.seed, seed});
                    backend = std::make_unique<HeuristicBackend>(house, observations[k], hp, static_cast<int>(k));
                } else {
                    backend = std::make_unique<LlmBackend>(house, observations[k], *chat);
                }
                if (spec.malicious) backend = std::make_unique<MaliciousBackend>(std::move(backend));
                out.push_back(answer_all(*backend, qs, static_cast<int>(k)));
            }
            return out;
        });
        const auto per_query = answers_by_query(records);

        std::vector<int> labels;
        for (std::size_t i : split.test) labels.push_back(qs.queries[i].label);
        std::vector<std::vector<int>> agent_test(k_count);
        for (std::size_t k = 0; k < k_count; ++k) {
            for (std::size_t i : split.test) agent_test[k].push_back(records[k].answers[i]);
            report.agent_accuracy.push_back(accuracy(agent_test[k], labels));
        }

        auto record = [&](const std::string& name, std::vector<int> preds) {
            MethodResult m;
            m.method = name;
            m.accuracy = accuracy(preds, labels);
            for (std::size_t k = 0; k < k_count; ++k) m.agreement.push_back(agreement(agent_test[k], preds));
            m.predictions = std::move(preds);
            report.methods.push_back(std::move(m));
        };

        std::vector<json> debates;
        std::map<std::string, CamModel> models;
        for (const auto& method : cfg.methods) {
            if (method == "mv") {
                record("mv", stage("mv", [&] {
                           std::vector<int> preds;
                           for (std::size_t i : split.test) preds.push_back(majority_vote(per_query[i], cfg.mv_tie));
                           return preds;
                       }));
            } else if (method == "debate") {
                record("debate", stage("debate", [&] {
                           DebateLlm llm;
                           if (cfg.debate_mode == DebateMode::llm) {
                               llm.house = &house;
                               for (std::size_t k = 0; k < k_count; ++k) {
                                   llm.observations.push_back(&observations[k]);
                                   llm.clients.push_back(chat);
                               }
                           }
                           std::vector<int> preds;
                           for (std::size_t i : split.test) {
                               DebateState state = make_debate(per_query[i], cfg.stubbornness, cfg.debate_mode);
                               const int out = run_debate(state, qs.queries[i], cfg.debate_rounds,
                                                          derive_seed({seed, i, 0xdebULL}),
                                                          cfg.debate_mode == DebateMode::llm ? &llm : nullptr, cfg.mv_tie);
                               preds.push_back(out);
                               if (artifacts) debates.push_back(debate_to_json(house, qs.queries[i], state, out));
                           }
                           return preds;
                       }));
            } else if (method == "cam") {
                const Dataset train = cam_dataset(qs, per_query, split.train);
                for (std::size_t a = 0; a < cfg.cam_algos.size(); ++a) {
                    const Algo algo = cfg.cam_algos[a];
                    const std::string name = "cam_" + std::string(to_string(algo));
                    record(name, stage(name, [&] {
                               auto it = cfg.cam_hyper.find(std::string(to_string(algo)));
                               const json hyper = it == cfg.cam_hyper.end() ? json::object() : it->second;
                               CamModel model = fit(algo, train, hyper, derive_seed({seed, static_cast<std::uint64_t>(algo)}));
                               std::vector<int> preds;
                               for (std::size_t i : split.test) preds.push_back(cam_infer(model, qs.queries[i], per_query[i]));
                               models.emplace(std::string(to_string(algo)), std::move(model));
                               return preds;
                           }));
                }
            }
        }

        if (artifacts) {
            artifacts->house = house;
            artifacts->observations = std::move(observations);
            artifacts->queries = std::move(qs);
            artifacts->answers = std::move(records);
            artifacts->models = std::move(models);
            artifacts->debates = std::move(debates);
        }
    } catch (const std::exception& e) {
        report.ok = false;
        report.error = e.what();
        report.methods.clear();
    }
    return report;
}

const Summary* Report::find(const std::string& method) const {
    for (const auto& s : summary) {
        if (s.method == method) return &s;
    }
    return nullptr;
}

Report run_experiment(const ExperimentConfig& cfg, ChatClient* chat) {
    validate(cfg);
    Report report;
    report.config = cfg;
    report.config_hash = content_hash(report.config);
    report.trials.resize(cfg.seeds.size());
    if (cfg.parallel && cfg.seeds.size() > 1) {
        std::vector<std::thread> pool;
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
            pool.emplace_back([&, s] { report.trials[s] = run_trial(cfg, cfg.seeds[s], nullptr, chat); });
        }
        for (auto& t : pool) t.join();
    } else {
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) report.trials[s] = run_trial(cfg, cfg.seeds[s], nullptr, chat);
    }

    for (const auto& t : report.trials) {
        if (!t.ok) report.warnings.push_back("seed " + std::to_string(t.seed) + " failed: " + t.error);
        for (const auto& w : t.warnings) report.warnings.push_back("seed " + std::to_string(t.seed) + ": " + w);
    }
    for (const auto& name : method_names(cfg)) {
        Summary s;
        s.method = name;
        std::vector<double> acc;
        std::vector<std::vector<double>> agree(cfg.agents.size());
        for (const auto& t : report.trials) {
            for (const auto& m : t.methods) {
                if (m.method != name) continue;
                acc.push_back(m.accuracy);
                for (std::size_t k = 0; k < m.agreement.size(); ++k) agree[k].push_back(m.agreement[k]);
            }
        }
        s.completed = acc.size();
        std::tie(s.mean, s.std) = mean_std(acc);
        for (const auto& a : agree) s.agreement_mean.push_back(mean_std(a).first);
        report.summary.push_back(std::move(s));
    }
    const std::size_t completed = static_cast<std::size_t>(
        std::count_if(report.trials.begin(), report.trials.end(), [](const TrialReport& t) { return t.ok; }));
    if (completed < report.trials.size()) {
        report.warnings.push_back("summary covers " + std::to_string(completed) + " of " +
                                  std::to_string(report.trials.size()) + " trials");
    }
    report.run_id = content_hash(json{{"config", report.config_hash}, {"results", results_csv(report)}}).substr(0, 12);
    return report;
}

ExperimentConfig with_malicious(ExperimentConfig cfg, std::size_t agent) {
    if (agent >= cfg.agents.size()) throw Error(ErrorCode::InvalidArgument, "no agent " + std::to_string(agent));
    cfg.agents[agent].malicious = true;
    return cfg;
}

ExperimentConfig single_agent(ExperimentConfig cfg) {
    cfg.agents.resize(1);
    return cfg;
}

json report_to_json(const Report& r) {
    json trials = json::array();
    for (const auto& t : r.trials) trials.push_back(trial_to_json(t));
    json summary = json::array();
    for (const auto& s : r.summary) {
        summary.push_back({{"method", s.method},
                           {"mean", s.mean},
                           {"std", s.std},
                           {"completed", s.completed},
                           {"agreement_mean", s.agreement_mean}});
    }
    return json{{"run_id", r.run_id},       {"config_hash", r.config_hash}, {"config", r.config},
                {"trials", trials},         {"summary", summary},           {"warnings", r.warnings}};
}

std::string results_csv(const Report& r) {
    std::ostringstream out;
    out << "seed,method,accuracy\n";
    std::vector<std::string> names;
    for (const auto& s : r.summary) names.push_back(s.method);
    for (const auto& t : r.trials) {
        for (const auto& name : names) {
            out << t.seed << ',' << name << ',';
            auto it = std::find_if(t.methods.begin(), t.methods.end(), [&](const MethodResult& m) { return m.method == name; });
            out << (it == t.methods.end() ? std::string("failed") : fmt6(it->accuracy)) << '\n';
        }
    }
    for (const auto& s : r.summary) out << "mean," << s.method << ',' << fmt6(s.mean) << '\n';
    for (const auto& s : r.summary) out << "std," << s.method << ',' << fmt6(s.std) << '\n';
    return out.str();
}

std::string agreement_csv(const Report& r) {
    std::ostringstream out;
    out << "seed,method,agent,agreement\n";
    for (const auto& t : r.trials) {
        for (const auto& m : t.methods) {
            for (std::size_t k = 0; k < m.agreement.size(); ++k) {
                out << t.seed << ',' << m.method << ',' << k << ',' << fmt6(m.agreement[k]) << '\n';
            }
        }
    }
    return out.str();
}

std::string summary_table(const Report& r) {
    std::ostringstream out;
    out << "| method | accuracy (mean) | accuracy (std) | trials |";
    const std::size_t k_count = r.summary.empty() ? 0 : r.summary.front().agreement_mean.size();
    for (std::size_t k = 0; k < k_count; ++k) out << " agreement agent_" << k << " |";
    out << "\n|---|---|---|---|";
    for (std::size_t k = 0; k < k_count; ++k) out << "---|";
    out << '\n';
    for (const auto& s : r.summary) {
        out << "| " << s.method << " | " << fmt6(s.mean) << " | " << fmt6(s.std) << " | " << s.completed << " |";
        for (double a : s.agreement_mean) out << ' ' << fmt6(a) << " |";
        out << '\n';
    }
    return out.str();
}

void write_report(const Report& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir / name);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / name).string());
        out << text;
    };
    write("report.json", report_to_json(r).dump(2) + "\n");
    write("results.csv", results_csv(r));
    write("agreement.csv", agreement_csv(r));
    write("summary.md", summary_table(r));
}

std::string content_hash(const json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

PriorTable benchmark_prior(const ObjectCatalog& catalog, const std::vector<std::string>& types, double home_p,
                           double other_p, std::uint64_t seed) {
    if (types.empty()) throw Error(ErrorCode::InvalidConfig, "benchmark prior needs room types");
    PriorTable prior;
    Rng rng(seed);
    for (const auto& [id, name] : catalog.entries()) {
        const std::size_t home = rng.index(types.size());
        for (std::size_t t = 0; t < types.size(); ++t) prior.set(types[t], name, t == home ? home_p : other_p);
    }
    return prior;
}

ExperimentConfig benchmark_config(int num_rooms) {
    const std::vector<std::string> types = {"kitchen",     "bedroom", "bathroom",     "living room",
                                            "dining room", "office",  "laundry room", "garage"};
    ExperimentConfig c;
    c.house.num_rooms = num_rooms;
    c.house.room_type_mix = {"hallway"};
    c.house.room_type_mix.insert(c.house.room_type_mix.end(), types.begin(), types.end());
    c.house.num_objects = 175;
    c.house.prior_table = benchmark_prior(ObjectCatalog::household_with_extras(c.house.num_objects), types, 0.7, 0.3, 7);
    c.heuristic.prior = c.house.prior_table;
    c.heuristic.threshold = 0.5;
    c.heuristic.flip_noise = 0.1;
    c.agents = std::vector<AgentSpec>(3);
    c.coverage = "disjoint";
    c.methods = {"mv", "debate", "cam"};
    c.cam_algos = {Algo::dt, Algo::rf, Algo::gbt};
    c.stubbornness = 0.5;
    c.output_dir = "out/benchmark_" + std::to_string(num_rooms);
    return c;
}

}  // namespace mele
