// mele: command-line front end for the multi-agent embodied QA lab.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mele/error.hpp"
#include "mele/harness.hpp"
#include "mele/rng.hpp"

using namespace mele;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string config;
    std::string out;
};

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedFile, path.string() + " is not valid JSON");
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
}

fs::path require_out(const Globals& g, const std::string& fallback) { return g.out.empty() ? fs::path(fallback) : fs::path(g.out); }

ExperimentConfig experiment_config(const Globals& g) {
    ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
    validate(cfg);
    return cfg;
}

HeuristicParams heuristic_params(const Globals& g) {
    if (g.config.empty()) return {};
    json j = read_json(g.config);
    return j.contains("heuristic") ? j.at("heuristic").get<HeuristicParams>() : HeuristicParams{};
}

ChatConfig chat_config(const Globals& g) {
    if (g.config.empty()) return {};
    json j = read_json(g.config);
    return j.contains("chat") ? j.at("chat").get<ChatConfig>() : ChatConfig{};
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent embodied question answering lab"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Seed for stochastic stages");
    app.add_option("--config", g.config, "JSON configuration file");
    app.add_option("--out", g.out, "Output file or directory");

    // gen-house
    auto* gen = app.add_subcommand("gen-house", "Generate a synthetic house graph");
    int rooms = 0;
    gen->add_option("--rooms", rooms, "Override the number of rooms");
    gen->callback([&] {
        GenConfig cfg;
        if (!g.config.empty()) {
            json j = read_json(g.config);
            cfg = (j.contains("house") ? j.at("house") : j).get<GenConfig>();
        }
        if (rooms > 0) cfg.num_rooms = rooms;
        cfg.seed = g.seed;
        validate(cfg);
        const HouseGraph house = generate_house(cfg);
        const fs::path out = require_out(g, "house.json");
        save_house(house, out);
        std::cout << "wrote " << out.string() << ": " << house.num_rooms() << " rooms, " << house.num_nodes() << " nodes, "
                  << house.placement_count() << " placements\n";
    });

    // explore
    auto* exp = app.add_subcommand("explore", "Explore a house with one agent and save its observations");
    std::string house_path, policy = "greedy_novelty", script;
    int start = 0, steps = 10;
    double p_detect = 1.0, p_false = 0.0;
    std::vector<std::string> only_rooms;
    exp->add_option("--house", house_path, "House JSON")->required();
    exp->add_option("--policy", policy, "random_walk | greedy_novelty | llm_guided | scripted");
    exp->add_option("--start", start, "Start node");
    exp->add_option("--steps", steps, "Number of moves");
    exp->add_option("--script", script, "Comma-separated node list for the scripted policy");
    exp->add_option("--p-detect", p_detect, "Detection probability");
    exp->add_option("--p-false", p_false, "False-positive probability");
    exp->add_option("--rooms", only_rooms, "Observe these rooms exhaustively instead of exploring");
    exp->callback([&] {
        const HouseGraph house = load_house(house_path);
        NoiseParams noise{p_detect, p_false, g.seed};
        validate(noise);
        ObservationDict obs;
        std::vector<Transcript> log;
        if (!only_rooms.empty()) {
            std::vector<RoomId> ids;
            for (const auto& r : only_rooms) ids.push_back(house.room_id(r));
            obs = observe_rooms(house, ids, noise);
        } else {
            Policy p;
            p.kind = policy_kind_from_string(policy);
            p.seed = g.seed;
            std::stringstream ss(script);
            for (std::string tok; std::getline(ss, tok, ',');) {
                if (!tok.empty()) p.script.push_back(NodeId{std::stoi(tok)});
            }
            std::unique_ptr<ChatClient> chat;
            if (p.kind == PolicyKind::llm_guided) chat = std::make_unique<HttpChatClient>(chat_config(g));
            obs = explore_run(house, NodeId{start}, p, steps, noise, chat.get(), &log);
        }
        const fs::path out = require_out(g, "observations.json");
        save_observations(house, obs, out);
        if (!log.empty()) write_text(fs::path(out).replace_extension(".transcripts.json"), json(log).dump(2) + "\n");
        std::cout << "wrote " << out.string() << ": " << obs.room_items.size() << " rooms observed\n";
    });

    // gen-queries
    auto* gq = app.add_subcommand("gen-queries", "Generate balanced queries and a train/test split");
    double test_fraction = 0.10;
    gq->add_option("--house", house_path, "House JSON")->required();
    gq->add_option("--test-fraction", test_fraction, "Fraction of queries held out");
    gq->callback([&] {
        const HouseGraph house = load_house(house_path);
        QuerySet qs = train_test_split(generate_queries(house, g.seed), test_fraction, g.seed);
        print_warnings(qs.warnings);
        const fs::path out = require_out(g, "queries.jsonl");
        save_queries(house, qs, out);
        save_split(*qs.split, fs::path(out).replace_extension(".split.json"));
        std::cout << "wrote " << out.string() << ": " << qs.size() << " queries (" << qs.split->test.size() << " test)\n";
    });

    // answer
    auto* ans = app.add_subcommand("answer", "Answer every query once per agent");
    std::string queries_path, backend = "heuristic";
    std::vector<std::string> obs_paths;
    std::vector<int> malicious;
    ans->add_option("--house", house_path, "House JSON")->required();
    ans->add_option("--queries", queries_path, "Queries JSONL")->required();
    ans->add_option("--obs", obs_paths, "Observation file per agent, in agent order")->required();
    ans->add_option("--backend", backend, "heuristic | llm");
    ans->add_option("--malicious", malicious, "Agent ids whose answers are inverted");
    ans->callback([&] {
        const HouseGraph house = load_house(house_path);
        const QuerySet qs = load_queries(house, queries_path);
        HeuristicParams hp = heuristic_params(g);
        hp.seed = g.seed;
        validate(hp);
        std::unique_ptr<ChatClient> chat;
        if (backend == "llm") chat = std::make_unique<HttpChatClient>(chat_config(g));
        else if (backend != "heuristic") throw Error(ErrorCode::InvalidConfig, "unknown backend '" + backend + "'");
        std::vector<AnswerRecord> records;
        const fs::path out = require_out(g, "answers.jsonl");
        for (std::size_t k = 0; k < obs_paths.size(); ++k) {
            ObservationDict obs = load_observations(house, obs_paths[k]);
            std::unique_ptr<AnswerBackend> b;
            if (chat) b = std::make_unique<LlmBackend>(house, obs, *chat);
            else b = std::make_unique<HeuristicBackend>(house, obs, hp, static_cast<int>(k));
            if (std::find(malicious.begin(), malicious.end(), static_cast<int>(k)) != malicious.end()) {
                b = std::make_unique<MaliciousBackend>(std::move(b));
            }
            records.push_back(answer_all(*b, qs, static_cast<int>(k)));
            if (b->records_transcripts()) {
                save_transcripts(records.back(), fs::path(out).replace_extension(".agent" + std::to_string(k) + ".transcripts.json"));
            }
        }
        save_answers(records, out);
        std::cout << "wrote " << out.string() << ": " << records.size() << " agents x " << qs.size() << " queries\n";
    });

    // aggregate
    auto* agg = app.add_subcommand("aggregate", "Aggregate answers on the test split with one method");
    std::string answers_path, split_path, method = "mv", algo = "dt", model_out;
    double stubbornness = 0.5;
    int rounds = 2;
    agg->add_option("--house", house_path, "House JSON")->required();
    agg->add_option("--queries", queries_path, "Queries JSONL")->required();
    agg->add_option("--split", split_path, "Split sidecar (default: <queries>.split.json)");
    agg->add_option("--answers", answers_path, "Answers JSONL")->required();
    agg->add_option("--method", method, "mv | debate | cam");
    agg->add_option("--algo", algo, "CAM algorithm");
    agg->add_option("--stubbornness", stubbornness, "Simulated debate stubbornness");
    agg->add_option("--rounds", rounds, "Debate rounds");
    agg->add_option("--model-out", model_out, "Where to save the trained CAM");
    agg->callback([&] {
        const HouseGraph house = load_house(house_path);
        QuerySet qs = load_queries(house, queries_path);
        if (split_path.empty()) split_path = fs::path(queries_path).replace_extension(".split.json").string();
        const Split split = load_split(split_path, qs.size());
        const auto per_query = answers_by_query(load_answers(answers_path));
        if (per_query.size() != qs.size()) throw Error(ErrorCode::LengthMismatch, "answers do not cover the queries");

        std::vector<int> preds, labels;
        std::vector<json> debates;
        if (method == "cam") {
            const Algo a = algo_from_string(algo);
            CamModel model = fit(a, cam_dataset(qs, per_query, split.train), json::object(), g.seed);
            for (std::size_t i : split.test) preds.push_back(cam_infer(model, qs.queries[i], per_query[i]));
            if (!model_out.empty()) save_model(model, model_out);
        } else {
            for (std::size_t i : split.test) {
                if (method == "mv") {
                    preds.push_back(majority_vote(per_query[i]));
                } else if (method == "debate") {
                    DebateState s = make_debate(per_query[i], stubbornness);
                    const int out = run_debate(s, qs.queries[i], rounds, derive_seed({g.seed, i, 0xdebULL}));
                    preds.push_back(out);
                    debates.push_back(debate_to_json(house, qs.queries[i], s, out));
                } else {
                    throw Error(ErrorCode::InvalidConfig, "unknown method '" + method + "'");
                }
            }
        }
        std::ostringstream csv;
        csv << "query_index,prediction,label\n";
        for (std::size_t t = 0; t < split.test.size(); ++t) {
            labels.push_back(qs.queries[split.test[t]].label);
            csv << split.test[t] << ',' << preds[t] << ',' << labels.back() << '\n';
        }
        const fs::path out = require_out(g, "predictions.csv");
        write_text(out, csv.str());
        if (!debates.empty()) save_debates(debates, fs::path(out).replace_extension(".debates.json"));
        std::cout << method << (method == "cam" ? "_" + algo : "") << " accuracy " << accuracy(preds, labels) << " on "
                  << preds.size() << " test queries\n";
    });

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Run the full experiment over all configured seeds");
    bool serial = false, compare_single = false;
    ev->add_flag("--serial", serial, "Run seeds one after another");
    ev->add_flag("--compare-single", compare_single, "Also run with only the first agent");
    ev->callback([&] {
        ExperimentConfig cfg = experiment_config(g);
        if (serial) cfg.parallel = false;
        const fs::path out = g.out.empty() ? fs::path(cfg.output_dir) : fs::path(g.out);
        const Report r = run_experiment(cfg);
        write_report(r, out);
        print_warnings(r.warnings);
        std::cout << "run " << r.run_id << " (config " << r.config_hash << ")\n" << summary_table(r);
        if (compare_single) {
            const Report single = run_experiment(single_agent(cfg));
            write_report(single, out / "single_agent");
            std::cout << "\nsingle agent\n" << summary_table(single);
        }
    });

    // pfi
    auto* pf = app.add_subcommand("pfi", "Permutation feature importance of a CAM");
    std::string room_name;
    int repeats = 5;
    pf->add_option("--house", house_path, "House JSON")->required();
    pf->add_option("--queries", queries_path, "Queries JSONL")->required();
    pf->add_option("--split", split_path, "Split sidecar (default: <queries>.split.json)");
    pf->add_option("--answers", answers_path, "Answers JSONL")->required();
    pf->add_option("--algo", algo, "CAM algorithm (whole-house mode)");
    pf->add_option("--room", room_name, "Run the per-room DT experiment for this room");
    pf->add_option("--repeats", repeats, "Permutations per feature");
    pf->callback([&] {
        const HouseGraph house = load_house(house_path);
        QuerySet qs = load_queries(house, queries_path);
        const auto per_query = answers_by_query(load_answers(answers_path));
        const fs::path out = g.out.empty() ? fs::path("pfi") : fs::path(g.out);
        fs::create_directories(out);
        PfiReport report;
        std::optional<CamModel> tree;
        std::vector<std::string> names;
        if (!room_name.empty()) {
            RoomPfiParams params;
            params.repeats = repeats;
            params.seed = g.seed;
            const RoomPfiResult res = per_room_pfi_experiment(qs, per_query, house.room_id(room_name), params);
            report = res.report;
            tree = res.first_model;
            for (const auto& f : report.features) names.push_back(f.feature);
            for (std::size_t k = 0; k < res.flagged.size(); ++k) {
                if (res.flagged[k]) {
                    std::cout << "agent_" << k << " answers one class " << res.majority_share[k] * 100.0
                              << "% of the time in " << room_name << '\n';
                }
            }
        } else {
            if (split_path.empty()) split_path = fs::path(queries_path).replace_extension(".split.json").string();
            const Split split = load_split(split_path, qs.size());
            const Algo a = algo_from_string(algo);
            CamModel model = fit(a, cam_dataset(qs, per_query, split.train), json::object(), g.seed);
            const Dataset val = cam_dataset(qs, per_query, split.test);
            names = cam_feature_names(val.arity() - 2);
            report = pfi_all(model, val, names, repeats, g.seed);
            if (a == Algo::dt) tree = model;
        }
        save_pfi_csv(report, out / "pfi.csv");
        if (tree) write_text(out / "tree.dot", tree_to_dot(*tree, names));
        std::cout << "base accuracy " << report.base_accuracy << '\n';
        for (const auto& f : report.features) std::cout << f.feature << ' ' << f.mean << " +- " << f.std << '\n';
    });

    // report
    auto* rep = app.add_subcommand("report", "Re-emit tables from a saved report.json");
    std::string report_path;
    rep->add_option("--in", report_path, "report.json")->required();
    rep->callback([&] {
        const json j = read_json(report_path);
        std::cout << "run " << j.at("run_id").get<std::string>() << " (config " << j.at("config_hash").get<std::string>() << ")\n";
        std::cout << "| method | mean | std | trials |\n|---|---|---|---|\n";
        for (const auto& s : j.at("summary")) {
            std::cout << "| " << s.at("method").get<std::string>() << " | " << s.at("mean").get<double>() << " | "
                      << s.at("std").get<double>() << " | " << s.at("completed").get<std::size_t>() << " |\n";
        }
        for (const auto& w : j.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << '\n';
    });

    // ablate-malicious
    auto* abl = app.add_subcommand("ablate-malicious", "Compare a run against the same run with one malicious agent");
    int agent = 0;
    abl->add_option("--agent", agent, "Agent turned malicious");
    abl->callback([&] {
        const ExperimentConfig cfg = experiment_config(g);
        const fs::path out = g.out.empty() ? fs::path(cfg.output_dir) / "ablation" : fs::path(g.out);
        const Report base = run_experiment(cfg);
        const Report bad = run_experiment(with_malicious(cfg, static_cast<std::size_t>(agent)));
        write_report(base, out / "baseline");
        write_report(bad, out / "malicious");
        std::ostringstream csv;
        csv << "method,baseline,malicious,delta\n";
        std::cout << "| method | baseline | malicious | delta |\n|---|---|---|---|\n";
        for (const auto& s : base.summary) {
            const Summary* m = bad.find(s.method);
            if (!m) continue;
            csv << s.method << ',' << s.mean << ',' << m->mean << ',' << m->mean - s.mean << '\n';
            std::cout << "| " << s.method << " | " << s.mean << " | " << m->mean << " | " << m->mean - s.mean << " |\n";
        }
        write_text(out / "ablation.csv", csv.str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
