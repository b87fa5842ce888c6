#include "mele/aggregate.hpp"

#include <fstream>

#include "mele/error.hpp"
#include "mele/prompts.hpp"
#include "mele/rng.hpp"

namespace mele {

using nlohmann::json;

int majority_vote(std::span<const int> answers, int tie) {
    if (answers.empty()) throw Error(ErrorCode::EmptyInput, "majority vote over no answers");
    std::size_t ones = 0;
    for (int a : answers) ones += a == 1;
    const std::size_t zeros = answers.size() - ones;
    if (ones > zeros) return 1;
    if (zeros > ones) return 0;
    return tie;
}

std::vector<double> featurize(const Query& q, std::span<const int> answers, std::size_t k) {
    if (answers.size() != k) {
        throw Error(ErrorCode::WrongArity,
                    "expected " + std::to_string(k) + " answers, got " + std::to_string(answers.size()));
    }
    std::vector<double> x;
    x.reserve(2 + k);
    x.push_back(q.object.value);
    x.push_back(q.room.value);
    for (int a : answers) {
        if (a != 0 && a != 1) throw Error(ErrorCode::InvalidArgument, "answer " + std::to_string(a) + " is not 0/1");
        x.push_back(a);
    }
    return x;
}

std::vector<double> featurize(const HouseGraph& house, const Query& q, std::span<const int> answers, std::size_t k) {
    if (!house.catalog().contains(q.object)) {
        throw Error(ErrorCode::UnknownId, "object id " + std::to_string(q.object.value) + " not in catalog");
    }
    if (!house.has_room(q.room)) throw Error(ErrorCode::UnknownId, "room id " + std::to_string(q.room.value) + " not in house");
    return featurize(q, answers, k);
}

Dataset cam_dataset(const QuerySet& qs, const std::vector<std::vector<int>>& per_query,
                    const std::vector<std::size_t>& indices) {
    if (per_query.size() != qs.size()) throw Error(ErrorCode::LengthMismatch, "answers do not cover the query set");
    Dataset ds;
    for (std::size_t i : indices) {
        const auto& row = per_query.at(i);
        ds.add(featurize(qs.queries.at(i), row, row.size()), qs.queries[i].label);
    }
    return ds;
}

int cam_infer(const CamModel& model, const Query& q, std::span<const int> answers) {
    if (!model.trained()) throw Error(ErrorCode::UntrainedModel, "CAM model has not been trained");
    if (model.arity() < 2) throw Error(ErrorCode::WrongArity, "CAM model arity below 2");
    return model.predict(featurize(q, answers, model.arity() - 2));
}

DebateState make_debate(std::span<const int> initial, double stubbornness, DebateMode mode) {
    if (stubbornness < 0.0 || stubbornness > 1.0) throw Error(ErrorCode::InvalidConfig, "stubbornness outside [0, 1]");
    DebateState s;
    s.mode = mode;
    for (std::size_t k = 0; k < initial.size(); ++k) {
        if (initial[k] != 0 && initial[k] != 1) throw Error(ErrorCode::InvalidArgument, "initial answer is not 0/1");
        s.agent_ids.push_back(static_cast<int>(k));
    }
    s.initial.assign(initial.begin(), initial.end());
    s.answers = s.initial;
    s.stubbornness.assign(initial.size(), stubbornness);
    return s;
}

namespace {

const char* yes_no(int a) { return a ? "Yes" : "No"; }

void simulated_rounds(DebateState& s, int rounds, std::uint64_t seed, int tie) {
    Rng rng(seed);
    const std::size_t k_count = s.answers.size();
    for (int round = 1; round <= rounds; ++round) {
        for (std::size_t k = 0; k < k_count; ++k) {
            std::vector<int> peers;
            for (std::size_t j = 0; j < k_count; ++j) {
                if (j != k) peers.push_back(s.answers[j]);
            }
            const int peer = peers.empty() ? s.answers[k] : majority_vote(peers, tie);
            if (peer != s.answers[k] && rng.uniform() >= s.stubbornness[k]) s.answers[k] = peer;
            s.transcript.push_back({s.agent_ids[k], round, yes_no(s.answers[k]), s.answers[k]});
        }
    }
}

std::string history_text(const DebateState& s) {
    std::string out;
    for (const auto& t : s.transcript) {
        if (!out.empty()) out += '\n';
        out += "Agent " + std::to_string(t.agent) + ": " + t.utterance;
    }
    return out;
}

void llm_rounds(DebateState& s, const Query& q, int rounds, const DebateLlm& llm) {
    const std::size_t k_count = s.answers.size();
    if (!llm.house || llm.observations.size() != k_count || llm.clients.size() != k_count) {
        throw Error(ErrorCode::InvalidConfig, "llm debate needs a house, and one observation set and client per agent");
    }
    const HouseGraph& house = *llm.house;
    const std::string object = house.catalog().name(q.object);
    const std::string room = house.room(q.room).name;
    std::vector<std::string> obs_text;
    for (const auto* o : llm.observations) obs_text.push_back(observation_dictionary_text(house, *o));

    auto system = [&](std::size_t k) {
        return ChatMessage{"system", prompts::debate_system(s.agent_ids[k], obs_text[k], object, room, s.initial[k],
                                                            history_text(s))};
    };
    auto exchange = [&](std::size_t k, Transcript& t) {
        try {
            std::string reply = llm.clients[k]->complete(t);
            t.push_back({"assistant", reply});
            return reply;
        } catch (const Error& e) {
            s.exchanges.push_back(t);
            throw Error(e.code(), "debate agent " + std::to_string(s.agent_ids[k]) + ": " + e.what());
        }
    };

    for (int round = 1; round <= rounds; ++round) {
        for (std::size_t k = 0; k < k_count; ++k) {
            Transcript t{system(k), {"user", std::string(prompts::kDebateTurn)}};
            std::string reply = exchange(k, t);
            if (auto a = parse_yes_no(reply)) s.answers[k] = *a;
            s.exchanges.push_back(std::move(t));
            s.transcript.push_back({s.agent_ids[k], round, reply, s.answers[k]});
        }
    }
    std::vector<DebateTurn> finals;
    for (std::size_t k = 0; k < k_count; ++k) {
        Transcript t{system(k), {"user", std::string(prompts::kDebateFinal)}};
        std::string reply = exchange(k, t);
        auto a = parse_yes_no(reply);
        if (!a) {
            t.push_back({"user", std::string(prompts::kAnswerReprompt)});
            reply = exchange(k, t);
            a = parse_yes_no(reply);
        }
        s.exchanges.push_back(t);
        if (!a) {
            throw Error(ErrorCode::AnswerUnparseable,
                        "debate agent " + std::to_string(s.agent_ids[k]) + " gave no final YES/NO: " + reply);
        }
        s.answers[k] = *a;
        finals.push_back({s.agent_ids[k], rounds + 1, reply, *a});
    }
    s.transcript.insert(s.transcript.end(), finals.begin(), finals.end());
}

}  // namespace

int run_debate(DebateState& state, const Query& q, int rounds, std::uint64_t seed, const DebateLlm* llm, int tie) {
    if (rounds < 0) throw Error(ErrorCode::InvalidArgument, "negative debate rounds");
    if (state.answers.empty()) throw Error(ErrorCode::EmptyInput, "debate without agents");
    if (rounds > 0) {
        if (state.mode == DebateMode::simulated) {
            simulated_rounds(state, rounds, seed, tie);
        } else {
            if (!llm) throw Error(ErrorCode::InvalidConfig, "llm debate without chat clients");
            llm_rounds(state, q, rounds, *llm);
        }
    }
    return majority_vote(state.answers, tie);
}

json debate_to_json(const HouseGraph& house, const Query& q, const DebateState& state, int output) {
    json turns = json::array();
    for (const auto& t : state.transcript) {
        turns.push_back({{"agent", t.agent}, {"round", t.round}, {"utterance", t.utterance}, {"answer", t.answer}});
    }
    json j{{"object", house.catalog().name(q.object)},
           {"room", house.room(q.room).name},
           {"label", q.label},
           {"mode", state.mode == DebateMode::simulated ? "simulated" : "llm"},
           {"initial", state.initial},
           {"final", state.answers},
           {"output", output},
           {"turns", turns}};
    if (!state.exchanges.empty()) j["exchanges"] = state.exchanges;
    return j;
}

void save_debates(const std::vector<json>& debates, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << json(debates).dump(2) << '\n';
}

}  // namespace mele
