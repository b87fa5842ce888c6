#include "mele/answer.hpp"

#include <fstream>

#include "mele/error.hpp"
#include "mele/prompts.hpp"
#include "mele/rng.hpp"

namespace mele {

using nlohmann::json;

void to_json(json& j, const HeuristicParams& p) {
    j = json{{"prior", p.prior}, {"threshold", p.threshold}, {"flip_noise", p.flip_noise}, {"seed", p.seed}};
}

void from_json(const json& j, HeuristicParams& p) {
    HeuristicParams d;
    p.prior = j.contains("prior") ? j.at("prior").get<PriorTable>() : d.prior;
    p.threshold = j.value("threshold", d.threshold);
    p.flip_noise = j.value("flip_noise", d.flip_noise);
    p.seed = j.value("seed", d.seed);
}

void validate(const HeuristicParams& p) {
    if (!(p.threshold >= 0.0 && p.threshold <= 1.0) || !(p.flip_noise >= 0.0 && p.flip_noise <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "threshold and flip_noise must lie in [0,1]");
    }
}

int heuristic_answer(const HouseGraph& house, const ObservationDict& obs, const Query& q, const HeuristicParams& p,
                     int agent_id) {
    int a = 0;
    if (obs.saw(q.room, q.object)) {
        a = 1;
    } else {
        const double prior = p.prior.get(house.room(q.room).type, house.catalog().name(q.object));
        a = prior >= p.threshold ? 1 : 0;
    }
    if (p.flip_noise > 0.0) {
        Rng rng(derive_seed({p.seed, static_cast<std::uint64_t>(agent_id), static_cast<std::uint64_t>(q.object.value),
                             static_cast<std::uint64_t>(q.room.value)}));
        if (rng.bernoulli(p.flip_noise)) a = invert(a);
    }
    return a;
}

int llm_answer(ChatClient& client, const HouseGraph& house, const ObservationDict& obs, const Query& q,
               Transcript* transcript) {
    Transcript t{{"system", prompts::answer_system(observation_dictionary_text(house, obs))},
                 {"user", prompts::answer_user(house.catalog().name(q.object), house.room(q.room).name)}};
    auto finish = [&](std::optional<int> v) {
        if (transcript) *transcript = t;
        return v;
    };
    std::string reply = client.complete(t);
    t.push_back({"assistant", reply});
    if (auto v = parse_yes_no(reply)) return *finish(v);
    t.push_back({"user", std::string(prompts::kAnswerReprompt)});
    reply = client.complete(t);
    t.push_back({"assistant", reply});
    if (auto v = parse_yes_no(reply)) return *finish(v);
    finish(std::nullopt);
    throw Error(ErrorCode::AnswerUnparseable, "no YES/NO in reply after reprompt: \"" + reply + "\"");
}

HeuristicBackend::HeuristicBackend(const HouseGraph& house, ObservationDict obs, HeuristicParams params, int agent_id)
    : house_(house), obs_(std::move(obs)), params_(std::move(params)), agent_id_(agent_id) {
    validate(params_);
}

int HeuristicBackend::answer(const Query& q, Transcript*) { return heuristic_answer(house_, obs_, q, params_, agent_id_); }

LlmBackend::LlmBackend(const HouseGraph& house, ObservationDict obs, ChatClient& client)
    : house_(house), obs_(std::move(obs)), client_(client) {}

int LlmBackend::answer(const Query& q, Transcript* transcript) { return llm_answer(client_, house_, obs_, q, transcript); }

MaliciousBackend::MaliciousBackend(std::unique_ptr<AnswerBackend> inner) : inner_(std::move(inner)) {
    if (!inner_) throw Error(ErrorCode::InvalidArgument, "malicious wrapper needs an inner backend");
}

int MaliciousBackend::answer(const Query& q, Transcript* transcript) { return invert(inner_->answer(q, transcript)); }

AnswerRecord answer_all(AnswerBackend& backend, const QuerySet& qs, int agent_id) {
    AnswerRecord rec;
    rec.agent_id = agent_id;
    rec.backend = backend.tag();
    rec.answers.reserve(qs.size());
    for (std::size_t i = 0; i < qs.size(); ++i) {
        Transcript t;
        try {
            rec.answers.push_back(backend.answer(qs.queries[i], backend.records_transcripts() ? &t : nullptr));
        } catch (const Error& e) {
            throw Error(e.code(), "agent " + std::to_string(agent_id) + ", query " + std::to_string(i) + ": " + e.what());
        }
        if (backend.records_transcripts()) rec.transcripts.push_back(std::move(t));
    }
    return rec;
}

void save_answers(const std::vector<AnswerRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    for (const auto& rec : records) {
        for (std::size_t i = 0; i < rec.answers.size(); ++i) {
            out << json{{"agent", rec.agent_id}, {"query_index", i}, {"answer", rec.answers[i]}}.dump() << '\n';
        }
    }
}

std::vector<AnswerRecord> load_answers(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::map<int, std::map<std::size_t, int>> by_agent;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (j.is_discarded()) throw Error(ErrorCode::MalformedFile, where + ": not JSON");
        try {
            const int a = j.at("answer").get<int>();
            if (a != 0 && a != 1) throw Error(ErrorCode::MalformedFile, where + ": answer must be 0 or 1");
            by_agent[j.at("agent").get<int>()][j.at("query_index").get<std::size_t>()] = a;
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedFile, where + ": " + e.what());
        }
    }
    std::vector<AnswerRecord> out;
    for (const auto& [agent, answers] : by_agent) {
        AnswerRecord rec;
        rec.agent_id = agent;
        rec.backend = "file";
        std::size_t expect = 0;
        for (const auto& [idx, a] : answers) {
            if (idx != expect++) {
                throw Error(ErrorCode::MalformedFile, "agent " + std::to_string(agent) + " is missing query " + std::to_string(expect - 1));
            }
            rec.answers.push_back(a);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void save_transcripts(const AnswerRecord& record, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    json j = {{"agent", record.agent_id}, {"backend", record.backend}, {"transcripts", record.transcripts}};
    out << j.dump(2) << '\n';
}

std::vector<std::vector<int>> answers_by_query(const std::vector<AnswerRecord>& records) {
    if (records.empty()) return {};
    const std::size_t n = records.front().answers.size();
    std::vector<std::vector<int>> rows(n, std::vector<int>(records.size()));
    for (std::size_t k = 0; k < records.size(); ++k) {
        if (records[k].answers.size() != n) {
            throw Error(ErrorCode::LengthMismatch, "agents answered different numbers of queries");
        }
        for (std::size_t i = 0; i < n; ++i) rows[i][k] = records[k].answers[i];
    }
    return rows;
}

}  // namespace mele
