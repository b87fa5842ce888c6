#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mele/chat.hpp"
#include "mele/explore.hpp"
#include "mele/queries.hpp"

namespace mele {

struct HeuristicParams {
    PriorTable prior = PriorTable::household();
    double threshold = 0.5;
    double flip_noise = 0.1;
    std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const HeuristicParams& p);
void from_json(const nlohmann::json& j, HeuristicParams& p);
void validate(const HeuristicParams& p);

/// 1 when the object was observed in the room; otherwise 1 iff the room-type
/// prior reaches the threshold. The result is then flipped with probability
/// flip_noise, drawn from a stream keyed on (seed, agent, object, room).
int heuristic_answer(const HouseGraph& house, const ObservationDict& obs, const Query& q, const HeuristicParams& p,
                     int agent_id);

/// 1 - a.
constexpr int invert(int a) { return 1 - a; }

/// Asks the model one question with the fixed answering prompts. On an
/// unparseable reply, reprompts once, then throws AnswerUnparseable. The
/// full exchange is written to `transcript` when given.
int llm_answer(ChatClient& client, const HouseGraph& house, const ObservationDict& obs, const Query& q,
               Transcript* transcript = nullptr);

/// One agent's way of answering. Implementations hold their own evidence.
class AnswerBackend {
public:
    virtual ~AnswerBackend() = default;
    virtual int answer(const Query& q, Transcript* transcript) = 0;
    /// "heuristic", "llm" or "malicious(<inner>)".
    virtual std::string tag() const = 0;
    virtual bool records_transcripts() const { return false; }
};

class HeuristicBackend : public AnswerBackend {
public:
    HeuristicBackend(const HouseGraph& house, ObservationDict obs, HeuristicParams params, int agent_id);
    int answer(const Query& q, Transcript* transcript) override;
    std::string tag() const override { return "heuristic"; }

private:
    const HouseGraph& house_;
    ObservationDict obs_;
    HeuristicParams params_;
    int agent_id_;
};

class LlmBackend : public AnswerBackend {
public:
    LlmBackend(const HouseGraph& house, ObservationDict obs, ChatClient& client);
    int answer(const Query& q, Transcript* transcript) override;
    std::string tag() const override { return "llm"; }
    bool records_transcripts() const override { return true; }

private:
    const HouseGraph& house_;
    ObservationDict obs_;
    ChatClient& client_;
};

/// Inverts every answer of the wrapped backend.
class MaliciousBackend : public AnswerBackend {
public:
    explicit MaliciousBackend(std::unique_ptr<AnswerBackend> inner);
    int answer(const Query& q, Transcript* transcript) override;
    std::string tag() const override { return "malicious(" + inner_->tag() + ")"; }
    bool records_transcripts() const override { return inner_->records_transcripts(); }

private:
    std::unique_ptr<AnswerBackend> inner_;
};

struct AnswerRecord {
    int agent_id = 0;
    std::string backend;
    std::vector<int> answers;             ///< one per query index
    std::vector<Transcript> transcripts;  ///< llm backends only

    bool operator==(const AnswerRecord&) const = default;
};

/// Answers every query independently. A failure is rethrown with its query
/// index and no partial record escapes.
AnswerRecord answer_all(AnswerBackend& backend, const QuerySet& qs, int agent_id);

/// JSON Lines {"agent": id, "query_index": i, "answer": 0|1}.
void save_answers(const std::vector<AnswerRecord>& records, const std::filesystem::path& path);
/// Records keyed and ordered by agent id; each must cover indices 0..n-1.
std::vector<AnswerRecord> load_answers(const std::filesystem::path& path);
void save_transcripts(const AnswerRecord& record, const std::filesystem::path& path);

/// Column view: answers[agent][query] -> per-query rows answers[query][agent].
std::vector<std::vector<int>> answers_by_query(const std::vector<AnswerRecord>& records);

}  // namespace mele
