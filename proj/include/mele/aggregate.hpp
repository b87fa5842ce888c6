#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mele/answer.hpp"
#include "mele/learners.hpp"

namespace mele {

/// 1 on a strict majority of ones, 0 on a strict majority of zeros, `tie`
/// otherwise. Throws EmptyInput.
int majority_vote(std::span<const int> answers, int tie = 0);

/// [object id, room id, s_1..s_K]. Throws WrongArity when |answers| != k and
/// InvalidArgument for an answer outside {0, 1}.
std::vector<double> featurize(const Query& q, std::span<const int> answers, std::size_t k);
/// Same, after checking both ids against the house catalogs (UnknownId).
std::vector<double> featurize(const HouseGraph& house, const Query& q, std::span<const int> answers, std::size_t k);

/// CAM rows for the queries at `indices`; `per_query[i]` holds query i's K answers.
Dataset cam_dataset(const QuerySet& qs, const std::vector<std::vector<int>>& per_query,
                    const std::vector<std::size_t>& indices);

/// model.predict(featurize(q, answers)). Throws WrongArity on a K mismatch
/// and UntrainedModel.
int cam_infer(const CamModel& model, const Query& q, std::span<const int> answers);

enum class DebateMode { simulated, llm };

struct DebateTurn {
    int agent = 0;
    int round = 0;  ///< 1-based; rounds + 1 holds the final answers
    std::string utterance;
    int answer = 0;

    bool operator==(const DebateTurn&) const = default;
};

struct DebateState {
    DebateMode mode = DebateMode::simulated;
    std::vector<int> agent_ids;
    std::vector<int> initial;
    std::vector<int> answers;
    std::vector<double> stubbornness;
    std::vector<DebateTurn> transcript;
    /// Raw chat exchanges per agent turn (llm mode).
    std::vector<Transcript> exchanges;
};

/// Agents 0..K-1 with the given initial answers and a shared stubbornness.
DebateState make_debate(std::span<const int> initial, double stubbornness, DebateMode mode = DebateMode::simulated);

/// Evidence the llm mode needs: the house plus one observation dictionary
/// and chat client per agent, index-aligned with DebateState.
struct DebateLlm {
    const HouseGraph* house = nullptr;
    std::vector<const ObservationDict*> observations;
    std::vector<ChatClient*> clients;
};

/// Turn-based debate followed by a majority vote over the final answers.
///
/// Each round the agents speak in ascending order. In simulated mode an
/// agent first compares itself with its peers' latest answers: if their
/// majority vote (ties -> `tie`) disagrees it adopts that answer with probability
/// 1 - stubbornness, then utters its answer. In llm mode each turn sends the
/// debate system prompt with the history so far; after the last round each
/// agent is asked for a final answer (one reprompt, then AnswerUnparseable).
/// rounds == 0 returns the majority of the initial answers.
int run_debate(DebateState& state, const Query& q, int rounds, std::uint64_t seed, const DebateLlm* llm = nullptr,
               int tie = 0);

nlohmann::json debate_to_json(const HouseGraph& house, const Query& q, const DebateState& state, int output);
void save_debates(const std::vector<nlohmann::json>& debates, const std::filesystem::path& path);

}  // namespace mele
