#pragma once

#include <cstdint>
#include <vector>

#include "mele/env.hpp"

namespace mele {

/// Parametric stand-in for an open-vocabulary detector.
struct NoiseParams {
    double p_detect = 1.0;  ///< chance a placed object is seen
    double p_false = 0.0;   ///< chance each absent catalog object is hallucinated
    std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const NoiseParams& p);
void from_json(const nlohmann::json& j, NoiseParams& p);
void validate(const NoiseParams& p);

struct Detection {
    RoomId room;
    ObjectId object;

    friend auto operator<=>(const Detection&, const Detection&) = default;
};

/// Detections at `node` on timestep `step`, tagged with the node's room and
/// sorted by object id. The draw stream is keyed on (seed, node, step) only,
/// so the call order of other detections never changes the result.
std::vector<Detection> detect_at_node(const HouseGraph& house, NodeId node, const NoiseParams& params, int step);

}  // namespace mele
