#include "mele/percept.hpp"

#include "mele/error.hpp"
#include "mele/rng.hpp"

namespace mele {

void to_json(nlohmann::json& j, const NoiseParams& p) {
    j = nlohmann::json{{"p_detect", p.p_detect}, {"p_false", p.p_false}, {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, NoiseParams& p) {
    NoiseParams d;
    p.p_detect = j.value("p_detect", d.p_detect);
    p.p_false = j.value("p_false", d.p_false);
    p.seed = j.value("seed", d.seed);
}

void validate(const NoiseParams& p) {
    if (!(p.p_detect >= 0.0 && p.p_detect <= 1.0) || !(p.p_false >= 0.0 && p.p_false <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "noise probabilities must lie in [0,1]");
    }
}

std::vector<Detection> detect_at_node(const HouseGraph& house, NodeId node, const NoiseParams& params, int step) {
    if (!house.has_node(node)) throw Error(ErrorCode::UnknownId, "unknown node " + std::to_string(node.value));
    validate(params);
    const RoomId room = house.room_of(node);
    const auto& placed = house.placements(room);
    Rng rng(derive_seed({params.seed, static_cast<std::uint64_t>(node.value), static_cast<std::uint64_t>(step)}));
    std::vector<Detection> out;
    for (const auto& [object, _] : house.catalog().entries()) {
        const double u = rng.uniform();
        const double p = placed.count(object) ? params.p_detect : params.p_false;
        if (u < p) out.push_back({room, object});
    }
    return out;
}

}  // namespace mele
