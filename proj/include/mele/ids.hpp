#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <ostream>

namespace mele {

/// Integer identifier tagged by the entity it names, so node, room and
/// object ids cannot be mixed up.
template <class Tag>
struct Id {
    int value = 0;

    constexpr Id() = default;
    constexpr explicit Id(int v) : value(v) {}

    constexpr std::size_t index() const { return static_cast<std::size_t>(value); }

    friend constexpr auto operator<=>(Id, Id) = default;
    friend std::ostream& operator<<(std::ostream& os, Id id) { return os << id.value; }
};

using NodeId = Id<struct NodeTag>;
using RoomId = Id<struct RoomTag>;
using ObjectId = Id<struct ObjectTag>;

}  // namespace mele

template <class Tag>
struct std::hash<mele::Id<Tag>> {
    std::size_t operator()(mele::Id<Tag> id) const noexcept { return std::hash<int>{}(id.value); }
};
