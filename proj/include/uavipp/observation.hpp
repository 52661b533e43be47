#pragma once

#include "uavipp/env.hpp"
#include "uavipp/grid.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace uavipp {

inline constexpr int kObsSide = 11;
inline constexpr int kObsHalf = kObsSide / 2;
inline constexpr int kActorChannels = 8;
inline constexpr int kCriticChannels = 12;

// Actor channel layout.
enum ActorChannel : int {
    kBudget = 0,
    kDroneId = 1,
    kAltitude = 2,
    kFootprint = 3,
    kLocalSensor = 4,
    kLocalBelief = 5,
    kLocalEntropy = 6,
    kFusion = 7,
};

// Extra critic channels appended after the actor ones.
enum CriticChannel : int {
    kGlobalBelief = 8,
    kGlobalEntropy = 9,
    kGlobalFootprint = 10,
    kJointAction = 11,
};

// channels x 11 x 11 egocentric stack, row = y offset, column = x offset.
struct ObservationStack {
    int channels = 0;
    std::vector<float> data;

    ObservationStack() = default;
    explicit ObservationStack(int c) : channels(c), data(static_cast<std::size_t>(c) * kObsSide * kObsSide, 0.0f) {}

    float at(int c, int row, int col) const { return data[offset(c, row, col)]; }
    float& at(int c, int row, int col) { return data[offset(c, row, col)]; }
    std::span<const float> plane(int c) const
    {
        return {data.data() + offset(c, 0, 0), static_cast<std::size_t>(kObsSide * kObsSide)};
    }

    static std::size_t offset(int c, int row, int col)
    {
        return (static_cast<std::size_t>(c) * kObsSide + row) * kObsSide + col;
    }
};

// `fused` is the receiver-centred fusion canvas (any size >= 11); its centre
// 11x11 window becomes the fusion channel. Cells outside the grid are 0 in
// every channel.
ObservationStack build_actor_obs(const SwarmState& state, int agent, const Image& fused, int z_max);

// Appends global belief, global entropy, global footprint and the joint-action
// map ((index + 1) / 6 at each drone's cell). When `exclude_agent` is set that
// agent's own action slot is left at 0, as the counterfactual critic expects.
ObservationStack build_critic_obs(const ObservationStack& actor_obs, const SwarmState& state, int agent,
                                  std::span<const Action> joint_action, std::optional<int> exclude_agent = {});

// The agent's own latest clean reading pasted on a 0.5 canvas centred on it.
Image own_sensor_canvas(const SwarmState& state, int agent, int canvas_width, int canvas_height);

} // namespace uavipp
