#include "uavipp/observation.hpp"

#include "uavipp/errors.hpp"
#include "uavipp/noise_channel.hpp"

#include <algorithm>

namespace uavipp {

namespace {

// Calls fn(row, col, x, y) for each window cell that lies inside the grid.
template <typename Fn>
void for_window(const UavPose& centre, int width, int height, Fn&& fn)
{
    for (int row = 0; row < kObsSide; ++row) {
        const int y = centre.y - kObsHalf + row;
        if (y < 0 || y >= height) {
            continue;
        }
        for (int col = 0; col < kObsSide; ++col) {
            const int x = centre.x - kObsHalf + col;
            if (x >= 0 && x < width) {
                fn(row, col, x, y);
            }
        }
    }
}

bool window_cell(const UavPose& centre, int x, int y, int& row, int& col)
{
    row = y - centre.y + kObsHalf;
    col = x - centre.x + kObsHalf;
    return row >= 0 && row < kObsSide && col >= 0 && col < kObsSide;
}

} // namespace

Image own_sensor_canvas(const SwarmState& state, int agent, int canvas_width, int canvas_height)
{
    const auto& pose = state.poses[static_cast<std::size_t>(agent)];
    Image canvas(canvas_width, canvas_height, kUnknownFill);
    if (state.last_readings.empty()) {
        return canvas;
    }
    const Cell origin = canvas_origin(pose, canvas_width, canvas_height);
    for (const auto& obs : state.last_readings[static_cast<std::size_t>(agent)].cells) {
        const int cx = obs.cell.x - origin.x;
        const int cy = obs.cell.y - origin.y;
        if (cx >= 0 && cy >= 0 && cx < canvas_width && cy < canvas_height) {
            canvas.at(cx, cy) = static_cast<float>(obs.observed);
        }
    }
    return canvas;
}

ObservationStack build_actor_obs(const SwarmState& state, int agent, const Image& fused, int z_max)
{
    if (agent < 0 || agent >= state.n_uavs()) {
        throw ContractViolation("build_actor_obs: agent index out of range");
    }
    if (fused.width < kObsSide || fused.height < kObsSide) {
        throw ContractViolation("build_actor_obs: fusion canvas smaller than the observation window");
    }
    const int width = state.global_belief.width();
    const int height = state.global_belief.height();
    const auto& pose = state.poses[static_cast<std::size_t>(agent)];
    const auto& local = state.local_beliefs[static_cast<std::size_t>(agent)];
    const float budget_ratio =
        state.budget_total > 0 ? static_cast<float>(state.budget_remaining) / static_cast<float>(state.budget_total) : 0.0f;
    const float id_ratio = static_cast<float>(agent + 1) / static_cast<float>(state.n_uavs());

    ObservationStack obs(kActorChannels);
    const Image own = own_sensor_canvas(state, agent, kObsSide, kObsSide);
    const int fx0 = fused.width / 2 - kObsHalf;
    const int fy0 = fused.height / 2 - kObsHalf;

    for_window(pose, width, height, [&](int row, int col, int x, int y) {
        obs.at(kBudget, row, col) = budget_ratio;
        obs.at(kDroneId, row, col) = id_ratio;
        obs.at(kFootprint, row, col) = state.was_visited(agent, x, y) ? 1.0f : 0.0f;
        obs.at(kLocalSensor, row, col) = own.at(col, row);
        const double p = local.at(x, y);
        obs.at(kLocalBelief, row, col) = static_cast<float>(p);
        obs.at(kLocalEntropy, row, col) = static_cast<float>(binary_entropy(p));
        obs.at(kFusion, row, col) = std::clamp(fused.at(fx0 + col, fy0 + row), 0.0f, 1.0f);
    });

    for (const auto& other : state.poses) {
        int row = 0, col = 0;
        if (window_cell(pose, other.x, other.y, row, col)) {
            float& cell = obs.at(kAltitude, row, col);
            cell = std::max(cell, static_cast<float>(other.z) / static_cast<float>(z_max));
        }
    }
    return obs;
}

ObservationStack build_critic_obs(const ObservationStack& actor_obs, const SwarmState& state, int agent,
                                  std::span<const Action> joint_action, std::optional<int> exclude_agent)
{
    if (actor_obs.channels != kActorChannels) {
        throw ContractViolation("build_critic_obs expects an actor observation");
    }
    if (static_cast<int>(joint_action.size()) != state.n_uavs()) {
        throw ContractViolation("build_critic_obs: joint action is incomplete");
    }
    const int width = state.global_belief.width();
    const int height = state.global_belief.height();
    const auto& pose = state.poses[static_cast<std::size_t>(agent)];

    ObservationStack obs(kCriticChannels);
    std::copy(actor_obs.data.begin(), actor_obs.data.end(), obs.data.begin());
    for_window(pose, width, height, [&](int row, int col, int x, int y) {
        const double p = state.global_belief.at(x, y);
        obs.at(kGlobalBelief, row, col) = static_cast<float>(p);
        obs.at(kGlobalEntropy, row, col) = static_cast<float>(binary_entropy(p));
        obs.at(kGlobalFootprint, row, col) = state.visited_by_any(x, y) ? 1.0f : 0.0f;
    });
    for (int j = 0; j < state.n_uavs(); ++j) {
        if (exclude_agent && *exclude_agent == j) {
            continue;
        }
        const auto& other = state.poses[static_cast<std::size_t>(j)];
        int row = 0, col = 0;
        if (window_cell(pose, other.x, other.y, row, col)) {
            const float code = static_cast<float>(to_index(joint_action[static_cast<std::size_t>(j)]) + 1) / 6.0f;
            float& cell = obs.at(kJointAction, row, col);
            cell = std::max(cell, code);
        }
    }
    return obs;
}

} // namespace uavipp
