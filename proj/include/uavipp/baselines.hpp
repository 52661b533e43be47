#pragma once

#include "uavipp/env.hpp"
#include "uavipp/grid.hpp"

#include <string_view>
#include <vector>

namespace uavipp {

enum class PlannerKind { random, lawnmower, adaptive_gain };

std::string_view to_string(PlannerKind kind);

// Uniform draw over the valid actions. Throws ContractViolation when none is valid.
Action random_policy(const ActionMask& mask, Rng& rng);

// Lane i sits at column i * s + s / 2 with s = floor(width / n_uavs).
std::vector<int> lawnmower_lanes(int width, int n_uavs);

// Deployment poses for the lawnmower: top of each lane at altitude 1.
std::vector<UavPose> lawnmower_start_poses(int width, int height, int n_uavs);

// Boustrophedon sweeps at z = 1 starting from lawnmower_start_poses: run the
// lane along y, shift x+ by one footprint width (3 cells), run back, and so
// on; when the grid edge is reached the route is retraced in reverse.
// Each sequence holds exactly `budget` actions.
std::vector<std::vector<Action>> lawnmower_plan(int width, int height, int n_uavs, int budget);

// Sum over footprint cells of H(p) - E_obs[H(posterior)], in bits.
double expected_information_gain(const BeliefGrid& belief, const UavPose& pose, double accuracy);

// One-step greedy over valid actions on the agent's local belief; ties go to
// the lowest action index.
Action adaptive_gain_step(const SwarmState& state, int agent, const ActionMask& mask, const SensorModel& sensor);

} // namespace uavipp
