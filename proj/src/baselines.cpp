#include "uavipp/baselines.hpp"

#include "uavipp/errors.hpp"

#include <algorithm>

namespace uavipp {

std::string_view to_string(PlannerKind kind)
{
    switch (kind) {
    case PlannerKind::random: return "random";
    case PlannerKind::lawnmower: return "nl";
    case PlannerKind::adaptive_gain: return "ag";
    }
    return "?";
}

Action random_policy(const ActionMask& mask, Rng& rng)
{
    const auto n_valid = static_cast<int>(std::count(mask.begin(), mask.end(), true));
    if (n_valid == 0) {
        throw ContractViolation("random_policy: no valid action");
    }
    std::uniform_int_distribution<int> pick(0, n_valid - 1);
    int k = pick(rng);
    for (int i = 0; i < kNumActions; ++i) {
        if (mask[static_cast<std::size_t>(i)] && k-- == 0) {
            return action_from_index(i);
        }
    }
    throw InternalConsistencyError("random_policy: selection fell through");
}

std::vector<int> lawnmower_lanes(int width, int n_uavs)
{
    if (n_uavs < 1) {
        throw ContractViolation("lawnmower needs at least one UAV");
    }
    const int spacing = std::max(1, width / n_uavs);
    std::vector<int> lanes;
    lanes.reserve(static_cast<std::size_t>(n_uavs));
    for (int i = 0; i < n_uavs; ++i) {
        lanes.push_back(std::min(width - 1, i * spacing + spacing / 2));
    }
    return lanes;
}

std::vector<UavPose> lawnmower_start_poses(int width, int /*height*/, int n_uavs)
{
    std::vector<UavPose> poses;
    for (int lane : lawnmower_lanes(width, n_uavs)) {
        poses.push_back({lane, 0, 1});
    }
    return poses;
}

namespace {

Action inverse(Action a)
{
    switch (a) {
    case Action::XPlus: return Action::XMinus;
    case Action::XMinus: return Action::XPlus;
    case Action::YPlus: return Action::YMinus;
    case Action::YMinus: return Action::YPlus;
    case Action::ZPlus: return Action::ZMinus;
    case Action::ZMinus: return Action::ZPlus;
    }
    return a;
}

std::vector<Action> sweep_route(int lane, int width, int height)
{
    constexpr int kShift = 3;  // footprint width at z = 1
    std::vector<Action> route;
    bool upward = true;
    for (int col = lane; col < width; col += kShift) {
        if (col != lane) {
            for (int k = 0; k < kShift; ++k) {
                route.push_back(Action::XPlus);
            }
        }
        for (int k = 0; k < height - 1; ++k) {
            route.push_back(upward ? Action::YPlus : Action::YMinus);
        }
        upward = !upward;
        if (col + kShift >= width) {
            break;
        }
    }
    return route;
}

} // namespace

std::vector<std::vector<Action>> lawnmower_plan(int width, int height, int n_uavs, int budget)
{
    std::vector<std::vector<Action>> plans;
    for (int lane : lawnmower_lanes(width, n_uavs)) {
        const auto route = sweep_route(lane, width, height);
        std::vector<Action> plan;
        plan.reserve(static_cast<std::size_t>(std::max(budget, 0)));
        if (route.empty()) {
            // Degenerate 1-cell-high grid: bob up and down in place.
            for (int t = 0; t < budget; ++t) {
                plan.push_back(t % 2 == 0 ? Action::ZPlus : Action::ZMinus);
            }
        } else {
            bool forward = true;
            while (static_cast<int>(plan.size()) < budget) {
                if (forward) {
                    for (auto it = route.begin(); it != route.end() && static_cast<int>(plan.size()) < budget; ++it) {
                        plan.push_back(*it);
                    }
                } else {
                    for (auto it = route.rbegin(); it != route.rend() && static_cast<int>(plan.size()) < budget; ++it) {
                        plan.push_back(inverse(*it));
                    }
                }
                forward = !forward;
            }
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

double expected_information_gain(const BeliefGrid& belief, const UavPose& pose, double accuracy)
{
    const double a = accuracy;
    double gain = 0.0;
    for (const auto& c : footprint(pose, belief.width(), belief.height())) {
        const double p = belief.at(c.x, c.y);
        const double p_obs1 = p * a + (1.0 - p) * (1.0 - a);
        const double p_obs0 = 1.0 - p_obs1;
        double expected_posterior = 0.0;
        if (p_obs1 > 0.0) {
            expected_posterior += p_obs1 * binary_entropy(p * a / p_obs1);
        }
        if (p_obs0 > 0.0) {
            expected_posterior += p_obs0 * binary_entropy(p * (1.0 - a) / p_obs0);
        }
        gain += std::max(0.0, binary_entropy(p) - expected_posterior);
    }
    return gain;
}

Action adaptive_gain_step(const SwarmState& state, int agent, const ActionMask& mask, const SensorModel& sensor)
{
    const auto& belief = state.local_beliefs[static_cast<std::size_t>(agent)];
    const auto& pose = state.poses[static_cast<std::size_t>(agent)];
    int best = -1;
    double best_gain = 0.0;
    for (int i = 0; i < kNumActions; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) {
            continue;
        }
        const UavPose next = apply(pose, action_from_index(i));
        const double g = expected_information_gain(belief, next, sensor.accuracy(next.z));
        if (best < 0 || g > best_gain) {
            best = i;
            best_gain = g;
        }
    }
    if (best < 0) {
        throw ContractViolation("adaptive_gain_step: no valid action");
    }
    return action_from_index(best);
}

} // namespace uavipp
