#include "uavipp/env.hpp"

#include "uavipp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace uavipp {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream)
{
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double SensorModel::accuracy(int z) const
{
    if (accuracy_override) {
        return *accuracy_override;
    }
    return top_accuracy - decay_per_level * (z - 1);
}

void EpisodeConfig::validate(const GroundTruthGrid* truth) const
{
    if (n_uavs < 1) {
        throw ConfigError("n_uavs must be >= 1");
    }
    if (budget < 1) {
        throw ConfigError("budget must be >= 1");
    }
    if (width < 1 || height < 1) {
        throw ConfigError("grid dimensions must be positive");
    }
    if (z_max < 2) {
        throw ConfigError("z_max must be >= 2 so every pose keeps a valid action");
    }
    if (static_cast<int>(start_poses.size()) != n_uavs) {
        throw ConfigError("expected " + std::to_string(n_uavs) + " start poses, got " +
                          std::to_string(start_poses.size()));
    }
    if (!sensor.accuracy_override) {
        const double worst = sensor.accuracy(z_max);
        if (!(worst > 0.5) || sensor.accuracy(1) > 1.0) {
            throw ConfigError("sensor accuracy must stay in (0.5, 1] for every altitude");
        }
    }
    if (truth != nullptr && (truth->width() != width || truth->height() != height)) {
        throw ConfigError("episode grid dims do not match the ground truth");
    }
    for (const auto& p : start_poses) {
        const bool inside = p.x >= 0 && p.y >= 0 && p.x < width && p.y < height;
        if (!inside || p.z < 1 || p.z > z_max) {
            throw ConfigError("start pose (" + std::to_string(p.x) + "," + std::to_string(p.y) + "," +
                              std::to_string(p.z) + ") is out of bounds");
        }
        if (truth != nullptr && truth->no_fly(p.x, p.y)) {
            throw ConfigError("start pose (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                              ") lies on a no-fly cell");
        }
    }
}

std::vector<UavPose> corner_start_poses(int width, int height, int n_uavs)
{
    const UavPose corners[4] = {{0, 0, 1}, {width - 1, 0, 1}, {0, height - 1, 1}, {width - 1, height - 1, 1}};
    std::vector<UavPose> poses;
    poses.reserve(static_cast<std::size_t>(std::max(n_uavs, 0)));
    for (int i = 0; i < n_uavs; ++i) {
        poses.push_back(corners[i % 4]);
    }
    return poses;
}

bool SwarmState::was_visited(int agent, int x, int y) const
{
    return visited[static_cast<std::size_t>(agent)][static_cast<std::size_t>(y) * global_belief.width() + x] != 0;
}

bool SwarmState::visited_by_any(int x, int y) const
{
    for (int i = 0; i < n_uavs(); ++i) {
        if (was_visited(i, x, y)) {
            return true;
        }
    }
    return false;
}

SwarmState reset(const EpisodeConfig& config, const GroundTruthGrid& truth)
{
    config.validate(&truth);
    SwarmState s;
    s.global_belief = BeliefGrid(config.width, config.height, 0.5);
    s.local_beliefs.assign(static_cast<std::size_t>(config.n_uavs), s.global_belief);
    s.poses = config.start_poses;
    s.visited.assign(static_cast<std::size_t>(config.n_uavs),
                     std::vector<std::uint8_t>(static_cast<std::size_t>(config.width) * config.height, 0));
    for (int i = 0; i < config.n_uavs; ++i) {
        const auto& p = s.poses[static_cast<std::size_t>(i)];
        s.visited[static_cast<std::size_t>(i)][static_cast<std::size_t>(p.y) * config.width + p.x] = 1;
    }
    s.budget_total = config.budget;
    s.budget_remaining = config.budget;
    s.step_index = 0;
    return s;
}

std::vector<Cell> footprint(const UavPose& pose, int width, int height)
{
    const int r = pose.z;
    const int x0 = std::max(0, pose.x - r);
    const int x1 = std::min(width - 1, pose.x + r);
    const int y0 = std::max(0, pose.y - r);
    const int y1 = std::min(height - 1, pose.y + r);
    std::vector<Cell> cells;
    if (x0 > x1 || y0 > y1) {
        return cells;
    }
    cells.reserve(static_cast<std::size_t>(x1 - x0 + 1) * (y1 - y0 + 1));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            cells.push_back({x, y});
        }
    }
    return cells;
}

SensorReading sense(const GroundTruthGrid& truth, const UavPose& pose, const SensorModel& sensor, Rng& rng)
{
    SensorReading reading;
    reading.origin = pose;
    reading.accuracy = sensor.accuracy(pose.z);
    std::bernoulli_distribution correct(std::clamp(reading.accuracy, 0.0, 1.0));
    const auto cells = footprint(pose, truth.width(), truth.height());
    reading.cells.reserve(cells.size());
    for (const auto& c : cells) {
        std::uint8_t observed = 0;
        // Draw for every cell so the rng stream does not depend on the mask.
        const bool ok = correct(rng);
        if (!truth.no_fly(c.x, c.y)) {
            const std::uint8_t label = truth.label(c.x, c.y);
            observed = ok ? label : static_cast<std::uint8_t>(1 - label);
        }
        reading.cells.push_back({c, observed});
    }
    return reading;
}

void update_belief(BeliefGrid& belief, const SensorReading& reading)
{
    const double a = reading.accuracy;
    if (a == 0.5) {
        return;
    }
    for (const auto& obs : reading.cells) {
        double& p = belief.at(obs.cell.x, obs.cell.y);
        const double like_valuable = obs.observed ? a : 1.0 - a;
        const double like_valueless = obs.observed ? 1.0 - a : a;
        const double num = p * like_valuable;
        const double den = num + (1.0 - p) * like_valueless;
        if (den > 0.0) {
            p = std::clamp(num / den, 0.0, 1.0);
        }
        // den == 0: a certain prior contradicted by a perfect sensor; keep the prior.
    }
}

double binary_entropy(double p)
{
    double h = 0.0;
    if (p > 0.0 && p < 1.0) {
        h = -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
    }
    return h;
}

double entropy(const BeliefGrid& belief)
{
    if (belief.size() == 0) {
        return 0.0;
    }
    double sum = 0.0;
    for (double p : belief.probs()) {
        sum += binary_entropy(p);
    }
    return sum / static_cast<double>(belief.size());
}

double reward(double h_before, double h_after, double alpha, double beta)
{
    if (h_before <= 0.0) {
        return beta;
    }
    return alpha * (h_before - h_after) / h_before + beta;
}

ActionMask valid_actions(const SwarmState& state, int agent, const GroundTruthGrid& truth, int z_max)
{
    if (agent < 0 || agent >= state.n_uavs()) {
        throw ContractViolation("agent index out of range");
    }
    ActionMask mask{};
    const UavPose& pose = state.poses[static_cast<std::size_t>(agent)];
    for (Action a : kAllActions) {
        const UavPose next = apply(pose, a);
        mask[static_cast<std::size_t>(to_index(a))] = truth.in_bounds(next.x, next.y) && next.z >= 1 &&
                                                      next.z <= z_max && !truth.no_fly(next.x, next.y);
    }
    return mask;
}

StepResult step(SwarmState state, std::span<const Action> joint_action, const GroundTruthGrid& truth,
                const EpisodeConfig& config, Rng& rng)
{
    if (state.budget_remaining <= 0) {
        throw EpisodeOver("step called after the budget was exhausted");
    }
    if (static_cast<int>(joint_action.size()) != state.n_uavs()) {
        throw ContractViolation("joint action size does not match the number of UAVs");
    }
    for (int i = 0; i < state.n_uavs(); ++i) {
        const auto mask = valid_actions(state, i, truth, config.z_max);
        const Action a = joint_action[static_cast<std::size_t>(i)];
        if (!mask[static_cast<std::size_t>(to_index(a))]) {
            throw ContractViolation("UAV " + std::to_string(i) + " attempted invalid action " +
                                    std::string(action_name(a)));
        }
    }

    StepResult result;
    result.entropy_before = entropy(state.global_belief);
    for (int i = 0; i < state.n_uavs(); ++i) {
        auto& pose = state.poses[static_cast<std::size_t>(i)];
        pose = apply(pose, joint_action[static_cast<std::size_t>(i)]);
        state.visited[static_cast<std::size_t>(i)][static_cast<std::size_t>(pose.y) * truth.width() + pose.x] = 1;
    }
    result.readings.reserve(static_cast<std::size_t>(state.n_uavs()));
    for (int i = 0; i < state.n_uavs(); ++i) {
        result.readings.push_back(sense(truth, state.poses[static_cast<std::size_t>(i)], config.sensor, rng));
    }
    for (int i = 0; i < state.n_uavs(); ++i) {
        const auto& reading = result.readings[static_cast<std::size_t>(i)];
        update_belief(state.global_belief, reading);
        update_belief(state.local_beliefs[static_cast<std::size_t>(i)], reading);
    }
    state.last_readings = result.readings;
    --state.budget_remaining;
    ++state.step_index;

    result.entropy_after = entropy(state.global_belief);
    result.reward = reward(result.entropy_before, result.entropy_after, config.reward_alpha, config.reward_beta);
    result.state = std::move(state);
    return result;
}

Environment::Environment(std::shared_ptr<const GroundTruthGrid> truth, EpisodeConfig config)
    : truth_(std::move(truth)), config_(std::move(config)), rng_(config_.seed)
{
    if (!truth_) {
        throw ConfigError("environment requires a ground truth grid");
    }
    truth_->validate();
    config_.validate(truth_.get());
    state_ = uavipp::reset(config_, *truth_);
}

const SwarmState& Environment::reset()
{
    state_ = uavipp::reset(config_, *truth_);
    return state_;
}

const SwarmState& Environment::reset(std::uint64_t seed)
{
    rng_.seed(seed);
    return reset();
}

StepResult Environment::step(std::span<const Action> joint_action)
{
    StepResult result = uavipp::step(state_, joint_action, *truth_, config_, rng_);
    state_ = result.state;
    return result;
}

ActionMask Environment::valid_actions(int agent) const
{
    return uavipp::valid_actions(state_, agent, *truth_, config_.z_max);
}

} // namespace uavipp
