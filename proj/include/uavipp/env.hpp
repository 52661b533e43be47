#pragma once

#include "uavipp/grid.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace uavipp {

using Rng = std::mt19937_64;

// Deterministic, well-mixed child seed (splitmix64 over base and stream).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Altitude-dependent camera model: footprint side 2z+1, per-cell accuracy
// a(z) = top_accuracy - decay * (z - 1).
struct SensorModel {
    double top_accuracy = 0.95;
    double decay_per_level = 0.1;
    std::optional<double> accuracy_override;  // test hook: fixed accuracy at every altitude

    double accuracy(int z) const;
};

struct CellObservation {
    Cell cell;
    std::uint8_t observed = 0;
};

struct SensorReading {
    std::vector<CellObservation> cells;
    double accuracy = 1.0;
    UavPose origin;
};

struct EpisodeConfig {
    int n_uavs = 4;
    int budget = 15;
    std::vector<UavPose> start_poses;
    int width = 30;
    int height = 30;
    int z_max = 3;
    double reward_alpha = 10.0;
    double reward_beta = -0.17;
    std::uint64_t seed = 0;
    SensorModel sensor;

    // Throws ConfigError. Checks start poses against `truth` when given.
    void validate(const GroundTruthGrid* truth = nullptr) const;
};

// One pose per UAV, cycling through the four grid corners at altitude 1.
std::vector<UavPose> corner_start_poses(int width, int height, int n_uavs);

struct SwarmState {
    BeliefGrid global_belief;
    std::vector<BeliefGrid> local_beliefs;
    std::vector<UavPose> poses;
    std::vector<std::vector<std::uint8_t>> visited;  // per-UAV visited-cell flags, width*height each
    std::vector<SensorReading> last_readings;       // empty before the first step
    int budget_total = 0;
    int budget_remaining = 0;
    int step_index = 0;

    int n_uavs() const { return static_cast<int>(poses.size()); }
    bool was_visited(int agent, int x, int y) const;
    bool visited_by_any(int x, int y) const;
};

SwarmState reset(const EpisodeConfig& config, const GroundTruthGrid& truth);

// Square (2z+1) window centred on (x, y), clipped to the grid. Row-major order.
std::vector<Cell> footprint(const UavPose& pose, int width, int height);

// Noisy classification of every footprint cell. No-fly cells lie outside the
// ROI and always read 0.
SensorReading sense(const GroundTruthGrid& truth, const UavPose& pose, const SensorModel& sensor, Rng& rng);

// Independent per-cell Bayes update: posterior odds = prior odds * (a/(1-a))^(+-1).
void update_belief(BeliefGrid& belief, const SensorReading& reading);

double binary_entropy(double p);

// Mean per-cell binary entropy in bits, in [0, 1].
double entropy(const BeliefGrid& belief);

// alpha * (h_before - h_after) / h_before + beta; beta alone when h_before is 0.
double reward(double h_before, double h_after, double alpha, double beta);

ActionMask valid_actions(const SwarmState& state, int agent, const GroundTruthGrid& truth, int z_max);

struct StepResult {
    SwarmState state;
    double reward = 0.0;
    double entropy_before = 0.0;
    double entropy_after = 0.0;
    std::vector<SensorReading> readings;
};

// Moves all UAVs simultaneously, senses at the new poses and updates beliefs.
// Throws ContractViolation on an invalid action and EpisodeOver once the
// budget is spent.
StepResult step(SwarmState state, std::span<const Action> joint_action, const GroundTruthGrid& truth,
                const EpisodeConfig& config, Rng& rng);

// Owns one episode's truth, config, state and sensor rng.
class Environment {
public:
    Environment(std::shared_ptr<const GroundTruthGrid> truth, EpisodeConfig config);

    const SwarmState& reset();
    const SwarmState& reset(std::uint64_t seed);
    StepResult step(std::span<const Action> joint_action);

    const SwarmState& state() const { return state_; }
    const EpisodeConfig& config() const { return config_; }
    const GroundTruthGrid& truth() const { return *truth_; }
    std::shared_ptr<const GroundTruthGrid> truth_ptr() const { return truth_; }
    ActionMask valid_actions(int agent) const;
    bool done() const { return state_.budget_remaining == 0; }

private:
    std::shared_ptr<const GroundTruthGrid> truth_;
    EpisodeConfig config_;
    Rng rng_;
    SwarmState state_;
};

} // namespace uavipp
