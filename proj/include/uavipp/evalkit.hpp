#pragma once

#include "uavipp/env.hpp"
#include "uavipp/grid.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace uavipp {

// Predicts valuable where p > threshold; F1 = 2TP / (2TP + FP + FN), 0 when TP = 0.
double f1_score(const BeliefGrid& belief, const GroundTruthGrid& truth, double threshold = 0.5);

struct EpisodeTrace {
    std::vector<double> entropy;                 // H_0 .. H_T of the global belief
    std::vector<double> f1;                      // F1_0 .. F1_T
    std::vector<double> rewards;                 // T entries
    std::vector<std::vector<UavPose>> poses;     // T + 1 snapshots
    std::vector<std::vector<Action>> actions;    // T joint actions
    BeliefGrid final_belief;

    int steps() const { return static_cast<int>(rewards.size()); }
    // Trajectory of one UAV, p_0 .. p_T.
    std::vector<UavPose> trajectory(int agent) const;
};

// Telescoping sum of entropy drops, cross-checked against H_0 - H_T.
// Throws InternalConsistencyError when they differ by more than 1e-9.
double info_gain(const std::vector<double>& entropies);
double info_gain(const EpisodeTrace& trace);

// Decision-maker for a whole swarm, driven once per step.
class JointPolicy {
public:
    virtual ~JointPolicy() = default;
    virtual std::string name() const = 0;
    // Deployment poses the method insists on (lawnmower lanes); nullopt keeps the config's.
    virtual std::optional<std::vector<UavPose>> start_poses(const EpisodeConfig&) const { return std::nullopt; }
    virtual void begin_episode(const Environment&) {}
    virtual std::vector<Action> act(const Environment& env, Rng& rng) = 0;
};

class RandomPlanner final : public JointPolicy {
public:
    std::string name() const override { return "random"; }
    std::vector<Action> act(const Environment& env, Rng& rng) override;
};

class LawnmowerPlanner final : public JointPolicy {
public:
    std::string name() const override { return "nl"; }
    std::optional<std::vector<UavPose>> start_poses(const EpisodeConfig& config) const override;
    void begin_episode(const Environment& env) override;
    std::vector<Action> act(const Environment& env, Rng& rng) override;

private:
    std::vector<std::vector<Action>> plan_;
};

class AdaptiveGainPlanner final : public JointPolicy {
public:
    std::string name() const override { return "ag"; }
    std::vector<Action> act(const Environment& env, Rng& rng) override;
};

// Runs one episode to budget exhaustion.
EpisodeTrace run_episode(JointPolicy& policy, Environment& env, Rng& policy_rng);

inline constexpr int kNumCheckpoints = 3;

// Step index reached after k/3 of the budget (ceil), k = 1, 2, 3.
std::array<int, kNumCheckpoints> checkpoint_steps(int budget);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

MeanStd mean_std(const std::vector<double>& values);

struct CheckpointStats {
    int step = 0;
    MeanStd f1;
    MeanStd entropy;
};

struct StepStats {
    int step = 0;
    MeanStd f1;
    MeanStd entropy;
};

struct TrialStats {
    int n_trials = 0;
    std::array<CheckpointStats, kNumCheckpoints> checkpoints{};
    std::vector<StepStats> curve;  // steps 0..B
};

struct TrialResult {
    TrialStats stats;
    std::vector<EpisodeTrace> traces;
};

TrialStats summarize(const std::vector<EpisodeTrace>& traces, int budget);

// Trial k reseeds the environment and the policy rng from (seed, k); trials
// are independent of each other and of execution order.
TrialResult run_trials(JointPolicy& policy, std::shared_ptr<const GroundTruthGrid> truth, const EpisodeConfig& config,
                       int n_trials, std::uint64_t seed);

struct MethodResult {
    std::string env;
    std::string method;
    TrialStats stats;
};

inline constexpr const char* kTableCsv = "table.csv";
inline constexpr const char* kTableMarkdown = "table.md";
inline constexpr const char* kCurvesCsv = "curves.csv";

// table.csv (one row per env x method x checkpoint, best-per-column flags),
// table.md (Table-style layout), curves.csv and SVG curve plots.
void make_report(const std::vector<MethodResult>& results, const std::filesystem::path& out_dir);

// Renders <env>_f1.svg and <env>_entropy.svg (mean with +-std band per method)
// from a curves.csv written by make_report. Returns the files written.
std::vector<std::filesystem::path> plot_curves(const std::filesystem::path& curves_csv,
                                               const std::filesystem::path& out_dir);

// One JSON object per step: trial, step, poses, actions, reward, entropy, f1.
void write_trace_jsonl(std::ostream& out, const EpisodeTrace& trace, int trial);

} // namespace uavipp
