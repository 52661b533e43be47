#pragma once

#include "uavipp/config.hpp"
#include "uavipp/env.hpp"
#include "uavipp/evalkit.hpp"
#include "uavipp/noise_channel.hpp"
#include "uavipp/observation.hpp"
#include "uavipp/policy_nets.hpp"
#include "uavipp/sendfuse.hpp"

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace uavipp {

// G_t = r_t + gamma * G_{t+1}; the recursion restarts after every terminal
// transition and bootstraps 0 past the last entry.
std::vector<double> discounted_returns(std::span<const double> rewards, std::span<const std::uint8_t> terminal,
                                       double gamma);

// G_t = r_t + gamma * ((1 - lambda) * v_next_t + lambda * G_{t+1}); terminal
// transitions use G_t = r_t. `v_next[t]` is the critic's value of step t+1.
std::vector<double> lambda_returns(std::span<const double> rewards, std::span<const std::uint8_t> terminal,
                                   std::span<const double> v_next, double gamma, double lambda);

// Mean over rows of (q[row, taken[row]] - target[row])^2. q [M, 6], taken [M] long, target [M].
torch::Tensor critic_loss(const torch::Tensor& q, const torch::Tensor& taken, const torch::Tensor& target);

// q[taken] - sum_a pi[a] * q[a].
double counterfactual_advantage(const std::array<double, kNumActions>& q, const ActionDistribution& pi, Action taken);
// Batched form on [M, 6] tensors; returns [M].
torch::Tensor counterfactual_advantage(const torch::Tensor& q, const torch::Tensor& pi, const torch::Tensor& taken);

// -mean(log_pi_taken * advantage), advantage detached.
torch::Tensor actor_loss(const torch::Tensor& log_pi_taken, const torch::Tensor& advantage);

// Shared actor/critic pair plus the frozen fusion model used to build the
// fusion channel.
struct ComaAgent {
    PolicyNet actor{nullptr};
    PolicyNet critic{nullptr};
    Ablation ablate = Ablation::none;
    PolicyArch arch;
    std::optional<SendfuseModel> sendfuse;  // present iff the variant uses SenDFuse
    int canvas_side = 32;
    int episodes_trained = 0;
};

// Fresh networks; `sendfuse` is required when the ablation keeps fusion.
ComaAgent make_agent(const PolicyArch& arch, Ablation ablate, std::optional<SendfuseModel> sendfuse,
                     std::uint64_t seed);

// Receiver-centred fusion canvases, one per UAV. Latest readings are broadcast
// through the channel and aligned; SenDFuse fuses them when present, the
// pixel-wise mean does otherwise. Before the first step every canvas is 0.5.
std::vector<Image> fusion_canvases(ComaAgent& agent, const SwarmState& state, const ChannelParams& channel, Rng& rng);

// Actor observations for every UAV.
std::vector<ObservationStack> actor_observations(ComaAgent& agent, const SwarmState& state, int z_max,
                                                 const ChannelParams& channel, Rng& rng);

struct EpisodeRecord {
    int episode = 0;
    double reward = 0.0;
    double entropy_final = 0.0;
    double f1_final = 0.0;
};

struct UpdateStats {
    int transitions = 0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
};

struct ComaOptions {
    TrainConfig train;
    ChannelParams channel;
    std::uint64_t seed = 1;
    std::optional<std::filesystem::path> out_dir;   // reward trace, checkpoints, diagnostics
    std::optional<std::filesystem::path> dump_obs;  // NPY dumps of the first episode's observations
    std::function<void(const EpisodeRecord&)> on_episode;
};

struct TrainResult {
    std::vector<EpisodeRecord> trace;
    std::vector<UpdateStats> updates;
};

// Algorithm 1: sample joint actions, step, buffer transitions and update the
// critic then the actor whenever the buffer reaches batch_size.
// Throws TrainingDiverged (after writing diagnostics.txt to out_dir) on a
// non-finite loss.
TrainResult train_coma(ComaAgent& agent, std::shared_ptr<const GroundTruthGrid> truth, const EpisodeConfig& config,
                       const ComaOptions& options);

void write_reward_trace(const std::filesystem::path& path, const std::vector<EpisodeRecord>& trace);
// update, transitions, critic_loss, actor_loss per COMA update.
void write_update_trace(const std::filesystem::path& path, const std::vector<UpdateStats>& updates);
std::vector<EpisodeRecord> read_reward_trace(const std::filesystem::path& path);

// Self-contained policy checkpoint: actor, critic and the frozen fusion model.
void save_agent(const std::filesystem::path& path, const ComaAgent& agent);
ComaAgent load_agent(const std::filesystem::path& path);

// Greedy deployment of a trained agent; channel noise is drawn from the
// policy rng handed over by the evaluator.
class LearnedPolicy final : public JointPolicy {
public:
    LearnedPolicy(std::shared_ptr<ComaAgent> agent, ChannelParams channel);
    std::string name() const override { return "ours"; }
    std::vector<Action> act(const Environment& env, Rng& rng) override;

private:
    std::shared_ptr<ComaAgent> agent_;
    ChannelParams channel_;
};

} // namespace uavipp
