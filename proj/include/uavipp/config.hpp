#pragma once

#include "uavipp/env.hpp"
#include "uavipp/envgen.hpp"
#include "uavipp/noise_channel.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace uavipp {

// Attention mix for fusing n encoded sources; alpha + beta = 1.
struct FusionWeights {
    double alpha = 0.5;  // channel attention
    double beta = 0.5;   // spatial attention
    void validate() const;
    friend bool operator==(const FusionWeights&, const FusionWeights&) = default;
};

struct FusionLossWeights {
    double w_mse = 1.0;
    double w_mae = 1.0;
    double w_ssim = 1.0;
    void validate() const;
    friend bool operator==(const FusionLossWeights&, const FusionLossWeights&) = default;
};

struct SendfuseSettings {
    int patch_size = 32;
    int width0 = 16;
    int width1 = 32;
    int epochs = 12;
    int dataset_size = 5000;
    int batch_size = 32;
    double lr = 2e-3;
    FusionWeights fusion;
    FusionLossWeights loss;
    friend bool operator==(const SendfuseSettings&, const SendfuseSettings&) = default;
};

struct RewardParams {
    double alpha = 10.0;
    double beta = -0.17;
    friend bool operator==(const RewardParams&, const RewardParams&) = default;
};

enum class ReturnMode { monte_carlo, lambda };
// Which modules are removed: cbam -> fusion-only variant, fusion -> CBAM-only, both -> base.
enum class Ablation { none, cbam, fusion, both };

std::string_view to_string(ReturnMode mode);
ReturnMode return_mode_from_string(std::string_view s);
std::string_view to_string(Ablation a);
Ablation ablation_from_string(std::string_view s);
inline bool uses_cbam(Ablation a) { return a == Ablation::none || a == Ablation::fusion; }
inline bool uses_sendfuse(Ablation a) { return a == Ablation::none || a == Ablation::cbam; }
// Base / CBAM / Fusion / Both, as in the reward-curve legend.
std::string_view variant_name(Ablation a);

struct PolicyArch {
    std::vector<int> widths = {32, 64, 64};
    int reduction = 8;
    int hidden = 128;
    friend bool operator==(const PolicyArch&, const PolicyArch&) = default;
};

struct TrainConfig {
    int episodes = 1200;
    int batch_size = 512;
    double lr_actor = 1e-5;
    double lr_critic = 1e-4;
    double gamma = 0.99;
    double lambda = 0.8;
    ReturnMode return_mode = ReturnMode::monte_carlo;
    double grad_clip = 10.0;
    int critic_steps = 1;        // critic gradient steps per batch
    double entropy_coef = 0.0;   // weight of the policy-entropy bonus in the actor loss
    bool normalize_advantage = false;  // rescale advantages to unit std per batch
    int checkpoint_every = 100;
    Ablation ablate = Ablation::none;
    PolicyArch arch;
    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EnvSource {
    std::string kind = "synthetic";  // synthetic | image
    SyntheticEnvSpec synthetic;
    std::string image_path;
    int threshold = 128;
    bool bright_is_valuable = false;
    std::string mask_path;
    int downsample = 1;
    friend bool operator==(const EnvSource&, const EnvSource&) = default;
};

struct EpisodeSettings {
    int n_uavs = 4;
    int budget = 15;
    int z_max = 3;
    std::string start_poses = "corners";  // "corners" or "x,y,z;x,y,z;..."
    double sensor_top_accuracy = 0.95;
    double sensor_decay = 0.1;
    friend bool operator==(const EpisodeSettings&, const EpisodeSettings&) = default;
};

struct EvalSettings {
    int trials = 10;
    friend bool operator==(const EvalSettings&, const EvalSettings&) = default;
};

struct RunConfig {
    EnvSource env;
    EpisodeSettings episode;
    ChannelParams channel = ChannelParams::for_level(NoiseLevel::moderate);
    RewardParams reward;
    SendfuseSettings sendfuse;
    TrainConfig train;
    EvalSettings eval;
    std::uint64_t seed = 1;

    void validate() const;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string to_ini(const RunConfig& config);
// Throws ConfigError on malformed values or unknown keys.
RunConfig from_ini(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& config, const std::filesystem::path& path);

GroundTruthGrid build_ground_truth(const EnvSource& source);
EpisodeConfig build_episode_config(const RunConfig& config, const GroundTruthGrid& truth);
std::vector<UavPose> parse_start_poses(const std::string& spec, int width, int height, int n_uavs);

// Shortest decimal that parses back to the same double.
std::string format_double(double v);

} // namespace uavipp
