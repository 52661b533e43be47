#pragma once

#include "uavipp/config.hpp"
#include "uavipp/env.hpp"
#include "uavipp/grid.hpp"
#include "uavipp/observation.hpp"

#include <torch/torch.h>

#include <array>
#include <optional>
#include <span>

namespace uavipp {

// Channel attention sigmoid(MLP(avg) + MLP(max)) followed by spatial attention
// sigmoid(conv7x7([mean; max])). Shape-preserving on [B, C, H, W].
class CbamImpl : public torch::nn::Module {
public:
    CbamImpl(int channels, int reduction);
    torch::Tensor forward(const torch::Tensor& x);

    // Test hook: when set, both attention logits are replaced by this value.
    std::optional<double> logit_override;

private:
    torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
    torch::nn::Conv2d spatial_{nullptr};
};
TORCH_MODULE(Cbam);

// Conv trunk (3x3, padding 1, ReLU, optional CBAM per block), then
// flatten -> hidden -> 6 outputs. Input [B, in_channels, 11, 11].
class PolicyNetImpl : public torch::nn::Module {
public:
    PolicyNetImpl(int in_channels, const PolicyArch& arch, bool use_cbam);
    torch::Tensor forward(const torch::Tensor& x);

    int in_channels() const { return in_channels_; }
    bool uses_cbam() const { return use_cbam_; }
    Cbam cbam(std::size_t block) const { return cbams_.at(block); }

private:
    int in_channels_;
    bool use_cbam_;
    std::vector<torch::nn::Conv2d> convs_;
    std::vector<Cbam> cbams_;
    torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(PolicyNet);

using ActionDistribution = std::array<double, kNumActions>;

// [B, C, 11, 11] float32 tensor from observation stacks of equal depth.
torch::Tensor stack_observations(std::span<const ObservationStack> obs);
// [B, 6] bool tensor.
torch::Tensor stack_masks(std::span<const ActionMask> masks);

// Masked logits are set to -inf. Throws ContractViolation when a row has no valid action.
torch::Tensor masked_log_softmax(const torch::Tensor& logits, const torch::Tensor& mask);
torch::Tensor masked_softmax(const torch::Tensor& logits, const torch::Tensor& mask);

// Actor distributions for a batch, no gradient.
std::vector<ActionDistribution> actor_distributions(PolicyNet& actor, std::span<const ObservationStack> obs,
                                                    std::span<const ActionMask> masks);
ActionDistribution actor_distribution(PolicyNet& actor, const ObservationStack& obs, const ActionMask& mask);

// Q(s, (u_-i, a)) for all six actions a, no gradient.
std::array<double, kNumActions> critic_values(PolicyNet& critic, const ObservationStack& obs);

enum class SelectMode { sample, greedy };

// Greedy: argmax with lowest-index ties. Sample: inverse-CDF draw that never
// returns a zero-probability action.
Action select_action(const ActionDistribution& dist, SelectMode mode, Rng& rng);

} // namespace uavipp
