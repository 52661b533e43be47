#include "uavipp/policy_nets.hpp"

#include "uavipp/errors.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <string>

namespace uavipp {

CbamImpl::CbamImpl(int channels, int reduction)
{
    if (channels < 1 || reduction < 1) {
        throw ContractViolation("CBAM needs positive channels and reduction");
    }
    const int hidden = std::max(1, channels / reduction);
    fc1_ = register_module("fc1", torch::nn::Linear(channels, hidden));
    fc2_ = register_module("fc2", torch::nn::Linear(hidden, channels));
    spatial_ = register_module("spatial", torch::nn::Conv2d(torch::nn::Conv2dOptions(2, 1, 7).padding(3)));
}

torch::Tensor CbamImpl::forward(const torch::Tensor& x)
{
    auto mlp = [&](const torch::Tensor& v) { return fc2_->forward(torch::relu(fc1_->forward(v))); };
    auto channel_logits = mlp(x.mean({2, 3})) + mlp(x.amax({2, 3}));
    if (logit_override) {
        channel_logits = torch::full_like(channel_logits, *logit_override);
    }
    const auto xc = x * torch::sigmoid(channel_logits).unsqueeze(-1).unsqueeze(-1);
    const auto pooled = torch::cat({xc.mean(1, true), xc.amax(1, true)}, 1);
    auto spatial_logits = spatial_->forward(pooled);
    if (logit_override) {
        spatial_logits = torch::full_like(spatial_logits, *logit_override);
    }
    return xc * torch::sigmoid(spatial_logits);
}

PolicyNetImpl::PolicyNetImpl(int in_channels, const PolicyArch& arch, bool use_cbam)
    : in_channels_(in_channels), use_cbam_(use_cbam)
{
    if (arch.widths.empty()) {
        throw ContractViolation("policy trunk needs at least one conv block");
    }
    int c = in_channels;
    for (std::size_t i = 0; i < arch.widths.size(); ++i) {
        const int w = arch.widths[i];
        convs_.push_back(register_module("conv" + std::to_string(i),
                                         torch::nn::Conv2d(torch::nn::Conv2dOptions(c, w, 3).padding(1))));
        if (use_cbam) {
            cbams_.push_back(register_module("cbam" + std::to_string(i), Cbam(w, arch.reduction)));
        }
        c = w;
    }
    fc1_ = register_module("fc1", torch::nn::Linear(c * kObsSide * kObsSide, arch.hidden));
    fc2_ = register_module("fc2", torch::nn::Linear(arch.hidden, kNumActions));
}

torch::Tensor PolicyNetImpl::forward(const torch::Tensor& x)
{
    if (x.dim() != 4 || x.size(1) != in_channels_) {
        throw ContractViolation("policy network expects [B, " + std::to_string(in_channels_) + ", 11, 11] input");
    }
    auto h = x;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        h = torch::relu(convs_[i]->forward(h));
        if (use_cbam_) {
            h = cbams_[i]->forward(h);
        }
    }
    return fc2_->forward(torch::relu(fc1_->forward(h.flatten(1))));
}

torch::Tensor stack_observations(std::span<const ObservationStack> obs)
{
    if (obs.empty()) {
        throw ContractViolation("stack_observations needs at least one observation");
    }
    const int c = obs.front().channels;
    auto out = torch::empty({static_cast<std::int64_t>(obs.size()), c, kObsSide, kObsSide}, torch::kFloat32);
    float* dst = out.data_ptr<float>();
    for (const auto& o : obs) {
        if (o.channels != c) {
            throw ContractViolation("stack_observations: mixed channel counts");
        }
        dst = std::copy(o.data.begin(), o.data.end(), dst);
    }
    return out;
}

torch::Tensor stack_masks(std::span<const ActionMask> masks)
{
    auto out = torch::empty({static_cast<std::int64_t>(masks.size()), kNumActions}, torch::kBool);
    auto acc = out.accessor<bool, 2>();
    for (std::size_t i = 0; i < masks.size(); ++i) {
        for (int a = 0; a < kNumActions; ++a) {
            acc[static_cast<std::int64_t>(i)][a] = masks[i][static_cast<std::size_t>(a)];
        }
    }
    return out;
}

namespace {

torch::Tensor apply_mask(const torch::Tensor& logits, const torch::Tensor& mask)
{
    if (logits.sizes() != mask.sizes()) {
        throw ContractViolation("logits and mask shapes differ");
    }
    if (!mask.any(-1).all().item<bool>()) {
        throw ContractViolation("action mask has no valid action");
    }
    return logits.masked_fill(mask.logical_not(), -std::numeric_limits<double>::infinity());
}

} // namespace

torch::Tensor masked_log_softmax(const torch::Tensor& logits, const torch::Tensor& mask)
{
    return torch::log_softmax(apply_mask(logits, mask), -1);
}

torch::Tensor masked_softmax(const torch::Tensor& logits, const torch::Tensor& mask)
{
    return torch::softmax(apply_mask(logits, mask), -1);
}

std::vector<ActionDistribution> actor_distributions(PolicyNet& actor, std::span<const ObservationStack> obs,
                                                    std::span<const ActionMask> masks)
{
    if (obs.size() != masks.size()) {
        throw ContractViolation("one mask per observation required");
    }
    torch::NoGradGuard no_grad;
    const auto probs = masked_softmax(actor->forward(stack_observations(obs)), stack_masks(masks))
                           .to(torch::kFloat64)
                           .contiguous();
    std::vector<ActionDistribution> out(obs.size());
    const double* p = probs.data_ptr<double>();
    for (auto& d : out) {
        std::copy(p, p + kNumActions, d.begin());
        p += kNumActions;
    }
    return out;
}

ActionDistribution actor_distribution(PolicyNet& actor, const ObservationStack& obs, const ActionMask& mask)
{
    return actor_distributions(actor, std::span(&obs, 1), std::span(&mask, 1)).front();
}

std::array<double, kNumActions> critic_values(PolicyNet& critic, const ObservationStack& obs)
{
    torch::NoGradGuard no_grad;
    const auto q = critic->forward(stack_observations(std::span(&obs, 1))).to(torch::kFloat64).contiguous();
    std::array<double, kNumActions> out{};
    std::copy(q.data_ptr<double>(), q.data_ptr<double>() + kNumActions, out.begin());
    return out;
}

Action select_action(const ActionDistribution& dist, SelectMode mode, Rng& rng)
{
    int last_positive = -1;
    for (int a = 0; a < kNumActions; ++a) {
        if (dist[static_cast<std::size_t>(a)] > 0.0) {
            last_positive = a;
        }
    }
    if (last_positive < 0) {
        throw ContractViolation("action distribution has no positive entry");
    }
    if (mode == SelectMode::greedy) {
        const auto it = std::max_element(dist.begin(), dist.end());
        return action_from_index(static_cast<int>(it - dist.begin()));
    }
    double total = 0.0;
    for (double p : dist) {
        total += p;
    }
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    double cum = 0.0;
    for (int a = 0; a < kNumActions; ++a) {
        const double p = dist[static_cast<std::size_t>(a)];
        if (p <= 0.0) {
            continue;
        }
        cum += p;
        if (u < cum) {
            return action_from_index(a);
        }
    }
    return action_from_index(last_positive);
}

} // namespace uavipp
