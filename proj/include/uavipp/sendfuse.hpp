#pragma once

#include "uavipp/config.hpp"
#include "uavipp/env.hpp"
#include "uavipp/grid.hpp"
#include "uavipp/noise_channel.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace uavipp {

struct SendfuseArch {
    int patch_size = 32;
    int width0 = 16;
    int width1 = 32;
    friend bool operator==(const SendfuseArch&, const SendfuseArch&) = default;
};

// Encoder outputs at full, 1/2 and 1/4 resolution; the last is the bottleneck.
struct FeatureMaps {
    std::vector<torch::Tensor> scales;

    const torch::Tensor& bottleneck() const { return scales.back(); }
};

class ConvReluImpl : public torch::nn::Module {
public:
    ConvReluImpl(int in_channels, int out_channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(ConvRelu);

// Nested encoder/decoder with dense skip paths. Input [B, 1, H, W] in [0, 1].
class SenDFuseNetImpl : public torch::nn::Module {
public:
    explicit SenDFuseNetImpl(const SendfuseArch& arch = {});

    FeatureMaps encode(const torch::Tensor& image);
    // Output [B, 1, H, W] in [0, 1].
    torch::Tensor decode(const FeatureMaps& features);
    torch::Tensor forward(const torch::Tensor& image) { return decode(encode(image)); }

    const SendfuseArch& arch() const { return arch_; }

private:
    SendfuseArch arch_;
    ConvRelu stem_{nullptr};
    ConvRelu enc0_{nullptr}, enc1_{nullptr}, enc2_{nullptr};
    ConvRelu enc1b_{nullptr}, enc2b_{nullptr};
    ConvRelu dec01_{nullptr}, dec11_{nullptr}, dec02_{nullptr};
    torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(SenDFuseNet);

// Source axis is dim 0 for all attention functions: stack [n, ..., C, H, W].
// Per-source softmax weights of the globally average-pooled channel values, [n, ..., C, 1, 1].
torch::Tensor channel_attention_weights(const torch::Tensor& stack);
torch::Tensor channel_attention(const torch::Tensor& stack);
// Per-source softmax weights of the channel-vector L1 norm per position, [n, ..., 1, H, W].
torch::Tensor spatial_attention_weights(const torch::Tensor& stack);
torch::Tensor spatial_attention(const torch::Tensor& stack);
// Sum over sources of alpha * C(stack) + beta * S(stack).
torch::Tensor fuse(const torch::Tensor& stack, const FusionWeights& weights);
FeatureMaps fuse(const std::vector<FeatureMaps>& sources, const FusionWeights& weights);

// Mean SSIM over the batch, 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
// C2 = 0.03^2, dynamic range 1, valid convolution. Inputs [B, 1, H, W], H, W >= 11.
torch::Tensor ssim(const torch::Tensor& x, const torch::Tensor& y);
// Per-image SSIM, [B].
torch::Tensor ssim_per_image(const torch::Tensor& x, const torch::Tensor& y);

struct LossTerms {
    torch::Tensor mse, mae, ssim, total;
};

LossTerms sendfuse_loss_terms(const torch::Tensor& output, const torch::Tensor& target, const FusionLossWeights& w);
torch::Tensor sendfuse_loss(const torch::Tensor& output, const torch::Tensor& target, const FusionLossWeights& w);

// Channel corruption applied to a batch of images with the torch generator.
torch::Tensor corrupt_tensor(const torch::Tensor& images, const ChannelParams& params);

struct SendfuseModel {
    SenDFuseNet net{nullptr};
    SendfuseArch arch;
    FusionWeights fusion;
    FusionLossWeights loss;
    ChannelParams channel;
    int epochs_trained = 0;
    bool trained = false;
};

SendfuseModel make_sendfuse(const SendfuseSettings& settings, std::uint64_t seed);

// Synthetic clean canvases resembling the aligned sensor canvases: one or more
// sensor footprints of star-blob ground truth on a 0.5 background, plus dense
// crops. Returns [count, 1, side, side].
torch::Tensor make_patch_dataset(int count, int side, std::uint64_t seed);

struct EpochLoss {
    int epoch = 0;
    double mse = 0.0, mae = 0.0, ssim = 0.0, total = 0.0;
};

struct PretrainOptions {
    int epochs = 12;
    int batch_size = 32;
    double lr = 2e-3;
    ChannelParams channel = ChannelParams::for_level(NoiseLevel::moderate);
    FusionLossWeights loss;
    std::uint64_t seed = 1;
    std::function<void(const EpochLoss&)> on_epoch;
};

// Denoising autoencoder training: corrupt(x) in, clean x as target, fusion off.
// Throws TrainingDiverged when a loss turns non-finite.
std::vector<EpochLoss> pretrain(SendfuseModel& model, const torch::Tensor& clean, const PretrainOptions& options);

void write_loss_trace(const std::filesystem::path& path, const std::vector<EpochLoss>& trace);

struct FusedOutput {
    torch::Tensor image;             // [R, 1, H, W] or [1, H, W]
    bool untrained_warning = false;  // model has never been pretrained
};

// decode(fuse(encode(each source))). `stack` is [n, 1, H, W] for one receiver
// or [n, R, 1, H, W] for R receivers at once; source 0 is the receiver's own canvas.
FusedOutput run(SendfuseModel& model, const torch::Tensor& stack);

struct DenoiseScore {
    double ssim_output = 0.0;
    double ssim_noisy = 0.0;
};

// Held-out denoising quality on `clean` images corrupted with `channel`.
DenoiseScore evaluate_denoising(SendfuseModel& model, const torch::Tensor& clean, const ChannelParams& channel,
                                std::uint64_t seed);

struct FusionScore {
    double ssim_fused = 0.0;        // clean source + noisy copies fused
    double ssim_best_single = 0.0;  // per-image best noisy copy, averaged
    double ssim_clean_recon = 0.0;  // single clean source reconstructed
};

// Fusion quality with source 0 clean and `noisy_copies` independently corrupted copies.
FusionScore evaluate_fusion(SendfuseModel& model, const torch::Tensor& clean, const ChannelParams& channel,
                            int noisy_copies, std::uint64_t seed);

struct Checkpoint;
// Embeds the model (descriptor keys and tensors under `prefix`) in another checkpoint.
void append_sendfuse(Checkpoint& ckpt, const std::string& prefix, const SendfuseModel& model);
SendfuseModel read_sendfuse(const Checkpoint& ckpt, const std::string& prefix);

void save_sendfuse(const std::filesystem::path& path, const SendfuseModel& model);
SendfuseModel load_sendfuse(const std::filesystem::path& path);

torch::Tensor image_to_tensor(const Image& image);
Image tensor_to_image(const torch::Tensor& t);

} // namespace uavipp
