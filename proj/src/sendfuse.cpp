#include "uavipp/sendfuse.hpp"

#include "uavipp/checkpoint.hpp"
#include "uavipp/envgen.hpp"
#include "uavipp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <fstream>
#include <random>
#include <sstream>

namespace uavipp {

namespace F = torch::nn::functional;

ConvReluImpl::ConvReluImpl(int in_channels, int out_channels)
    : conv_(register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).padding(1))))
{
}

torch::Tensor ConvReluImpl::forward(const torch::Tensor& x) { return torch::relu(conv_->forward(x)); }

SenDFuseNetImpl::SenDFuseNetImpl(const SendfuseArch& arch) : arch_(arch)
{
    const int w0 = arch.width0, w1 = arch.width1;
    stem_ = register_module("stem", ConvRelu(1, w0));
    enc0_ = register_module("enc0", ConvRelu(w0, w0));
    enc1_ = register_module("enc1", ConvRelu(w0, w1));
    enc1b_ = register_module("enc1b", ConvRelu(w1, w1));
    enc2_ = register_module("enc2", ConvRelu(w1, w1));
    enc2b_ = register_module("enc2b", ConvRelu(w1, w1));
    dec01_ = register_module("dec01", ConvRelu(w0 + w1, w0));
    dec11_ = register_module("dec11", ConvRelu(2 * w1, w1));
    dec02_ = register_module("dec02", ConvRelu(2 * w0 + w1, w0));
    head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(w0, 1, 1)));
}

FeatureMaps SenDFuseNetImpl::encode(const torch::Tensor& image)
{
    if (image.dim() != 4 || image.size(1) != 1 || image.size(2) % 4 != 0 || image.size(3) % 4 != 0) {
        throw ContractViolation("SenDFuse expects [B, 1, H, W] input with H and W divisible by 4");
    }
    FeatureMaps f;
    auto e0 = enc0_->forward(stem_->forward(image));
    auto e1 = enc1b_->forward(enc1_->forward(F::max_pool2d(e0, F::MaxPool2dFuncOptions(2))));
    auto e2 = enc2b_->forward(enc2_->forward(F::max_pool2d(e1, F::MaxPool2dFuncOptions(2))));
    f.scales = {e0, e1, e2};
    return f;
}

namespace {

torch::Tensor up2(const torch::Tensor& x)
{
    return F::interpolate(x, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
}

} // namespace

torch::Tensor SenDFuseNetImpl::decode(const FeatureMaps& features)
{
    if (features.scales.size() != 3 || features.scales[0].size(1) != arch_.width0 ||
        features.scales[1].size(1) != arch_.width1 || features.scales[2].size(1) != arch_.width1) {
        throw ContractViolation("SenDFuse decode: feature maps do not match the architecture");
    }
    const auto& e0 = features.scales[0];
    const auto& e1 = features.scales[1];
    const auto& e2 = features.scales[2];
    auto x01 = dec01_->forward(torch::cat({e0, up2(e1)}, 1));
    auto x11 = dec11_->forward(torch::cat({e1, up2(e2)}, 1));
    auto x02 = dec02_->forward(torch::cat({e0, x01, up2(x11)}, 1));
    return torch::sigmoid(head_->forward(x02));
}

torch::Tensor channel_attention_weights(const torch::Tensor& stack)
{
    const auto pooled = stack.mean({-2, -1}, /*keepdim=*/true);
    return torch::softmax(pooled, 0);
}

torch::Tensor channel_attention(const torch::Tensor& stack) { return channel_attention_weights(stack) * stack; }

torch::Tensor spatial_attention_weights(const torch::Tensor& stack)
{
    const auto l1 = stack.abs().sum(-3, /*keepdim=*/true);
    return torch::softmax(l1, 0);
}

torch::Tensor spatial_attention(const torch::Tensor& stack) { return spatial_attention_weights(stack) * stack; }

torch::Tensor fuse(const torch::Tensor& stack, const FusionWeights& weights)
{
    weights.validate();
    const auto mixed = weights.alpha * channel_attention(stack) + weights.beta * spatial_attention(stack);
    return mixed.sum(0);
}

FeatureMaps fuse(const std::vector<FeatureMaps>& sources, const FusionWeights& weights)
{
    if (sources.empty()) {
        throw ContractViolation("fuse needs at least one source");
    }
    FeatureMaps out;
    for (std::size_t s = 0; s < sources.front().scales.size(); ++s) {
        std::vector<torch::Tensor> per_source;
        for (const auto& src : sources) {
            per_source.push_back(src.scales[s]);
        }
        out.scales.push_back(fuse(torch::stack(per_source), weights));
    }
    return out;
}

namespace {

torch::Tensor gaussian_window(const torch::Tensor& like)
{
    constexpr int kSize = 11;
    constexpr double kSigma = 1.5;
    auto coords = torch::arange(kSize, like.options()) - (kSize - 1) / 2.0;
    auto g = torch::exp(-(coords * coords) / (2.0 * kSigma * kSigma));
    g = g / g.sum();
    return torch::outer(g, g).view({1, 1, kSize, kSize});
}

} // namespace

torch::Tensor ssim_per_image(const torch::Tensor& x, const torch::Tensor& y)
{
    if (x.sizes() != y.sizes() || x.dim() != 4 || x.size(1) != 1) {
        throw ContractViolation("ssim expects two [B, 1, H, W] tensors of equal shape");
    }
    if (x.size(2) < 11 || x.size(3) < 11) {
        throw ContractViolation("ssim needs images of at least 11x11");
    }
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    const auto w = gaussian_window(x);
    auto filt = [&](const torch::Tensor& t) { return F::conv2d(t, w); };
    const auto mu_x = filt(x);
    const auto mu_y = filt(y);
    const auto var_x = filt(x * x) - mu_x * mu_x;
    const auto var_y = filt(y * y) - mu_y * mu_y;
    const auto cov = filt(x * y) - mu_x * mu_y;
    const auto map = ((2.0 * mu_x * mu_y + kC1) * (2.0 * cov + kC2)) /
                     ((mu_x * mu_x + mu_y * mu_y + kC1) * (var_x + var_y + kC2));
    return map.mean({1, 2, 3});
}

torch::Tensor ssim(const torch::Tensor& x, const torch::Tensor& y) { return ssim_per_image(x, y).mean(); }

LossTerms sendfuse_loss_terms(const torch::Tensor& output, const torch::Tensor& target, const FusionLossWeights& w)
{
    LossTerms t;
    t.mse = F::mse_loss(output, target);
    t.mae = F::l1_loss(output, target);
    t.ssim = ssim(output, target);
    t.total = w.w_mse * t.mse + w.w_mae * t.mae + w.w_ssim * (1.0 - t.ssim);
    return t;
}

torch::Tensor sendfuse_loss(const torch::Tensor& output, const torch::Tensor& target, const FusionLossWeights& w)
{
    return sendfuse_loss_terms(output, target, w).total;
}

torch::Tensor corrupt_tensor(const torch::Tensor& images, const ChannelParams& params)
{
    if (params.is_identity()) {
        return images;
    }
    const auto alpha = torch::rand_like(images) * (params.alpha_high - params.alpha_low) + params.alpha_low;
    auto out = alpha * images;
    if (params.sigma > 0.0) {
        out = out + torch::randn_like(images) * params.sigma;
    }
    return out.clamp(0.0, 1.0);
}

SendfuseModel make_sendfuse(const SendfuseSettings& settings, std::uint64_t seed)
{
    torch::manual_seed(seed);
    SendfuseModel m;
    m.arch = {settings.patch_size, settings.width0, settings.width1};
    m.net = SenDFuseNet(m.arch);
    m.fusion = settings.fusion;
    m.loss = settings.loss;
    return m;
}

torch::Tensor make_patch_dataset(int count, int side, std::uint64_t seed)
{
    if (count < 1 || side < 8) {
        throw ContractViolation("make_patch_dataset needs count >= 1 and side >= 8");
    }
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    constexpr int kPool = 32;
    const int env_side = side + 16;
    std::vector<GroundTruthGrid> pool;
    for (int k = 0; k < kPool; ++k) {
        SyntheticEnvSpec spec;
        spec.width = env_side;
        spec.height = env_side;
        spec.shape_count = 1 + static_cast<int>(rng() % 4);
        spec.seed = rng();
        pool.push_back(generate_star_blobs(spec));
    }
    SensorModel sensor;
    auto data = torch::full({count, 1, side, side}, static_cast<double>(kUnknownFill), torch::kFloat32);
    auto acc = data.accessor<float, 4>();
    for (int i = 0; i < count; ++i) {
        const auto& truth = pool[rng() % kPool];
        const int ox = static_cast<int>(rng() % static_cast<unsigned>(env_side - side + 1));
        const int oy = static_cast<int>(rng() % static_cast<unsigned>(env_side - side + 1));
        const double mode = u(rng);
        if (mode < 0.1) {
            continue;  // nothing observed
        }
        if (mode < 0.2) {
            for (int y = 0; y < side; ++y) {
                for (int x = 0; x < side; ++x) {
                    acc[i][0][y][x] = truth.label(ox + x, oy + y);
                }
            }
            continue;
        }
        const int n_footprints = mode < 0.75 ? 1 : 2 + static_cast<int>(rng() % 3);
        for (int f = 0; f < n_footprints; ++f) {
            // Centres may sit just off-canvas so clipped patches occur too.
            const UavPose pose{ox - 2 + static_cast<int>(rng() % static_cast<unsigned>(side + 4)),
                               oy - 2 + static_cast<int>(rng() % static_cast<unsigned>(side + 4)),
                               1 + static_cast<int>(rng() % 3)};
            UavPose clamped = pose;
            clamped.x = std::clamp(pose.x, 0, env_side - 1);
            clamped.y = std::clamp(pose.y, 0, env_side - 1);
            const auto reading = sense(truth, clamped, sensor, rng);
            for (const auto& obs : reading.cells) {
                const int x = obs.cell.x - ox, y = obs.cell.y - oy;
                if (x >= 0 && y >= 0 && x < side && y < side) {
                    acc[i][0][y][x] = obs.observed;
                }
            }
        }
    }
    return data;
}

std::vector<EpochLoss> pretrain(SendfuseModel& model, const torch::Tensor& clean, const PretrainOptions& options)
{
    if (clean.dim() != 4 || clean.size(0) < 1) {
        throw ContractViolation("pretrain needs a non-empty [N, 1, H, W] dataset");
    }
    std::vector<EpochLoss> trace;
    if (options.epochs <= 0) {
        return trace;
    }
    torch::manual_seed(options.seed);
    model.net->train();
    torch::optim::Adam opt(model.net->parameters(), torch::optim::AdamOptions(options.lr));
    const auto n = clean.size(0);
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        const auto order = torch::randperm(n, torch::kLong);
        EpochLoss sum;
        sum.epoch = epoch;
        for (std::int64_t start = 0; start < n; start += options.batch_size) {
            const auto idx = order.slice(0, start, std::min<std::int64_t>(start + options.batch_size, n));
            const auto target = clean.index_select(0, idx);
            const auto noisy = corrupt_tensor(target, options.channel);
            opt.zero_grad();
            const auto terms = sendfuse_loss_terms(model.net->forward(noisy), target, options.loss);
            const double total = terms.total.item<double>();
            if (!std::isfinite(total)) {
                std::ostringstream msg;
                msg << "SenDFuse pretraining diverged at epoch " << epoch << ", batch offset " << start
                    << ": mse=" << terms.mse.item<double>() << " mae=" << terms.mae.item<double>()
                    << " ssim=" << terms.ssim.item<double>() << " lr=" << options.lr;
                throw TrainingDiverged(msg.str());
            }
            terms.total.backward();
            opt.step();
            const double b = static_cast<double>(idx.size(0));
            sum.mse += terms.mse.item<double>() * b;
            sum.mae += terms.mae.item<double>() * b;
            sum.ssim += terms.ssim.item<double>() * b;
            sum.total += total * b;
        }
        const double nn = static_cast<double>(n);
        sum.mse /= nn;
        sum.mae /= nn;
        sum.ssim /= nn;
        sum.total /= nn;
        trace.push_back(sum);
        if (options.on_epoch) {
            options.on_epoch(sum);
        }
    }
    model.net->eval();
    model.epochs_trained += options.epochs;
    model.trained = true;
    model.channel = options.channel;
    model.loss = options.loss;
    return trace;
}

void write_loss_trace(const std::filesystem::path& path, const std::vector<EpochLoss>& trace)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    out << "epoch,mse,mae,ssim,total\n";
    char buf[160];
    for (const auto& e : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.8f,%.8f,%.8f,%.8f\n", e.epoch, e.mse, e.mae, e.ssim, e.total);
        out << buf;
    }
}

FusedOutput run(SendfuseModel& model, const torch::Tensor& stack)
{
    if (stack.dim() != 4 && stack.dim() != 5) {
        throw ContractViolation("SenDFuse run expects [n, 1, H, W] or [n, R, 1, H, W]");
    }
    if (stack.size(0) < 1) {
        throw ContractViolation("SenDFuse run needs at least one source");
    }
    torch::NoGradGuard no_grad;
    model.net->eval();
    const bool single = stack.dim() == 4;
    const auto s = single ? stack.unsqueeze(1) : stack;  // [n, R, 1, H, W]
    const auto n = s.size(0), r = s.size(1);
    const auto flat = s.reshape({n * r, 1, s.size(3), s.size(4)});
    const auto enc = model.net->encode(flat);
    FeatureMaps fused;
    for (const auto& scale : enc.scales) {
        const auto per_source = scale.reshape({n, r, scale.size(1), scale.size(2), scale.size(3)});
        fused.scales.push_back(fuse(per_source, model.fusion));
    }
    auto out = model.net->decode(fused);
    return {single ? out.squeeze(0) : out, !model.trained};
}

DenoiseScore evaluate_denoising(SendfuseModel& model, const torch::Tensor& clean, const ChannelParams& channel,
                                std::uint64_t seed)
{
    torch::NoGradGuard no_grad;
    torch::manual_seed(seed);
    model.net->eval();
    const auto noisy = corrupt_tensor(clean, channel);
    const auto out = model.net->forward(noisy);
    return {ssim_per_image(out, clean).mean().item<double>(), ssim_per_image(noisy, clean).mean().item<double>()};
}

FusionScore evaluate_fusion(SendfuseModel& model, const torch::Tensor& clean, const ChannelParams& channel,
                            int noisy_copies, std::uint64_t seed)
{
    if (noisy_copies < 1) {
        throw ContractViolation("evaluate_fusion needs at least one noisy copy");
    }
    torch::NoGradGuard no_grad;
    torch::manual_seed(seed);
    std::vector<torch::Tensor> sources = {clean};
    torch::Tensor best;
    for (int k = 0; k < noisy_copies; ++k) {
        sources.push_back(corrupt_tensor(clean, channel));
        const auto s = ssim_per_image(sources.back(), clean);
        best = k == 0 ? s : torch::maximum(best, s);
    }
    FusionScore score;
    score.ssim_fused = ssim_per_image(run(model, torch::stack(sources)).image, clean).mean().item<double>();
    score.ssim_best_single = best.mean().item<double>();
    score.ssim_clean_recon = ssim_per_image(run(model, clean.unsqueeze(0)).image, clean).mean().item<double>();
    return score;
}

void append_sendfuse(Checkpoint& ckpt, const std::string& prefix, const SendfuseModel& model)
{
    const std::map<std::string, std::string> meta = {
        {"patch_size", std::to_string(model.arch.patch_size)},
        {"width0", std::to_string(model.arch.width0)},
        {"width1", std::to_string(model.arch.width1)},
        {"fusion_alpha", format_double(model.fusion.alpha)},
        {"fusion_beta", format_double(model.fusion.beta)},
        {"w_mse", format_double(model.loss.w_mse)},
        {"w_mae", format_double(model.loss.w_mae)},
        {"w_ssim", format_double(model.loss.w_ssim)},
        {"channel_level", std::string(to_string(model.channel.level))},
        {"channel_alpha_low", format_double(model.channel.alpha_low)},
        {"channel_alpha_high", format_double(model.channel.alpha_high)},
        {"channel_sigma", format_double(model.channel.sigma)},
        {"epochs_trained", std::to_string(model.epochs_trained)},
        {"trained", model.trained ? "1" : "0"}};
    for (const auto& [k, v] : meta) {
        ckpt.meta[prefix + k] = v;
    }
    append_module(ckpt, prefix + "net.", *model.net);
}

SendfuseModel read_sendfuse(const Checkpoint& c, const std::string& prefix)
{
    SendfuseModel m;
    m.arch = {c.get_int(prefix + "patch_size"), c.get_int(prefix + "width0"), c.get_int(prefix + "width1")};
    m.net = SenDFuseNet(m.arch);
    load_module(c, prefix + "net.", *m.net);
    m.net->eval();
    m.fusion = {c.get_double(prefix + "fusion_alpha"), c.get_double(prefix + "fusion_beta")};
    m.loss = {c.get_double(prefix + "w_mse"), c.get_double(prefix + "w_mae"), c.get_double(prefix + "w_ssim")};
    m.channel = {c.get_double(prefix + "channel_alpha_low"), c.get_double(prefix + "channel_alpha_high"),
                 c.get_double(prefix + "channel_sigma"), noise_level_from_string(c.get(prefix + "channel_level"))};
    m.epochs_trained = c.get_int(prefix + "epochs_trained");
    m.trained = c.get(prefix + "trained") == "1";
    return m;
}

void save_sendfuse(const std::filesystem::path& path, const SendfuseModel& model)
{
    Checkpoint c;
    c.kind = "sendfuse";
    append_sendfuse(c, "", model);
    write_checkpoint(path, c);
}

SendfuseModel load_sendfuse(const std::filesystem::path& path)
{
    return read_sendfuse(read_checkpoint(path, "sendfuse"), "");
}

torch::Tensor image_to_tensor(const Image& image)
{
    return torch::from_blob(const_cast<float*>(image.pixels.data()), {1, image.height, image.width}, torch::kFloat32)
        .clone();
}

Image tensor_to_image(const torch::Tensor& t)
{
    const auto c = t.detach().to(torch::kFloat32).contiguous().reshape({t.size(-2), t.size(-1)});
    Image img(static_cast<int>(c.size(1)), static_cast<int>(c.size(0)));
    std::memcpy(img.pixels.data(), c.data_ptr<float>(), img.pixels.size() * sizeof(float));
    return img;
}

} // namespace uavipp
