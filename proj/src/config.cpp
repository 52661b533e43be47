#include "uavipp/config.hpp"

#include "uavipp/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace uavipp {

namespace pt = boost::property_tree;

void FusionWeights::validate() const
{
    if (alpha < 0.0 || beta < 0.0 || std::abs(alpha + beta - 1.0) > 1e-12) {
        throw ConfigError("fusion weights must be non-negative and sum to 1");
    }
}

void FusionLossWeights::validate() const
{
    if (w_mse < 0.0 || w_mae < 0.0 || w_ssim < 0.0 || (w_mse == 0.0 && w_mae == 0.0 && w_ssim == 0.0)) {
        throw ConfigError("fusion loss weights must be non-negative and not all zero");
    }
}

std::string_view to_string(ReturnMode mode) { return mode == ReturnMode::lambda ? "lambda" : "monte_carlo"; }

ReturnMode return_mode_from_string(std::string_view s)
{
    if (s == "monte_carlo") return ReturnMode::monte_carlo;
    if (s == "lambda") return ReturnMode::lambda;
    throw ConfigError("unknown return mode '" + std::string(s) + "'");
}

std::string_view to_string(Ablation a)
{
    switch (a) {
    case Ablation::none: return "none";
    case Ablation::cbam: return "cbam";
    case Ablation::fusion: return "fusion";
    case Ablation::both: return "both";
    }
    return "none";
}

Ablation ablation_from_string(std::string_view s)
{
    if (s == "none") return Ablation::none;
    if (s == "cbam") return Ablation::cbam;
    if (s == "fusion") return Ablation::fusion;
    if (s == "both") return Ablation::both;
    throw ConfigError("unknown ablation '" + std::string(s) + "' (expected none, cbam, fusion or both)");
}

std::string_view variant_name(Ablation a)
{
    switch (a) {
    case Ablation::none: return "Both";
    case Ablation::cbam: return "Fusion";
    case Ablation::fusion: return "CBAM";
    case Ablation::both: return "Base";
    }
    return "?";
}

void TrainConfig::validate() const
{
    if (episodes < 0 || batch_size < 1 || checkpoint_every < 1 || critic_steps < 1) {
        throw ConfigError(
            "train: episodes >= 0, batch_size >= 1, critic_steps >= 1 and checkpoint_every >= 1 required");
    }
    if (entropy_coef < 0.0) {
        throw ConfigError("train: entropy_coef must be non-negative");
    }
    if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) {
        throw ConfigError("train: learning rates must be positive");
    }
    if (gamma < 0.0 || gamma > 1.0 || lambda < 0.0 || lambda > 1.0) {
        throw ConfigError("train: gamma and lambda must lie in [0, 1]");
    }
    if (arch.widths.empty() || arch.reduction < 1 || arch.hidden < 1) {
        throw ConfigError("train: invalid policy architecture");
    }
}

void RunConfig::validate() const
{
    if (env.kind != "synthetic" && env.kind != "image") {
        throw ConfigError("env.kind must be 'synthetic' or 'image'");
    }
    if (env.kind == "image" && env.image_path.empty()) {
        throw ConfigError("env.image_path is required for image environments");
    }
    channel.validate();
    sendfuse.fusion.validate();
    sendfuse.loss.validate();
    if (sendfuse.patch_size < 16 || sendfuse.patch_size % 4 != 0) {
        throw ConfigError("sendfuse.patch_size must be a multiple of 4 and >= 16");
    }
    train.validate();
    if (eval.trials < 1) {
        throw ConfigError("eval.trials must be >= 1");
    }
    if (reward.alpha <= 0.0) {
        throw ConfigError("reward.alpha must be positive");
    }
}

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::string join_ints(const std::vector<int>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + std::to_string(v[i]);
    }
    return out;
}

// Reads keys from a ptree and remembers which ones were consumed.
class Reader {
public:
    explicit Reader(const pt::ptree& tree) : tree_(tree) {}

    std::string str(const std::string& key, const std::string& fallback)
    {
        used_.insert(key);
        return tree_.get<std::string>(key, fallback);
    }

    template <typename T>
    T number(const std::string& key, T fallback)
    {
        used_.insert(key);
        const auto raw = tree_.get_optional<std::string>(key);
        if (!raw) {
            return fallback;
        }
        T value{};
        const char* begin = raw->data();
        const char* end = begin + raw->size();
        const auto res = std::from_chars(begin, end, value);
        if (res.ec != std::errc{} || res.ptr != end) {
            throw ConfigError("config key '" + key + "': cannot parse '" + *raw + "'");
        }
        return value;
    }

    bool boolean(const std::string& key, bool fallback)
    {
        const std::string v = str(key, fallback ? "true" : "false");
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
    }

    void reject_unknown() const
    {
        for (const auto& [section, keys] : tree_) {
            if (keys.empty()) {
                throw ConfigError("config: key '" + section + "' outside of a section");
            }
            for (const auto& [key, value] : keys) {
                if (!used_.count(section + "." + key)) {
                    throw ConfigError("config: unknown key '" + section + "." + key + "'");
                }
            }
        }
    }

private:
    const pt::ptree& tree_;
    std::set<std::string> used_;
};

std::vector<int> parse_ints(const std::string& text, const std::string& key)
{
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        int v = 0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc{} || res.ptr != item.data() + item.size()) {
            throw ConfigError("config key '" + key + "': bad integer list '" + text + "'");
        }
        out.push_back(v);
    }
    return out;
}

} // namespace

std::string to_ini(const RunConfig& c)
{
    pt::ptree t;
    const auto d = [](double v) { return format_double(v); };
    t.put("run.seed", std::to_string(c.seed));

    t.put("env.kind", c.env.kind);
    t.put("env.width", std::to_string(c.env.synthetic.width));
    t.put("env.height", std::to_string(c.env.synthetic.height));
    t.put("env.shapes", std::to_string(c.env.synthetic.shape_count));
    t.put("env.env_seed", std::to_string(c.env.synthetic.seed));
    t.put("env.image_path", c.env.image_path);
    t.put("env.threshold", std::to_string(c.env.threshold));
    t.put("env.bright_is_valuable", c.env.bright_is_valuable ? "true" : "false");
    t.put("env.mask_path", c.env.mask_path);
    t.put("env.downsample", std::to_string(c.env.downsample));

    t.put("episode.n_uavs", std::to_string(c.episode.n_uavs));
    t.put("episode.budget", std::to_string(c.episode.budget));
    t.put("episode.z_max", std::to_string(c.episode.z_max));
    t.put("episode.start_poses", c.episode.start_poses);
    t.put("episode.sensor_top_accuracy", d(c.episode.sensor_top_accuracy));
    t.put("episode.sensor_decay", d(c.episode.sensor_decay));

    t.put("reward.alpha", d(c.reward.alpha));
    t.put("reward.beta", d(c.reward.beta));

    t.put("channel.level", std::string(to_string(c.channel.level)));
    t.put("channel.alpha_low", d(c.channel.alpha_low));
    t.put("channel.alpha_high", d(c.channel.alpha_high));
    t.put("channel.sigma", d(c.channel.sigma));

    t.put("sendfuse.patch_size", std::to_string(c.sendfuse.patch_size));
    t.put("sendfuse.width0", std::to_string(c.sendfuse.width0));
    t.put("sendfuse.width1", std::to_string(c.sendfuse.width1));
    t.put("sendfuse.epochs", std::to_string(c.sendfuse.epochs));
    t.put("sendfuse.dataset_size", std::to_string(c.sendfuse.dataset_size));
    t.put("sendfuse.batch_size", std::to_string(c.sendfuse.batch_size));
    t.put("sendfuse.lr", d(c.sendfuse.lr));
    t.put("sendfuse.fusion_alpha", d(c.sendfuse.fusion.alpha));
    t.put("sendfuse.fusion_beta", d(c.sendfuse.fusion.beta));
    t.put("sendfuse.w_mse", d(c.sendfuse.loss.w_mse));
    t.put("sendfuse.w_mae", d(c.sendfuse.loss.w_mae));
    t.put("sendfuse.w_ssim", d(c.sendfuse.loss.w_ssim));

    t.put("train.episodes", std::to_string(c.train.episodes));
    t.put("train.batch_size", std::to_string(c.train.batch_size));
    t.put("train.lr_actor", d(c.train.lr_actor));
    t.put("train.lr_critic", d(c.train.lr_critic));
    t.put("train.gamma", d(c.train.gamma));
    t.put("train.lambda", d(c.train.lambda));
    t.put("train.return_mode", std::string(to_string(c.train.return_mode)));
    t.put("train.grad_clip", d(c.train.grad_clip));
    t.put("train.critic_steps", std::to_string(c.train.critic_steps));
    t.put("train.entropy_coef", d(c.train.entropy_coef));
    t.put("train.normalize_advantage", c.train.normalize_advantage ? "true" : "false");
    t.put("train.checkpoint_every", std::to_string(c.train.checkpoint_every));
    t.put("train.ablate", std::string(to_string(c.train.ablate)));
    t.put("train.widths", join_ints(c.train.arch.widths));
    t.put("train.reduction", std::to_string(c.train.arch.reduction));
    t.put("train.hidden", std::to_string(c.train.arch.hidden));

    t.put("eval.trials", std::to_string(c.eval.trials));

    std::ostringstream out;
    pt::write_ini(out, t);
    return out.str();
}

RunConfig from_ini(const std::string& text)
{
    pt::ptree t;
    std::istringstream in(text);
    try {
        pt::read_ini(in, t);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    Reader r(t);
    RunConfig c;
    c.seed = r.number<std::uint64_t>("run.seed", c.seed);

    c.env.kind = r.str("env.kind", c.env.kind);
    c.env.synthetic.width = r.number("env.width", c.env.synthetic.width);
    c.env.synthetic.height = r.number("env.height", c.env.synthetic.height);
    c.env.synthetic.shape_count = r.number("env.shapes", c.env.synthetic.shape_count);
    c.env.synthetic.seed = r.number<std::uint64_t>("env.env_seed", c.env.synthetic.seed);
    c.env.image_path = r.str("env.image_path", c.env.image_path);
    c.env.threshold = r.number("env.threshold", c.env.threshold);
    c.env.bright_is_valuable = r.boolean("env.bright_is_valuable", c.env.bright_is_valuable);
    c.env.mask_path = r.str("env.mask_path", c.env.mask_path);
    c.env.downsample = r.number("env.downsample", c.env.downsample);

    c.episode.n_uavs = r.number("episode.n_uavs", c.episode.n_uavs);
    c.episode.budget = r.number("episode.budget", c.episode.budget);
    c.episode.z_max = r.number("episode.z_max", c.episode.z_max);
    c.episode.start_poses = r.str("episode.start_poses", c.episode.start_poses);
    c.episode.sensor_top_accuracy = r.number("episode.sensor_top_accuracy", c.episode.sensor_top_accuracy);
    c.episode.sensor_decay = r.number("episode.sensor_decay", c.episode.sensor_decay);

    c.reward.alpha = r.number("reward.alpha", c.reward.alpha);
    c.reward.beta = r.number("reward.beta", c.reward.beta);

    const auto level = noise_level_from_string(r.str("channel.level", std::string(to_string(c.channel.level))));
    c.channel = ChannelParams::for_level(level);
    c.channel.alpha_low = r.number("channel.alpha_low", c.channel.alpha_low);
    c.channel.alpha_high = r.number("channel.alpha_high", c.channel.alpha_high);
    c.channel.sigma = r.number("channel.sigma", c.channel.sigma);
    if (level != NoiseLevel::custom && !(c.channel == ChannelParams::for_level(level))) {
        c.channel.level = NoiseLevel::custom;
    }

    c.sendfuse.patch_size = r.number("sendfuse.patch_size", c.sendfuse.patch_size);
    c.sendfuse.width0 = r.number("sendfuse.width0", c.sendfuse.width0);
    c.sendfuse.width1 = r.number("sendfuse.width1", c.sendfuse.width1);
    c.sendfuse.epochs = r.number("sendfuse.epochs", c.sendfuse.epochs);
    c.sendfuse.dataset_size = r.number("sendfuse.dataset_size", c.sendfuse.dataset_size);
    c.sendfuse.batch_size = r.number("sendfuse.batch_size", c.sendfuse.batch_size);
    c.sendfuse.lr = r.number("sendfuse.lr", c.sendfuse.lr);
    c.sendfuse.fusion.alpha = r.number("sendfuse.fusion_alpha", c.sendfuse.fusion.alpha);
    c.sendfuse.fusion.beta = r.number("sendfuse.fusion_beta", c.sendfuse.fusion.beta);
    c.sendfuse.loss.w_mse = r.number("sendfuse.w_mse", c.sendfuse.loss.w_mse);
    c.sendfuse.loss.w_mae = r.number("sendfuse.w_mae", c.sendfuse.loss.w_mae);
    c.sendfuse.loss.w_ssim = r.number("sendfuse.w_ssim", c.sendfuse.loss.w_ssim);

    c.train.episodes = r.number("train.episodes", c.train.episodes);
    c.train.batch_size = r.number("train.batch_size", c.train.batch_size);
    c.train.lr_actor = r.number("train.lr_actor", c.train.lr_actor);
    c.train.lr_critic = r.number("train.lr_critic", c.train.lr_critic);
    c.train.gamma = r.number("train.gamma", c.train.gamma);
    c.train.lambda = r.number("train.lambda", c.train.lambda);
    c.train.return_mode = return_mode_from_string(r.str("train.return_mode", "monte_carlo"));
    c.train.grad_clip = r.number("train.grad_clip", c.train.grad_clip);
    c.train.critic_steps = r.number("train.critic_steps", c.train.critic_steps);
    c.train.entropy_coef = r.number("train.entropy_coef", c.train.entropy_coef);
    c.train.normalize_advantage = r.boolean("train.normalize_advantage", c.train.normalize_advantage);
    c.train.checkpoint_every = r.number("train.checkpoint_every", c.train.checkpoint_every);
    c.train.ablate = ablation_from_string(r.str("train.ablate", "none"));
    c.train.arch.widths = parse_ints(r.str("train.widths", join_ints(c.train.arch.widths)), "train.widths");
    c.train.arch.reduction = r.number("train.reduction", c.train.arch.reduction);
    c.train.arch.hidden = r.number("train.hidden", c.train.arch.hidden);

    c.eval.trials = r.number("eval.trials", c.eval.trials);

    r.reject_unknown();
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return from_ini(buf.str());
}

void save_config(const RunConfig& config, const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << to_ini(config);
}

GroundTruthGrid build_ground_truth(const EnvSource& source)
{
    if (source.kind == "synthetic") {
        return gen_env(source.synthetic);
    }
    LoadEnvOptions opts;
    opts.threshold = source.threshold;
    opts.bright_is_valuable = source.bright_is_valuable;
    opts.downsample = source.downsample;
    if (!source.mask_path.empty()) {
        opts.mask_path = source.mask_path;
    }
    return load_env(source.image_path, opts);
}

std::vector<UavPose> parse_start_poses(const std::string& spec, int width, int height, int n_uavs)
{
    if (spec == "corners") {
        return corner_start_poses(width, height, n_uavs);
    }
    std::vector<UavPose> poses;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ';')) {
        const auto v = parse_ints(item, "episode.start_poses");
        if (v.size() != 3) {
            throw ConfigError("episode.start_poses entries must be x,y,z");
        }
        poses.push_back({v[0], v[1], v[2]});
    }
    return poses;
}

EpisodeConfig build_episode_config(const RunConfig& config, const GroundTruthGrid& truth)
{
    EpisodeConfig ec;
    ec.n_uavs = config.episode.n_uavs;
    ec.budget = config.episode.budget;
    ec.z_max = config.episode.z_max;
    ec.width = truth.width();
    ec.height = truth.height();
    ec.start_poses = parse_start_poses(config.episode.start_poses, ec.width, ec.height, ec.n_uavs);
    ec.reward_alpha = config.reward.alpha;
    ec.reward_beta = config.reward.beta;
    ec.seed = config.seed;
    ec.sensor.top_accuracy = config.episode.sensor_top_accuracy;
    ec.sensor.decay_per_level = config.episode.sensor_decay;
    ec.validate(&truth);
    return ec;
}

} // namespace uavipp
