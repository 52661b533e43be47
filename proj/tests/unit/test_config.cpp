#include "uavipp/config.hpp"
#include "uavipp/errors.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace uavipp;

TEST(Config, DefaultsRoundTrip)
{
    const RunConfig c;
    EXPECT_EQ(from_ini(to_ini(c)), c);
}

TEST(Config, RandomConfigsRoundTripBitExactly)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        RunConfig c;
        c.seed = rng();
        c.env.synthetic.seed = rng();
        c.env.synthetic.shape_count = 1 + static_cast<int>(rng() % 6);
        c.episode.sensor_top_accuracy = 0.9 + 0.1 * u(rng);
        c.episode.sensor_decay = 0.1 * u(rng);
        c.reward.alpha = 0.1 + 20.0 * u(rng);
        c.reward.beta = -u(rng);
        c.channel = {0.5 + 0.3 * u(rng), 1.0, u(rng) / 10.0, NoiseLevel::custom};
        c.sendfuse.lr = u(rng) * 1e-2;
        c.sendfuse.fusion.alpha = u(rng);
        c.sendfuse.fusion.beta = 1.0 - c.sendfuse.fusion.alpha;
        if (std::abs(c.sendfuse.fusion.alpha + c.sendfuse.fusion.beta - 1.0) > 1e-12) {
            continue;
        }
        c.train.lr_actor = u(rng) * 1e-3;
        c.train.lr_critic = u(rng) * 1e-3;
        c.train.gamma = u(rng);
        c.train.lambda = u(rng);
        c.train.return_mode = trial % 2 ? ReturnMode::lambda : ReturnMode::monte_carlo;
        c.train.critic_steps = 1 + trial % 4;
        c.train.entropy_coef = u(rng) * 0.1;
        c.train.normalize_advantage = trial % 3 == 0;
        c.train.ablate = static_cast<Ablation>(trial % 4);
        c.train.arch.widths = {8 + trial % 5, 16};
        c.episode.start_poses = trial % 3 ? "corners" : "1,2,1;3,4,2";
        EXPECT_EQ(from_ini(to_ini(c)), c) << to_ini(c);
    }
}

TEST(Config, FileRoundTrip)
{
    RunConfig c;
    c.seed = 12345;
    c.train.episodes = 300;
    const auto path = std::filesystem::temp_directory_path() / "uavipp_config_test" / "run.ini";
    save_config(c, path);
    EXPECT_EQ(load_config(path), c);
}

TEST(Config, UnknownKeyRejected)
{
    EXPECT_THROW(from_ini("[train]\nepisodez = 3\n"), ConfigError);
    EXPECT_THROW(from_ini("[nosuch]\nx = 1\n"), ConfigError);
}

TEST(Config, MalformedValueRejected)
{
    EXPECT_THROW(from_ini("[train]\nepisodes = lots\n"), ConfigError);
    EXPECT_THROW(from_ini("[train]\nlr_actor = 1e-5x\n"), ConfigError);
    EXPECT_THROW(from_ini("[channel]\nlevel = deafening\n"), ConfigError);
    EXPECT_THROW(from_ini("[train]\nablate = everything\n"), ConfigError);
}

TEST(Config, InvalidValuesRejected)
{
    EXPECT_THROW(from_ini("[train]\ngamma = 1.5\n"), ConfigError);
    EXPECT_THROW(from_ini("[sendfuse]\nfusion_alpha = 0.7\n"), ConfigError);
    EXPECT_THROW(from_ini("[sendfuse]\nw_mse = 0\nw_mae = 0\nw_ssim = 0\n"), ConfigError);
    EXPECT_THROW(from_ini("[channel]\nalpha_low = 0\n"), ConfigError);
    EXPECT_THROW(from_ini("[train]\ncritic_steps = 0\n"), ConfigError);
    EXPECT_THROW(from_ini("[train]\nentropy_coef = -0.1\n"), ConfigError);
}

TEST(Config, PartialFileKeepsDefaults)
{
    const auto c = from_ini("[channel]\nlevel = loud\n[run]\nseed = 9\n");
    EXPECT_EQ(c.channel, ChannelParams::for_level(NoiseLevel::loud));
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.train, TrainConfig{});
}

TEST(Config, ExplicitChannelKeysOverrideLevel)
{
    const auto c = from_ini("[channel]\nlevel = moderate\nsigma = 0.05\n");
    EXPECT_EQ(c.channel.sigma, 0.05);
    EXPECT_EQ(c.channel.alpha_low, 0.8);
    EXPECT_EQ(c.channel.level, NoiseLevel::custom);
}

TEST(Config, PaperTrainingDefaults)
{
    const TrainConfig t;
    EXPECT_EQ(t.episodes, 1200);
    EXPECT_EQ(t.batch_size, 512);
    EXPECT_EQ(t.lr_actor, 1e-5);
    EXPECT_EQ(t.lr_critic, 1e-4);
    EXPECT_EQ(t.gamma, 0.99);
    EXPECT_EQ(t.lambda, 0.8);
    const RewardParams r;
    EXPECT_EQ(r.alpha, 10.0);
    EXPECT_EQ(r.beta, -0.17);
}

TEST(Config, FormatDoubleShortest)
{
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(1e-5), "1e-05");
    const double x = 0.1 + 0.2;
    EXPECT_EQ(std::stod(format_double(x)), x);
}

TEST(Config, StartPoses)
{
    EXPECT_EQ(parse_start_poses("corners", 10, 10, 2), (std::vector<UavPose>{{0, 0, 1}, {9, 0, 1}}));
    EXPECT_EQ(parse_start_poses("1,2,3;4,5,1", 10, 10, 2), (std::vector<UavPose>{{1, 2, 3}, {4, 5, 1}}));
    EXPECT_THROW(parse_start_poses("1,2", 10, 10, 1), ConfigError);
}

TEST(Config, BuildEpisodeConfigMatchesTruth)
{
    RunConfig c;
    const auto truth = build_ground_truth(c.env);
    const auto ec = build_episode_config(c, truth);
    EXPECT_EQ(ec.width, 30);
    EXPECT_EQ(ec.n_uavs, 4);
    EXPECT_EQ(ec.budget, 15);
    EXPECT_EQ(ec.start_poses.size(), 4u);
    EXPECT_EQ(ec.reward_beta, -0.17);
}

TEST(Config, AblationNames)
{
    EXPECT_EQ(variant_name(Ablation::none), "Both");
    EXPECT_EQ(variant_name(Ablation::cbam), "Fusion");
    EXPECT_EQ(variant_name(Ablation::fusion), "CBAM");
    EXPECT_EQ(variant_name(Ablation::both), "Base");
    EXPECT_TRUE(uses_cbam(Ablation::fusion));
    EXPECT_FALSE(uses_sendfuse(Ablation::fusion));
}
