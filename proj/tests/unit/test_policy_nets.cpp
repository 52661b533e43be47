#include "uavipp/errors.hpp"
#include "uavipp/observation.hpp"
#include "uavipp/policy_nets.hpp"

#include "gradcheck.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace uavipp;

namespace {

PolicyArch tiny_arch()
{
    PolicyArch a;
    a.widths = {4, 6};
    a.reduction = 2;
    a.hidden = 8;
    return a;
}

ObservationStack random_obs(Rng& rng, int channels)
{
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    ObservationStack o(channels);
    for (auto& v : o.data) {
        v = u(rng);
    }
    return o;
}

constexpr ActionMask kAllValid = {true, true, true, true, true, true};

} // namespace

TEST(Cbam, ShapePreserved)
{
    torch::manual_seed(1);
    Cbam cbam(8, 4);
    const auto x = torch::randn({3, 8, 5, 7});
    EXPECT_EQ(cbam->forward(x).sizes(), x.sizes());
}

TEST(Cbam, SaturatedLogitsPassThrough)
{
    torch::manual_seed(1);
    Cbam cbam(4, 2);
    cbam->logit_override = std::numeric_limits<double>::infinity();
    const auto x = torch::randn({2, 4, 5, 5});
    EXPECT_TRUE(torch::equal(cbam->forward(x), x));
}

TEST(Cbam, InputGradientMatchesFiniteDifferences)
{
    torch::manual_seed(2);
    Cbam cbam(4, 2);
    cbam->to(torch::kFloat64);
    auto x = torch::randn({1, 4, 5, 5}, torch::kFloat64).requires_grad_(true);
    const auto w = torch::randn({1, 4, 5, 5}, torch::kFloat64);
    const auto r = uavipp::testing::gradcheck({x}, [&] { return (cbam->forward(x) * w).sum(); }, 8, 3);
    EXPECT_LE(r.max_rel_err, 1e-4);
}

TEST(Cbam, ParameterGradientMatchesFiniteDifferences)
{
    torch::manual_seed(3);
    Cbam cbam(4, 2);
    cbam->to(torch::kFloat64);
    const auto x = torch::randn({2, 4, 5, 5}, torch::kFloat64);
    const auto w = torch::randn({2, 4, 5, 5}, torch::kFloat64);
    const auto r = uavipp::testing::gradcheck(cbam->parameters(), [&] { return (cbam->forward(x) * w).sum(); }, 8, 4);
    EXPECT_LE(r.max_rel_err, 1e-4);
}

TEST(PolicyNet, OutputsSixFiniteValues)
{
    torch::manual_seed(1);
    PolicyNet net(kCriticChannels, PolicyArch{}, true);
    const auto y = net->forward(torch::rand({2, kCriticChannels, kObsSide, kObsSide}));
    EXPECT_EQ(y.sizes(), (std::vector<std::int64_t>{2, kNumActions}));
    EXPECT_TRUE(torch::isfinite(y).all().item<bool>());
}

TEST(PolicyNet, WrongChannelCountRejected)
{
    PolicyNet net(kActorChannels, tiny_arch(), false);
    EXPECT_THROW(net->forward(torch::rand({1, 3, kObsSide, kObsSide})), ContractViolation);
}

TEST(PolicyNet, ActorAndCriticGradientsMatchFiniteDifferences)
{
    for (bool cbam : {true, false}) {
        torch::manual_seed(5);
        PolicyNet actor(kActorChannels, tiny_arch(), cbam);
        PolicyNet critic(kCriticChannels, tiny_arch(), cbam);
        actor->to(torch::kFloat64);
        critic->to(torch::kFloat64);
        const auto ao = torch::rand({3, kActorChannels, kObsSide, kObsSide}, torch::kFloat64);
        const auto co = torch::rand({3, kCriticChannels, kObsSide, kObsSide}, torch::kFloat64);
        const auto mask = torch::ones({3, kNumActions}, torch::kBool);
        const auto taken = torch::tensor({0, 3, 5}, torch::kLong);
        auto actor_obj = [&] {
            return masked_log_softmax(actor->forward(ao), mask).gather(1, taken.view({-1, 1})).sum();
        };
        auto critic_obj = [&] { return critic->forward(co).gather(1, taken.view({-1, 1})).pow(2).mean(); };
        EXPECT_LE(uavipp::testing::gradcheck(actor->parameters(), actor_obj, 6, 7).max_rel_err, 1e-4) << cbam;
        EXPECT_LE(uavipp::testing::gradcheck(critic->parameters(), critic_obj, 6, 8).max_rel_err, 1e-4) << cbam;
    }
}

TEST(PolicyNet, CriticSensitiveToOtherAgentsActions)
{
    torch::manual_seed(6);
    PolicyNet critic(kCriticChannels, tiny_arch(), true);
    Rng rng(1);
    auto obs = random_obs(rng, kCriticChannels);
    const auto q1 = critic_values(critic, obs);
    const float original = obs.at(kJointAction, 3, 4);
    obs.at(kJointAction, 3, 4) = 2.0f / 6.0f;
    EXPECT_NE(q1, critic_values(critic, obs));
    obs.at(kJointAction, 3, 4) = original;
    EXPECT_EQ(q1, critic_values(critic, obs));
}

TEST(ActorDistribution, SumsToOneAndRespectsMask)
{
    torch::manual_seed(7);
    PolicyNet actor(kActorChannels, tiny_arch(), true);
    Rng rng(2);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 100; ++trial) {
        ActionMask mask{};
        for (auto& m : mask) {
            m = coin(rng);
        }
        mask[static_cast<std::size_t>(rng() % kNumActions)] = true;
        const auto d = actor_distribution(actor, random_obs(rng, kActorChannels), mask);
        double sum = 0.0;
        for (int a = 0; a < kNumActions; ++a) {
            sum += d[static_cast<std::size_t>(a)];
            EXPECT_GE(d[static_cast<std::size_t>(a)], 0.0);
            if (!mask[static_cast<std::size_t>(a)]) {
                EXPECT_EQ(d[static_cast<std::size_t>(a)], 0.0);
            }
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(ActorDistribution, SingleValidActionGetsProbabilityOne)
{
    torch::manual_seed(8);
    PolicyNet actor(kActorChannels, tiny_arch(), false);
    Rng rng(3);
    const ActionMask mask = {false, false, false, true, false, false};
    const auto d = actor_distribution(actor, random_obs(rng, kActorChannels), mask);
    EXPECT_EQ(d[3], 1.0);
}

TEST(ActorDistribution, IdenticalObservationsIdenticalDistributions)
{
    torch::manual_seed(9);
    PolicyNet actor(kActorChannels, tiny_arch(), true);
    Rng rng(4);
    const auto obs = random_obs(rng, kActorChannels);
    EXPECT_EQ(actor_distribution(actor, obs, kAllValid), actor_distribution(actor, obs, kAllValid));
}

TEST(ActorDistribution, AllMaskedIsContractViolation)
{
    PolicyNet actor(kActorChannels, tiny_arch(), false);
    Rng rng(5);
    EXPECT_THROW(actor_distribution(actor, random_obs(rng, kActorChannels), ActionMask{}), ContractViolation);
}

TEST(SelectAction, OneHotInBothModes)
{
    Rng rng(1);
    for (int a = 0; a < kNumActions; ++a) {
        ActionDistribution d{};
        d[static_cast<std::size_t>(a)] = 1.0;
        EXPECT_EQ(to_index(select_action(d, SelectMode::greedy, rng)), a);
        for (int k = 0; k < 20; ++k) {
            EXPECT_EQ(to_index(select_action(d, SelectMode::sample, rng)), a);
        }
    }
}

TEST(SelectAction, GreedyUniformPicksIndexZero)
{
    Rng rng(1);
    ActionDistribution d;
    d.fill(1.0 / 6.0);
    EXPECT_EQ(select_action(d, SelectMode::greedy, rng), Action::XPlus);
}

TEST(SelectAction, SampleFrequenciesMatchDistribution)
{
    Rng rng(42);
    const ActionDistribution d = {0.5, 0.5, 0, 0, 0, 0};
    int count0 = 0;
    constexpr int kDraws = 100000;
    for (int k = 0; k < kDraws; ++k) {
        const auto a = select_action(d, SelectMode::sample, rng);
        ASSERT_LT(to_index(a), 2);
        count0 += a == Action::XPlus;
    }
    EXPECT_NEAR(count0 / static_cast<double>(kDraws), 0.5, 0.01);
}

TEST(SelectAction, NeverSamplesZeroProbability)
{
    Rng rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        ActionDistribution d{};
        double sum = 0.0;
        for (auto& p : d) {
            p = u(rng) < 0.5 ? 0.0 : u(rng);
            sum += p;
        }
        if (sum == 0.0) {
            d[0] = sum = 1.0;
        }
        for (auto& p : d) {
            p /= sum;
        }
        EXPECT_GT(d[static_cast<std::size_t>(to_index(select_action(d, SelectMode::sample, rng)))], 0.0);
    }
}

TEST(StackObservations, LayoutMatchesObservationIndexing)
{
    Rng rng(3);
    const std::vector<ObservationStack> obs = {random_obs(rng, kActorChannels), random_obs(rng, kActorChannels)};
    const auto t = stack_observations(obs);
    EXPECT_EQ(t.sizes(), (std::vector<std::int64_t>{2, kActorChannels, kObsSide, kObsSide}));
    EXPECT_EQ(t[1][5][2][9].item<float>(), obs[1].at(5, 2, 9));
}

TEST(ObservationsFromEnvironment, SamePoseSameLocalChannels)
{
    auto cfg = uavipp::testing::small_config(12, 12, 2, 5);
    cfg.start_poses = {{4, 4, 1}, {4, 4, 1}};
    Rng rng(1);
    const auto truth = uavipp::testing::random_truth(rng, 12, 12);
    auto state = reset(cfg, truth);
    const Image canvas(32, 32, 0.5f);
    const auto a = build_actor_obs(state, 0, canvas, 3);
    const auto b = build_actor_obs(state, 1, canvas, 3);
    for (int c = kAltitude; c <= kFusion; ++c) {
        for (int k = 0; k < kObsSide * kObsSide; ++k) {
            EXPECT_EQ(a.plane(c)[static_cast<std::size_t>(k)], b.plane(c)[static_cast<std::size_t>(k)]);
        }
    }
}
