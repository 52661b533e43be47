#include "test_helpers.hpp"

#include "uavipp/errors.hpp"
#include "uavipp/observation.hpp"

#include <gtest/gtest.h>

using namespace uavipp;
using uavipp::testing::random_truth;
using uavipp::testing::small_config;

namespace {

struct Fixture {
    GroundTruthGrid truth;
    EpisodeConfig cfg;
    SwarmState state;
};

Fixture make(int w, int h, std::vector<UavPose> poses, std::uint64_t seed = 1)
{
    Rng rng(seed);
    Fixture f{random_truth(rng, w, h), small_config(w, h, static_cast<int>(poses.size()), 15, seed), {}};
    f.cfg.start_poses = std::move(poses);
    f.state = reset(f.cfg, f.truth);
    return f;
}

Image blank_canvas() { return Image(32, 32, 0.5f); }

} // namespace

TEST(ActorObs, InitialBudgetPlaneIsOne)
{
    auto f = make(30, 30, corner_start_poses(30, 30, 4));
    f.state.poses[0] = {15, 15, 1};
    const auto obs = build_actor_obs(f.state, 0, blank_canvas(), 3);
    for (float v : obs.plane(kBudget)) {
        EXPECT_EQ(v, 1.0f);
    }
}

TEST(ActorObs, DroneIdPlaneIsHalfForSecondOfFour)
{
    auto f = make(30, 30, {{15, 15, 1}, {14, 15, 1}, {0, 0, 1}, {29, 29, 1}});
    const auto obs = build_actor_obs(f.state, 1, blank_canvas(), 3);
    for (float v : obs.plane(kDroneId)) {
        EXPECT_EQ(v, 0.5f);
    }
}

TEST(ActorObs, UniformLocalBeliefGivesUnitEntropy)
{
    auto f = make(30, 30, {{15, 15, 2}});
    const auto obs = build_actor_obs(f.state, 0, blank_canvas(), 3);
    for (float v : obs.plane(kLocalEntropy)) {
        EXPECT_EQ(v, 1.0f);
    }
    for (float v : obs.plane(kLocalBelief)) {
        EXPECT_EQ(v, 0.5f);
    }
}

TEST(ActorObs, BudgetRatioAfterSteps)
{
    auto f = make(20, 20, {{10, 10, 1}});
    f.state.budget_remaining = 6;
    const auto obs = build_actor_obs(f.state, 0, blank_canvas(), 3);
    EXPECT_FLOAT_EQ(obs.at(kBudget, 5, 5), 6.0f / 15.0f);
}

TEST(ActorObs, AltitudeMarksDronesInWindow)
{
    auto f = make(30, 30, {{10, 10, 3}, {12, 9, 2}, {25, 25, 1}});
    const auto obs = build_actor_obs(f.state, 0, blank_canvas(), 3);
    EXPECT_FLOAT_EQ(obs.at(kAltitude, 5, 5), 1.0f);
    EXPECT_FLOAT_EQ(obs.at(kAltitude, 4, 7), 2.0f / 3.0f);
    float total = 0.0f;
    for (float v : obs.plane(kAltitude)) {
        total += v;
    }
    EXPECT_FLOAT_EQ(total, 1.0f + 2.0f / 3.0f);
}

TEST(ActorObs, OutsideGridIsZeroInEveryChannel)
{
    auto f = make(8, 8, {{0, 0, 1}});
    const auto obs = build_actor_obs(f.state, 0, Image(32, 32, 0.7f), 3);
    for (int c = 0; c < kActorChannels; ++c) {
        for (int row = 0; row < kObsSide; ++row) {
            for (int col = 0; col < kObsSide; ++col) {
                if (row < kObsHalf || col < kObsHalf) {
                    EXPECT_EQ(obs.at(c, row, col), 0.0f) << "c=" << c;
                }
            }
        }
    }
    EXPECT_FLOAT_EQ(obs.at(kFusion, 5, 5), 0.7f);
}

TEST(ActorObs, ValuesInUnitInterval)
{
    Rng rng(5);
    auto f = make(12, 12, corner_start_poses(12, 12, 4));
    Environment env(std::make_shared<GroundTruthGrid>(f.truth), f.cfg);
    for (int t = 0; t < 8; ++t) {
        std::vector<Action> joint;
        for (int i = 0; i < 4; ++i) {
            const auto m = env.valid_actions(i);
            std::vector<int> valid;
            for (int k = 0; k < kNumActions; ++k) {
                if (m[k]) valid.push_back(k);
            }
            joint.push_back(action_from_index(valid[rng() % valid.size()]));
        }
        env.step(joint);
        Image fused(32, 32);
        for (float& p : fused.pixels) {
            p = std::uniform_real_distribution<float>(-0.5f, 1.5f)(rng);
        }
        for (int i = 0; i < 4; ++i) {
            const auto obs = build_actor_obs(env.state(), i, fused, 3);
            for (float v : obs.data) {
                EXPECT_GE(v, 0.0f);
                EXPECT_LE(v, 1.0f);
            }
        }
    }
}

TEST(ActorObs, LocalSensorShowsOwnReading)
{
    auto f = make(10, 10, {{5, 5, 1}});
    SensorReading r;
    r.origin = {5, 5, 1};
    r.cells = {{{5, 5}, 1}, {{6, 5}, 0}};
    f.state.last_readings = {r};
    const auto obs = build_actor_obs(f.state, 0, blank_canvas(), 3);
    EXPECT_EQ(obs.at(kLocalSensor, 5, 5), 1.0f);
    EXPECT_EQ(obs.at(kLocalSensor, 5, 6), 0.0f);
    EXPECT_EQ(obs.at(kLocalSensor, 4, 4), 0.5f);
}

TEST(ActorObs, SamePoseSameLocalStateSameChannels)
{
    auto f = make(15, 15, {{7, 7, 2}, {7, 7, 2}});
    const auto a = build_actor_obs(f.state, 0, blank_canvas(), 3);
    const auto b = build_actor_obs(f.state, 1, blank_canvas(), 3);
    for (int c = kAltitude; c < kActorChannels; ++c) {
        for (int row = 0; row < kObsSide; ++row) {
            for (int col = 0; col < kObsSide; ++col) {
                EXPECT_EQ(a.at(c, row, col), b.at(c, row, col));
            }
        }
    }
}

TEST(ActorObs, FootprintMarksVisitedCells)
{
    auto f = make(10, 10, {{5, 5, 1}});
    f.state.visited[0][5 * 10 + 6] = 1;
    const auto obs = build_actor_obs(f.state, 0, blank_canvas(), 3);
    EXPECT_EQ(obs.at(kFootprint, 5, 5), 1.0f);
    EXPECT_EQ(obs.at(kFootprint, 5, 6), 1.0f);
    EXPECT_EQ(obs.at(kFootprint, 6, 5), 0.0f);
}

TEST(ActorObs, RejectsBadAgentAndSmallCanvas)
{
    auto f = make(10, 10, {{5, 5, 1}});
    EXPECT_THROW(build_actor_obs(f.state, 1, blank_canvas(), 3), ContractViolation);
    EXPECT_THROW(build_actor_obs(f.state, 0, Image(10, 10), 3), ContractViolation);
}

TEST(CriticObs, DronesOutsideWindowLeaveActionChannelZero)
{
    auto f = make(30, 30, {{2, 2, 1}, {25, 25, 1}});
    const auto actor = build_actor_obs(f.state, 0, blank_canvas(), 3);
    const std::vector<Action> joint = {Action::XPlus, Action::ZMinus};
    const auto obs = build_critic_obs(actor, f.state, 0, joint, 0);
    for (float v : obs.plane(kJointAction)) {
        EXPECT_EQ(v, 0.0f);
    }
}

TEST(CriticObs, SelfAtCentreActionFiveIsOne)
{
    auto f = make(20, 20, {{10, 10, 2}});
    const auto actor = build_actor_obs(f.state, 0, blank_canvas(), 3);
    const std::vector<Action> joint = {Action::ZMinus};
    const auto obs = build_critic_obs(actor, f.state, 0, joint);
    EXPECT_EQ(obs.at(kJointAction, 5, 5), 1.0f);
}

TEST(CriticObs, ExcludedAgentSlotIsZero)
{
    auto f = make(20, 20, {{10, 10, 2}, {11, 10, 1}});
    const auto actor = build_actor_obs(f.state, 0, blank_canvas(), 3);
    const std::vector<Action> joint = {Action::ZMinus, Action::YPlus};
    const auto obs = build_critic_obs(actor, f.state, 0, joint, 0);
    EXPECT_EQ(obs.at(kJointAction, 5, 5), 0.0f);
    EXPECT_FLOAT_EQ(obs.at(kJointAction, 5, 6), 3.0f / 6.0f);
}

TEST(CriticObs, UniformGlobalBeliefPlanes)
{
    auto f = make(20, 20, {{10, 10, 1}});
    const auto actor = build_actor_obs(f.state, 0, blank_canvas(), 3);
    const std::vector<Action> joint = {Action::XPlus};
    const auto obs = build_critic_obs(actor, f.state, 0, joint);
    for (float v : obs.plane(kGlobalBelief)) {
        EXPECT_EQ(v, 0.5f);
    }
    for (float v : obs.plane(kGlobalEntropy)) {
        EXPECT_EQ(v, 1.0f);
    }
    for (int c = 0; c < kActorChannels; ++c) {
        for (int k = 0; k < kObsSide * kObsSide; ++k) {
            EXPECT_EQ(obs.plane(c)[k], actor.plane(c)[k]);
        }
    }
}

TEST(CriticObs, ActionCodesInAllowedSet)
{
    Rng rng(3);
    auto f = make(12, 12, {{5, 5, 1}, {6, 5, 1}, {5, 6, 2}, {6, 6, 3}});
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Action> joint;
        for (int i = 0; i < 4; ++i) {
            joint.push_back(action_from_index(static_cast<int>(rng() % 6)));
        }
        const auto actor = build_actor_obs(f.state, 0, blank_canvas(), 3);
        const auto obs = build_critic_obs(actor, f.state, 0, joint);
        for (float v : obs.plane(kJointAction)) {
            const float k = v * 6.0f;
            EXPECT_NEAR(k, std::round(k), 1e-5);
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
}

TEST(CriticObs, RejectsIncompleteJointAction)
{
    auto f = make(12, 12, {{5, 5, 1}, {6, 5, 1}});
    const auto actor = build_actor_obs(f.state, 0, blank_canvas(), 3);
    const std::vector<Action> joint = {Action::XPlus};
    EXPECT_THROW(build_critic_obs(actor, f.state, 0, joint), ContractViolation);
}
