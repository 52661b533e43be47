#include "uavipp/errors.hpp"
#include "uavipp/noise_channel.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace uavipp;

namespace {

Image random_image(Rng& rng, int w, int h)
{
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Image img(w, h);
    for (float& p : img.pixels) {
        p = u(rng);
    }
    return img;
}

Message message(int id, UavPose pose, Cell anchor, Image patch)
{
    return {id, pose, anchor, std::move(patch)};
}

} // namespace

TEST(ChannelParams, LevelsMatchDefinitions)
{
    EXPECT_EQ(ChannelParams::for_level(NoiseLevel::none), (ChannelParams{1.0, 1.0, 0.0, NoiseLevel::none}));
    EXPECT_EQ(ChannelParams::for_level(NoiseLevel::moderate), (ChannelParams{0.8, 1.0, 0.02, NoiseLevel::moderate}));
    EXPECT_EQ(ChannelParams::for_level(NoiseLevel::loud), (ChannelParams{0.6, 1.0, 0.06, NoiseLevel::loud}));
}

TEST(ChannelParams, ValidateRejectsBadBounds)
{
    EXPECT_THROW((ChannelParams{0.0, 1.0, 0.0}).validate(), ConfigError);
    EXPECT_THROW((ChannelParams{0.9, 0.8, 0.0}).validate(), ConfigError);
    EXPECT_THROW((ChannelParams{0.8, 1.1, 0.0}).validate(), ConfigError);
    EXPECT_THROW((ChannelParams{0.8, 1.0, -0.1}).validate(), ConfigError);
    EXPECT_NO_THROW(ChannelParams::for_level(NoiseLevel::loud).validate());
}

TEST(NoiseLevel, StringRoundTrip)
{
    for (auto l : {NoiseLevel::none, NoiseLevel::moderate, NoiseLevel::loud, NoiseLevel::custom}) {
        EXPECT_EQ(noise_level_from_string(to_string(l)), l);
    }
    EXPECT_THROW(noise_level_from_string("deafening"), ConfigError);
}

TEST(Corrupt, NoneLevelIsBitwiseIdentity)
{
    Rng rng(1);
    Image img = random_image(rng, 7, 5);
    img.pixels[0] = 1.7f;  // out of range: identity must not clamp
    const auto before_state = rng;
    const Image out = corrupt(img, ChannelParams::for_level(NoiseLevel::none), rng);
    EXPECT_EQ(out, img);
    EXPECT_EQ(rng, before_state);
}

TEST(Corrupt, ModerateMeanOnConstantOne)
{
    Rng rng(2);
    Image img(1000, 1000, 1.0f);
    const Image out = corrupt(img, ChannelParams::for_level(NoiseLevel::moderate), rng, Clamp::no);
    double sum = 0.0;
    for (float p : out.pixels) {
        sum += p;
    }
    EXPECT_NEAR(sum / static_cast<double>(out.pixels.size()), 0.90, 0.01);
}

TEST(Corrupt, LoudUsesSigmaPointZeroSix)
{
    Rng rng(3);
    ChannelParams p = ChannelParams::for_level(NoiseLevel::loud);
    p.alpha_low = 1.0;  // isolate the additive term
    Image img(1000, 1000, 0.5f);
    const Image out = corrupt(img, p, rng, Clamp::no);
    double sq = 0.0;
    for (float v : out.pixels) {
        sq += (v - 0.5) * (v - 0.5);
    }
    EXPECT_NEAR(std::sqrt(sq / static_cast<double>(out.pixels.size())), 0.06, 0.06 * 0.025);
}

TEST(Corrupt, ResidualVarianceMatchesSigmaSquared)
{
    Rng rng(4);
    const ChannelParams p{0.9, 0.9, 0.02, NoiseLevel::custom};
    Image img = random_image(rng, 1000, 1000);
    const Image out = corrupt(img, p, rng, Clamp::no);
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const double r = out.pixels[i] - 0.9 * img.pixels[i];
        sum += r;
        sq += r * r;
    }
    const double n = static_cast<double>(img.pixels.size());
    const double var = sq / n - (sum / n) * (sum / n);
    EXPECT_NEAR(var, 0.02 * 0.02, 0.05 * 0.02 * 0.02);
}

TEST(Corrupt, ClampedOutputInUnitInterval)
{
    Rng rng(5);
    std::uniform_real_distribution<double> lo(0.05, 1.0), sig(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double a = lo(rng);
        const ChannelParams p{a, std::min(1.0, a + 0.2), sig(rng), NoiseLevel::custom};
        Image img = random_image(rng, 9, 9);
        for (float v : corrupt(img, p, rng).pixels) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
}

TEST(ToMessage, PatchCoversFootprintBoundingBox)
{
    SensorReading r;
    r.origin = {1, 1, 1};
    r.accuracy = 0.95;
    for (int y = 0; y <= 2; ++y) {
        for (int x = 0; x <= 2; ++x) {
            r.cells.push_back({{x, y}, static_cast<std::uint8_t>(x == y)});
        }
    }
    const auto m = to_message(3, r);
    EXPECT_EQ(m.sender_id, 3);
    EXPECT_EQ(m.anchor, (Cell{0, 0}));
    ASSERT_EQ(m.patch.width, 3);
    ASSERT_EQ(m.patch.height, 3);
    EXPECT_EQ(m.patch.at(1, 1), 1.0f);
    EXPECT_EQ(m.patch.at(2, 1), 0.0f);
}

TEST(Broadcast, SingleUavGetsCleanSelf)
{
    Rng rng(6);
    std::vector<Message> sent = {message(0, {2, 2, 1}, {1, 1}, random_image(rng, 3, 3))};
    const auto inbox = broadcast(sent, ChannelParams::for_level(NoiseLevel::loud), rng);
    ASSERT_EQ(inbox.size(), 1u);
    ASSERT_EQ(inbox[0].size(), 1u);
    EXPECT_EQ(inbox[0][0].patch, sent[0].patch);
}

TEST(Broadcast, NoneLevelAllClean)
{
    Rng rng(7);
    std::vector<Message> sent = {message(0, {2, 2, 1}, {1, 1}, random_image(rng, 3, 3)),
                                 message(1, {5, 5, 1}, {4, 4}, random_image(rng, 3, 3))};
    const auto inbox = broadcast(sent, ChannelParams::for_level(NoiseLevel::none), rng);
    EXPECT_EQ(inbox[0][0].patch, sent[0].patch);
    EXPECT_EQ(inbox[0][1].patch, sent[1].patch);
    EXPECT_EQ(inbox[1][0].patch, sent[1].patch);
    EXPECT_EQ(inbox[1][1].patch, sent[0].patch);
}

TEST(Broadcast, ModerateOneCleanThreeCorrupted)
{
    Rng rng(8);
    std::vector<Message> sent;
    for (int i = 0; i < 4; ++i) {
        sent.push_back(message(i, {i * 3 + 1, 1, 1}, {i * 3, 0}, random_image(rng, 3, 3)));
    }
    const auto inbox = broadcast(sent, ChannelParams::for_level(NoiseLevel::moderate), rng);
    for (int r = 0; r < 4; ++r) {
        ASSERT_EQ(inbox[r].size(), 4u);
        int clean = 0;
        for (const auto& m : inbox[r]) {
            EXPECT_EQ(m.pose, sent[m.sender_id].pose);
            EXPECT_EQ(m.anchor, sent[m.sender_id].anchor);
            clean += m.patch == sent[m.sender_id].patch;
        }
        EXPECT_EQ(clean, 1);
        EXPECT_EQ(inbox[r][0].sender_id, r);
        EXPECT_EQ(inbox[r][0].patch, sent[r].patch);
    }
    // Independent noise per receiver.
    EXPECT_NE(inbox[0][1].patch, inbox[2][1].patch);
}

TEST(Align, FullCoverPatchEqualsCanvas)
{
    Rng rng(9);
    Image patch = random_image(rng, 6, 6);
    const UavPose pose{3, 3, 1};
    const Cell origin = canvas_origin(pose, 6, 6);
    const auto stack = align({message(0, pose, origin, patch)}, 0, pose, 6, 6);
    ASSERT_EQ(stack.size(), 1u);
    EXPECT_EQ(stack[0], patch);
}

TEST(Align, EmptyListOrMissingSelfThrows)
{
    EXPECT_THROW(align({}, 0, {0, 0, 1}, 6, 6), ContractViolation);
    Rng rng(1);
    EXPECT_THROW(align({message(1, {0, 0, 1}, {0, 0}, random_image(rng, 3, 3))}, 0, {0, 0, 1}, 6, 6),
                 ContractViolation);
}

TEST(Align, SmallPatchLeavesUnknownCells)
{
    Image patch(3, 3, 1.0f);
    const UavPose pose{3, 3, 1};
    ASSERT_EQ(canvas_origin(pose, 6, 6), (Cell{0, 0}));
    const auto stack = align({message(0, {1, 1, 1}, {0, 0}, patch)}, 0, pose, 6, 6);
    int unknown = 0;
    for (float v : stack[0].pixels) {
        unknown += v == 0.5f;
    }
    EXPECT_EQ(unknown, 27);
}

TEST(Align, SelfMovesToFrontAndOthersKeepOrder)
{
    std::vector<Message> msgs = {message(2, {0, 0, 1}, {0, 0}, Image(1, 1, 0.2f)),
                                 message(0, {0, 0, 1}, {0, 0}, Image(1, 1, 0.0f)),
                                 message(1, {0, 0, 1}, {0, 0}, Image(1, 1, 0.1f))};
    const UavPose pose{2, 2, 1};
    const auto stack = align(msgs, 1, pose, 4, 4);
    ASSERT_EQ(stack.size(), 3u);
    EXPECT_EQ(stack[0].at(0, 0), 0.1f);
    EXPECT_EQ(stack[1].at(0, 0), 0.2f);
    EXPECT_EQ(stack[2].at(0, 0), 0.0f);
}

TEST(Align, ClipsPatchesOutsideCanvas)
{
    Image patch(5, 5, 1.0f);
    const UavPose pose{10, 10, 1};
    // Canvas 4x4 centred on (10,10) spans x,y in [8, 11]; patch spans [10, 14].
    const auto stack = align({message(0, pose, {10, 10}, patch)}, 0, pose, 4, 4);
    int ones = 0;
    for (float v : stack[0].pixels) {
        ones += v == 1.0f;
    }
    EXPECT_EQ(ones, 4);
    EXPECT_EQ(stack[0].at(2, 2), 1.0f);
    EXPECT_EQ(stack[0].at(1, 1), 0.5f);
}
