#include "uavipp/noise_channel.hpp"

#include "uavipp/errors.hpp"

#include <algorithm>
#include <limits>

namespace uavipp {

std::string_view to_string(NoiseLevel level)
{
    switch (level) {
    case NoiseLevel::none: return "none";
    case NoiseLevel::moderate: return "moderate";
    case NoiseLevel::loud: return "loud";
    case NoiseLevel::custom: return "custom";
    }
    return "none";
}

NoiseLevel noise_level_from_string(std::string_view name)
{
    if (name == "none") return NoiseLevel::none;
    if (name == "moderate") return NoiseLevel::moderate;
    if (name == "loud") return NoiseLevel::loud;
    if (name == "custom") return NoiseLevel::custom;
    throw ConfigError("unknown noise level '" + std::string(name) + "' (expected none, moderate or loud)");
}

ChannelParams ChannelParams::for_level(NoiseLevel level)
{
    switch (level) {
    case NoiseLevel::moderate: return {0.8, 1.0, 0.02, level};
    case NoiseLevel::loud: return {0.6, 1.0, 0.06, level};
    case NoiseLevel::none:
    case NoiseLevel::custom: break;
    }
    return {1.0, 1.0, 0.0, level};
}

void ChannelParams::validate() const
{
    if (!(alpha_low > 0.0 && alpha_low <= alpha_high && alpha_high <= 1.0)) {
        throw ConfigError("channel attenuation bounds must satisfy 0 < alpha_low <= alpha_high <= 1");
    }
    if (!(sigma >= 0.0)) {
        throw ConfigError("channel sigma must be >= 0");
    }
}

Message to_message(int sender_id, const SensorReading& reading)
{
    Message m;
    m.sender_id = sender_id;
    m.pose = reading.origin;
    if (reading.cells.empty()) {
        return m;
    }
    int x0 = std::numeric_limits<int>::max(), y0 = x0;
    int x1 = std::numeric_limits<int>::min(), y1 = x1;
    for (const auto& obs : reading.cells) {
        x0 = std::min(x0, obs.cell.x);
        y0 = std::min(y0, obs.cell.y);
        x1 = std::max(x1, obs.cell.x);
        y1 = std::max(y1, obs.cell.y);
    }
    m.anchor = {x0, y0};
    m.patch = Image(x1 - x0 + 1, y1 - y0 + 1, kUnknownFill);
    for (const auto& obs : reading.cells) {
        m.patch.at(obs.cell.x - x0, obs.cell.y - y0) = static_cast<float>(obs.observed);
    }
    return m;
}

Image corrupt(const Image& patch, const ChannelParams& params, Rng& rng, Clamp clamp)
{
    if (params.is_identity()) {
        return patch;
    }
    Image out = patch;
    std::uniform_real_distribution<double> attenuation(params.alpha_low, params.alpha_high);
    std::normal_distribution<double> noise(0.0, params.sigma > 0.0 ? params.sigma : 1.0);
    for (float& px : out.pixels) {
        const double alpha = attenuation(rng);
        const double n = params.sigma > 0.0 ? noise(rng) : 0.0;
        double v = alpha * static_cast<double>(px) + n;
        if (clamp == Clamp::yes) {
            v = std::clamp(v, 0.0, 1.0);
        }
        px = static_cast<float>(v);
    }
    return out;
}

std::vector<std::vector<Message>> broadcast(const std::vector<Message>& sent, const ChannelParams& params, Rng& rng)
{
    if (sent.empty()) {
        throw ContractViolation("broadcast needs at least one message");
    }
    std::vector<std::vector<Message>> inboxes(sent.size());
    for (std::size_t receiver = 0; receiver < sent.size(); ++receiver) {
        auto& inbox = inboxes[receiver];
        inbox.reserve(sent.size());
        inbox.push_back(sent[receiver]);
        for (std::size_t sender = 0; sender < sent.size(); ++sender) {
            if (sender == receiver) {
                continue;
            }
            Message m = sent[sender];
            m.patch = corrupt(m.patch, params, rng);
            inbox.push_back(std::move(m));
        }
    }
    return inboxes;
}

Cell canvas_origin(const UavPose& pose, int canvas_width, int canvas_height)
{
    return {pose.x - canvas_width / 2, pose.y - canvas_height / 2};
}

std::vector<Image> align(const std::vector<Message>& messages, int receiver_id, const UavPose& receiver_pose,
                         int canvas_width, int canvas_height)
{
    if (messages.empty()) {
        throw ContractViolation("align needs at least the receiver's own message");
    }
    auto self = std::find_if(messages.begin(), messages.end(),
                             [&](const Message& m) { return m.sender_id == receiver_id; });
    if (self == messages.end()) {
        throw ContractViolation("align: no message from the receiver itself");
    }
    const Cell origin = canvas_origin(receiver_pose, canvas_width, canvas_height);
    auto paste = [&](const Message& m) {
        Image canvas(canvas_width, canvas_height, kUnknownFill);
        for (int py = 0; py < m.patch.height; ++py) {
            const int cy = m.anchor.y + py - origin.y;
            if (cy < 0 || cy >= canvas_height) {
                continue;
            }
            for (int px = 0; px < m.patch.width; ++px) {
                const int cx = m.anchor.x + px - origin.x;
                if (cx >= 0 && cx < canvas_width) {
                    canvas.at(cx, cy) = m.patch.at(px, py);
                }
            }
        }
        return canvas;
    };
    std::vector<Image> stack;
    stack.reserve(messages.size());
    stack.push_back(paste(*self));
    for (auto it = messages.begin(); it != messages.end(); ++it) {
        if (it != self) {
            stack.push_back(paste(*it));
        }
    }
    return stack;
}

} // namespace uavipp
