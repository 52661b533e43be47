#pragma once

#include "uavipp/env.hpp"
#include "uavipp/grid.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace uavipp {

enum class NoiseLevel { none, moderate, loud, custom };

std::string_view to_string(NoiseLevel level);
NoiseLevel noise_level_from_string(std::string_view name);

// Received pixel = alpha * sent + n, alpha ~ U(alpha_low, alpha_high), n ~ N(0, sigma^2).
struct ChannelParams {
    double alpha_low = 1.0;
    double alpha_high = 1.0;
    double sigma = 0.0;
    NoiseLevel level = NoiseLevel::none;

    static ChannelParams for_level(NoiseLevel level);
    bool is_identity() const { return alpha_low == 1.0 && alpha_high == 1.0 && sigma == 0.0; }
    void validate() const;
    friend bool operator==(const ChannelParams&, const ChannelParams&) = default;
};

// A broadcast sensor patch. Identity, pose and anchor travel noise-free.
struct Message {
    int sender_id = 0;
    UavPose pose;
    Cell anchor;  // grid cell of patch pixel (0, 0)
    Image patch;
};

// Footprint reading as an image of observed classes anchored at its top-left cell.
Message to_message(int sender_id, const SensorReading& reading);

enum class Clamp { yes, no };

// Identity-level params return the input untouched (no clamp applied).
Image corrupt(const Image& patch, const ChannelParams& params, Rng& rng, Clamp clamp = Clamp::yes);

// Result[i] is receiver i's inbox: its own message first (clean), then the
// others in sender order, each corrupted independently for this receiver.
std::vector<std::vector<Message>> broadcast(const std::vector<Message>& sent, const ChannelParams& params, Rng& rng);

inline constexpr float kUnknownFill = 0.5f;

// Pastes each message onto its own canvas of `canvas_width x canvas_height`
// centred on the receiver; the rest stays 0.5. The receiver's own message
// (sender_id == receiver_id) becomes index 0. Throws ContractViolation when
// the list is empty or has no self message.
std::vector<Image> align(const std::vector<Message>& messages, int receiver_id, const UavPose& receiver_pose,
                         int canvas_width, int canvas_height);

// Grid cell shown at canvas pixel (0, 0) for a receiver at `pose`.
Cell canvas_origin(const UavPose& pose, int canvas_width, int canvas_height);

} // namespace uavipp
