#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace uavipp {

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

struct UavPose {
    int x = 0;
    int y = 0;
    int z = 1;  // altitude level in [1, z_max]
    friend bool operator==(const UavPose&, const UavPose&) = default;
};

// Stable integer encoding 0-5; networks and traces rely on it.
enum class Action : std::uint8_t { XPlus = 0, XMinus = 1, YPlus = 2, YMinus = 3, ZPlus = 4, ZMinus = 5 };

inline constexpr int kNumActions = 6;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::XPlus, Action::XMinus, Action::YPlus, Action::YMinus, Action::ZPlus, Action::ZMinus};

using ActionMask = std::array<bool, kNumActions>;

constexpr int to_index(Action a) { return static_cast<int>(a); }
Action action_from_index(int index);
std::string_view action_name(Action a);

// Pose reached by applying `a`; no bounds checking.
UavPose apply(UavPose pose, Action a);

// Binary valuable/valueless labels plus the no-fly mask. Cell (x, y) lives at y * width + x.
class GroundTruthGrid {
public:
    GroundTruthGrid() = default;
    GroundTruthGrid(int width, int height);
    GroundTruthGrid(int width, int height, std::vector<std::uint8_t> labels, std::vector<std::uint8_t> no_fly);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return labels_.size(); }

    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    std::uint8_t label(int x, int y) const { return labels_[index(x, y)]; }
    bool no_fly(int x, int y) const { return no_fly_[index(x, y)] != 0; }
    void set_label(int x, int y, std::uint8_t v) { labels_[index(x, y)] = v; }
    void set_no_fly(int x, int y, bool v) { no_fly_[index(x, y)] = v ? 1 : 0; }

    const std::vector<std::uint8_t>& labels() const { return labels_; }
    const std::vector<std::uint8_t>& no_fly_mask() const { return no_fly_; }

    std::size_t valuable_count() const;

    // Throws ConfigError when labels are not binary, dimensions disagree, or nothing is valuable.
    void validate() const;

    friend bool operator==(const GroundTruthGrid&, const GroundTruthGrid&) = default;

private:
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> labels_;
    std::vector<std::uint8_t> no_fly_;
};

// Per-cell probability that the cell is valuable.
class BeliefGrid {
public:
    BeliefGrid() = default;
    BeliefGrid(int width, int height, double fill = 0.5);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return probs_.size(); }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    double at(int x, int y) const { return probs_[static_cast<std::size_t>(y) * width_ + x]; }
    double& at(int x, int y) { return probs_[static_cast<std::size_t>(y) * width_ + x]; }

    const std::vector<double>& probs() const { return probs_; }
    std::vector<double>& probs() { return probs_; }

    friend bool operator==(const BeliefGrid&, const BeliefGrid&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> probs_;
};

// Single-channel real image, row-major, used for sensor patches and canvases.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int w, int h, float fill = 0.0f) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    bool empty() const { return pixels.empty(); }
    float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const Image&, const Image&) = default;
};

} // namespace uavipp
