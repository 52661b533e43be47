#include "uavipp/grid.hpp"

#include "uavipp/errors.hpp"

#include <algorithm>
#include <string>

namespace uavipp {

Action action_from_index(int index)
{
    if (index < 0 || index >= kNumActions) {
        throw ContractViolation("action index out of range: " + std::to_string(index));
    }
    return static_cast<Action>(index);
}

std::string_view action_name(Action a)
{
    switch (a) {
    case Action::XPlus: return "x+";
    case Action::XMinus: return "x-";
    case Action::YPlus: return "y+";
    case Action::YMinus: return "y-";
    case Action::ZPlus: return "z+";
    case Action::ZMinus: return "z-";
    }
    return "?";
}

UavPose apply(UavPose pose, Action a)
{
    switch (a) {
    case Action::XPlus: ++pose.x; break;
    case Action::XMinus: --pose.x; break;
    case Action::YPlus: ++pose.y; break;
    case Action::YMinus: --pose.y; break;
    case Action::ZPlus: ++pose.z; break;
    case Action::ZMinus: --pose.z; break;
    }
    return pose;
}

GroundTruthGrid::GroundTruthGrid(int width, int height)
    : width_(width), height_(height),
      labels_(static_cast<std::size_t>(width) * height, 0),
      no_fly_(static_cast<std::size_t>(width) * height, 0)
{
}

GroundTruthGrid::GroundTruthGrid(int width, int height, std::vector<std::uint8_t> labels,
                                 std::vector<std::uint8_t> no_fly)
    : width_(width), height_(height), labels_(std::move(labels)), no_fly_(std::move(no_fly))
{
    if (no_fly_.empty()) {
        no_fly_.assign(labels_.size(), 0);
    }
}

std::size_t GroundTruthGrid::valuable_count() const
{
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), std::uint8_t{1}));
}

void GroundTruthGrid::validate() const
{
    if (width_ <= 0 || height_ <= 0) {
        throw ConfigError("ground truth grid must have positive dimensions");
    }
    const auto n = static_cast<std::size_t>(width_) * height_;
    if (labels_.size() != n || no_fly_.size() != n) {
        throw ConfigError("ground truth labels/mask do not match grid dimensions");
    }
    if (std::any_of(labels_.begin(), labels_.end(), [](std::uint8_t v) { return v > 1; })) {
        throw ConfigError("ground truth labels must be 0 or 1");
    }
    if (valuable_count() == 0) {
        throw ConfigError("ground truth has no valuable cell");
    }
}

BeliefGrid::BeliefGrid(int width, int height, double fill)
    : width_(width), height_(height), probs_(static_cast<std::size_t>(width) * height, fill)
{
}

} // namespace uavipp
