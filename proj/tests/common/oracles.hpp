#pragma once

#include "uavipp/env.hpp"

#include <cstdint>

namespace uavipp::testing {

// Exhaustive oracle: enumerate all 2^k joint outcomes over the footprint and
// compare joint prior entropy to the expected joint posterior entropy.
inline double brute_force_gain(const BeliefGrid& belief, const UavPose& pose, double a)
{
    const auto cells = footprint(pose, belief.width(), belief.height());
    const std::size_t k = cells.size();
    double prior_h = 0.0;
    for (const auto& c : cells) {
        prior_h += binary_entropy(belief.at(c.x, c.y));
    }
    double expected_h = 0.0;
    for (std::uint32_t outcome = 0; outcome < (1u << k); ++outcome) {
        double p_outcome = 1.0;
        BeliefGrid post = belief;
        SensorReading r;
        r.accuracy = a;
        for (std::size_t i = 0; i < k; ++i) {
            const int o = (outcome >> i) & 1u;
            const double p = belief.at(cells[i].x, cells[i].y);
            const double p1 = p * a + (1.0 - p) * (1.0 - a);
            p_outcome *= o ? p1 : 1.0 - p1;
            r.cells.push_back({cells[i], static_cast<std::uint8_t>(o)});
        }
        if (p_outcome == 0.0) {
            continue;
        }
        update_belief(post, r);
        double h = 0.0;
        for (const auto& c : cells) {
            h += binary_entropy(post.at(c.x, c.y));
        }
        expected_h += p_outcome * h;
    }
    return prior_h - expected_h;
}

} // namespace uavipp::testing
