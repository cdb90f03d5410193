#pragma once

#include <json.hpp>

namespace nsub {

// Cross-check data for other implementations of the forward pass and the
// keyframe spline. Both documents are fully deterministic.

// {model: <web export>, latents: [[z..]], conditions: [[c..]], outputs: [[q..]]}
nlohmann::json web_forward_fixture();

// {keyframes, samples_per_segment, cyclic: [[z..]], clamped: [[z..]]}
nlohmann::json spline_fixture();

}  // namespace nsub
