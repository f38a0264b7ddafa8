#pragma once

#include "mvbf/body_model.hpp"

namespace mvbf {

// Built-in capsule-segment test body: 10 joints (pelvis, spine, chest, head,
// shoulder/elbow/wrist per arm), ~500 vertices, 4 shape directions (height,
// girth, arm length, head size). Ships in code so tests and the synthetic
// pipeline run with no external assets.
BodyModel make_toy_body();

// Joint indices of the toy body, used by default configs.
namespace toy {
constexpr int pelvis = 0;
constexpr int spine = 1;
constexpr int chest = 2;
constexpr int head = 3;
constexpr int l_shoulder = 4;
constexpr int l_elbow = 5;
constexpr int l_wrist = 6;
constexpr int r_shoulder = 7;
constexpr int r_elbow = 8;
constexpr int r_wrist = 9;
}  // namespace toy

}  // namespace mvbf
