#pragma once

#include <string>
#include <vector>

#include "transsplat/config.hpp"
#include "transsplat/evidence.hpp"
#include "transsplat/scene_model.hpp"

namespace transsplat {

/// A complete editing setup: scene, views and the synthetic edit request.
struct Scenario {
  Scene scene;
  std::vector<Camera> cameras;
  EditSpec edit;
  EditConfig config;  // settings the scenario is meant to be edited with
};

/// Standard toy scenario: 12 gaussians on a 3 x 2 x 2 grid, the 4 in the
/// +x column are the edit target; 3 cameras on a 90 degree arc; 32 x 32
/// images; 16-d semantic latents; 8-d appearance descriptors. The edit
/// bleeds into the neighbouring column (spill 0.5, radius 4 px).
///
/// Its config departs from the library defaults where the scale of the scene
/// demands it: 4 prototypes per view, a geometric cost weight of 100 (image
/// distances are divided by the ~45 px diagonal), tau_r = 0.01 (source masses
/// are ~1/12 each), lambda_img = 0.03 with step 0.01 (the image term is a
/// pixel sum, ~10 px^2 of footprint per gaussian and view).
Scenario toy_scenario(std::uint64_t seed = 0);

/// Named presets accepted by the CLI.
Scenario preset_scenario(const std::string& name, std::uint64_t seed = 0);

}  // namespace transsplat
