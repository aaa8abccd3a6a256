#pragma once

#include <json.hpp>

#include "glowsign/fluor.hpp"
#include "glowsign/geometry.hpp"

namespace glowsign {

// All artifacts serialize through ordered_json so key order (and therefore
// output bytes) is stable across runs.
using Json = nlohmann::ordered_json;

Json to_json(const EnvironmentCondition& cond);
EnvironmentCondition condition_from_json(const Json& j);

Json to_json(const SignBox& box);
SignBox sign_box_from_json(const Json& j);

Json to_json(const PixelRect& rect);
PixelRect pixel_rect_from_json(const Json& j);

}  // namespace glowsign
