#pragma once

#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

namespace pageguide {

/// First balanced top-level JSON object in model output that parses.
/// Tolerates code fences and surrounding prose.
std::optional<nlohmann::json> extract_json_object(std::string_view raw);

}  // namespace pageguide
