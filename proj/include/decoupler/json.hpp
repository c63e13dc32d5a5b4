#pragma once

#include <json.hpp>

namespace decoupler {

using Json = nlohmann::ordered_json;

}  // namespace decoupler
