#pragma once

// Single place that spells the vendored nlohmann/json include.
#include <json.hpp>
