#pragma once

// nlohmann/json conversions shared by the JSONL readers and writers.

#include <json.hpp>

#include "govprobe/matcher.hpp"

namespace govprobe::detail {

nlohmann::json instance_to_value(const Instance& inst);
Instance instance_from_value(const nlohmann::json& node);

}  // namespace govprobe::detail
