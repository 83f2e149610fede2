#pragma once

#include <functional>
#include <string>

#include <nlohmann/json.hpp>

namespace collab {

// Observable state changes: kind is roster | venue | message | note | hit | transfer.
using EventSink = std::function<void(const std::string& kind, const nlohmann::json& payload)>;

}  // namespace collab
