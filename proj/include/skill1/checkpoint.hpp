#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "skill1/policy.hpp"

namespace skill1 {

inline constexpr std::string_view kCheckpointVersion = "skill1-params-v1";

// Text checkpoint: a version line, one JSON metadata line, then every named
// matrix ("query", ..., "ref.query", ...) as "<name> <rows> <cols>" followed
// by one line per row. Doubles use shortest round-trip formatting.
struct Checkpoint {
  Policy policy;
  nlohmann::json meta = nlohmann::json::object();
};

std::string checkpoint_string(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace skill1
