#pragma once

namespace qlsacd {

inline constexpr const char* kSoftwareVersion = "0.1.0";
// Bumped whenever a JSON document changes shape.
inline constexpr int kSchemaVersion = 1;

}  // namespace qlsacd
