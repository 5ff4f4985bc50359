#pragma once

namespace easter {

inline constexpr const char* kEngineVersion = "0.1.0";

}  // namespace easter
