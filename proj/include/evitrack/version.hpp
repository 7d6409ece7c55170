#pragma once

namespace evitrack {

inline constexpr const char* version_string = "0.1.0";

}  // namespace evitrack
