#pragma once

namespace camkit {

inline constexpr const char* kVersion = "0.1.0";

} // namespace camkit
