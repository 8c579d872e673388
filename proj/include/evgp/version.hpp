#pragma once

namespace evgp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace evgp
