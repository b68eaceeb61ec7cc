#pragma once

namespace cfurllc {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace cfurllc
