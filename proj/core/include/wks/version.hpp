#pragma once

namespace wks {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace wks
