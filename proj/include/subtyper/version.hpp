#pragma once

namespace subtyper {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace subtyper
