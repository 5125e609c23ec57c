#pragma once

namespace nctomo {
inline constexpr const char* kVersion = "0.1.0";
}
