#pragma once

namespace specgram {

inline constexpr const char* version = "0.1.0";

}  // namespace specgram
