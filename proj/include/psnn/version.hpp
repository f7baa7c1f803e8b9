#pragma once

// Build version. CMake defines PSNN_VERSION from `git describe` when the
// sources live in a git checkout.

#ifndef PSNN_VERSION
#define PSNN_VERSION "0.1.0"
#endif

namespace psnn {

inline constexpr const char* kVersion = PSNN_VERSION;

}  // namespace psnn
