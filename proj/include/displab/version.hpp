#pragma once

namespace displab {

/// Library version recorded in run manifests.
inline constexpr const char* code_version = "1.0.0";

}  // namespace displab
