#pragma once

#include <string_view>

namespace clbforge {

/// First line of every protected file; its presence makes protect refuse the file.
inline constexpr std::string_view kProtectedMarker = "/* clbforge:protected */";

inline constexpr std::string_view kDetectionMessage = "TAMPERING DETECTED";

/// C99 helper definitions (clb_hash, clb_decrypt, clb_at_check) injected once
/// per protected file with internal linkage. Starts with kProtectedMarker.
std::string_view runtime_support_source() noexcept;

}  // namespace clbforge
