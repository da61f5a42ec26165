#pragma once

namespace netgee {

#ifdef NETGEE_VERSION
inline constexpr const char* kVersion = NETGEE_VERSION;
#else
inline constexpr const char* kVersion = "0.1.0";
#endif

}  // namespace netgee
