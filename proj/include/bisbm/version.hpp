#ifndef BISBM_VERSION_HPP
#define BISBM_VERSION_HPP

namespace bisbm {

inline constexpr const char* kLibraryVersion = "0.1.0";

// Generator contract identifier. Simulation fixtures are reproducible only
// against the same rng contract string (see rng.hpp).
inline constexpr const char* kRngContract = "bisbm-rng-v1";

}  // namespace bisbm

#endif  // BISBM_VERSION_HPP
