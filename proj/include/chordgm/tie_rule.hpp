#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace chordgm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Relative slack under which two log-scores count as tied.
inline constexpr double kTieTolerance = 1e-12;

/// Shared comparator for every solver: true when `candidate` beats `incumbent`
/// by more than the tie tolerance. Solvers scan states in ascending order and
/// only replace on a strict win, so ties resolve to the smallest index.
inline bool strictly_better(double candidate, double incumbent) noexcept {
    if (candidate == kNegInf) return false;
    if (incumbent == kNegInf) return true;
    const double scale = std::max({1.0, std::fabs(candidate), std::fabs(incumbent)});
    return candidate > incumbent + kTieTolerance * scale;
}

inline bool tied(double a, double b) noexcept {
    return !strictly_better(a, b) && !strictly_better(b, a);
}

} // namespace chordgm
