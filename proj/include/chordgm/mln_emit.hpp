#pragma once

#include <span>
#include <string>
#include <vector>

#include "chordgm/matrix.hpp"
#include "chordgm/mln.hpp"

namespace chordgm {

/// Chord names for K = 24, otherwise "L0", "L1", ...
std::vector<std::string> chain_label_names(std::size_t label_count);

/// The observation-evidence encoding with a `next/2` helper predicate:
///
///   w(L,N)   observation(ON, t) ^ chord(L, t)       for every (N, L)
///   w(L1,L2) chord(L1, t1) ^ chord(L2, t2) ^ next(t1, t2)   for every (L1, L2)
///
/// with evidence observation(ON, N) and next(N, N+1). `observation` and
/// `next` are closed. Weights are the given log-scores. A non-empty
/// `initial_log` adds `w(L) chord(L, 0)` formulas.
MlnProgram emit_naive_chain(const Matrix& obs_log, const Matrix& transition_log,
                            std::span<const double> initial_log = {});

/// The same chain written propositionally: `w(L,N) chord(L, N)` and
/// `w(L1,L2) chord(L1, N) ^ chord(L2, N+1)` for consecutive frames only, no
/// evidence.
MlnProgram emit_propositional_chain(const Matrix& obs_log, const Matrix& transition_log,
                                    std::span<const double> initial_log = {});

} // namespace chordgm
