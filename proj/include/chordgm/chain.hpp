#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chordgm/factor_graph.hpp"
#include "chordgm/matrix.hpp"

namespace chordgm {

/// A stationary hidden chain: initial and transition log-probabilities.
/// Observation log-scores are supplied per decode as a T×K matrix.
struct ChainSpec {
    std::size_t state_count = 0;
    std::vector<double> initial_log;
    Matrix transition_log; ///< row = from, column = to

    /// Throws ModelError unless the shapes agree and exp(initial) and every
    /// exp(transition) row sum to one within 1e-9.
    void validate() const;

    /// Builds a chain from transition probabilities; initial defaults to uniform.
    static ChainSpec from_probabilities(const Matrix& transition, std::vector<double> initial = {});
};

/// Exact Viterbi decoding in O(T·K²) time and O(T·K) memory. Among optimal
/// sequences the lexicographically smallest is returned: a backward pass
/// computes best-continuation scores and the forward pass picks the lowest
/// state that still reaches the optimum.
MapResult viterbi(const ChainSpec& spec, const Matrix& obs_log);

/// T variables "c0".."c{T-1}": one unary factor per frame (frame 0 also
/// carries the initial distribution) followed by one pairwise factor per
/// consecutive pair. evaluate() of a sequence equals its Viterbi objective.
FactorGraph unroll(const ChainSpec& spec, const Matrix& obs_log);

/// A (key, chord) pair packed as key * chord_count + chord.
struct CompoundState {
    std::uint32_t key = 0;
    std::uint32_t chord = 0;

    std::uint32_t packed(std::uint32_t chord_count = 24) const noexcept { return key * chord_count + chord; }
    static CompoundState unpack(std::uint32_t packed, std::uint32_t chord_count = 24) noexcept {
        return {packed / chord_count, packed % chord_count};
    }
    friend bool operator==(const CompoundState&, const CompoundState&) = default;
};

/// Chord chain with an observed key per frame. The key contributes
/// log p(chord | key) to each frame's observation vector.
struct PriorKeyChain {
    ChainSpec chain;
    Matrix key_log; ///< T×K: log key_compat[key_sequence[t]][chord]

    Matrix effective_observations(const Matrix& obs_log) const;
};

/// `key_compat` is row-stochastic with row = key.
PriorKeyChain build_prior_key_chain(const Matrix& chord_trans, const Matrix& key_compat,
                                    std::span<const std::size_t> key_sequence);

/// Conditional chord transition under the incoming key:
/// p(c2 | c1, k2) ∝ chord_trans[c1][c2] · key_chord[k2][c2], normalized over c2.
/// Returned as log-probabilities indexed [(c1 * key_count + k2) * chord_count + c2].
std::vector<double> conditional_chord_transition_log(const Matrix& key_chord, const Matrix& chord_trans);

/// Joint key/chord chain over key_count × chord_count compound states:
/// log p(k2|k1) + log p(c2|c1,k2). The initial distribution is a uniform key
/// followed by p(c|k).
ChainSpec build_joint_key_chord(const Matrix& key_trans, const Matrix& key_chord, const Matrix& chord_trans);

/// Repeats chord observation scores across every key: T×(key_count·K).
Matrix expand_joint_observations(const Matrix& chord_obs, std::size_t key_count);

} // namespace chordgm
