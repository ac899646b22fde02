#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chordgm/factor_graph.hpp"
#include "chordgm/matrix.hpp"

namespace chordgm {

/// Two non-adjacent frames annotated as harmonically similar, t1 < t2.
struct SimilarityPair {
    std::size_t t1 = 0;
    std::size_t t2 = 0;

    friend bool operator==(const SimilarityPair&, const SimilarityPair&) = default;
};

/// Frames [begin, end) belonging to one measure.
struct MeasureRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    friend bool operator==(const MeasureRange&, const MeasureRange&) = default;
};

enum class StructuralVariant : std::uint8_t {
    Struct,             ///< chord chain plus similarity ties
    MultiScalePriorKey, ///< as Struct, with an observed key per frame
    MultiScale,         ///< hidden key chain with within-measure key ties
};

struct StructuralSpec {
    StructuralVariant variant = StructuralVariant::Struct;
    Matrix chord_trans; ///< K×K probabilities
    Matrix key_chord;   ///< NK×K p(chord | key); prior-key and multiscale variants
    Matrix key_trans;   ///< NK×NK probabilities; multiscale only
    std::vector<SimilarityPair> chord_pairs;
    double chord_tie_stay = 0.7;
    std::vector<MeasureRange> measures;
    double key_tie_stay = 0.9;

    /// Throws ModelError on shape or normalization problems, pairs out of
    /// range or adjacent, tie probabilities outside (0, 1), or measures that
    /// do not partition [0, T). Measures are required for MultiScale.
    void validate(std::size_t frame_count) const;
};

/// log of the tying CPD: stay on the diagonal, (1 - stay)/(n - 1) elsewhere.
std::vector<double> tying_log_table(std::size_t n, double stay);

/// Chord variables c0..c{T-1} come first (ids 0..T-1); MultiScale appends
/// key variables k0..k{T-1} (ids T..2T-1).
///
/// Struct: unary observations (initial folded into frame 0), chord
/// transitions, one tying factor per pair. MultiScalePriorKey: as Struct with
/// log p(c_t | key_evidence[t]) added to each frame's observation. MultiScale:
/// a (c0, k0) initial factor, key transitions (k_{t-1}, k_t), chord
/// transitions (c_{t-1}, c_t, k_t) from the locally normalized conditional
/// CPD, a key tying factor for consecutive frames inside one measure, and the
/// chord ties. `key_evidence` is required for, and only accepted by,
/// MultiScalePriorKey.
FactorGraph build_structural_graph(const StructuralSpec& spec, const Matrix& obs_log,
                                   std::span<const std::size_t> key_evidence = {});

/// Merges factors with identical scopes by adding their log tables. The
/// merged factor takes the position of the first one; the log offset is kept.
FactorGraph consolidate_parallel_factors(const FactorGraph& graph);

/// Synthetic repeated-structure instance for checking structural benefit.
struct SynthInstance {
    std::vector<State> truth;
    Matrix obs_log;
    std::vector<SimilarityPair> pairs;
    std::vector<bool> corrupted;
    std::size_t segment_len = 0;
};

/// The first segment is a sequence of runs (length 2 or 3) of random labels,
/// neighbouring runs distinct; every later segment repeats it. Each frame is
/// corrupted with probability `noise`: its scores then favor a random wrong
/// label instead of the truth.
/// Pairs link each frame to the same position in the next segment. Requires
/// segment_len >= 2 dividing T. Deterministic in `seed`.
SynthInstance synth_repeat_instance(std::uint64_t seed, std::size_t frame_count, std::size_t segment_len,
                                    double noise, std::size_t label_count = 24);

/// Rewrites frame t so that its scores favor `wrong_label`.
void corrupt_frame(SynthInstance& instance, std::size_t t, State wrong_label);

} // namespace chordgm
