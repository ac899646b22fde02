#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chordgm/matrix.hpp"

namespace chordgm {

inline constexpr std::size_t kPitchClasses = 12;
inline constexpr std::size_t kLabelCount = 24;

enum class Mode : std::uint8_t { Major, Minor };

/// A major or minor triad, or a major or minor key. Index is root for major
/// and root + 12 for minor.
struct TonalLabel {
    std::uint8_t root = 0;
    Mode mode = Mode::Major;

    std::size_t index() const noexcept { return root + (mode == Mode::Minor ? 12u : 0u); }
    /// Canonical text: "C", "F#", "Am", "C#m".
    std::string name() const;

    static TonalLabel from_index(std::size_t index);
    /// Accepts canonical names, flat spellings ("Bb", "Ebm") and the
    /// "C:maj" / "A:min" forms. Throws ModelError otherwise.
    static TonalLabel parse(std::string_view text);

    friend bool operator==(const TonalLabel&, const TonalLabel&) = default;
};

using ChordLabel = TonalLabel;
using KeyLabel = TonalLabel;

std::string label_name(std::size_t index);
std::size_t parse_label(std::string_view text);
/// The 24 canonical names in index order.
std::vector<std::string> label_names();

using ChromaVector = std::array<double, kPitchClasses>;

/// Beat-synchronous chroma frames with T+1 boundaries in seconds.
struct Chromagram {
    std::vector<ChromaVector> frames;
    std::vector<double> times;

    std::size_t size() const noexcept { return frames.size(); }
};

/// 24×12 binary triad templates, rows in label index order.
Matrix chord_templates();

/// Pearson correlation; defined as 0 when either input has zero variance.
double pearson_correlation(std::span<const double> a, std::span<const double> b);

/// Floor applied to correlations before per-frame normalization.
inline constexpr double kCorrelationFloor = 1e-6;

/// T×24 log-scores. Each frame: correlation with every template, clamped to
/// kCorrelationFloor, normalized over the labels, then logged. Throws
/// ModelError on negative or non-finite chroma.
Matrix observation_scores(std::span<const ChromaVector> frames);
inline Matrix observation_scores(const Chromagram& chroma) { return observation_scores(chroma.frames); }

/// n×n row-stochastic matrix: `stay` on the diagonal, the rest shared evenly.
Matrix uniform_switch_matrix(std::size_t n, double stay);

/// 24×24 chord transitions: diagonal self_prob, off-diagonal (1 - self_prob)/23.
Matrix chord_transition_matrix(double self_prob);

/// 24×24 key transitions: diagonal stay_prob, rest uniform.
Matrix key_transition_matrix(double stay_prob);

enum class MinorScale : std::uint8_t { Natural, Harmonic };

/// Pitch classes of the key's scale (major scale or the chosen minor scale).
std::vector<std::size_t> key_scale(std::size_t key, MinorScale minor = MinorScale::Natural);

/// Chord indices whose three tones all lie in the key's scale.
std::vector<std::size_t> diatonic_chords(std::size_t key, MinorScale minor = MinorScale::Natural);

/// 24×24 row-stochastic p(chord | key), row = key. Diatonic chords get
/// `diatonic_weight` each; the remaining mass is shared by the others.
Matrix key_chord_compatibility(double diatonic_weight, MinorScale minor = MinorScale::Natural);

/// Rotates a chroma frame up by `semitones`: out[(p + s) mod 12] = in[p].
ChromaVector rotate_chroma(const ChromaVector& frame, int semitones);

} // namespace chordgm
