#include "chordgm/harmony.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "chordgm/errors.hpp"

namespace chordgm {
namespace {

constexpr std::array<std::string_view, kPitchClasses> kSharpNames{"C",  "C#", "D",  "D#", "E",  "F",
                                                                   "F#", "G",  "G#", "A",  "A#", "B"};
constexpr std::array<std::string_view, kPitchClasses> kFlatNames{"C",  "Db", "D",  "Eb", "Fb", "F",
                                                                  "Gb", "G",  "Ab", "A",  "Bb", "Cb"};

constexpr std::array<std::size_t, 7> kMajorScale{0, 2, 4, 5, 7, 9, 11};
constexpr std::array<std::size_t, 7> kNaturalMinorScale{0, 2, 3, 5, 7, 8, 10};
constexpr std::array<std::size_t, 7> kHarmonicMinorScale{0, 2, 3, 5, 7, 8, 11};

std::array<std::size_t, 3> triad(std::size_t chord) {
    const TonalLabel label = TonalLabel::from_index(chord);
    const std::size_t third = label.mode == Mode::Major ? 4 : 3;
    return {label.root, (label.root + third) % 12, (label.root + 7u) % 12};
}

std::optional<std::uint8_t> parse_root(std::string_view text) {
    for (std::size_t i = 0; i < kPitchClasses; ++i) {
        if (text == kSharpNames[i] || text == kFlatNames[i]) return static_cast<std::uint8_t>(i);
    }
    if (text == "E#") return std::uint8_t{5};
    if (text == "B#") return std::uint8_t{0};
    return std::nullopt;
}

} // namespace

std::string TonalLabel::name() const {
    std::string out(kSharpNames[root]);
    if (mode == Mode::Minor) out += 'm';
    return out;
}

TonalLabel TonalLabel::from_index(std::size_t index) {
    if (index >= kLabelCount) throw ModelError("label index " + std::to_string(index) + " out of range");
    return TonalLabel{static_cast<std::uint8_t>(index % 12), index < 12 ? Mode::Major : Mode::Minor};
}

TonalLabel TonalLabel::parse(std::string_view text) {
    std::string_view root = text;
    Mode mode = Mode::Major;
    if (const auto colon = text.find(':'); colon != std::string_view::npos) {
        root = text.substr(0, colon);
        const std::string_view quality = text.substr(colon + 1);
        if (quality == "min") {
            mode = Mode::Minor;
        } else if (quality != "maj") {
            throw ModelError("unknown label '" + std::string(text) + "'");
        }
    } else if (text.size() >= 2 && text.back() == 'm') {
        root = text.substr(0, text.size() - 1);
        mode = Mode::Minor;
    }
    const auto pc = parse_root(root);
    if (!pc) throw ModelError("unknown label '" + std::string(text) + "'");
    return TonalLabel{*pc, mode};
}

std::string label_name(std::size_t index) { return TonalLabel::from_index(index).name(); }

std::size_t parse_label(std::string_view text) { return TonalLabel::parse(text).index(); }

std::vector<std::string> label_names() {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < kLabelCount; ++i) names.push_back(label_name(i));
    return names;
}

Matrix chord_templates() {
    Matrix templates(kLabelCount, kPitchClasses, 0.0);
    for (std::size_t chord = 0; chord < kLabelCount; ++chord)
        for (const std::size_t pc : triad(chord)) templates(chord, pc) = 1.0;
    return templates;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a <= 0.0 || var_b <= 0.0) return 0.0;
    return cov / std::sqrt(var_a * var_b);
}

Matrix observation_scores(std::span<const ChromaVector> frames) {
    const Matrix templates = chord_templates();
    Matrix scores(frames.size(), kLabelCount);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        for (const double x : frames[t]) {
            if (!std::isfinite(x) || x < 0.0)
                throw ModelError("chroma frame " + std::to_string(t) + " has a negative or non-finite value");
        }
        double total = 0.0;
        for (std::size_t c = 0; c < kLabelCount; ++c) {
            const double r = pearson_correlation(frames[t], templates.row(c));
            scores(t, c) = std::max(r, kCorrelationFloor);
            total += scores(t, c);
        }
        for (std::size_t c = 0; c < kLabelCount; ++c) scores(t, c) = std::log(scores(t, c) / total);
    }
    return scores;
}

Matrix uniform_switch_matrix(std::size_t n, double stay) {
    if (n == 0) throw ModelError("matrix needs at least one state");
    if (!(stay >= 0.0 && stay <= 1.0)) throw ModelError("stay probability must lie in [0, 1]");
    if (n == 1) return Matrix(1, 1, 1.0);
    const double other = (1.0 - stay) / static_cast<double>(n - 1);
    Matrix m(n, n, other);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = stay;
    return m;
}

Matrix chord_transition_matrix(double self_prob) { return uniform_switch_matrix(kLabelCount, self_prob); }

Matrix key_transition_matrix(double stay_prob) { return uniform_switch_matrix(kLabelCount, stay_prob); }

std::vector<std::size_t> key_scale(std::size_t key, MinorScale minor) {
    const TonalLabel label = TonalLabel::from_index(key);
    const auto& steps = label.mode == Mode::Major
                            ? kMajorScale
                            : (minor == MinorScale::Natural ? kNaturalMinorScale : kHarmonicMinorScale);
    std::vector<std::size_t> pcs;
    for (const std::size_t step : steps) pcs.push_back((label.root + step) % 12);
    std::sort(pcs.begin(), pcs.end());
    return pcs;
}

std::vector<std::size_t> diatonic_chords(std::size_t key, MinorScale minor) {
    const auto scale = key_scale(key, minor);
    std::vector<std::size_t> chords;
    for (std::size_t chord = 0; chord < kLabelCount; ++chord) {
        const auto tones = triad(chord);
        if (std::all_of(tones.begin(), tones.end(),
                        [&](std::size_t pc) { return std::binary_search(scale.begin(), scale.end(), pc); }))
            chords.push_back(chord);
    }
    return chords;
}

Matrix key_chord_compatibility(double diatonic_weight, MinorScale minor) {
    if (!(diatonic_weight >= 0.0)) throw ModelError("diatonic weight must be non-negative");
    Matrix m(kLabelCount, kLabelCount, 0.0);
    for (std::size_t key = 0; key < kLabelCount; ++key) {
        const auto diatonic = diatonic_chords(key, minor);
        const double diatonic_mass = diatonic_weight * static_cast<double>(diatonic.size());
        if (diatonic_mass > 1.0 + 1e-12)
            throw ModelError("diatonic weight " + std::to_string(diatonic_weight) + " exceeds 1/" +
                             std::to_string(diatonic.size()));
        const double rest = std::max(0.0, 1.0 - diatonic_mass) / static_cast<double>(kLabelCount - diatonic.size());
        for (std::size_t chord = 0; chord < kLabelCount; ++chord) m(key, chord) = rest;
        for (const std::size_t chord : diatonic) m(key, chord) = diatonic_weight;
        double sum = 0.0;
        for (const double p : m.row(key)) sum += p;
        for (double& p : m.row(key)) p /= sum;
    }
    return m;
}

ChromaVector rotate_chroma(const ChromaVector& frame, int semitones) {
    ChromaVector out{};
    const int shift = ((semitones % 12) + 12) % 12;
    for (std::size_t pc = 0; pc < kPitchClasses; ++pc) out[(pc + static_cast<std::size_t>(shift)) % 12] = frame[pc];
    return out;
}

} // namespace chordgm
