#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "chordgm/harmony.hpp"
#include "chordgm/structural.hpp"

namespace chordgm {

/// Reads a whole file. Throws ParseError (line 0) if it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

/// Chromagram CSV: optional header row, then one row per frame with
/// start_sec, end_sec and 12 chroma values (C..B). Rows must be contiguous:
/// each start equals the previous end. Blank lines are skipped. Errors are
/// ParseError with the 1-based line and column.
Chromagram parse_chromagram(std::string_view text);
Chromagram read_chromagram(const std::filesystem::path& path);

/// JSON array of [t1, t2] frame pairs with t1 + 1 < t2.
std::vector<SimilarityPair> parse_pairs(std::string_view json);

/// JSON array of [begin, end) frame ranges, consecutive from 0 and non-empty.
/// Coverage of the full chromagram is checked when the model is built.
std::vector<MeasureRange> parse_measures(std::string_view json);

/// JSON array of key names, one per frame. Returns label indices.
std::vector<std::size_t> parse_keys(std::string_view json);

struct LabSegment {
    double start = 0.0;
    double end = 0.0;
    std::string label;

    friend bool operator==(const LabSegment&, const LabSegment&) = default;
};

/// Merges runs of identical frame labels. `times` holds frame_labels.size()+1
/// boundaries.
std::vector<LabSegment> merge_segments(const std::vector<double>& times, const std::vector<std::string>& frame_labels);

/// One "start end label" line per segment, times with 6 decimals.
std::string write_lab(const std::vector<LabSegment>& segments);

} // namespace chordgm
