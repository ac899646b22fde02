#include "chordgm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "chordgm/errors.hpp"

namespace chordgm {
namespace {

using nlohmann::json;

// Contiguity slack between one row's end and the next row's start, in seconds.
constexpr double kBoundarySlack = 1e-6;
constexpr std::size_t kCsvColumns = 2 + kPitchClasses;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size();
}

std::vector<std::string_view> split_cells(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

std::string fmt_seconds(double s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", s);
    return buf;
}

json parse_json(std::string_view text, const char* what) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(std::string(what) + ": malformed JSON", line, col);
    }
}

std::size_t frame_index(const json& v, const std::string& where) {
    if (!v.is_number_unsigned()) throw ParseError(where + " must be a non-negative integer frame index", 0);
    return v.get<std::size_t>();
}

std::vector<std::pair<std::size_t, std::size_t>> index_pairs(std::string_view text, const char* what) {
    const json doc = parse_json(text, what);
    if (!doc.is_array()) throw ParseError(std::string(what) + ": expected a JSON array", 0);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string where = std::string(what) + "[" + std::to_string(i) + "]";
        const json& item = doc[i];
        if (!item.is_array() || item.size() != 2) throw ParseError(where + " must be a two-element array", 0);
        out.emplace_back(frame_index(item[0], where), frame_index(item[1], where));
    }
    return out;
}

} // namespace

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Chromagram parse_chromagram(std::string_view text) {
    Chromagram out;
    std::size_t line_no = 0;
    bool first_row = true;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line =
            trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (line.empty()) continue;

        const auto cells = split_cells(line);
        double probe = 0.0;
        if (first_row && !parse_double(cells[0], probe)) {
            first_row = false;
            continue; // header
        }
        first_row = false;
        if (cells.size() != kCsvColumns)
            throw ParseError("expected " + std::to_string(kCsvColumns) + " columns (start, end, 12 chroma), found " +
                                 std::to_string(cells.size()),
                             line_no);
        double values[kCsvColumns];
        for (std::size_t c = 0; c < kCsvColumns; ++c) {
            if (!parse_double(cells[c], values[c]) || !std::isfinite(values[c]))
                throw ParseError("not a finite number: '" + std::string(cells[c]) + "'", line_no, c + 1);
            if (c >= 2 && values[c] < 0.0) throw ParseError("chroma values must be non-negative", line_no, c + 1);
        }
        const double start = values[0], end = values[1];
        if (!(end > start))
            throw ParseError("end time " + fmt_seconds(end) + " is not after start time " + fmt_seconds(start), line_no,
                             2);
        if (out.times.empty()) {
            out.times.push_back(start);
        } else {
            const double prev = out.times.back();
            if (start > prev + kBoundarySlack)
                throw ParseError("gap between " + fmt_seconds(prev) + " and " + fmt_seconds(start), line_no, 1);
            if (start < prev - kBoundarySlack)
                throw ParseError("overlap: start " + fmt_seconds(start) + " precedes previous end " + fmt_seconds(prev),
                                 line_no, 1);
            if (!(end > prev))
                throw ParseError("end time " + fmt_seconds(end) + " is not after previous end " + fmt_seconds(prev),
                                 line_no, 2);
        }
        out.times.push_back(end);
        ChromaVector frame{};
        for (std::size_t p = 0; p < kPitchClasses; ++p) frame[p] = values[2 + p];
        out.frames.push_back(frame);
    }
    if (out.frames.empty()) throw ParseError("chromagram has no frames", 0);
    return out;
}

Chromagram read_chromagram(const std::filesystem::path& path) { return parse_chromagram(read_text_file(path)); }

std::vector<SimilarityPair> parse_pairs(std::string_view text) {
    std::vector<SimilarityPair> out;
    std::size_t i = 0;
    for (const auto& [a, b] : index_pairs(text, "pairs")) {
        if (b <= a + 1)
            throw ParseError("pairs[" + std::to_string(i) + "] = [" + std::to_string(a) + ", " + std::to_string(b) +
                                 "]: frames must satisfy t1 + 1 < t2 (adjacent frames are already linked)",
                             0);
        out.push_back({a, b});
        ++i;
    }
    return out;
}

std::vector<MeasureRange> parse_measures(std::string_view text) {
    std::vector<MeasureRange> out;
    std::size_t next = 0, i = 0;
    for (const auto& [a, b] : index_pairs(text, "measures")) {
        const std::string where = "measures[" + std::to_string(i) + "] = [" + std::to_string(a) + ", " +
                                  std::to_string(b) + "]";
        if (b <= a) throw ParseError(where + " is empty", 0);
        if (a < next) throw ParseError(where + " overlaps the previous measure", 0);
        if (a > next) throw ParseError(where + " leaves frames " + std::to_string(next) + ".." +
                                           std::to_string(a - 1) + " outside any measure",
                                       0);
        out.push_back({a, b});
        next = b;
        ++i;
    }
    return out;
}

std::vector<std::size_t> parse_keys(std::string_view text) {
    const json doc = parse_json(text, "keys");
    if (!doc.is_array()) throw ParseError("keys: expected a JSON array of key names", 0);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        if (!doc[i].is_string()) throw ParseError("keys[" + std::to_string(i) + "] must be a string", 0);
        const std::string name = doc[i].get<std::string>();
        try {
            out.push_back(parse_label(name));
        } catch (const ModelError&) {
            throw ParseError("keys[" + std::to_string(i) + "]: unknown key '" + name + "'", 0);
        }
    }
    return out;
}

std::vector<LabSegment> merge_segments(const std::vector<double>& times, const std::vector<std::string>& frame_labels) {
    if (times.size() != frame_labels.size() + 1)
        throw ModelError("need " + std::to_string(frame_labels.size() + 1) + " time boundaries, got " +
                         std::to_string(times.size()));
    std::vector<LabSegment> out;
    for (std::size_t t = 0; t < frame_labels.size(); ++t) {
        if (!out.empty() && out.back().label == frame_labels[t])
            out.back().end = times[t + 1];
        else
            out.push_back({times[t], times[t + 1], frame_labels[t]});
    }
    return out;
}

std::string write_lab(const std::vector<LabSegment>& segments) {
    std::string out;
    char buf[64];
    for (const LabSegment& s : segments) {
        std::snprintf(buf, sizeof buf, "%.6f %.6f ", s.start, s.end);
        out += buf;
        out += s.label;
        out += '\n';
    }
    return out;
}

} // namespace chordgm
