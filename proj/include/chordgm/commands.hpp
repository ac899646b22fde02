#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chordgm/chain.hpp"
#include "chordgm/harmony.hpp"
#include "chordgm/mln.hpp"
#include "chordgm/structural.hpp"

namespace chordgm {

/// Process exit codes shared by every command.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,  ///< compare found a mismatch, or an unexpected error
    kExitInput = 2,    ///< usage, parse or model errors, missing side inputs
    kExitGuard = 3,    ///< exact inference would exceed the table guard
    kExitInfeasible = 4,
};

/// Tunable model parameters. Names match the config-file keys.
struct ModelParams {
    double chord_self_prob = 0.5;
    double key_stay_prob = 0.98;
    double diatonic_weight = 0.15;
    double chord_tie_stay = 0.7;
    double key_tie_stay = 0.9;
    MinorScale minor_scale = MinorScale::Natural;

    /// Sets one parameter from text. Throws ModelError on an unknown key or a
    /// malformed value.
    void set(std::string_view key, std::string_view value);

    /// Applies "key = value" lines; '#' starts a comment. Throws ParseError
    /// with the line number.
    void apply_config(std::string_view text);

    /// Applies a "key=value" override as given on the command line.
    void apply_override(std::string_view assignment);
};

enum class ModelKind : std::uint8_t { Chain, PriorKey, Joint, Struct, MultiScalePriorKey, MultiScale };

/// "chain", "prior-key", "joint", "struct", "multiscale-prior-key", "multiscale".
ModelKind parse_model_kind(std::string_view name);
std::string_view model_kind_name(ModelKind kind);

struct SideInputs {
    std::optional<std::vector<SimilarityPair>> pairs;
    std::optional<std::vector<MeasureRange>> measures;
    std::optional<std::vector<std::size_t>> keys;
};

struct Annotation {
    ModelKind model = ModelKind::Chain;
    std::vector<std::size_t> chords;
    /// Per-frame keys: decoded (joint, multiscale) or given (prior-key variants).
    std::vector<std::size_t> keys;
    double log_score = 0.0;
    std::string solver;
    std::size_t induced_width = 0;
    SolverStats stats;
};

/// Decodes with the chosen model: Viterbi for chain, prior-key and joint,
/// variable elimination for the structural models. Struct needs pairs,
/// multiscale-prior-key needs pairs and keys, multiscale needs pairs and
/// measures, prior-key needs keys. Missing or unused side inputs throw
/// ModelError.
Annotation annotate(ModelKind model, const ModelParams& params, const Matrix& obs_log, const SideInputs& side);

std::string annotation_lab(const Annotation& annotation, const std::vector<double>& times);

/// Diagnostics: model, solver, score, width, per-frame labels and segments.
std::string annotation_json(const Annotation& annotation, const std::vector<double>& times);

struct PipelineResult {
    std::string name;
    Assignment labels; ///< per frame
    double log_score = 0.0;
    double wall_ms = 0.0;
};

/// The same chain decoded four ways: viterbi, VE on the unrolled graph, VE
/// on the propositional grounding and VE on the naive `next/2` grounding.
/// Grounding times are included in the pipeline wall time.
struct CompareReport {
    std::size_t frame_count = 0;
    std::size_t label_count = 0;
    std::vector<PipelineResult> pipelines;
    GroundingStats propositional;
    GroundingStats naive;

    bool equal(std::size_t a, std::size_t b) const;
    bool all_equal() const;
};

inline constexpr double kCompareTolerance = 1e-9;

CompareReport compare_pipelines(const ChainSpec& spec, const Matrix& obs_log);

std::string format_compare_report(const CompareReport& report);

struct BenchOptions {
    std::vector<std::size_t> sizes{100, 200, 500};
    std::size_t repetitions = 5;
    std::size_t label_count = kLabelCount;
    std::uint64_t seed = 1;
    /// The naive grounding is quadratic in T; larger sizes skip it.
    std::size_t naive_limit = 1000;
};

struct BenchRow {
    std::size_t frames = 0;
    std::size_t labels = 0;
    std::string solver;
    double median_ms = 0.0;
    std::size_t induced_width = 0;
};

/// Solvers per size: viterbi, ve-unrolled, ground-naive (grounding only),
/// ve-naive (VE on the naive grounding), mln-naive (both), and ve-struct on
/// a two-segment repeat instance when T is even. Throws ModelError on zero
/// repetitions or an empty size list.
std::vector<BenchRow> run_bench(const BenchOptions& options);

/// Header "T\tK\tsolver\tmedian_ms\tinduced_width" then one line per row.
std::string format_bench_tsv(const std::vector<BenchRow>& rows);

struct AnnotateArgs {
    std::filesystem::path chroma;
    ModelKind model = ModelKind::Chain;
    std::optional<std::filesystem::path> pairs;
    std::optional<std::filesystem::path> measures;
    std::optional<std::filesystem::path> keys;
    std::optional<std::filesystem::path> config;
    std::vector<std::string> overrides;
    std::optional<std::filesystem::path> lab_out; ///< stdout when absent
    std::optional<std::filesystem::path> json_out;
};

struct CompareArgs {
    std::filesystem::path chroma;
    std::optional<std::filesystem::path> config;
    std::vector<std::string> overrides;
};

struct BenchArgs {
    BenchOptions options;
    std::optional<std::filesystem::path> out; ///< stdout when absent
};

/// File-level commands. Errors are reported on `err` and mapped to ExitCode.
int cmd_annotate(const AnnotateArgs& args, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err);

} // namespace chordgm
