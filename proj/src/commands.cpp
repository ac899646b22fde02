#include "chordgm/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>

#include <json.hpp>

#include "chordgm/errors.hpp"
#include "chordgm/inference.hpp"
#include "chordgm/io.hpp"
#include "chordgm/mln_emit.hpp"

namespace chordgm {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view key, std::string_view text) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
        throw ModelError(std::string(key) + ": not a number: '" + std::string(text) + "'");
    return v;
}

const char* const kModelNames[] = {"chain", "prior-key", "joint", "struct", "multiscale-prior-key", "multiscale"};

bool is_structural(ModelKind m) {
    return m == ModelKind::Struct || m == ModelKind::MultiScalePriorKey || m == ModelKind::MultiScale;
}

void check_side_inputs(ModelKind model, const SideInputs& side) {
    const bool wants_pairs = is_structural(model);
    const bool wants_keys = model == ModelKind::PriorKey || model == ModelKind::MultiScalePriorKey;
    const bool wants_measures = model == ModelKind::MultiScale;
    const std::string name(model_kind_name(model));
    auto check = [&](bool wanted, bool given, const char* flag) {
        if (wanted && !given) throw ModelError("model " + name + " requires " + flag);
        if (!wanted && given) throw ModelError("model " + name + " does not use " + flag);
    };
    check(wants_pairs, side.pairs.has_value(), "--pairs");
    check(wants_keys, side.keys.has_value(), "--keys");
    check(wants_measures, side.measures.has_value(), "--measures");
}

std::vector<std::string> names_of(const std::vector<std::size_t>& labels) {
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (const std::size_t l : labels) out.push_back(label_name(l));
    return out;
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

Assignment chord_labels_from_grounding(const GroundingResult& g, const MapResult& r, std::size_t T, std::size_t K) {
    const std::vector<std::string> labels = chain_label_names(K);
    Assignment out(T);
    for (std::size_t t = 0; t < T; ++t) {
        const AtomRef ref = g.atom_index.at(Atom{"chord", {labels[0], std::to_string(t)}});
        out[t] = r.assignment[ref.variable.index];
    }
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Parse errors gain the file name; the line and column stay in the message.
template <class Parse>
auto parse_file(const std::filesystem::path& path, Parse&& parse) {
    const std::string text = read_text_file(path);
    try {
        return parse(text);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
}

void apply_params(ModelParams& params, const std::optional<std::filesystem::path>& config,
                  const std::vector<std::string>& overrides) {
    if (config) parse_file(*config, [&](const std::string& text) { params.apply_config(text); return 0; });
    for (const std::string& o : overrides) params.apply_override(o);
}

int report_errors(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const GuardError& e) {
        err << "error: " << e.what() << '\n';
        return kExitGuard;
    } catch (const InfeasibleError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelError("cannot write " + path.string());
    out << text;
    if (!out) throw ModelError("failed writing " + path.string());
}

} // namespace

void ModelParams::set(std::string_view key, std::string_view value) {
    value = trim(value);
    if (key == "chord_self_prob") {
        chord_self_prob = parse_number(key, value);
    } else if (key == "key_stay_prob") {
        key_stay_prob = parse_number(key, value);
    } else if (key == "diatonic_weight") {
        diatonic_weight = parse_number(key, value);
    } else if (key == "chord_tie_stay") {
        chord_tie_stay = parse_number(key, value);
    } else if (key == "key_tie_stay") {
        key_tie_stay = parse_number(key, value);
    } else if (key == "minor_scale") {
        if (value == "natural")
            minor_scale = MinorScale::Natural;
        else if (value == "harmonic")
            minor_scale = MinorScale::Harmonic;
        else
            throw ModelError("minor_scale must be 'natural' or 'harmonic', got '" + std::string(value) + "'");
    } else {
        throw ModelError("unknown parameter '" + std::string(key) + "'");
    }
}

void ModelParams::apply_config(std::string_view text) {
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
        try {
            set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ModelError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
}

void ModelParams::apply_override(std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos)
        throw ModelError("override '" + std::string(assignment) + "' is not of the form key=value");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

ModelKind parse_model_kind(std::string_view name) {
    for (std::size_t i = 0; i < std::size(kModelNames); ++i)
        if (name == kModelNames[i]) return static_cast<ModelKind>(i);
    throw ModelError("unknown model '" + std::string(name) + "'");
}

std::string_view model_kind_name(ModelKind kind) { return kModelNames[static_cast<std::size_t>(kind)]; }

Annotation annotate(ModelKind model, const ModelParams& params, const Matrix& obs_log, const SideInputs& side) {
    check_side_inputs(model, side);
    const std::size_t T = obs_log.rows();
    if (T == 0) throw ModelError("observation sequence is empty");
    const Matrix chord_trans = chord_transition_matrix(params.chord_self_prob);

    Annotation out;
    out.model = model;
    if (!is_structural(model)) {
        out.solver = "viterbi";
        out.induced_width = T > 1 ? 1 : 0;
        MapResult r;
        if (model == ModelKind::Chain) {
            r = viterbi(ChainSpec::from_probabilities(chord_trans), obs_log);
            out.chords.assign(r.assignment.begin(), r.assignment.end());
        } else if (model == ModelKind::PriorKey) {
            const Matrix compat = key_chord_compatibility(params.diatonic_weight, params.minor_scale);
            const PriorKeyChain pk = build_prior_key_chain(chord_trans, compat, *side.keys);
            r = viterbi(pk.chain, pk.effective_observations(obs_log));
            out.chords.assign(r.assignment.begin(), r.assignment.end());
            out.keys = *side.keys;
        } else {
            const Matrix compat = key_chord_compatibility(params.diatonic_weight, params.minor_scale);
            const ChainSpec joint = build_joint_key_chord(key_transition_matrix(params.key_stay_prob), compat, chord_trans);
            r = viterbi(joint, expand_joint_observations(obs_log, compat.rows()));
            const auto K = static_cast<std::uint32_t>(chord_trans.rows());
            for (const State s : r.assignment) {
                const CompoundState cs = CompoundState::unpack(s, K);
                out.chords.push_back(cs.chord);
                out.keys.push_back(cs.key);
            }
        }
        out.log_score = r.log_score;
        out.stats = r.stats;
        return out;
    }

    StructuralSpec spec;
    spec.variant = model == ModelKind::Struct               ? StructuralVariant::Struct
                   : model == ModelKind::MultiScalePriorKey ? StructuralVariant::MultiScalePriorKey
                                                            : StructuralVariant::MultiScale;
    spec.chord_trans = chord_trans;
    if (model != ModelKind::Struct) spec.key_chord = key_chord_compatibility(params.diatonic_weight, params.minor_scale);
    if (model == ModelKind::MultiScale) {
        spec.key_trans = key_transition_matrix(params.key_stay_prob);
        spec.measures = *side.measures;
    }
    spec.chord_pairs = *side.pairs;
    spec.chord_tie_stay = params.chord_tie_stay;
    spec.key_tie_stay = params.key_tie_stay;
    const std::vector<std::size_t> no_keys;
    const FactorGraph graph = consolidate_parallel_factors(
        build_structural_graph(spec, obs_log, model == ModelKind::MultiScalePriorKey ? *side.keys : no_keys));
    const EliminationOrdering ordering = min_fill_ordering(graph);
    const MapResult r = max_product_ve(graph, ordering);
    out.solver = "variable-elimination";
    out.induced_width = ordering.induced_width;
    out.log_score = r.log_score + graph.log_offset();
    out.stats = r.stats;
    out.chords.assign(r.assignment.begin(), r.assignment.begin() + static_cast<std::ptrdiff_t>(T));
    if (model == ModelKind::MultiScale)
        out.keys.assign(r.assignment.begin() + static_cast<std::ptrdiff_t>(T), r.assignment.end());
    else if (model == ModelKind::MultiScalePriorKey)
        out.keys = *side.keys;
    return out;
}

std::string annotation_lab(const Annotation& annotation, const std::vector<double>& times) {
    return write_lab(merge_segments(times, names_of(annotation.chords)));
}

std::string annotation_json(const Annotation& annotation, const std::vector<double>& times) {
    nlohmann::ordered_json doc;
    doc["model"] = model_kind_name(annotation.model);
    doc["solver"] = annotation.solver;
    doc["frames"] = annotation.chords.size();
    doc["log_score"] = annotation.log_score;
    doc["induced_width"] = annotation.induced_width;
    doc["max_table_size"] = annotation.stats.max_table_size;
    doc["wall_ms"] = annotation.stats.wall_ms;
    doc["chords"] = names_of(annotation.chords);
    if (!annotation.keys.empty()) doc["keys"] = names_of(annotation.keys);
    nlohmann::ordered_json segments = nlohmann::ordered_json::array();
    for (const LabSegment& s : merge_segments(times, names_of(annotation.chords)))
        segments.push_back({{"start", s.start}, {"end", s.end}, {"chord", s.label}});
    doc["segments"] = std::move(segments);
    if (!annotation.keys.empty()) {
        nlohmann::ordered_json key_segments = nlohmann::ordered_json::array();
        for (const LabSegment& s : merge_segments(times, names_of(annotation.keys)))
            key_segments.push_back({{"start", s.start}, {"end", s.end}, {"key", s.label}});
        doc["key_segments"] = std::move(key_segments);
    }
    return doc.dump(2) + "\n";
}

bool CompareReport::equal(std::size_t a, std::size_t b) const {
    const PipelineResult& x = pipelines.at(a);
    const PipelineResult& y = pipelines.at(b);
    return x.labels == y.labels && std::abs(x.log_score - y.log_score) <= kCompareTolerance;
}

bool CompareReport::all_equal() const {
    for (std::size_t i = 1; i < pipelines.size(); ++i)
        if (!equal(0, i)) return false;
    return true;
}

CompareReport compare_pipelines(const ChainSpec& spec, const Matrix& obs_log) {
    CompareReport report;
    report.frame_count = obs_log.rows();
    report.label_count = obs_log.cols();
    const std::size_t T = report.frame_count, K = report.label_count;

    {
        const auto start = Clock::now();
        const MapResult r = viterbi(spec, obs_log);
        report.pipelines.push_back({"viterbi", r.assignment, r.log_score, ms_since(start)});
    }
    {
        const auto start = Clock::now();
        const FactorGraph g = unroll(spec, obs_log);
        const MapResult r = max_product_ve(g);
        report.pipelines.push_back({"ve-unrolled", r.assignment, r.log_score + g.log_offset(), ms_since(start)});
    }
    auto grounded = [&](const char* name, const MlnProgram& program, GroundingStats& stats) {
        const auto start = Clock::now();
        const GroundingResult g = ground(program);
        const MapResult r = max_product_ve(g.graph);
        report.pipelines.push_back({name, chord_labels_from_grounding(g, r, T, K), r.log_score + g.graph.log_offset(),
                                    ms_since(start)});
        stats = g.stats;
    };
    grounded("ve-propositional", emit_propositional_chain(obs_log, spec.transition_log, spec.initial_log),
             report.propositional);
    grounded("ve-naive", emit_naive_chain(obs_log, spec.transition_log, spec.initial_log), report.naive);
    return report;
}

std::string format_compare_report(const CompareReport& report) {
    std::string out;
    out += "frames " + std::to_string(report.frame_count) + ", labels " + std::to_string(report.label_count) + "\n";
    char buf[160];
    for (const PipelineResult& p : report.pipelines) {
        std::snprintf(buf, sizeof buf, "%-17s log_score %.12f  wall_ms %.3f\n", p.name.c_str(), p.log_score, p.wall_ms);
        out += buf;
    }
    for (std::size_t a = 0; a < report.pipelines.size(); ++a)
        for (std::size_t b = a + 1; b < report.pipelines.size(); ++b)
            out += report.pipelines[a].name + " vs " + report.pipelines[b].name + ": " +
                   (report.equal(a, b) ? "EQUAL" : "UNEQUAL") + "\n";
    auto counts = [&](const char* name, const GroundingStats& s) {
        const auto pairwise = s.clique_sizes.count(2) ? s.clique_sizes.at(2) : 0;
        out += std::string(name) + " grounding: " + std::to_string(s.formula_count) + " formulas, " +
               std::to_string(s.ground_instances) + " ground instances; before conditioning " +
               std::to_string(s.pre_factor_count) + " factors / " + std::to_string(s.pre_factor_cells) +
               " cells; after " + std::to_string(s.factor_count) + " factors / " + std::to_string(s.factor_cells) +
               " cells, " + std::to_string(pairwise) + " pairwise\n";
    };
    counts("propositional", report.propositional);
    counts("naive", report.naive);
    out += std::string("result: ") + (report.all_equal() ? "EQUAL" : "UNEQUAL") + "\n";
    return out;
}

std::vector<BenchRow> run_bench(const BenchOptions& options) {
    if (options.repetitions == 0) throw ModelError("repetitions must be at least 1");
    if (options.sizes.empty()) throw ModelError("no sizes given");
    if (options.label_count < 2) throw ModelError("at least two labels are needed");
    const std::size_t K = options.label_count;
    const ChainSpec spec = ChainSpec::from_probabilities(uniform_switch_matrix(K, 0.5));

    std::vector<BenchRow> rows;
    for (const std::size_t T : options.sizes) {
        if (T < 2) throw ModelError("sizes must be at least 2");
        const SynthInstance inst = synth_repeat_instance(options.seed + T, T, T, 0.2, K);
        auto time = [&](const char* solver, std::size_t width, auto&& body) {
            std::vector<double> samples;
            for (std::size_t r = 0; r < options.repetitions; ++r) {
                const auto start = Clock::now();
                body();
                samples.push_back(ms_since(start));
            }
            rows.push_back({T, K, solver, median(samples), width});
        };

        time("viterbi", 1, [&] { (void)viterbi(spec, inst.obs_log); });
        const FactorGraph unrolled = unroll(spec, inst.obs_log);
        const EliminationOrdering chain_order = min_fill_ordering(unrolled);
        time("ve-unrolled", chain_order.induced_width, [&] { (void)max_product_ve(unrolled, chain_order); });

        if (T <= options.naive_limit) {
            const MlnProgram naive = emit_naive_chain(inst.obs_log, spec.transition_log, spec.initial_log);
            const GroundingResult g = ground(naive);
            const EliminationOrdering order = min_fill_ordering(g.graph);
            time("ground-naive", order.induced_width, [&] { (void)ground(naive); });
            time("ve-naive", order.induced_width, [&] { (void)max_product_ve(g.graph, order); });
            time("mln-naive", order.induced_width, [&] { (void)max_product_ve(ground(naive).graph); });
        }

        if (T % 2 == 0 && T >= 4) {
            const SynthInstance rep = synth_repeat_instance(options.seed + T, T, T / 2, 0.2, K);
            StructuralSpec s;
            s.chord_trans = uniform_switch_matrix(K, 0.5);
            s.chord_pairs = rep.pairs;
            const FactorGraph graph = build_structural_graph(s, rep.obs_log);
            const EliminationOrdering order = min_fill_ordering(graph);
            time("ve-struct", order.induced_width, [&] { (void)max_product_ve(graph, order); });
        }
    }
    return rows;
}

std::string format_bench_tsv(const std::vector<BenchRow>& rows) {
    std::string out = "T\tK\tsolver\tmedian_ms\tinduced_width\n";
    for (const BenchRow& r : rows)
        out += std::to_string(r.frames) + "\t" + std::to_string(r.labels) + "\t" + r.solver + "\t" +
               fixed(r.median_ms, 4) + "\t" + std::to_string(r.induced_width) + "\n";
    return out;
}

int cmd_annotate(const AnnotateArgs& args, std::ostream& out, std::ostream& err) {
    return report_errors(err, [&] {
        ModelParams params;
        apply_params(params, args.config, args.overrides);
        const Chromagram chroma = parse_file(args.chroma, parse_chromagram);
        SideInputs side;
        if (args.pairs) side.pairs = parse_file(*args.pairs, parse_pairs);
        if (args.measures) side.measures = parse_file(*args.measures, parse_measures);
        if (args.keys) side.keys = parse_file(*args.keys, parse_keys);
        const Annotation a = annotate(args.model, params, observation_scores(chroma), side);
        const std::string lab = annotation_lab(a, chroma.times);
        if (args.json_out) write_file(*args.json_out, annotation_json(a, chroma.times));
        if (args.lab_out)
            write_file(*args.lab_out, lab);
        else
            out << lab;
        return static_cast<int>(kExitOk);
    });
}

int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err) {
    return report_errors(err, [&] {
        ModelParams params;
        apply_params(params, args.config, args.overrides);
        const Chromagram chroma = parse_file(args.chroma, parse_chromagram);
        const CompareReport report = compare_pipelines(
            ChainSpec::from_probabilities(chord_transition_matrix(params.chord_self_prob)), observation_scores(chroma));
        out << format_compare_report(report);
        return static_cast<int>(report.all_equal() ? kExitOk : kExitFailure);
    });
}

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
    return report_errors(err, [&] {
        const std::string tsv = format_bench_tsv(run_bench(args.options));
        if (args.out)
            write_file(*args.out, tsv);
        else
            out << tsv;
        return static_cast<int>(kExitOk);
    });
}

} // namespace chordgm
