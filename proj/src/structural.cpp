#include "chordgm/structural.hpp"

#include <cmath>
#include <map>
#include <random>

#include "chordgm/chain.hpp"
#include "chordgm/errors.hpp"
#include "chordgm/harmony.hpp"

namespace chordgm {
namespace {

void check_stay(double stay, const char* what) {
    if (!(stay > 0.0 && stay < 1.0)) throw ModelError(std::string(what) + " must lie in (0, 1)");
}

void check_measures(const std::vector<MeasureRange>& measures, std::size_t T) {
    std::size_t next = 0;
    for (const MeasureRange& m : measures) {
        if (m.begin != next || m.end <= m.begin)
            throw ModelError("measures must partition the frames into consecutive non-empty ranges");
        next = m.end;
    }
    if (next != T) throw ModelError("measures cover " + std::to_string(next) + " of " + std::to_string(T) + " frames");
}

constexpr double kCleanBoost = 5.0;
constexpr double kCorruptBoost = 1.5;

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void fill_frame(Matrix& obs, std::size_t t, std::span<const double> weights) {
    double total = 0.0;
    for (const double w : weights) total += w;
    for (std::size_t c = 0; c < weights.size(); ++c) obs(t, c) = std::log(weights[c] / total);
}

} // namespace

void StructuralSpec::validate(std::size_t frame_count) const {
    require_row_stochastic(chord_trans, "chord transitions");
    const std::size_t K = chord_trans.rows();
    if (chord_trans.cols() != K) throw ModelError("chord transitions must be square");
    check_stay(chord_tie_stay, "chord tie stay probability");
    for (const SimilarityPair& p : chord_pairs) {
        if (p.t1 >= frame_count || p.t2 >= frame_count)
            throw ModelError("similarity pair (" + std::to_string(p.t1) + ", " + std::to_string(p.t2) +
                             ") is out of range for " + std::to_string(frame_count) + " frames");
        if (p.t2 <= p.t1 + 1)
            throw ModelError("similarity pair (" + std::to_string(p.t1) + ", " + std::to_string(p.t2) +
                             ") must satisfy t1 + 1 < t2");
    }
    if (variant != StructuralVariant::Struct) {
        require_row_stochastic(key_chord, "key-chord compatibility");
        if (key_chord.cols() != K) throw ModelError("key-chord compatibility has the wrong width");
    }
    if (variant == StructuralVariant::MultiScale) {
        require_row_stochastic(key_trans, "key transitions");
        if (key_trans.rows() != key_chord.rows() || key_trans.cols() != key_chord.rows())
            throw ModelError("key transitions do not match the key count");
        check_stay(key_tie_stay, "key tie stay probability");
        check_measures(measures, frame_count);
    } else if (!measures.empty()) {
        check_measures(measures, frame_count);
    }
}

std::vector<double> tying_log_table(std::size_t n, double stay) { return log_of(uniform_switch_matrix(n, stay)).data(); }

FactorGraph build_structural_graph(const StructuralSpec& spec, const Matrix& obs_log,
                                   std::span<const std::size_t> key_evidence) {
    const std::size_t T = obs_log.rows();
    if (T == 0) throw ModelError("observation sequence is empty");
    spec.validate(T);
    const std::size_t K = spec.chord_trans.rows();
    if (obs_log.cols() != K)
        throw ModelError("observations have " + std::to_string(obs_log.cols()) + " columns, model has " +
                         std::to_string(K) + " chords");
    if (spec.variant == StructuralVariant::MultiScalePriorKey && key_evidence.size() != T)
        throw ModelError("key evidence is required for every frame (" + std::to_string(key_evidence.size()) + " of " +
                         std::to_string(T) + " given)");
    if (spec.variant != StructuralVariant::MultiScalePriorKey && !key_evidence.empty())
        throw ModelError("key evidence only applies to the prior-key variant");

    FactorGraph graph;
    if (spec.variant == StructuralVariant::Struct) {
        graph = unroll(ChainSpec::from_probabilities(spec.chord_trans), obs_log);
    } else if (spec.variant == StructuralVariant::MultiScalePriorKey) {
        const PriorKeyChain pk = build_prior_key_chain(spec.chord_trans, spec.key_chord, key_evidence);
        graph = unroll(pk.chain, pk.effective_observations(obs_log));
    } else {
        const std::size_t NK = spec.key_chord.rows();
        const auto cond = conditional_chord_transition_log(spec.key_chord, spec.chord_trans);
        const Matrix key_log = log_of(spec.key_trans);
        const Matrix compat_log = log_of(spec.key_chord);
        const auto k = static_cast<std::uint32_t>(K), nk = static_cast<std::uint32_t>(NK);
        for (std::size_t t = 0; t < T; ++t) graph.new_variable("c" + std::to_string(t), k);
        for (std::size_t t = 0; t < T; ++t) graph.new_variable("k" + std::to_string(t), nk);
        auto chord = [](std::size_t t) { return VariableId{static_cast<std::uint32_t>(t)}; };
        auto key = [T](std::size_t t) { return VariableId{static_cast<std::uint32_t>(T + t)}; };

        for (std::size_t t = 0; t < T; ++t)
            graph.add_factor({chord(t)}, std::vector<double>(obs_log.row(t).begin(), obs_log.row(t).end()));
        // (c0, k0): uniform key, then p(c | k)
        std::vector<double> init(K * NK);
        for (std::size_t c = 0; c < K; ++c)
            for (std::size_t kk = 0; kk < NK; ++kk)
                init[c * NK + kk] = -std::log(static_cast<double>(NK)) + compat_log(kk, c);
        graph.add_factor({chord(0), key(0)}, std::move(init));

        // Table over (c_{t-1}, c_t, k_t) in that order.
        std::vector<double> chord_step(K * K * NK);
        for (std::size_t c1 = 0; c1 < K; ++c1)
            for (std::size_t c2 = 0; c2 < K; ++c2)
                for (std::size_t k2 = 0; k2 < NK; ++k2) chord_step[(c1 * K + c2) * NK + k2] = cond[(c1 * NK + k2) * K + c2];
        const std::vector<double> key_tie = tying_log_table(NK, spec.key_tie_stay);
        std::vector<std::size_t> measure_of(T);
        for (std::size_t m = 0; m < spec.measures.size(); ++m)
            for (std::size_t t = spec.measures[m].begin; t < spec.measures[m].end; ++t) measure_of[t] = m;

        for (std::size_t t = 1; t < T; ++t) {
            graph.add_factor({key(t - 1), key(t)}, key_log.data());
            graph.add_factor({chord(t - 1), chord(t), key(t)}, chord_step);
        }
        for (std::size_t t = 1; t < T; ++t)
            if (measure_of[t] == measure_of[t - 1]) graph.add_factor({key(t - 1), key(t)}, key_tie);
    }

    const std::vector<double> chord_tie = tying_log_table(K, spec.chord_tie_stay);
    for (const SimilarityPair& p : spec.chord_pairs)
        graph.add_factor({VariableId{static_cast<std::uint32_t>(p.t1)}, VariableId{static_cast<std::uint32_t>(p.t2)}},
                         chord_tie);
    return graph;
}

FactorGraph consolidate_parallel_factors(const FactorGraph& graph) {
    FactorGraph out;
    for (const Variable& v : graph.variables()) out.new_variable(v.name, v.cardinality);
    out.add_log_offset(graph.log_offset());
    std::map<std::vector<VariableId>, std::size_t> first;
    std::vector<const Factor*> order;
    std::vector<std::vector<double>> tables;
    for (const Factor& f : graph.factors()) {
        const auto [it, inserted] = first.emplace(f.scope, tables.size());
        if (inserted) {
            order.push_back(&f);
            tables.push_back(f.log_table);
        } else {
            auto& table = tables[it->second];
            for (std::size_t i = 0; i < table.size(); ++i) table[i] += f.log_table[i];
        }
    }
    for (std::size_t i = 0; i < order.size(); ++i) out.add_factor(order[i]->scope, std::move(tables[i]));
    return out;
}

SynthInstance synth_repeat_instance(std::uint64_t seed, std::size_t frame_count, std::size_t segment_len,
                                    double noise, std::size_t label_count) {
    if (segment_len < 2) throw ModelError("segment length must be at least 2");
    if (frame_count == 0 || frame_count % segment_len != 0)
        throw ModelError("segment length " + std::to_string(segment_len) + " does not divide " +
                         std::to_string(frame_count) + " frames");
    if (!(noise >= 0.0 && noise <= 1.0)) throw ModelError("noise must lie in [0, 1]");
    if (label_count < 2) throw ModelError("at least two labels are needed");

    std::mt19937_64 rng(seed);
    const auto K = static_cast<std::uint32_t>(label_count);
    SynthInstance out;
    out.segment_len = segment_len;
    out.truth.resize(frame_count);
    for (std::size_t t = 0; t < segment_len;) {
        auto label = static_cast<State>(rng() % K);
        if (t > 0 && label == out.truth[t - 1]) label = static_cast<State>((label + 1 + rng() % (K - 1)) % K);
        const std::size_t run = 2 + rng() % 2;
        for (std::size_t i = 0; i < run && t < segment_len; ++i) out.truth[t++] = label;
    }
    for (std::size_t t = segment_len; t < frame_count; ++t) out.truth[t] = out.truth[t - segment_len];
    for (std::size_t t = 0; t + segment_len < frame_count; ++t) out.pairs.push_back({t, t + segment_len});

    out.obs_log = Matrix(frame_count, label_count);
    out.corrupted.assign(frame_count, false);
    std::vector<double> weights(label_count);
    for (std::size_t t = 0; t < frame_count; ++t) {
        for (double& w : weights) w = 0.02 + 0.08 * unit(rng);
        State favored = out.truth[t];
        double boost = kCleanBoost;
        if (unit(rng) < noise) {
            out.corrupted[t] = true;
            favored = static_cast<State>((out.truth[t] + 1 + rng() % (K - 1)) % K);
            boost = kCorruptBoost;
        }
        weights[favored] += boost;
        fill_frame(out.obs_log, t, weights);
    }
    return out;
}

void corrupt_frame(SynthInstance& instance, std::size_t t, State wrong_label) {
    const std::size_t K = instance.obs_log.cols();
    if (t >= instance.truth.size()) throw ModelError("frame " + std::to_string(t) + " out of range");
    if (wrong_label >= K || wrong_label == instance.truth[t]) throw ModelError("corrupting label must be a wrong label");
    std::vector<double> weights(K, 0.06);
    weights[wrong_label] += kCorruptBoost;
    fill_frame(instance.obs_log, t, weights);
    instance.corrupted[t] = true;
}

} // namespace chordgm
