#include "chordgm/chain.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace chordgm {
namespace {

void check_observations(const ChainSpec& spec, const Matrix& obs_log) {
    if (obs_log.rows() == 0) throw ModelError("observation sequence is empty");
    if (obs_log.cols() != spec.state_count)
        throw ModelError("observations have " + std::to_string(obs_log.cols()) + " columns, chain has " +
                         std::to_string(spec.state_count) + " states");
}

double log_sum_exp(std::span<const double> xs) {
    double m = kNegInf;
    for (const double x : xs) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (const double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

} // namespace

void ChainSpec::validate() const {
    if (state_count == 0) throw ModelError("chain has no states");
    if (initial_log.size() != state_count) throw ModelError("initial distribution has the wrong length");
    if (transition_log.rows() != state_count || transition_log.cols() != state_count)
        throw ModelError("transition matrix has the wrong shape");
    if (std::fabs(std::exp(log_sum_exp(initial_log)) - 1.0) > 1e-9)
        throw ModelError("initial distribution does not sum to one");
    for (std::size_t r = 0; r < state_count; ++r) {
        if (std::fabs(std::exp(log_sum_exp(transition_log.row(r))) - 1.0) > 1e-9)
            throw ModelError("transition row " + std::to_string(r) + " does not sum to one");
    }
}

ChainSpec ChainSpec::from_probabilities(const Matrix& transition, std::vector<double> initial) {
    ChainSpec spec;
    spec.state_count = transition.rows();
    spec.transition_log = log_of(transition);
    if (initial.empty()) {
        spec.initial_log.assign(spec.state_count, -std::log(static_cast<double>(spec.state_count)));
    } else {
        for (const double p : initial) spec.initial_log.push_back(p == 0.0 ? kNegInf : std::log(p));
    }
    spec.validate();
    return spec;
}

MapResult viterbi(const ChainSpec& spec, const Matrix& obs_log) {
    const auto start = std::chrono::steady_clock::now();
    check_observations(spec, obs_log);
    const std::size_t T = obs_log.rows();
    const std::size_t K = spec.state_count;
    const Matrix& trans = spec.transition_log;

    // beta(t, s): best score of frames t+1.. given state s at t.
    Matrix beta(T, K, 0.0);
    std::vector<double> ahead(K);
    for (std::size_t t = T - 1; t-- > 0;) {
        for (std::size_t s2 = 0; s2 < K; ++s2) ahead[s2] = obs_log(t + 1, s2) + beta(t + 1, s2);
        for (std::size_t s = 0; s < K; ++s) {
            const auto row = trans.row(s);
            double best = kNegInf;
            for (std::size_t s2 = 0; s2 < K; ++s2) best = std::max(best, row[s2] + ahead[s2]);
            beta(t, s) = best;
        }
    }

    MapResult result;
    result.assignment.resize(T);
    std::vector<double> value(K);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t s = 0; s < K; ++s) {
            const double entry = t == 0 ? spec.initial_log[s] : trans(result.assignment[t - 1], s);
            value[s] = entry + obs_log(t, s) + beta(t, s);
        }
        State best = 0;
        for (State s = 1; s < K; ++s)
            if (strictly_better(value[s], value[best])) best = s;
        result.assignment[t] = best;
    }

    double score = spec.initial_log[result.assignment[0]] + obs_log(0, result.assignment[0]);
    for (std::size_t t = 1; t < T; ++t)
        score += trans(result.assignment[t - 1], result.assignment[t]) + obs_log(t, result.assignment[t]);
    if (std::isnan(score) || score == kNegInf) throw InfeasibleError("every state sequence has probability zero");

    result.log_score = score;
    result.stats.eliminated = T;
    result.stats.max_table_size = K * K;
    result.stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return result;
}

FactorGraph unroll(const ChainSpec& spec, const Matrix& obs_log) {
    check_observations(spec, obs_log);
    const std::size_t T = obs_log.rows();
    const std::size_t K = spec.state_count;
    FactorGraph graph;
    for (std::size_t t = 0; t < T; ++t) graph.new_variable("c" + std::to_string(t), static_cast<std::uint32_t>(K));
    for (std::uint32_t t = 0; t < T; ++t) {
        std::vector<double> unary(obs_log.row(t).begin(), obs_log.row(t).end());
        if (t == 0)
            for (std::size_t s = 0; s < K; ++s) unary[s] += spec.initial_log[s];
        graph.add_factor({VariableId{t}}, std::move(unary));
    }
    for (std::uint32_t t = 1; t < T; ++t) graph.add_factor({VariableId{t - 1}, VariableId{t}}, spec.transition_log.data());
    return graph;
}

Matrix PriorKeyChain::effective_observations(const Matrix& obs_log) const {
    if (obs_log.rows() != key_log.rows() || obs_log.cols() != key_log.cols())
        throw ModelError("observations do not match the key sequence");
    Matrix out = obs_log;
    for (std::size_t t = 0; t < out.rows(); ++t)
        for (std::size_t c = 0; c < out.cols(); ++c) out(t, c) += key_log(t, c);
    return out;
}

PriorKeyChain build_prior_key_chain(const Matrix& chord_trans, const Matrix& key_compat,
                                    std::span<const std::size_t> key_sequence) {
    if (key_sequence.empty()) throw ModelError("key sequence is empty");
    require_row_stochastic(key_compat, "key-chord compatibility");
    if (key_compat.cols() != chord_trans.rows()) throw ModelError("key-chord compatibility has the wrong width");
    PriorKeyChain out;
    out.chain = ChainSpec::from_probabilities(chord_trans);
    const Matrix compat_log = log_of(key_compat);
    out.key_log = Matrix(key_sequence.size(), chord_trans.rows());
    for (std::size_t t = 0; t < key_sequence.size(); ++t) {
        if (key_sequence[t] >= key_compat.rows())
            throw ModelError("key index " + std::to_string(key_sequence[t]) + " out of range at frame " +
                             std::to_string(t));
        for (std::size_t c = 0; c < chord_trans.rows(); ++c) out.key_log(t, c) = compat_log(key_sequence[t], c);
    }
    return out;
}

std::vector<double> conditional_chord_transition_log(const Matrix& key_chord, const Matrix& chord_trans) {
    const std::size_t K = chord_trans.rows();
    const std::size_t NK = key_chord.rows();
    std::vector<double> out(K * NK * K);
    for (std::size_t c1 = 0; c1 < K; ++c1) {
        for (std::size_t k2 = 0; k2 < NK; ++k2) {
            double z = 0.0;
            for (std::size_t c2 = 0; c2 < K; ++c2) z += chord_trans(c1, c2) * key_chord(k2, c2);
            if (z <= 0.0)
                throw ModelError("chord " + std::to_string(c1) + " has no admissible successor under key " +
                                 std::to_string(k2));
            for (std::size_t c2 = 0; c2 < K; ++c2) {
                const double p = chord_trans(c1, c2) * key_chord(k2, c2) / z;
                out[(c1 * NK + k2) * K + c2] = p == 0.0 ? kNegInf : std::log(p);
            }
        }
    }
    return out;
}

ChainSpec build_joint_key_chord(const Matrix& key_trans, const Matrix& key_chord, const Matrix& chord_trans) {
    require_row_stochastic(key_trans, "key transitions");
    require_row_stochastic(key_chord, "key-chord compatibility");
    require_row_stochastic(chord_trans, "chord transitions");
    const std::size_t NK = key_trans.rows();
    const std::size_t K = chord_trans.rows();
    if (key_trans.cols() != NK || chord_trans.cols() != K || key_chord.rows() != NK || key_chord.cols() != K)
        throw ModelError("joint key/chord matrices have inconsistent shapes");

    const auto cond = conditional_chord_transition_log(key_chord, chord_trans);
    const Matrix key_log = log_of(key_trans);
    const Matrix compat_log = log_of(key_chord);
    const auto chords = static_cast<std::uint32_t>(K);

    ChainSpec spec;
    spec.state_count = NK * K;
    spec.initial_log.resize(spec.state_count);
    spec.transition_log = Matrix(spec.state_count, spec.state_count);
    for (std::uint32_t k = 0; k < NK; ++k)
        for (std::uint32_t c = 0; c < K; ++c)
            spec.initial_log[CompoundState{k, c}.packed(chords)] =
                -std::log(static_cast<double>(NK)) + compat_log(k, c);

    for (std::uint32_t k1 = 0; k1 < NK; ++k1)
        for (std::uint32_t c1 = 0; c1 < K; ++c1) {
            const std::uint32_t from = CompoundState{k1, c1}.packed(chords);
            for (std::uint32_t k2 = 0; k2 < NK; ++k2)
                for (std::uint32_t c2 = 0; c2 < K; ++c2) {
                    spec.transition_log(from, CompoundState{k2, c2}.packed(chords)) =
                        key_log(k1, k2) + cond[(c1 * NK + k2) * K + c2];
                }
        }
    spec.validate();
    return spec;
}

Matrix expand_joint_observations(const Matrix& chord_obs, std::size_t key_count) {
    const std::size_t K = chord_obs.cols();
    Matrix out(chord_obs.rows(), key_count * K);
    for (std::size_t t = 0; t < chord_obs.rows(); ++t)
        for (std::size_t k = 0; k < key_count; ++k)
            for (std::size_t c = 0; c < K; ++c) out(t, k * K + c) = chord_obs(t, c);
    return out;
}

} // namespace chordgm
