#include "doctest.h"

#include <cmath>
#include <random>

#include "chordgm/chain.hpp"
#include "chordgm/harmony.hpp"
#include "chordgm/inference.hpp"
#include "test_support.hpp"

using namespace chordgm;
using chordgm::testing::below;
using chordgm::testing::random_log_rows;
using chordgm::testing::random_stochastic;
using chordgm::testing::unit;

namespace {

Matrix log_matrix(std::initializer_list<std::initializer_list<double>> rows) { return log_of(Matrix(rows)); }

ChainSpec random_chain(std::mt19937_64& rng, std::size_t k) {
    Matrix init = random_stochastic(rng, 1, k);
    return ChainSpec::from_probabilities(random_stochastic(rng, k, k), {init.row(0).begin(), init.row(0).end()});
}

// Exhaustive decode straight from the chain definition.
MapResult enumerate(const ChainSpec& spec, const Matrix& obs) {
    const std::size_t T = obs.rows(), K = spec.state_count;
    Assignment path(T, 0), best;
    double best_score = kNegInf;
    while (true) {
        double s = spec.initial_log[path[0]] + obs(0, path[0]);
        for (std::size_t t = 1; t < T; ++t) s += spec.transition_log(path[t - 1], path[t]) + obs(t, path[t]);
        if (best.empty() || strictly_better(s, best_score)) {
            best = path;
            best_score = s;
        }
        std::size_t d = T;
        while (d-- > 0) {
            if (++path[d] < K) break;
            path[d] = 0;
        }
        if (d == static_cast<std::size_t>(-1)) break;
    }
    return {best, best_score, {}};
}

} // namespace

TEST_CASE("two-state example decoded by enumeration") {
    const ChainSpec spec = ChainSpec::from_probabilities({{0.9, 0.1}, {0.1, 0.9}});
    const Matrix obs = log_matrix({{0.8, 0.2}, {0.6, 0.4}, {0.3, 0.7}});
    const MapResult oracle = enumerate(spec, obs);
    // Staying in state 0 pays 0.9 * 0.3 at the last step; switching pays 0.1 * 0.7.
    CHECK(oracle.assignment == Assignment{0, 0, 0});
    CHECK(oracle.log_score == doctest::Approx(std::log(0.5 * 0.8 * 0.9 * 0.6 * 0.9 * 0.3)));
    const MapResult r = viterbi(spec, obs);
    CHECK(r.assignment == oracle.assignment);
    CHECK(std::abs(r.log_score - oracle.log_score) <= 1e-12);

    // The path [0, 0, 1] scores log(0.5·0.8·0.9·0.6·0.1·0.7), below the optimum.
    const FactorGraph g = unroll(spec, obs);
    CHECK(g.evaluate(Assignment{0, 0, 1}) == doctest::Approx(std::log(0.5 * 0.8 * 0.9 * 0.6 * 0.1 * 0.7)));
    CHECK(g.evaluate(Assignment{0, 0, 1}) < r.log_score);
}

TEST_CASE("single frame decodes to the argmax of initial plus observation") {
    const ChainSpec spec = ChainSpec::from_probabilities({{0.5, 0.5, 0.0}, {0.2, 0.2, 0.6}, {1.0, 0.0, 0.0}},
                                                         {0.2, 0.3, 0.5});
    const Matrix obs = log_matrix({{0.5, 0.4, 0.1}});
    // 0.2*0.5 = 0.10, 0.3*0.4 = 0.12, 0.5*0.1 = 0.05
    CHECK(viterbi(spec, obs).assignment == Assignment{1});
}

TEST_CASE("all-uniform chain decodes to state zero everywhere") {
    const ChainSpec spec = ChainSpec::from_probabilities(uniform_switch_matrix(5, 0.2));
    const Matrix obs(7, 5, std::log(0.2));
    CHECK(viterbi(spec, obs).assignment == Assignment(7, 0));
}

TEST_CASE("shape and validity errors") {
    const ChainSpec spec = ChainSpec::from_probabilities({{0.9, 0.1}, {0.1, 0.9}});
    CHECK_THROWS_AS(viterbi(spec, Matrix(3, 3, 0.0)), ModelError);
    CHECK_THROWS_AS(viterbi(spec, Matrix(0, 2, 0.0)), ModelError);
    CHECK_THROWS_AS(unroll(spec, Matrix(2, 3, 0.0)), ModelError);
    CHECK_THROWS_AS(ChainSpec::from_probabilities({{0.9, 0.2}, {0.1, 0.9}}), ModelError);
    CHECK_THROWS_AS(ChainSpec::from_probabilities({{0.9, 0.1}, {0.1, 0.9}}, {0.6, 0.6}), ModelError);
}

TEST_CASE("unroll layout") {
    std::mt19937_64 rng(5);
    const ChainSpec spec = random_chain(rng, 2);
    const Matrix obs = random_log_rows(rng, 3, 2);
    const FactorGraph g = unroll(spec, obs);
    CHECK(g.variable_count() == 3);
    CHECK(g.factor_count() == 5);
    int unary = 0, pairwise = 0;
    for (const Factor& f : g.factors()) (f.scope.size() == 1 ? unary : pairwise)++;
    CHECK(unary == 3);
    CHECK(pairwise == 2);
}

TEST_CASE("viterbi equals brute force on the unrolled graph") {
    std::mt19937_64 rng(31337);
    for (int trial = 0; trial < 250; ++trial) {
        const std::size_t K = 2 + below(rng, 3);
        const std::size_t T = 2 + below(rng, 5);
        const ChainSpec spec = random_chain(rng, K);
        Matrix obs = random_log_rows(rng, T, K);
        if (trial % 5 == 0) {
            // Coarse scores to exercise the tie rule.
            for (double& x : obs.data()) x = below(rng, 2) == 0 ? 0.0 : -1.0;
        }
        const MapResult v = viterbi(spec, obs);
        const FactorGraph g = unroll(spec, obs);
        const MapResult oracle = brute_force_map(g);
        CHECK(v.assignment == oracle.assignment);
        CHECK(std::abs(v.log_score - oracle.log_score) <= 1e-9);
        CHECK(std::abs(g.evaluate(v.assignment) - v.log_score) <= 1e-12);
        const MapResult ve = max_product_ve(g);
        CHECK(ve.assignment == v.assignment);
        CHECK(std::abs(ve.log_score - v.log_score) <= 1e-9);
    }
}

TEST_CASE("viterbi is lexicographic on exactly tied chains") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t K = 2 + below(rng, 3);
        const std::size_t T = 2 + below(rng, 4);
        ChainSpec spec = ChainSpec::from_probabilities(uniform_switch_matrix(K, 1.0 / static_cast<double>(K)));
        Matrix obs(T, K);
        for (double& x : obs.data()) x = below(rng, 2) == 0 ? 0.0 : -1.0;
        CHECK(viterbi(spec, obs).assignment == enumerate(spec, obs).assignment);
    }
}

TEST_CASE("adding a constant to one frame leaves the argmax unchanged") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t K = 3 + below(rng, 4);
        const std::size_t T = 4 + below(rng, 20);
        const ChainSpec spec = random_chain(rng, K);
        const Matrix obs = random_log_rows(rng, T, K);
        Matrix shifted = obs;
        const std::size_t t = below(rng, static_cast<std::uint32_t>(T));
        const double c = 10.0 * (unit(rng) - 0.5);
        for (std::size_t s = 0; s < K; ++s) shifted(t, s) += c;
        CHECK(viterbi(spec, shifted).assignment == viterbi(spec, obs).assignment);
    }
}

TEST_CASE("prior-key chain") {
    const Matrix chord_trans = chord_transition_matrix(0.5);
    const std::vector<std::size_t> keys(6, 0);

    SUBCASE("uniform compatibility reproduces the plain chain") {
        std::mt19937_64 rng(4);
        const Matrix obs = random_log_rows(rng, 6, kLabelCount);
        const PriorKeyChain pk = build_prior_key_chain(chord_trans, Matrix(24, 24, 1.0 / 24), keys);
        const ChainSpec plain = ChainSpec::from_probabilities(chord_trans);
        CHECK(viterbi(pk.chain, pk.effective_observations(obs)).assignment == viterbi(plain, obs).assignment);
    }

    SUBCASE("strong diatonic prior keeps ambiguous frames in the key") {
        // Flat observations with a slight preference for non-diatonic chords.
        Matrix obs(4, kLabelCount, std::log(1.0 / 24));
        const auto in_c = diatonic_chords(0);
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t c = 0; c < kLabelCount; ++c)
                if (std::find(in_c.begin(), in_c.end(), c) == in_c.end()) obs(t, c) += 0.05 * static_cast<double>(t + 1);
        const std::vector<std::size_t> c_major(4, 0);
        const PriorKeyChain pk = build_prior_key_chain(chord_trans, key_chord_compatibility(1.0 / 6 - 1e-9), c_major);
        const Matrix eff = pk.effective_observations(obs);
        const MapResult r = viterbi(pk.chain, eff);
        for (State s : r.assignment) CHECK(std::find(in_c.begin(), in_c.end(), s) != in_c.end());

        const ChainSpec plain = ChainSpec::from_probabilities(chord_trans);
        CHECK(viterbi(plain, obs).assignment != r.assignment);
    }

    SUBCASE("errors") {
        CHECK_THROWS_AS(build_prior_key_chain(chord_trans, key_chord_compatibility(0.15), std::vector<std::size_t>{}),
                        ModelError);
        CHECK_THROWS_AS(build_prior_key_chain(chord_trans, key_chord_compatibility(0.15), std::vector<std::size_t>{24}),
                        ModelError);
    }
}

TEST_CASE("prior-key decode agrees with brute force on reduced label sets") {
    std::mt19937_64 rng(606);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t K = 2 + below(rng, 3);
        const std::size_t NK = 2 + below(rng, 2);
        const std::size_t T = 2 + below(rng, 4);
        const Matrix chord_trans = random_stochastic(rng, K, K);
        const Matrix compat = random_stochastic(rng, NK, K);
        std::vector<std::size_t> keys(T);
        for (auto& k : keys) k = below(rng, static_cast<std::uint32_t>(NK));
        const Matrix obs = random_log_rows(rng, T, K);
        const PriorKeyChain pk = build_prior_key_chain(chord_trans, compat, keys);
        const Matrix eff = pk.effective_observations(obs);
        // Oracle: p(c_t | k_t) written directly into the unrolled graph.
        FactorGraph g = unroll(pk.chain, obs);
        for (std::uint32_t t = 0; t < T; ++t) {
            std::vector<double> row(K);
            for (std::size_t c = 0; c < K; ++c) row[c] = std::log(compat(keys[t], c));
            g.add_factor({VariableId{t}}, row);
        }
        const MapResult oracle = brute_force_map(g);
        const MapResult r = viterbi(pk.chain, eff);
        CHECK(r.assignment == oracle.assignment);
        CHECK(std::abs(r.log_score - oracle.log_score) <= 1e-9);
    }
}

TEST_CASE("compound states pack and unpack") {
    for (std::uint32_t p = 0; p < 576; ++p) {
        const CompoundState s = CompoundState::unpack(p);
        CHECK(s.key < 24);
        CHECK(s.chord < 24);
        CHECK(s.packed() == p);
    }
    CHECK(CompoundState{2, 5}.packed() == 53);
}

TEST_CASE("joint key/chord chain") {
    const Matrix chord_trans = chord_transition_matrix(0.5);

    SUBCASE("576 states and normalized rows") {
        const ChainSpec spec =
            build_joint_key_chord(key_transition_matrix(0.98), key_chord_compatibility(0.15), chord_trans);
        CHECK(spec.state_count == 576);
        CHECK_NOTHROW(spec.validate());
    }

    SUBCASE("identity key transitions hold the key constant") {
        std::mt19937_64 rng(21);
        const ChainSpec spec =
            build_joint_key_chord(uniform_switch_matrix(24, 1.0), key_chord_compatibility(0.15), chord_trans);
        const Matrix obs = expand_joint_observations(random_log_rows(rng, 12, kLabelCount), 24);
        const MapResult r = viterbi(spec, obs);
        const auto key0 = CompoundState::unpack(r.assignment[0]).key;
        for (State s : r.assignment) CHECK(CompoundState::unpack(s).key == key0);
    }

    SUBCASE("uniform compatibility reproduces the chord chain with key 0") {
        std::mt19937_64 rng(22);
        const ChainSpec spec = build_joint_key_chord(key_transition_matrix(0.9), Matrix(24, 24, 1.0 / 24), chord_trans);
        const Matrix chord_obs = random_log_rows(rng, 8, kLabelCount);
        const MapResult joint = viterbi(spec, expand_joint_observations(chord_obs, 24));
        const MapResult plain = viterbi(ChainSpec::from_probabilities(chord_trans), chord_obs);
        for (std::size_t t = 0; t < joint.assignment.size(); ++t) {
            CHECK(CompoundState::unpack(joint.assignment[t]).chord == plain.assignment[t]);
            CHECK(CompoundState::unpack(joint.assignment[t]).key == 0);
        }
    }

    SUBCASE("normalization violations") {
        Matrix bad = key_transition_matrix(0.9);
        bad(0, 0) = 0.5;
        CHECK_THROWS_AS(build_joint_key_chord(bad, key_chord_compatibility(0.15), chord_trans), ModelError);
    }
}

TEST_CASE("joint decode agrees with brute force on reduced label sets") {
    std::mt19937_64 rng(707);
    for (int trial = 0; trial < 60; ++trial) {
        const std::uint32_t K = 2 + below(rng, 2);
        const std::uint32_t NK = 2 + below(rng, 2);
        const std::size_t T = 2 + below(rng, 2);
        const Matrix key_trans = random_stochastic(rng, NK, NK);
        const Matrix compat = random_stochastic(rng, NK, K);
        const Matrix chord_trans = random_stochastic(rng, K, K);
        const Matrix chord_obs = random_log_rows(rng, T, K);
        const ChainSpec spec = build_joint_key_chord(key_trans, compat, chord_trans);

        // Oracle: separate key and chord variables with the factored CPDs.
        FactorGraph g;
        std::vector<VariableId> k, c;
        for (std::size_t t = 0; t < T; ++t) {
            k.push_back(g.new_variable("k" + std::to_string(t), NK));
            c.push_back(g.new_variable("c" + std::to_string(t), K));
        }
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<double> unary(chord_obs.row(t).begin(), chord_obs.row(t).end());
            g.add_factor({c[t]}, unary);
        }
        std::vector<double> init(NK * K);
        for (std::uint32_t a = 0; a < NK; ++a)
            for (std::uint32_t b = 0; b < K; ++b) init[a * K + b] = std::log(compat(a, b) / NK);
        g.add_factor({k[0], c[0]}, init);
        for (std::size_t t = 1; t < T; ++t) {
            std::vector<double> kk(NK * NK);
            for (std::uint32_t a = 0; a < NK; ++a)
                for (std::uint32_t b = 0; b < NK; ++b) kk[a * NK + b] = std::log(key_trans(a, b));
            g.add_factor({k[t - 1], k[t]}, kk);
            // scope (k_t, c_{t-1}, c_t) after canonical sorting is (c_{t-1}, k_t, c_t)
            std::vector<double> ckc(K * NK * K);
            for (std::uint32_t c1 = 0; c1 < K; ++c1)
                for (std::uint32_t k2 = 0; k2 < NK; ++k2) {
                    double z = 0.0;
                    for (std::uint32_t c2 = 0; c2 < K; ++c2) z += chord_trans(c1, c2) * compat(k2, c2);
                    for (std::uint32_t c2 = 0; c2 < K; ++c2)
                        ckc[(c1 * NK + k2) * K + c2] = std::log(chord_trans(c1, c2) * compat(k2, c2) / z);
                }
            g.add_factor({c[t - 1], k[t], c[t]}, ckc);
        }
        const MapResult oracle = brute_force_map(g);
        const MapResult r = viterbi(spec, expand_joint_observations(chord_obs, NK));
        CHECK(std::abs(r.log_score - oracle.log_score) <= 1e-9);
        // Oracle variables interleave k0, c0, k1, c1, ... which is the same
        // lexicographic order as packed compound states.
        for (std::size_t t = 0; t < T; ++t) {
            const CompoundState s = CompoundState::unpack(r.assignment[t], K);
            CHECK(s.key == oracle.assignment[2 * t]);
            CHECK(s.chord == oracle.assignment[2 * t + 1]);
        }
    }
}
