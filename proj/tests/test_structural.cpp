#include "doctest.h"

#include <cmath>
#include <random>

#include "chordgm/chain.hpp"
#include "chordgm/harmony.hpp"
#include "chordgm/inference.hpp"
#include "chordgm/structural.hpp"
#include "test_support.hpp"

using namespace chordgm;
using chordgm::testing::below;
using chordgm::testing::for_each_assignment;
using chordgm::testing::random_log_rows;
using chordgm::testing::random_stochastic;

namespace {

const std::vector<SimilarityPair> kRepeatPairs{{0, 3}, {1, 4}, {2, 5}};

StructuralSpec struct_spec(const Matrix& chord_trans, std::vector<SimilarityPair> pairs, double stay = 0.7) {
    StructuralSpec s;
    s.chord_trans = chord_trans;
    s.chord_pairs = std::move(pairs);
    s.chord_tie_stay = stay;
    return s;
}

StructuralSpec multiscale_spec(std::mt19937_64& rng, std::size_t K, std::size_t NK) {
    StructuralSpec s;
    s.variant = StructuralVariant::MultiScale;
    s.chord_trans = random_stochastic(rng, K, K);
    s.key_chord = random_stochastic(rng, NK, K);
    s.key_trans = random_stochastic(rng, NK, NK);
    s.chord_pairs = kRepeatPairs;
    s.measures = {{0, 3}, {3, 6}};
    return s;
}

bool same_graph(const FactorGraph& a, const FactorGraph& b) {
    if (a.variable_count() != b.variable_count() || a.factor_count() != b.factor_count()) return false;
    for (std::size_t i = 0; i < a.variable_count(); ++i)
        if (a.variables()[i].name != b.variables()[i].name || a.variables()[i].cardinality != b.variables()[i].cardinality)
            return false;
    for (std::size_t i = 0; i < a.factor_count(); ++i)
        if (a.factors()[i].scope != b.factors()[i].scope || a.factors()[i].log_table != b.factors()[i].log_table)
            return false;
    return a.log_offset() == b.log_offset();
}

} // namespace

TEST_CASE("six-frame repeat instance layout") {
    std::mt19937_64 rng(1);
    const Matrix obs = random_log_rows(rng, 6, kLabelCount);
    const FactorGraph g = build_structural_graph(struct_spec(chord_transition_matrix(0.5), kRepeatPairs), obs);
    CHECK(g.variable_count() == 6);
    int unary = 0, transitions = 0, ties = 0;
    for (const Factor& f : g.factors()) {
        if (f.scope.size() == 1) ++unary;
        else if (f.scope[1].index == f.scope[0].index + 1) ++transitions;
        else ++ties;
    }
    CHECK(unary == 6);
    CHECK(transitions == 5);
    CHECK(ties == 3);
    CHECK(min_fill_ordering(g).induced_width == 3);
}

TEST_CASE("no pairs gives the unrolled chain") {
    std::mt19937_64 rng(2);
    const Matrix trans = random_stochastic(rng, 4, 4);
    const Matrix obs = random_log_rows(rng, 7, 4);
    CHECK(same_graph(build_structural_graph(struct_spec(trans, {}), obs),
                     unroll(ChainSpec::from_probabilities(trans), obs)));
}

TEST_CASE("tying tables are normalized and leave chain factors alone") {
    for (const double stay : {0.25, 0.7, 0.99})
        for (const std::size_t n : {2u, 4u, 24u}) {
            const auto table = tying_log_table(n, stay);
            for (std::size_t r = 0; r < n; ++r) {
                double sum = 0.0;
                for (std::size_t c = 0; c < n; ++c) sum += std::exp(table[r * n + c]);
                CHECK(std::abs(sum - 1.0) <= 1e-9);
            }
        }

    std::mt19937_64 rng(3);
    const Matrix trans = random_stochastic(rng, 3, 3);
    const Matrix obs = random_log_rows(rng, 6, 3);
    const FactorGraph chain = unroll(ChainSpec::from_probabilities(trans), obs);
    const FactorGraph tied = build_structural_graph(struct_spec(trans, kRepeatPairs), obs);
    for (std::size_t i = 0; i < chain.factor_count(); ++i) {
        CHECK(tied.factors()[i].scope == chain.factors()[i].scope);
        CHECK(tied.factors()[i].log_table == chain.factors()[i].log_table);
    }
}

TEST_CASE("score decomposes into chain score plus tie terms") {
    std::mt19937_64 rng(4);
    const std::size_t K = 3;
    const Matrix trans = random_stochastic(rng, K, K);
    const Matrix obs = random_log_rows(rng, 4, K);
    const std::vector<SimilarityPair> pairs{{0, 2}, {0, 3}, {1, 3}};
    const double stay = 0.8;
    const FactorGraph chain = unroll(ChainSpec::from_probabilities(trans), obs);
    const FactorGraph tied = build_structural_graph(struct_spec(trans, pairs, stay), obs);
    for_each_assignment(tied, [&](const Assignment& a) {
        double expected = chain.evaluate(a);
        for (const auto& p : pairs) expected += std::log(a[p.t1] == a[p.t2] ? stay : (1.0 - stay) / (K - 1));
        CHECK(std::abs(tied.evaluate(a) - expected) <= 1e-12);
    });
}

TEST_CASE("uniform tying leaves the chain MAP unchanged") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t K = 2 + below(rng, 3);
        const Matrix trans = random_stochastic(rng, K, K);
        const Matrix obs = random_log_rows(rng, 6, K);
        const FactorGraph tied =
            build_structural_graph(struct_spec(trans, kRepeatPairs, 1.0 / static_cast<double>(K)), obs);
        CHECK(brute_force_map(tied).assignment == viterbi(ChainSpec::from_probabilities(trans), obs).assignment);
    }
}

TEST_CASE("near-certain ties copy anchored chords") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t K = 4;
        const Matrix trans = random_stochastic(rng, K, K);
        const Matrix obs = random_log_rows(rng, 6, K);
        const FactorGraph tied = build_structural_graph(struct_spec(trans, kRepeatPairs, 1.0 - 1e-9), obs);
        std::map<VariableId, State> evidence;
        for (const auto& p : kRepeatPairs) evidence[VariableId{static_cast<std::uint32_t>(p.t1)}] = below(rng, K);
        const ConditionedGraph cg = condition(tied, evidence);
        const Assignment full = cg.merge(brute_force_map(cg.graph).assignment, evidence, tied.variable_count());
        for (const auto& p : kRepeatPairs) CHECK(full[p.t2] == full[p.t1]);
    }
}

TEST_CASE("VE equals brute force on every structural variant") {
    std::mt19937_64 rng(7);
    for (int seed = 0; seed < 100; ++seed) {
        const std::size_t K = 2 + below(rng, 3);
        const Matrix obs = random_log_rows(rng, 6, K);

        const FactorGraph s = build_structural_graph(struct_spec(random_stochastic(rng, K, K), kRepeatPairs), obs);
        MapResult oracle = brute_force_map(s);
        MapResult ve = max_product_ve(s);
        CHECK(ve.assignment == oracle.assignment);
        CHECK(std::abs(ve.log_score - oracle.log_score) <= 1e-9);

        StructuralSpec pk = struct_spec(random_stochastic(rng, K, K), kRepeatPairs);
        pk.variant = StructuralVariant::MultiScalePriorKey;
        pk.key_chord = random_stochastic(rng, 3, K);
        std::vector<std::size_t> keys(6);
        for (auto& k : keys) k = below(rng, 3);
        const FactorGraph p = build_structural_graph(pk, obs, keys);
        oracle = brute_force_map(p);
        ve = max_product_ve(p);
        CHECK(ve.assignment == oracle.assignment);
        CHECK(std::abs(ve.log_score - oracle.log_score) <= 1e-9);

        const std::size_t small_k = 2 + below(rng, 2);
        const Matrix small_obs = random_log_rows(rng, 6, small_k);
        const FactorGraph m = build_structural_graph(multiscale_spec(rng, small_k, 2), small_obs);
        oracle = brute_force_map(m);
        ve = max_product_ve(m);
        CHECK(ve.assignment == oracle.assignment);
        CHECK(std::abs(ve.log_score - oracle.log_score) <= 1e-9);
    }
}

TEST_CASE("multiscale without ties matches the joint chain") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t K = 2 + below(rng, 2), NK = 2 + below(rng, 2), T = 5;
        StructuralSpec s = multiscale_spec(rng, K, NK);
        s.chord_pairs.clear();
        s.measures = {{0, T}};
        s.key_tie_stay = 1.0 / static_cast<double>(NK);
        const Matrix obs = random_log_rows(rng, T, K);
        const MapResult graph_map = max_product_ve(build_structural_graph(s, obs));
        const MapResult joint = viterbi(build_joint_key_chord(s.key_trans, s.key_chord, s.chord_trans),
                                        expand_joint_observations(obs, NK));
        for (std::size_t t = 0; t < T; ++t) {
            const CompoundState cs = CompoundState::unpack(joint.assignment[t], static_cast<std::uint32_t>(K));
            CHECK(graph_map.assignment[t] == cs.chord);
            CHECK(graph_map.assignment[T + t] == cs.key);
        }
        // Uniform key ties add T - 1 copies of log(1 / NK).
        CHECK(graph_map.log_score ==
              doctest::Approx(joint.log_score - static_cast<double>(T - 1) * std::log(static_cast<double>(NK))));
    }
}

TEST_CASE("consolidation merges parallel factors") {
    FactorGraph g;
    const auto v = g.new_variable("v", 2);
    g.add_factor({v}, {-1.0, -2.0});
    g.add_factor({v}, {-0.5, -0.25});
    const FactorGraph c = consolidate_parallel_factors(g);
    REQUIRE(c.factor_count() == 1);
    CHECK(c.factors()[0].log_table == std::vector<double>{-1.5, -2.25});

    std::mt19937_64 rng(9);
    const StructuralSpec s = multiscale_spec(rng, 3, 3);
    const FactorGraph before = build_structural_graph(s, random_log_rows(rng, 6, 3));
    const FactorGraph after = consolidate_parallel_factors(before);
    auto count_scope = [](const FactorGraph& graph, std::uint32_t a, std::uint32_t b) {
        int n = 0;
        for (const Factor& f : graph.factors())
            if (f.scope == std::vector<VariableId>{VariableId{a}, VariableId{b}}) ++n;
        return n;
    };
    // keys are variables 6..11; measures are [0, 3) and [3, 6)
    for (std::uint32_t t : {1u, 2u, 4u, 5u}) {
        CHECK(count_scope(before, 6 + t - 1, 6 + t) == 2);
        CHECK(count_scope(after, 6 + t - 1, 6 + t) == 1);
    }
    CHECK(count_scope(before, 8, 9) == 1);
    CHECK(count_scope(after, 8, 9) == 1);
    for (int i = 0; i < 100; ++i) {
        Assignment a(12);
        for (std::size_t j = 0; j < 12; ++j) a[j] = below(rng, 3);
        CHECK(after.evaluate(a) == doctest::Approx(before.evaluate(a)).epsilon(1e-12));
    }
}

TEST_CASE("structural errors") {
    std::mt19937_64 rng(10);
    const Matrix obs = random_log_rows(rng, 6, 3);
    const Matrix trans = random_stochastic(rng, 3, 3);
    CHECK_THROWS_AS(build_structural_graph(struct_spec(trans, {{0, 6}}), obs), ModelError);
    CHECK_THROWS_AS(build_structural_graph(struct_spec(trans, {{2, 3}}), obs), ModelError);
    CHECK_THROWS_AS(build_structural_graph(struct_spec(trans, {{4, 1}}), obs), ModelError);
    CHECK_THROWS_AS(build_structural_graph(struct_spec(trans, {}, 1.0), obs), ModelError);

    StructuralSpec pk = struct_spec(trans, {});
    pk.variant = StructuralVariant::MultiScalePriorKey;
    pk.key_chord = random_stochastic(rng, 2, 3);
    CHECK_THROWS_AS(build_structural_graph(pk, obs), ModelError);

    StructuralSpec ms = multiscale_spec(rng, 3, 2);
    ms.measures = {{0, 2}, {3, 6}};
    CHECK_THROWS_AS(build_structural_graph(ms, obs), ModelError);
    ms.measures = {{0, 3}};
    CHECK_THROWS_AS(build_structural_graph(ms, obs), ModelError);
    ms.measures.clear();
    CHECK_THROWS_AS(build_structural_graph(ms, obs), ModelError);
}

TEST_CASE("synthetic repeat instances") {
    SUBCASE("determinism and layout") {
        const SynthInstance a = synth_repeat_instance(11, 24, 12, 0.2);
        const SynthInstance b = synth_repeat_instance(11, 24, 12, 0.2);
        CHECK(a.truth == b.truth);
        CHECK(a.obs_log == b.obs_log);
        CHECK(a.corrupted == b.corrupted);
        CHECK(a.pairs.size() == 12);
        for (std::size_t t = 12; t < 24; ++t) CHECK(a.truth[t] == a.truth[t - 12]);
        for (std::size_t t = 0; t < 24; ++t) {
            double sum = 0.0;
            for (const double x : a.obs_log.row(t)) sum += std::exp(x);
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
        CHECK_THROWS_AS(synth_repeat_instance(1, 24, 5, 0.2), ModelError);
        CHECK_THROWS_AS(synth_repeat_instance(1, 24, 1, 0.2), ModelError);
    }

    SUBCASE("clean instances are decoded exactly by both models") {
        const Matrix trans = chord_transition_matrix(0.5);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const SynthInstance inst = synth_repeat_instance(seed, 24, 12, 0.0);
            const MapResult chain = viterbi(ChainSpec::from_probabilities(trans), inst.obs_log);
            const MapResult tied = max_product_ve(build_structural_graph(struct_spec(trans, inst.pairs), inst.obs_log));
            CHECK(chain.assignment == inst.truth);
            CHECK(tied.assignment == inst.truth);
        }
    }

    SUBCASE("one corrupted frame is repaired by the tie and not by the chain") {
        const std::size_t K = 4;
        const Matrix trans = uniform_switch_matrix(K, 0.5);
        int checked = 0;
        for (std::uint64_t seed = 0; checked < 10 && seed < 1000; ++seed) {
            SynthInstance inst = synth_repeat_instance(seed, 6, 3, 0.0, K);
            // Corrupt frame 4 towards a differing neighbour: the chain then pays no extra switch for the error.
            State wrong;
            if (inst.truth[3] != inst.truth[4]) wrong = inst.truth[3];
            else if (inst.truth[5] != inst.truth[4]) wrong = inst.truth[5];
            else continue;
            corrupt_frame(inst, 4, wrong);
            const MapResult chain = brute_force_map(unroll(ChainSpec::from_probabilities(trans), inst.obs_log));
            const MapResult tied =
                brute_force_map(build_structural_graph(struct_spec(trans, inst.pairs, 0.99), inst.obs_log));
            CHECK(chain.assignment[4] != inst.truth[4]);
            CHECK(tied.assignment == inst.truth);
            ++checked;
        }
        CHECK(checked == 10);
    }
}
