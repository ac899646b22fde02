#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "chordgm/factor_graph.hpp"
#include "test_support.hpp"

using namespace chordgm;
using chordgm::testing::for_each_assignment;
using chordgm::testing::random_graph;

TEST_CASE("new_variable assigns sequential ids") {
    FactorGraph g;
    CHECK(g.new_variable("c0", 24) == VariableId{0});
    g.new_variable("c1", 24);
    g.new_variable("c2", 24);
    CHECK(g.new_variable("k0", 24) == VariableId{3});
    CHECK(g.find_variable("k0") == VariableId{3});
}

TEST_CASE("new_variable rejects duplicates and zero cardinality") {
    FactorGraph g;
    g.new_variable("c0", 24);
    CHECK_THROWS_AS(g.new_variable("c0", 24), GraphError);
    CHECK_THROWS_AS(g.new_variable("z", 0), GraphError);
}

TEST_CASE("add_factor validates tables and scopes") {
    FactorGraph g;
    const auto v0 = g.new_variable("v0", 2);
    const auto v1 = g.new_variable("v1", 2);
    CHECK(g.add_factor({v0}, {std::log(0.7), std::log(0.3)}) == FactorId{0});
    CHECK_THROWS_AS(g.add_factor({v0, v1}, {0.0, 0.0, 0.0}), GraphError);
    CHECK_THROWS_AS(g.add_factor({v0, v0}, {0.0, 0.0, 0.0, 0.0}), GraphError);
    CHECK_THROWS_AS(g.add_factor({VariableId{7}}, {0.0, 0.0}), GraphError);
    CHECK_THROWS_AS(g.add_factor({v0}, {kNegInf, kNegInf}), GraphError);
    CHECK_THROWS_AS(g.add_factor({v0}, {std::nan(""), 0.0}), GraphError);
    CHECK(g.factor_count() == 1);
}

TEST_CASE("add_factor canonicalizes scope order") {
    FactorGraph g;
    const auto a = g.new_variable("a", 2);
    const auto b = g.new_variable("b", 3);
    // Caller layout: (b, a) with a fastest. Cell (b=j, a=i) holds 10*j + i.
    std::vector<double> table;
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 2; ++i) table.push_back(10.0 * j + i);
    g.add_factor({b, a}, table);
    const Factor& f = g.factors().front();
    REQUIRE(f.scope == std::vector<VariableId>{a, b});
    for (State i = 0; i < 2; ++i)
        for (State j = 0; j < 3; ++j) CHECK(g.evaluate(Assignment{i, j}) == doctest::Approx(10.0 * j + i));
}

TEST_CASE("evaluate sums factor entries") {
    FactorGraph g;
    const auto v = g.new_variable("v", 2);
    g.add_factor({v}, {std::log(0.7), std::log(0.3)});
    CHECK(g.evaluate(Assignment{0}) == doctest::Approx(std::log(0.7)));

    const double a = -0.1, b = -0.2, c = -0.3, d = -0.4;
    FactorGraph h;
    const auto w = h.new_variable("w", 2);
    h.add_factor({w}, {a, b});
    h.add_factor({w}, {c, d});
    CHECK(h.evaluate(Assignment{1}) == doctest::Approx(b + d));

    FactorGraph forbid;
    const auto x = forbid.new_variable("x", 2);
    forbid.add_factor({x}, {0.0, kNegInf});
    forbid.add_factor({x}, {0.0, 5.0});
    CHECK(forbid.evaluate(Assignment{1}) == kNegInf);

    CHECK_THROWS_AS(g.evaluate(Assignment{2}), GraphError);
    CHECK_THROWS_AS(g.evaluate(Assignment{0, 0}), GraphError);
}

TEST_CASE("evaluate is additive over factors (exhaustive, small graphs)") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const FactorGraph g = random_graph(rng, 1 + trial % 4, 3, 3);
        for_each_assignment(g, [&](const Assignment& a) {
            double sum = 0.0;
            for (const Factor& f : g.factors()) {
                FactorGraph single;
                for (const Variable& v : g.variables()) single.new_variable(v.name, v.cardinality);
                single.add_factor(f.scope, f.log_table);
                sum += single.evaluate(a);
            }
            CHECK(g.evaluate(a) == doctest::Approx(sum).epsilon(1e-12));
        });
    }
}

TEST_CASE("condition slices pairwise factor to a unary row") {
    FactorGraph g;
    const auto c0 = g.new_variable("c0", 3);
    const auto c1 = g.new_variable("c1", 3);
    std::vector<double> table(9);
    for (int i = 0; i < 9; ++i) table[i] = -0.1 * i;
    g.add_factor({c0, c1}, table);
    const ConditionedGraph r = condition(g, {{c0, 2}});
    REQUIRE(r.graph.variable_count() == 1);
    REQUIRE(r.graph.factor_count() == 1);
    CHECK(r.original_ids == std::vector<VariableId>{c1});
    const Factor& f = r.graph.factors().front();
    CHECK(f.log_table == std::vector<double>{table[6], table[7], table[8]});
}

TEST_CASE("condition on every variable folds everything into the offset") {
    std::mt19937_64 rng(5);
    const FactorGraph g = random_graph(rng, 3, 3, 3);
    std::map<VariableId, State> evidence{{VariableId{0}, 1}, {VariableId{1}, 0}, {VariableId{2}, 1}};
    const ConditionedGraph r = condition(g, evidence);
    CHECK(r.graph.variable_count() == 0);
    CHECK(r.graph.factor_count() == 0);
    CHECK(r.graph.log_offset() == doctest::Approx(g.evaluate(Assignment{1, 0, 1})));
}

TEST_CASE("condition rejects out-of-range evidence") {
    FactorGraph g;
    const auto v = g.new_variable("v", 2);
    g.add_factor({v}, {0.0, 0.0});
    CHECK_THROWS_AS(condition(g, {{v, 2}}), GraphError);
}

TEST_CASE("conditioning consistency (exhaustive)") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        const FactorGraph g = random_graph(rng, 2 + trial % 4, 3, 4);
        std::map<VariableId, State> evidence;
        for (const Variable& v : g.variables())
            if (rng() % 2 == 0) evidence[v.id] = static_cast<State>(rng() % v.cardinality);
        const ConditionedGraph r = condition(g, evidence);
        for_each_assignment(r.graph, [&](const Assignment& b) {
            const Assignment full = r.merge(b, evidence, g.variable_count());
            CHECK(r.graph.evaluate(b) + r.graph.log_offset() == doctest::Approx(g.evaluate(full)).epsilon(1e-12));
        });
    }
}

TEST_CASE("UAI dump lists cardinalities, scopes and linear tables") {
    FactorGraph g;
    const auto a = g.new_variable("a", 2);
    const auto b = g.new_variable("b", 3);
    g.add_factor({a}, {std::log(0.25), std::log(0.75)});
    g.add_factor({a, b}, {0.0, 0.0, 0.0, 0.0, 0.0, kNegInf});
    std::ostringstream out;
    write_uai(g, out);
    CHECK(out.str() ==
          "MARKOV\n2\n2 3\n2\n1 0\n2 0 1\n"
          "\n2\n0.25 0.75\n"
          "\n6\n1 1 1 1 1 0\n");
}
