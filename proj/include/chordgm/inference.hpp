#pragma once

#include <cstdint>
#include <vector>

#include "chordgm/factor_graph.hpp"

namespace chordgm {

/// State-space limit for brute_force_map.
inline constexpr std::uint64_t kBruteForceLimit = 10'000'000;

/// Largest intermediate table max_product_ve will allocate.
inline constexpr std::uint64_t kEliminationTableLimit = 100'000'000;

struct EliminationOrdering {
    std::vector<VariableId> order;
    /// Largest neighbour set met while eliminating in `order`.
    std::size_t induced_width = 0;
    /// Largest intermediate table, i.e. product of cardinalities of a variable and its neighbours.
    std::uint64_t max_table_size = 0;
};

/// Exhaustive MAP. Enumerates assignments in lexicographic order (variable 0
/// most significant) and keeps the first best, so ties go to the
/// lexicographically smallest assignment.
MapResult brute_force_map(const FactorGraph& graph);

/// Greedy min-fill over the interaction graph (every factor scope is a
/// clique). Ties go to the smallest VariableId.
EliminationOrdering min_fill_ordering(const FactorGraph& graph);

/// Validates `order` as a permutation of the graph's variables and measures it.
EliminationOrdering make_ordering(const FactorGraph& graph, std::vector<VariableId> order);

/// Exact MAP by max-product variable elimination with backpointers.
///
/// Ties between equal-scoring candidates are broken by comparing the partial
/// assignments they imply lexicographically, so the result is the
/// lexicographically smallest optimal assignment for any elimination order
/// and agrees with brute_force_map and viterbi.
///
/// Throws GuardError if an intermediate table exceeds kEliminationTableLimit
/// and InfeasibleError if no assignment has finite score.
MapResult max_product_ve(const FactorGraph& graph, const EliminationOrdering& ordering);

/// max_product_ve with min_fill_ordering.
MapResult max_product_ve(const FactorGraph& graph);

} // namespace chordgm
