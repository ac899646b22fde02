#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chordgm/factor_graph.hpp"

namespace chordgm {

/// `chord(C, 0)`. Arguments starting with a lowercase letter are logical
/// variables; everything else is a constant.
struct Atom {
    std::string predicate;
    std::vector<std::string> args;

    friend auto operator<=>(const Atom&, const Atom&) = default;
    friend bool operator==(const Atom&, const Atom&) = default;
};

struct Literal {
    Atom atom;
    bool positive = true;

    friend bool operator==(const Literal&, const Literal&) = default;
};

/// Weighted conjunction of literals. The weight is a log-domain score added
/// wherever the conjunction holds; -inf makes the formula a hard exclusion.
struct WeightedFormula {
    double weight = 0.0;
    std::vector<Literal> literals;

    friend bool operator==(const WeightedFormula&, const WeightedFormula&) = default;
};

struct Domain {
    std::string name;
    std::vector<std::string> constants;

    friend bool operator==(const Domain&, const Domain&) = default;
};

/// A predicate with one domain per argument position. An exclusive position
/// means exactly one constant holds there for every choice of the other
/// arguments, so the family grounds to one categorical variable. Closed
/// predicates are fully determined by evidence: atoms not listed are false.
struct PredicateDecl {
    std::string name;
    std::vector<std::string> arg_domains;
    std::optional<std::size_t> exclusive_arg;
    bool closed = false;

    friend bool operator==(const PredicateDecl&, const PredicateDecl&) = default;
};

struct MlnProgram {
    std::vector<Domain> domains;
    std::vector<PredicateDecl> predicates;
    std::vector<WeightedFormula> formulas;
    std::vector<Atom> evidence;

    const Domain* find_domain(std::string_view name) const;
    const PredicateDecl* find_predicate(std::string_view name) const;

    /// Throws ModelError on unknown domains or predicates, arity mismatches,
    /// undeclared constants, variables in evidence, a logical variable used
    /// at positions of different domains, or a +inf/NaN weight.
    void validate() const;

    friend bool operator==(const MlnProgram&, const MlnProgram&) = default;
};

bool is_logical_variable(std::string_view arg) noexcept;

/// Parses the `.mln` text format (see docs/formats.md). Throws ParseError
/// with line and column on syntax errors, unknown predicates or domains,
/// arity mismatches and undeclared constants.
MlnProgram parse_mln(std::string_view text);
std::string write_mln(const MlnProgram& program);

/// `.db` evidence files: one ground atom per line, `//` comments.
std::vector<Atom> parse_db(std::string_view text);
std::string write_db(const std::vector<Atom>& atoms);

std::string format_atom(const Atom& atom);

struct AtomRef {
    VariableId variable;
    State state = 0;

    friend bool operator==(const AtomRef&, const AtomRef&) = default;
};

struct GroundingStats {
    std::size_t formula_count = 0;
    /// Substitutions enumerated over all formulas, before any pruning.
    std::size_t ground_instances = 0;
    /// Factors and table cells the grounding would have if closed atoms
    /// were ordinary Boolean variables (before conditioning on evidence).
    std::size_t pre_factor_count = 0;
    std::size_t pre_factor_cells = 0;
    std::size_t factor_count = 0;
    std::size_t factor_cells = 0;
    std::map<std::size_t, std::size_t> pre_clique_sizes;
    std::map<std::size_t, std::size_t> clique_sizes;
    double wall_ms = 0.0;
};

struct GroundingResult {
    FactorGraph graph;
    /// Every ground atom of an open predicate. Exclusive families map to
    /// (variable, constant index); Boolean atoms map to (variable, 1).
    std::map<Atom, AtomRef> atom_index;
    GroundingStats stats;
};

/// Grounds the program into a factor graph. Variables are created per open
/// predicate in declaration order, sites in lexicographic order of their
/// domain indices. Each satisfiable ground formula adds its weight to the
/// satisfying cells of a factor over the variables it touches; formulas with
/// no open literals go to the graph's log offset. Evidence on open
/// predicates clamps the variable. Throws ModelError on an invalid program or
/// contradictory evidence.
GroundingResult ground(const MlnProgram& program);

} // namespace chordgm
