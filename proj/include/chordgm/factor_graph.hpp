#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chordgm/errors.hpp"
#include "chordgm/tie_rule.hpp"

namespace chordgm {

using State = std::uint32_t;
using Assignment = std::vector<State>;

struct VariableId {
    std::uint32_t index = 0;
    friend auto operator<=>(const VariableId&, const VariableId&) = default;
};

struct FactorId {
    std::uint32_t index = 0;
    friend auto operator<=>(const FactorId&, const FactorId&) = default;
};

struct Variable {
    VariableId id;
    std::string name;
    std::uint32_t cardinality = 0;
};

/// Log-space potential over an ascending scope. Table is row-major in scope
/// order, so the last scope variable varies fastest.
struct Factor {
    std::vector<VariableId> scope;
    std::vector<double> log_table;

    /// Table entry selected by a full graph assignment.
    double at(std::span<const State> assignment, std::span<const Variable> variables) const;
};

/// Diagnostics reported by every MAP solver.
struct SolverStats {
    std::size_t eliminated = 0;
    std::size_t max_table_size = 0;
    double wall_ms = 0.0;
};

struct MapResult {
    Assignment assignment;
    double log_score = kNegInf;
    SolverStats stats;
};

/// Discrete variables plus log-space factors. Once built, a graph is only read.
///
/// Scores are unnormalized sums of factor entries. `log_offset()` carries the
/// constant part left over by conditioning or grounding; `evaluate` does not
/// include it.
class FactorGraph {
public:
    VariableId new_variable(std::string name, std::uint32_t cardinality);

    /// Appends a factor. `scope` may be in any order; it is stored ascending and
    /// the table is permuted to match.
    FactorId add_factor(std::span<const VariableId> scope, std::vector<double> log_table);
    FactorId add_factor(std::initializer_list<VariableId> scope, std::vector<double> log_table) {
        return add_factor(std::span<const VariableId>(scope.begin(), scope.size()), std::move(log_table));
    }

    void add_log_offset(double value) { offset_ += value; }
    double log_offset() const noexcept { return offset_; }

    std::size_t variable_count() const noexcept { return variables_.size(); }
    std::size_t factor_count() const noexcept { return factors_.size(); }

    const std::vector<Variable>& variables() const noexcept { return variables_; }
    const std::vector<Factor>& factors() const noexcept { return factors_; }
    const Variable& variable(VariableId id) const;
    const Factor& factor(FactorId id) const;
    std::uint32_t cardinality(VariableId id) const { return variable(id).cardinality; }

    /// Looks up a variable by name; throws GraphError if absent.
    VariableId find_variable(std::string_view name) const;
    bool has_variable(std::string_view name) const;

    /// Sum of the selected entry of every factor; -inf when any factor forbids.
    double evaluate(std::span<const State> assignment) const;

    /// Throws GraphError unless `assignment` is a full, in-range assignment.
    void check_assignment(std::span<const State> assignment) const;

    /// Product of all cardinalities, saturating at UINT64_MAX.
    std::uint64_t state_space_size() const noexcept;

private:
    std::vector<Variable> variables_;
    std::vector<Factor> factors_;
    std::unordered_map<std::string, VariableId> by_name_;
    double offset_ = 0.0;
};

/// A graph with some variables clamped. `original_ids[i]` is the variable of
/// the source graph that became variable i here.
struct ConditionedGraph {
    FactorGraph graph;
    std::vector<VariableId> original_ids;

    /// Expands an assignment of the reduced graph to one of the source graph.
    Assignment merge(std::span<const State> reduced, const std::map<VariableId, State>& evidence,
                     std::size_t source_variable_count) const;
};

/// Removes evidenced variables by slicing every factor at the evidenced state.
/// Factors left with an empty scope are folded into the log offset.
ConditionedGraph condition(const FactorGraph& graph, const std::map<VariableId, State>& evidence);

/// Writes the graph in UAI "MARKOV" form with linear-probability tables.
/// The format is described in docs/formats.md.
void write_uai(const FactorGraph& graph, std::ostream& out);

/// Row-major strides for `scope`, last variable fastest.
std::vector<std::size_t> strides_for(std::span<const VariableId> scope, const FactorGraph& graph);

} // namespace chordgm
