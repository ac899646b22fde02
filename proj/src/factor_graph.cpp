#include "chordgm/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

namespace chordgm {

double Factor::at(std::span<const State> assignment, std::span<const Variable> variables) const {
    std::size_t index = 0;
    std::size_t stride = 1;
    for (auto it = scope.rbegin(); it != scope.rend(); ++it) {
        index += assignment[it->index] * stride;
        stride *= variables[it->index].cardinality;
    }
    return log_table[index];
}

VariableId FactorGraph::new_variable(std::string name, std::uint32_t cardinality) {
    if (cardinality == 0) throw GraphError("variable '" + name + "' has cardinality 0");
    if (by_name_.contains(name)) throw GraphError("duplicate variable name '" + name + "'");
    const VariableId id{static_cast<std::uint32_t>(variables_.size())};
    by_name_.emplace(name, id);
    variables_.push_back(Variable{id, std::move(name), cardinality});
    return id;
}

FactorId FactorGraph::add_factor(std::span<const VariableId> scope, std::vector<double> log_table) {
    if (scope.empty()) throw GraphError("factor scope is empty; use add_log_offset for constants");
    std::size_t expected = 1;
    for (const VariableId v : scope) {
        if (v.index >= variables_.size())
            throw GraphError("factor references unknown variable " + std::to_string(v.index));
        expected *= variables_[v.index].cardinality;
    }
    std::vector<VariableId> sorted(scope.begin(), scope.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw GraphError("factor scope contains a duplicate variable");
    if (log_table.size() != expected)
        throw GraphError("factor table has " + std::to_string(log_table.size()) + " entries, scope requires " +
                         std::to_string(expected));
    bool any_finite = false;
    for (const double x : log_table) {
        if (std::isnan(x) || x == std::numeric_limits<double>::infinity())
            throw GraphError("factor table entries must be finite or -inf");
        any_finite = any_finite || std::isfinite(x);
    }
    if (!any_finite) throw GraphError("factor table forbids every configuration");

    if (!std::equal(sorted.begin(), sorted.end(), scope.begin())) {
        // Re-layout: walk the sorted layout and read each cell from the caller's layout.
        const auto caller_strides = strides_for(scope, *this);
        std::vector<std::size_t> stride_in_caller(sorted.size());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            const auto pos = std::find(scope.begin(), scope.end(), sorted[i]) - scope.begin();
            stride_in_caller[i] = caller_strides[static_cast<std::size_t>(pos)];
        }
        std::vector<double> permuted(expected);
        std::vector<State> digits(sorted.size(), 0);
        std::size_t source = 0;
        for (std::size_t cell = 0; cell < expected; ++cell) {
            permuted[cell] = log_table[source];
            for (std::size_t d = sorted.size(); d-- > 0;) {
                if (++digits[d] < variables_[sorted[d].index].cardinality) {
                    source += stride_in_caller[d];
                    break;
                }
                source -= stride_in_caller[d] * (digits[d] - 1);
                digits[d] = 0;
            }
        }
        log_table = std::move(permuted);
    }

    const FactorId id{static_cast<std::uint32_t>(factors_.size())};
    factors_.push_back(Factor{std::move(sorted), std::move(log_table)});
    return id;
}

const Variable& FactorGraph::variable(VariableId id) const {
    if (id.index >= variables_.size()) throw GraphError("unknown variable " + std::to_string(id.index));
    return variables_[id.index];
}

const Factor& FactorGraph::factor(FactorId id) const {
    if (id.index >= factors_.size()) throw GraphError("unknown factor " + std::to_string(id.index));
    return factors_[id.index];
}

VariableId FactorGraph::find_variable(std::string_view name) const {
    const auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) throw GraphError("no variable named '" + std::string(name) + "'");
    return it->second;
}

bool FactorGraph::has_variable(std::string_view name) const { return by_name_.contains(std::string(name)); }

void FactorGraph::check_assignment(std::span<const State> assignment) const {
    if (assignment.size() != variables_.size())
        throw GraphError("assignment has " + std::to_string(assignment.size()) + " entries, graph has " +
                         std::to_string(variables_.size()) + " variables");
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] >= variables_[i].cardinality)
            throw GraphError("state " + std::to_string(assignment[i]) + " out of range for variable '" +
                             variables_[i].name + "'");
    }
}

double FactorGraph::evaluate(std::span<const State> assignment) const {
    check_assignment(assignment);
    double total = 0.0;
    for (const Factor& f : factors_) {
        const double entry = f.at(assignment, variables_);
        if (entry == kNegInf) return kNegInf;
        total += entry;
    }
    return total;
}

std::uint64_t FactorGraph::state_space_size() const noexcept {
    std::uint64_t size = 1;
    for (const Variable& v : variables_) {
        if (size > std::numeric_limits<std::uint64_t>::max() / v.cardinality)
            return std::numeric_limits<std::uint64_t>::max();
        size *= v.cardinality;
    }
    return size;
}

std::vector<std::size_t> strides_for(std::span<const VariableId> scope, const FactorGraph& graph) {
    std::vector<std::size_t> strides(scope.size());
    std::size_t stride = 1;
    for (std::size_t i = scope.size(); i-- > 0;) {
        strides[i] = stride;
        stride *= graph.cardinality(scope[i]);
    }
    return strides;
}

Assignment ConditionedGraph::merge(std::span<const State> reduced, const std::map<VariableId, State>& evidence,
                                   std::size_t source_variable_count) const {
    if (reduced.size() != original_ids.size()) throw GraphError("reduced assignment has wrong length");
    Assignment full(source_variable_count, 0);
    for (const auto& [var, state] : evidence) full.at(var.index) = state;
    for (std::size_t i = 0; i < reduced.size(); ++i) full.at(original_ids[i].index) = reduced[i];
    return full;
}

ConditionedGraph condition(const FactorGraph& graph, const std::map<VariableId, State>& evidence) {
    for (const auto& [var, state] : evidence) {
        if (state >= graph.cardinality(var))
            throw GraphError("evidence state " + std::to_string(state) + " out of range for variable '" +
                             graph.variable(var).name + "'");
    }

    ConditionedGraph result;
    std::vector<std::int64_t> remap(graph.variable_count(), -1);
    for (const Variable& v : graph.variables()) {
        if (evidence.contains(v.id)) continue;
        remap[v.id.index] = static_cast<std::int64_t>(result.original_ids.size());
        result.graph.new_variable(v.name, v.cardinality);
        result.original_ids.push_back(v.id);
    }
    result.graph.add_log_offset(graph.log_offset());

    for (const Factor& f : graph.factors()) {
        const auto strides = strides_for(f.scope, graph);
        std::size_t base = 0;
        std::vector<VariableId> kept_scope;
        std::vector<std::size_t> kept_strides;
        std::vector<std::uint32_t> kept_cards;
        for (std::size_t i = 0; i < f.scope.size(); ++i) {
            const auto it = evidence.find(f.scope[i]);
            if (it != evidence.end()) {
                base += it->second * strides[i];
            } else {
                kept_scope.push_back(VariableId{static_cast<std::uint32_t>(remap[f.scope[i].index])});
                kept_strides.push_back(strides[i]);
                kept_cards.push_back(graph.cardinality(f.scope[i]));
            }
        }
        if (kept_scope.empty()) {
            result.graph.add_log_offset(f.log_table[base]);
            continue;
        }
        const std::size_t size =
            std::accumulate(kept_cards.begin(), kept_cards.end(), std::size_t{1}, std::multiplies<>());
        std::vector<double> sliced(size);
        std::vector<std::uint32_t> digits(kept_scope.size(), 0);
        std::size_t source = base;
        for (std::size_t cell = 0; cell < size; ++cell) {
            sliced[cell] = f.log_table[source];
            for (std::size_t d = kept_scope.size(); d-- > 0;) {
                if (++digits[d] < kept_cards[d]) {
                    source += kept_strides[d];
                    break;
                }
                source -= kept_strides[d] * (digits[d] - 1);
                digits[d] = 0;
            }
        }
        if (std::none_of(sliced.begin(), sliced.end(), [](double x) { return std::isfinite(x); })) {
            // The evidence is impossible under this factor; keep it as an infeasible constant.
            result.graph.add_log_offset(kNegInf);
            continue;
        }
        result.graph.add_factor(kept_scope, std::move(sliced));
    }
    return result;
}

void write_uai(const FactorGraph& graph, std::ostream& out) {
    out << "MARKOV\n" << graph.variable_count() << '\n';
    for (std::size_t i = 0; i < graph.variable_count(); ++i) {
        out << (i == 0 ? "" : " ") << graph.variables()[i].cardinality;
    }
    out << '\n' << graph.factor_count() << '\n';
    for (const Factor& f : graph.factors()) {
        out << f.scope.size();
        for (const VariableId v : f.scope) out << ' ' << v.index;
        out << '\n';
    }
    const auto old_flags = out.flags();
    const auto old_precision = out.precision();
    out << std::setprecision(17);
    for (const Factor& f : graph.factors()) {
        out << '\n' << f.log_table.size() << '\n';
        for (std::size_t i = 0; i < f.log_table.size(); ++i) {
            out << (i == 0 ? "" : " ") << std::exp(f.log_table[i]);
        }
        out << '\n';
    }
    out.flags(old_flags);
    out.precision(old_precision);
}

} // namespace chordgm
