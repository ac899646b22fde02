#include "chordgm/inference.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>
#include <set>

namespace chordgm {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
    return a * b;
}

std::vector<std::set<std::uint32_t>> interaction_graph(const FactorGraph& graph) {
    std::vector<std::set<std::uint32_t>> adjacency(graph.variable_count());
    for (const Factor& f : graph.factors()) {
        for (const VariableId a : f.scope)
            for (const VariableId b : f.scope)
                if (a != b) adjacency[a.index].insert(b.index);
    }
    return adjacency;
}

std::size_t fill_in(const std::vector<std::set<std::uint32_t>>& adjacency, std::uint32_t v) {
    const auto& nbrs = adjacency[v];
    std::size_t missing = 0;
    for (auto a = nbrs.begin(); a != nbrs.end(); ++a) {
        for (auto b = std::next(a); b != nbrs.end(); ++b) {
            if (!adjacency[*a].contains(*b)) ++missing;
        }
    }
    return missing;
}

// Connects the neighbours of v pairwise and detaches v.
void eliminate_symbolic(std::vector<std::set<std::uint32_t>>& adjacency, std::uint32_t v) {
    const std::vector<std::uint32_t> nbrs(adjacency[v].begin(), adjacency[v].end());
    for (const std::uint32_t a : nbrs) {
        adjacency[a].erase(v);
        for (const std::uint32_t b : nbrs)
            if (a != b) adjacency[a].insert(b);
    }
    adjacency[v].clear();
}

void measure_step(const FactorGraph& graph, const std::set<std::uint32_t>& nbrs, std::uint32_t v,
                  EliminationOrdering& ordering) {
    ordering.induced_width = std::max(ordering.induced_width, nbrs.size());
    std::uint64_t table = graph.variables()[v].cardinality;
    for (const std::uint32_t n : nbrs) table = saturating_mul(table, graph.variables()[n].cardinality);
    ordering.max_table_size = std::max(ordering.max_table_size, table);
}

// One variable elimination: the message over the variable's neighbours plus
// the argmax state for every neighbour configuration.
struct EliminationStep {
    VariableId var;
    std::vector<VariableId> scope;
    std::vector<std::size_t> strides;
    std::vector<State> argmax;
    std::vector<std::size_t> children;
};

struct WorkFactor {
    std::vector<VariableId> scope;
    std::vector<double> table;
    std::ptrdiff_t step = -1;
    bool alive = true;
};

class Eliminator {
public:
    explicit Eliminator(const FactorGraph& graph) : graph_(graph), buckets_(graph.variable_count()) {
        for (const Factor& f : graph.factors()) add_work(WorkFactor{f.scope, f.log_table, -1, true});
    }

    double run(const std::vector<VariableId>& order) {
        for (const VariableId v : order) eliminate(v);
        double total = 0.0;
        for (const std::size_t root : roots_) {
            const double value = work_[root].table.front();
            if (value == kNegInf) return kNegInf;
            total += value;
        }
        return total;
    }

    Assignment decode() const {
        Assignment assignment(graph_.variable_count(), 0);
        for (std::size_t s = steps_.size(); s-- > 0;) assign_step(s, assignment);
        return assignment;
    }

private:
    void add_work(WorkFactor factor) {
        const std::size_t index = work_.size();
        if (factor.scope.empty()) roots_.push_back(index);
        for (const VariableId v : factor.scope) buckets_[v.index].push_back(index);
        work_.push_back(std::move(factor));
    }

    void assign_step(std::size_t s, Assignment& assignment) const {
        const EliminationStep& step = steps_[s];
        std::size_t index = 0;
        for (std::size_t i = 0; i < step.scope.size(); ++i) index += assignment[step.scope[i].index] * step.strides[i];
        assignment[step.var.index] = step.argmax[index];
    }

    // Fills in the completion implied by already-finished child steps, given
    // that the variables of each child's scope are set in `assignment`.
    void complete(const std::vector<std::size_t>& children, Assignment& assignment) const {
        std::vector<std::size_t> stack(children.rbegin(), children.rend());
        while (!stack.empty()) {
            const std::size_t s = stack.back();
            stack.pop_back();
            assign_step(s, assignment);
            const auto& grand = steps_[s].children;
            stack.insert(stack.end(), grand.rbegin(), grand.rend());
        }
    }

    std::vector<VariableId> subtree_variables(VariableId v, const std::vector<std::size_t>& children) const {
        std::vector<VariableId> vars{v};
        std::vector<std::size_t> stack(children.begin(), children.end());
        while (!stack.empty()) {
            const std::size_t s = stack.back();
            stack.pop_back();
            vars.push_back(steps_[s].var);
            stack.insert(stack.end(), steps_[s].children.begin(), steps_[s].children.end());
        }
        std::sort(vars.begin(), vars.end());
        return vars;
    }

    void eliminate(VariableId v) {
        std::vector<std::size_t> bucket;
        for (const std::size_t f : buckets_[v.index]) {
            if (work_[f].alive) {
                work_[f].alive = false;
                bucket.push_back(f);
            }
        }

        EliminationStep step;
        step.var = v;
        std::set<VariableId> neighbours;
        for (const std::size_t f : bucket) {
            for (const VariableId u : work_[f].scope)
                if (u != v) neighbours.insert(u);
            if (work_[f].step >= 0) step.children.push_back(static_cast<std::size_t>(work_[f].step));
        }
        step.scope.assign(neighbours.begin(), neighbours.end());
        step.strides = strides_for(step.scope, graph_);

        const std::size_t n_scope = step.scope.size();
        const State v_card = graph_.cardinality(v);
        std::vector<State> cards(n_scope);
        std::size_t message_size = 1;
        for (std::size_t i = 0; i < n_scope; ++i) {
            cards[i] = graph_.cardinality(step.scope[i]);
            message_size *= cards[i];
        }

        // Per-factor strides for every neighbour and for v itself.
        const std::size_t n_bucket = bucket.size();
        std::vector<std::size_t> scope_stride(n_bucket * n_scope, 0);
        std::vector<std::size_t> var_stride(n_bucket, 0);
        for (std::size_t b = 0; b < n_bucket; ++b) {
            const WorkFactor& f = work_[bucket[b]];
            const auto strides = strides_for(f.scope, graph_);
            for (std::size_t i = 0; i < f.scope.size(); ++i) {
                if (f.scope[i] == v) {
                    var_stride[b] = strides[i];
                } else {
                    const auto pos = std::lower_bound(step.scope.begin(), step.scope.end(), f.scope[i]) -
                                     step.scope.begin();
                    scope_stride[b * n_scope + static_cast<std::size_t>(pos)] = strides[i];
                }
            }
        }

        std::vector<double> message(message_size);
        step.argmax.assign(message_size, 0);
        std::vector<std::size_t> base(n_bucket, 0);
        std::vector<State> digits(n_scope, 0);
        std::vector<double> values(v_card);
        std::vector<VariableId> subtree;
        Assignment best_completion;
        Assignment candidate_completion;

        for (std::size_t cell = 0; cell < message_size; ++cell) {
            for (State s = 0; s < v_card; ++s) {
                double total = 0.0;
                for (std::size_t b = 0; b < n_bucket; ++b) {
                    const double x = work_[bucket[b]].table[base[b] + s * var_stride[b]];
                    if (x == kNegInf) {
                        total = kNegInf;
                        break;
                    }
                    total += x;
                }
                values[s] = total;
            }

            State best = 0;
            for (State s = 1; s < v_card; ++s) {
                if (strictly_better(values[s], values[best])) {
                    best = s;
                } else if (values[s] != kNegInf && tied(values[s], values[best])) {
                    if (subtree.empty()) {
                        subtree = subtree_variables(v, step.children);
                        best_completion.assign(graph_.variable_count(), 0);
                        candidate_completion.assign(graph_.variable_count(), 0);
                    }
                    for (std::size_t i = 0; i < n_scope; ++i) {
                        best_completion[step.scope[i].index] = digits[i];
                        candidate_completion[step.scope[i].index] = digits[i];
                    }
                    best_completion[v.index] = best;
                    candidate_completion[v.index] = s;
                    complete(step.children, best_completion);
                    complete(step.children, candidate_completion);
                    for (const VariableId u : subtree) {
                        if (candidate_completion[u.index] != best_completion[u.index]) {
                            if (candidate_completion[u.index] < best_completion[u.index]) best = s;
                            break;
                        }
                    }
                }
            }
            message[cell] = values[best];
            step.argmax[cell] = best;

            for (std::size_t d = n_scope; d-- > 0;) {
                if (++digits[d] < cards[d]) {
                    for (std::size_t b = 0; b < n_bucket; ++b) base[b] += scope_stride[b * n_scope + d];
                    break;
                }
                for (std::size_t b = 0; b < n_bucket; ++b) base[b] -= scope_stride[b * n_scope + d] * (cards[d] - 1);
                digits[d] = 0;
            }
        }

        const std::ptrdiff_t step_index = static_cast<std::ptrdiff_t>(steps_.size());
        add_work(WorkFactor{step.scope, std::move(message), step_index, true});
        steps_.push_back(std::move(step));
    }

    const FactorGraph& graph_;
    std::vector<WorkFactor> work_;
    std::vector<std::vector<std::size_t>> buckets_;
    std::vector<std::size_t> roots_;
    std::vector<EliminationStep> steps_;
};

} // namespace

MapResult brute_force_map(const FactorGraph& graph) {
    const auto start = Clock::now();
    const std::uint64_t space = graph.state_space_size();
    if (space > kBruteForceLimit)
        throw GuardError("brute force state space " + std::to_string(space) + " exceeds limit " +
                             std::to_string(kBruteForceLimit),
                         graph.variable_count());

    const std::size_t n = graph.variable_count();
    Assignment current(n, 0);
    MapResult result;
    result.assignment = current;
    result.log_score = graph.evaluate(current);
    for (std::uint64_t i = 1; i < space; ++i) {
        for (std::size_t d = n; d-- > 0;) {
            if (++current[d] < graph.variables()[d].cardinality) break;
            current[d] = 0;
        }
        const double score = graph.evaluate(current);
        if (strictly_better(score, result.log_score)) {
            result.log_score = score;
            result.assignment = current;
        }
    }
    if (result.log_score == kNegInf) throw InfeasibleError("every assignment has probability zero");
    result.stats.eliminated = n;
    result.stats.max_table_size = static_cast<std::size_t>(space);
    result.stats.wall_ms = elapsed_ms(start);
    return result;
}

EliminationOrdering make_ordering(const FactorGraph& graph, std::vector<VariableId> order) {
    const std::size_t n = graph.variable_count();
    if (order.size() != n) throw GraphError("elimination order is not a permutation of the variables");
    std::vector<bool> seen(n, false);
    for (const VariableId v : order) {
        if (v.index >= n || seen[v.index]) throw GraphError("elimination order is not a permutation of the variables");
        seen[v.index] = true;
    }
    auto adjacency = interaction_graph(graph);
    EliminationOrdering ordering;
    for (const VariableId v : order) {
        measure_step(graph, adjacency[v.index], v.index, ordering);
        eliminate_symbolic(adjacency, v.index);
    }
    ordering.order = std::move(order);
    return ordering;
}

EliminationOrdering min_fill_ordering(const FactorGraph& graph) {
    const std::size_t n = graph.variable_count();
    auto adjacency = interaction_graph(graph);
    std::vector<std::size_t> fill(n);
    for (std::uint32_t v = 0; v < n; ++v) fill[v] = fill_in(adjacency, v);
    std::vector<bool> done(n, false);

    EliminationOrdering ordering;
    ordering.order.reserve(n);
    for (std::size_t step = 0; step < n; ++step) {
        std::uint32_t pick = 0;
        std::size_t best = std::numeric_limits<std::size_t>::max();
        for (std::uint32_t v = 0; v < n; ++v) {
            if (!done[v] && fill[v] < best) {
                best = fill[v];
                pick = v;
            }
        }
        measure_step(graph, adjacency[pick], pick, ordering);

        // Only the neighbourhood and its neighbours can see their fill change.
        std::set<std::uint32_t> touched(adjacency[pick].begin(), adjacency[pick].end());
        for (const std::uint32_t a : adjacency[pick]) touched.insert(adjacency[a].begin(), adjacency[a].end());
        eliminate_symbolic(adjacency, pick);
        done[pick] = true;
        ordering.order.push_back(VariableId{pick});
        for (const std::uint32_t u : touched)
            if (!done[u]) fill[u] = fill_in(adjacency, u);
    }
    return ordering;
}

MapResult max_product_ve(const FactorGraph& graph, const EliminationOrdering& ordering) {
    const auto start = Clock::now();
    if (ordering.order.size() != graph.variable_count())
        throw GraphError("elimination order does not match the graph");
    if (ordering.max_table_size > kEliminationTableLimit)
        throw GuardError("elimination needs a table of " + std::to_string(ordering.max_table_size) +
                             " entries (induced width " + std::to_string(ordering.induced_width) + ")",
                         ordering.induced_width);

    Eliminator eliminator(graph);
    const double total = eliminator.run(ordering.order);
    if (total == kNegInf) throw InfeasibleError("every assignment has probability zero");

    MapResult result;
    result.assignment = eliminator.decode();
    result.log_score = graph.evaluate(result.assignment);
    result.stats.eliminated = ordering.order.size();
    result.stats.max_table_size = static_cast<std::size_t>(ordering.max_table_size);
    result.stats.wall_ms = elapsed_ms(start);
    return result;
}

MapResult max_product_ve(const FactorGraph& graph) {
    const auto start = Clock::now();
    const EliminationOrdering ordering = min_fill_ordering(graph);
    MapResult result = max_product_ve(graph, ordering);
    result.stats.wall_ms = elapsed_ms(start);
    return result;
}

} // namespace chordgm
