#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "chordgm/errors.hpp"
#include "chordgm/mln.hpp"

namespace chordgm {
namespace {

constexpr std::uint64_t kMaxClosedAtoms = 1'000'000'000;

struct DomainIndex {
    const Domain* domain = nullptr;
    std::unordered_map<std::string, std::uint32_t> index;
};

struct PredInfo {
    const PredicateDecl* decl = nullptr;
    std::vector<const DomainIndex*> domains;
    std::vector<std::uint64_t> strides; // closed: all positions; open: site positions, 0 at the exclusive one
    std::uint64_t atom_count = 1;       // closed: number of ground atoms; open: number of sites
    std::vector<std::uint8_t> truth;    // closed only
    std::uint32_t first_var = 0;        // open only
    std::uint64_t pre_base = 0;         // id offset of this predicate's atoms in the pre-conditioning graph
};

struct CompiledLiteral {
    const PredInfo* pred = nullptr;
    bool positive = true;
    std::uint64_t base = 0;                                // contribution of constant arguments
    std::vector<std::pair<std::uint32_t, std::uint64_t>> terms; // (slot, stride)
    int state_slot = -1;                                   // exclusive argument bound to a slot
    std::uint32_t state_const = 0;                         // exclusive argument constant (or 1 for Boolean)

    std::uint64_t index(const std::vector<std::uint32_t>& sub) const {
        std::uint64_t i = base;
        for (const auto& [slot, stride] : terms) i += sub[slot] * stride;
        return i;
    }
    State state(const std::vector<std::uint32_t>& sub) const {
        return state_slot >= 0 ? sub[static_cast<std::size_t>(state_slot)] : state_const;
    }
};

struct CompiledFormula {
    double weight = 0.0;
    std::vector<std::uint32_t> slot_sizes;
    std::vector<CompiledLiteral> closed;
    std::vector<CompiledLiteral> open;
};

struct Constraint {
    std::uint32_t var;
    State state;
    bool equal; // false: var != state
};

class Grounder {
public:
    explicit Grounder(const MlnProgram& program) : program_(program) {}

    GroundingResult run() {
        const auto start = std::chrono::steady_clock::now();
        program_.validate();
        index_domains();
        index_predicates();
        create_variables();
        apply_evidence();
        std::vector<CompiledFormula> compiled;
        for (const WeightedFormula& f : program_.formulas) compiled.push_back(compile(f));

        result_.stats.formula_count = program_.formulas.size();
        for (const CompiledFormula& f : compiled) ground_formula(f);
        for (const auto& [var, state] : clamps_) {
            std::vector<double> row(result_.graph.cardinality(VariableId{var}), kNegInf);
            row[state] = 0.0;
            accumulate_unary(var, row);
        }
        pre_conditioning_stats(compiled);
        emit_factors();
        result_.stats.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        return std::move(result_);
    }

private:
    void index_domains() {
        for (const Domain& d : program_.domains) {
            DomainIndex& di = domains_[d.name];
            di.domain = &d;
            for (std::uint32_t i = 0; i < d.constants.size(); ++i) di.index.emplace(d.constants[i], i);
        }
    }

    void index_predicates() {
        std::uint64_t pre_base = 0;
        for (const PredicateDecl& p : program_.predicates) {
            PredInfo& info = preds_[p.name];
            info.decl = &p;
            for (const auto& d : p.arg_domains) info.domains.push_back(&domains_.at(d));
            const std::size_t n = p.arg_domains.size();
            info.strides.assign(n, 0);
            std::uint64_t stride = 1;
            for (std::size_t i = n; i-- > 0;) {
                if (!p.closed && p.exclusive_arg == i) continue;
                info.strides[i] = stride;
                stride *= info.domains[i]->domain->constants.size();
            }
            info.atom_count = stride;
            if (p.closed) {
                if (info.atom_count > kMaxClosedAtoms)
                    throw ModelError("closed predicate '" + p.name + "' has too many ground atoms");
                info.truth.assign(info.atom_count, 0);
                info.pre_base = pre_base;
                pre_base += info.atom_count;
            }
        }
    }

    std::uint32_t state_count(const PredInfo& info) const {
        if (!info.decl->exclusive_arg) return 2;
        return static_cast<std::uint32_t>(info.domains[*info.decl->exclusive_arg]->domain->constants.size());
    }

    void create_variables() {
        FactorGraph& g = result_.graph;
        for (const PredicateDecl& p : program_.predicates) {
            if (p.closed) continue;
            PredInfo& info = preds_[p.name];
            info.first_var = static_cast<std::uint32_t>(g.variable_count());
            const std::uint32_t card = state_count(info);
            if (card == 0) throw ModelError("exclusive domain of predicate '" + p.name + "' is empty");
            const std::size_t n = p.arg_domains.size();
            std::vector<std::uint32_t> args(n, 0);
            for (std::uint64_t site = 0; site < info.atom_count; ++site) {
                // decode the site index into argument indices
                std::uint64_t rest = site;
                for (std::size_t i = 0; i < n; ++i) {
                    if (p.exclusive_arg == i) continue;
                    args[i] = static_cast<std::uint32_t>(rest / info.strides[i]);
                    rest %= info.strides[i];
                }
                Atom atom{p.name, std::vector<std::string>(n)};
                std::string name = p.name + "(";
                for (std::size_t i = 0; i < n; ++i) {
                    if (i) name += ',';
                    if (p.exclusive_arg == i) {
                        name += '_';
                    } else {
                        atom.args[i] = info.domains[i]->domain->constants[args[i]];
                        name += atom.args[i];
                    }
                }
                name += ')';
                const VariableId v = g.new_variable(name, card);
                if (p.exclusive_arg) {
                    const auto& constants = info.domains[*p.exclusive_arg]->domain->constants;
                    for (State s = 0; s < card; ++s) {
                        atom.args[*p.exclusive_arg] = constants[s];
                        result_.atom_index.emplace(atom, AtomRef{v, s});
                    }
                } else {
                    result_.atom_index.emplace(std::move(atom), AtomRef{v, 1});
                }
            }
        }
    }

    void apply_evidence() {
        // Exclusive closed predicates: site -> constant, to catch two values at one site.
        std::map<std::pair<const PredInfo*, std::uint64_t>, std::uint32_t> closed_sites;
        for (const Atom& a : program_.evidence) {
            PredInfo& info = preds_.at(a.predicate);
            const PredicateDecl& p = *info.decl;
            if (p.closed) {
                std::uint64_t idx = 0, site = 0;
                for (std::size_t i = 0; i < a.args.size(); ++i) {
                    const std::uint32_t c = info.domains[i]->index.at(a.args[i]);
                    idx += c * info.strides[i];
                    if (p.exclusive_arg != i) site = site * info.domains[i]->domain->constants.size() + c;
                }
                if (p.exclusive_arg) {
                    const std::uint32_t value = info.domains[*p.exclusive_arg]->index.at(a.args[*p.exclusive_arg]);
                    const auto [it, inserted] = closed_sites.emplace(std::make_pair(&info, site), value);
                    if (!inserted && it->second != value)
                        throw ModelError("contradictory evidence: " + format_atom(a) + " conflicts with another value");
                }
                info.truth[idx] = 1;
            } else {
                const AtomRef ref = result_.atom_index.at(a);
                const auto [it, inserted] = clamps_.emplace(ref.variable.index, ref.state);
                if (!inserted && it->second != ref.state)
                    throw ModelError("contradictory evidence: " + format_atom(a) + " conflicts with another value");
            }
        }
    }

    CompiledFormula compile(const WeightedFormula& f) {
        CompiledFormula out;
        out.weight = f.weight;
        std::map<std::string, std::uint32_t> slots;
        for (const Literal& lit : f.literals) {
            const PredInfo& info = preds_.at(lit.atom.predicate);
            const PredicateDecl& p = *info.decl;
            CompiledLiteral cl;
            cl.pred = &info;
            cl.positive = lit.positive;
            cl.state_const = 1;
            for (std::size_t i = 0; i < lit.atom.args.size(); ++i) {
                const std::string& arg = lit.atom.args[i];
                const bool is_state = !p.closed && p.exclusive_arg == i;
                if (is_logical_variable(arg)) {
                    auto [it, inserted] = slots.emplace(arg, static_cast<std::uint32_t>(out.slot_sizes.size()));
                    if (inserted)
                        out.slot_sizes.push_back(static_cast<std::uint32_t>(info.domains[i]->domain->constants.size()));
                    if (is_state)
                        cl.state_slot = static_cast<int>(it->second);
                    else
                        cl.terms.emplace_back(it->second, info.strides[i]);
                } else {
                    const std::uint32_t c = info.domains[i]->index.at(arg);
                    if (is_state)
                        cl.state_const = c;
                    else
                        cl.base += c * info.strides[i];
                }
            }
            (p.closed ? out.closed : out.open).push_back(std::move(cl));
        }
        return out;
    }

    void ground_formula(const CompiledFormula& f) {
        std::uint64_t instances = 1;
        for (const std::uint32_t s : f.slot_sizes) instances *= s;
        result_.stats.ground_instances += instances;
        if (instances == 0) return;

        std::vector<std::uint32_t> sub(f.slot_sizes.size(), 0);
        std::vector<Constraint> constraints;
        while (true) {
            bool holds = true;
            for (const CompiledLiteral& lit : f.closed) {
                if ((lit.pred->truth[lit.index(sub)] != 0) != lit.positive) {
                    holds = false;
                    break;
                }
            }
            if (holds) {
                if (f.open.empty()) {
                    result_.graph.add_log_offset(f.weight);
                } else {
                    constraints.clear();
                    for (const CompiledLiteral& lit : f.open) {
                        const auto var = static_cast<std::uint32_t>(lit.pred->first_var + lit.index(sub));
                        const State s = lit.state(sub);
                        if (lit.pred->decl->exclusive_arg)
                            constraints.push_back({var, s, lit.positive});
                        else
                            constraints.push_back({var, lit.positive ? 1u : 0u, true});
                    }
                    add_conjunction(constraints, f.weight);
                }
            }
            std::size_t d = sub.size();
            while (d-- > 0) {
                if (++sub[d] < f.slot_sizes[d]) break;
                sub[d] = 0;
            }
            if (d == static_cast<std::size_t>(-1)) break;
        }
    }

    // Adds `weight` to every cell of the scope's table where all constraints hold.
    void add_conjunction(std::vector<Constraint>& constraints, double weight) {
        std::sort(constraints.begin(), constraints.end(),
                  [](const Constraint& a, const Constraint& b) { return a.var < b.var; });
        scope_.clear();
        allowed_.clear();
        std::size_t i = 0;
        while (i < constraints.size()) {
            const std::uint32_t var = constraints[i].var;
            const std::uint32_t card = result_.graph.cardinality(VariableId{var});
            std::int64_t required = -1;
            mask_.assign(card, 1);
            for (; i < constraints.size() && constraints[i].var == var; ++i) {
                const Constraint& c = constraints[i];
                if (c.equal) {
                    if (required >= 0 && required != c.state) return;
                    required = c.state;
                } else {
                    mask_[c.state] = 0;
                }
            }
            std::vector<State> states;
            if (required >= 0) {
                if (!mask_[static_cast<std::size_t>(required)]) return;
                states.push_back(static_cast<State>(required));
            } else {
                for (State s = 0; s < card; ++s)
                    if (mask_[s]) states.push_back(s);
                if (states.empty()) return;
            }
            scope_.push_back(var);
            allowed_.push_back(std::move(states));
        }

        std::vector<double>& table = table_for(scope_);
        const std::size_t n = scope_.size();
        std::vector<std::size_t> strides(n);
        std::size_t stride = 1;
        for (std::size_t k = n; k-- > 0;) {
            strides[k] = stride;
            stride *= result_.graph.cardinality(VariableId{scope_[k]});
        }
        std::vector<std::size_t> pos(n, 0);
        while (true) {
            std::size_t cell = 0;
            for (std::size_t k = 0; k < n; ++k) cell += allowed_[k][pos[k]] * strides[k];
            table[cell] += weight;
            std::size_t d = n;
            while (d-- > 0) {
                if (++pos[d] < allowed_[d].size()) break;
                pos[d] = 0;
            }
            if (d == static_cast<std::size_t>(-1)) break;
        }
    }

    void accumulate_unary(std::uint32_t var, const std::vector<double>& row) {
        std::vector<double>& table = table_for({var});
        for (std::size_t s = 0; s < row.size(); ++s) table[s] += row[s];
    }

    std::vector<double>& table_for(const std::vector<std::uint32_t>& scope) {
        auto it = table_index_.find(scope);
        if (it == table_index_.end()) {
            std::size_t size = 1;
            for (const std::uint32_t v : scope) size *= result_.graph.cardinality(VariableId{v});
            it = table_index_.emplace(scope, tables_.size()).first;
            tables_.emplace_back(scope, std::vector<double>(size, 0.0));
        }
        return tables_[it->second].second;
    }

    void emit_factors() {
        GroundingStats& stats = result_.stats;
        for (auto& [scope, table] : tables_) {
            if (std::all_of(table.begin(), table.end(), [](double x) { return x == kNegInf; })) {
                std::string names;
                for (const std::uint32_t v : scope) names += " " + result_.graph.variable(VariableId{v}).name;
                throw InfeasibleError("formulas and evidence forbid every state of" + names);
            }
            std::vector<VariableId> ids;
            for (const std::uint32_t v : scope) ids.push_back(VariableId{v});
            result_.graph.add_factor(ids, std::move(table));
            ++stats.factor_count;
            stats.factor_cells += result_.graph.factors().back().log_table.size();
            ++stats.clique_sizes[scope.size()];
        }
    }

    // Factor counts as if closed atoms were Boolean variables. Formulas that
    // differ only in the state constants of exclusive atoms touch the same
    // scopes, so each such group is enumerated once.
    void pre_conditioning_stats(const std::vector<CompiledFormula>& compiled) {
        struct Hash {
            std::size_t operator()(const std::vector<std::uint64_t>& v) const noexcept {
                std::uint64_t h = 1469598103934665603ull;
                for (const std::uint64_t x : v) h = (h ^ x) * 1099511628211ull;
                return static_cast<std::size_t>(h);
            }
        };
        std::unordered_set<std::vector<std::uint64_t>, Hash> scopes;
        std::unordered_set<std::string> signatures;
        const std::uint64_t open_vars = result_.graph.variable_count();

        for (std::size_t fi = 0; fi < compiled.size(); ++fi) {
            const WeightedFormula& f = program_.formulas[fi];
            std::string sig;
            for (const Literal& lit : f.literals) {
                const PredicateDecl& p = *preds_.at(lit.atom.predicate).decl;
                sig += lit.atom.predicate + '(';
                for (std::size_t i = 0; i < lit.atom.args.size(); ++i)
                    sig += (!p.closed && p.exclusive_arg == i ? std::string("*") : lit.atom.args[i]) + ',';
                sig += ')';
            }
            if (!signatures.insert(sig).second) continue;

            const CompiledFormula& cf = compiled[fi];
            std::vector<bool> relevant(cf.slot_sizes.size(), false);
            for (const auto* group : {&cf.closed, &cf.open})
                for (const CompiledLiteral& lit : *group)
                    for (const auto& term : lit.terms) relevant[term.first] = true;
            std::vector<std::uint32_t> sizes = cf.slot_sizes;
            for (std::size_t s = 0; s < sizes.size(); ++s)
                if (!relevant[s]) sizes[s] = sizes[s] == 0 ? 0 : 1;
            if (std::find(sizes.begin(), sizes.end(), 0u) != sizes.end()) continue;

            std::vector<std::uint32_t> sub(sizes.size(), 0);
            std::vector<std::uint64_t> scope;
            while (true) {
                scope.clear();
                for (const CompiledLiteral& lit : cf.open) scope.push_back(lit.pred->first_var + lit.index(sub));
                for (const CompiledLiteral& lit : cf.closed)
                    scope.push_back(open_vars + lit.pred->pre_base + lit.index(sub));
                std::sort(scope.begin(), scope.end());
                scope.erase(std::unique(scope.begin(), scope.end()), scope.end());
                scopes.insert(scope);
                std::size_t d = sub.size();
                while (d-- > 0) {
                    if (++sub[d] < sizes[d]) break;
                    sub[d] = 0;
                }
                if (d == static_cast<std::size_t>(-1)) break;
            }
        }
        // Clamps become unary factors in both readings.
        for (const auto& [var, state] : clamps_) scopes.insert({var});

        GroundingStats& stats = result_.stats;
        for (const auto& scope : scopes) {
            std::size_t cells = 1;
            for (const std::uint64_t id : scope)
                cells *= id < open_vars ? result_.graph.cardinality(VariableId{static_cast<std::uint32_t>(id)}) : 2;
            ++stats.pre_factor_count;
            stats.pre_factor_cells += cells;
            ++stats.pre_clique_sizes[scope.size()];
        }
    }

    const MlnProgram& program_;
    GroundingResult result_;
    std::map<std::string, DomainIndex> domains_;
    std::map<std::string, PredInfo> preds_;
    std::map<std::uint32_t, State> clamps_;

    struct ScopeHash {
        std::size_t operator()(const std::vector<std::uint32_t>& v) const noexcept {
            std::size_t h = 0;
            for (const std::uint32_t x : v) h = h * 1000003u + x;
            return h;
        }
    };
    std::unordered_map<std::vector<std::uint32_t>, std::size_t, ScopeHash> table_index_;
    std::vector<std::pair<std::vector<std::uint32_t>, std::vector<double>>> tables_;
    std::vector<std::uint32_t> scope_;
    std::vector<std::vector<State>> allowed_;
    std::vector<std::uint8_t> mask_;
};

} // namespace

GroundingResult ground(const MlnProgram& program) { return Grounder(program).run(); }

} // namespace chordgm
