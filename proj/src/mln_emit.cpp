#include "chordgm/mln_emit.hpp"

#include "chordgm/errors.hpp"
#include "chordgm/harmony.hpp"

namespace chordgm {
namespace {

void check_shapes(const Matrix& obs_log, const Matrix& transition_log, std::span<const double> initial_log) {
    if (obs_log.rows() == 0 || obs_log.cols() == 0) throw ModelError("observation matrix is empty");
    const std::size_t K = obs_log.cols();
    if (transition_log.rows() != K || transition_log.cols() != K)
        throw ModelError("transition matrix must be " + std::to_string(K) + "x" + std::to_string(K));
    if (!initial_log.empty() && initial_log.size() != K) throw ModelError("initial distribution has the wrong length");
}

std::vector<std::string> time_constants(std::size_t T) {
    std::vector<std::string> out;
    for (std::size_t t = 0; t < T; ++t) out.push_back(std::to_string(t));
    return out;
}

MlnProgram chain_skeleton(std::size_t T, std::size_t K) {
    MlnProgram p;
    p.domains.push_back({"label", chain_label_names(K)});
    p.domains.push_back({"time", time_constants(T)});
    p.predicates.push_back({"chord", {"label", "time"}, 0, false});
    return p;
}

Atom chord(const std::string& label, const std::string& time) { return {"chord", {label, time}}; }

void add_initial(MlnProgram& p, std::span<const double> initial_log) {
    const auto& labels = p.domains[0].constants;
    for (std::size_t l = 0; l < initial_log.size(); ++l)
        p.formulas.push_back({initial_log[l], {{chord(labels[l], "0"), true}}});
}

} // namespace

std::vector<std::string> chain_label_names(std::size_t label_count) {
    if (label_count == kLabelCount) return label_names();
    std::vector<std::string> out;
    for (std::size_t l = 0; l < label_count; ++l) out.push_back("L" + std::to_string(l));
    return out;
}

MlnProgram emit_naive_chain(const Matrix& obs_log, const Matrix& transition_log, std::span<const double> initial_log) {
    check_shapes(obs_log, transition_log, initial_log);
    const std::size_t T = obs_log.rows(), K = obs_log.cols();
    MlnProgram p = chain_skeleton(T, K);
    std::vector<std::string> obs_names;
    for (std::size_t n = 0; n < T; ++n) obs_names.push_back("O" + std::to_string(n));
    p.domains.push_back({"obs", obs_names});
    p.predicates.push_back({"observation", {"obs", "time"}, std::nullopt, true});
    p.predicates.push_back({"next", {"time", "time"}, std::nullopt, true});
    const auto& labels = p.domains[0].constants;
    const auto& times = p.domains[1].constants;

    add_initial(p, initial_log);
    for (std::size_t n = 0; n < T; ++n)
        for (std::size_t l = 0; l < K; ++l)
            p.formulas.push_back(
                {obs_log(n, l), {{Atom{"observation", {obs_names[n], "t"}}, true}, {chord(labels[l], "t"), true}}});
    for (std::size_t a = 0; a < K && T > 1; ++a)
        for (std::size_t b = 0; b < K; ++b)
            p.formulas.push_back({transition_log(a, b),
                                  {{chord(labels[a], "t1"), true},
                                   {chord(labels[b], "t2"), true},
                                   {Atom{"next", {"t1", "t2"}}, true}}});

    for (std::size_t n = 0; n < T; ++n) p.evidence.push_back({"observation", {obs_names[n], times[n]}});
    for (std::size_t n = 0; n + 1 < T; ++n) p.evidence.push_back({"next", {times[n], times[n + 1]}});
    return p;
}

MlnProgram emit_propositional_chain(const Matrix& obs_log, const Matrix& transition_log,
                                    std::span<const double> initial_log) {
    check_shapes(obs_log, transition_log, initial_log);
    const std::size_t T = obs_log.rows(), K = obs_log.cols();
    MlnProgram p = chain_skeleton(T, K);
    const auto& labels = p.domains[0].constants;
    const auto& times = p.domains[1].constants;

    add_initial(p, initial_log);
    for (std::size_t n = 0; n < T; ++n)
        for (std::size_t l = 0; l < K; ++l) p.formulas.push_back({obs_log(n, l), {{chord(labels[l], times[n]), true}}});
    for (std::size_t n = 0; n + 1 < T; ++n)
        for (std::size_t a = 0; a < K; ++a)
            for (std::size_t b = 0; b < K; ++b)
                p.formulas.push_back({transition_log(a, b),
                                      {{chord(labels[a], times[n]), true}, {chord(labels[b], times[n + 1]), true}}});
    return p;
}

} // namespace chordgm
