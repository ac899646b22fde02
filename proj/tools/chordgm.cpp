#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "chordgm/commands.hpp"
#include "chordgm/errors.hpp"

namespace {

void add_param_options(CLI::App& cmd, std::optional<std::filesystem::path>& config, std::vector<std::string>& overrides) {
    cmd.add_option("--config", config, "key = value parameter file")->check(CLI::ExistingFile);
    cmd.add_option("--set", overrides, "parameter override key=value (repeatable)");
}

} // namespace

int main(int argc, char** argv) {
    using namespace chordgm;

    CLI::App app{"Exact MAP chord annotation with chain and structural models"};
    app.require_subcommand(1);

    AnnotateArgs annotate;
    std::string model_name = "chain";
    CLI::App* annotate_cmd = app.add_subcommand("annotate", "Label every chromagram frame with a chord");
    annotate_cmd->add_option("chroma", annotate.chroma, "chromagram CSV")->required();
    annotate_cmd->add_option("-m,--model", model_name, "chain | prior-key | joint | struct | multiscale-prior-key | multiscale")
        ->check(CLI::IsMember({"chain", "prior-key", "joint", "struct", "multiscale-prior-key", "multiscale"}));
    annotate_cmd->add_option("--pairs", annotate.pairs, "similarity pairs JSON");
    annotate_cmd->add_option("--measures", annotate.measures, "measure ranges JSON");
    annotate_cmd->add_option("--keys", annotate.keys, "per-frame key JSON");
    annotate_cmd->add_option("-o,--output", annotate.lab_out, ".lab output (default stdout)");
    annotate_cmd->add_option("--json", annotate.json_out, "JSON diagnostics output");
    add_param_options(*annotate_cmd, annotate.config, annotate.overrides);

    CompareArgs compare;
    CLI::App* compare_cmd =
        app.add_subcommand("compare", "Decode with viterbi, VE and both MLN groundings and check they agree");
    compare_cmd->add_option("chroma", compare.chroma, "chromagram CSV")->required();
    add_param_options(*compare_cmd, compare.config, compare.overrides);

    BenchArgs bench;
    CLI::App* bench_cmd = app.add_subcommand("bench", "Time the solvers and write a TSV table");
    bench_cmd->add_option("--sizes", bench.options.sizes, "sequence lengths T")->delimiter(',');
    bench_cmd->add_option("--repetitions", bench.options.repetitions, "runs per cell; the median is reported");
    bench_cmd->add_option("--labels", bench.options.label_count, "label count K")->check(CLI::Range(2, 1024));
    bench_cmd->add_option("--seed", bench.options.seed, "instance seed");
    bench_cmd->add_option("--naive-limit", bench.options.naive_limit, "largest T for the naive grounding");
    bench_cmd->add_option("-o,--output", bench.out, "TSV output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    if (annotate_cmd->parsed()) {
        annotate.model = parse_model_kind(model_name);
        return cmd_annotate(annotate, std::cout, std::cerr);
    }
    if (compare_cmd->parsed()) return cmd_compare(compare, std::cout, std::cerr);
    return cmd_bench(bench, std::cout, std::cerr);
}
