// lastmile — predict and explain last-mile pickup/delivery service failures.
//
// Subcommands:
//   synth     generate a synthetic service corpus with planted failure rules
//   ingest    parse + deduplicate + encode + aggregate a service CSV
//   evaluate  cross-validated sensitivity/specificity per (type, method)
//   mine      interest-ratio association rules per failure type
//   pipeline  the full run: evaluate, train final models, mine, write artifacts
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.

#include "CLI11.hpp"

#include "lastmile/pipeline.hpp"

#include <cstdint>
#include <iostream>
#include <string>

namespace {

struct CommonArgs {
    std::string config;
    std::string input;
    std::string out;
    std::string types;
    std::string methods;
    std::uint64_t seed = 0;
    CLI::Option* config_opt = nullptr;
    CLI::Option* input_opt = nullptr;
    CLI::Option* out_opt = nullptr;
    CLI::Option* types_opt = nullptr;
    CLI::Option* methods_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_model_axes) {
    args.config_opt = cmd->add_option("--config", args.config, "run config file (key = value)");
    args.input_opt = cmd->add_option("--input", args.input, "service CSV to ingest");
    args.out_opt = cmd->add_option("--out", args.out, "output directory");
    args.seed_opt = cmd->add_option("--seed", args.seed, "master seed");
    if (with_model_axes) {
        args.types_opt =
            cmd->add_option("--types", args.types, "failure types, e.g. NAH,SR,RC,CC,NS");
        args.methods_opt = cmd->add_option("--methods", args.methods,
                                           "resampling methods, e.g. none,random_under");
    }
}

lastmile::RunConfig build_run_config(const CommonArgs& args) {
    lastmile::ConfigFile file;
    if (args.config_opt->count() > 0) file = lastmile::ConfigFile::parse_file(args.config);
    lastmile::RunConfig cfg = lastmile::run_config_from(file);
    if (args.input_opt->count() > 0) {
        cfg.input = args.input;
        cfg.synth_config.clear();
    }
    if (args.out_opt->count() > 0) cfg.out_dir = args.out;
    if (cfg.out_dir.empty()) cfg.out_dir = "out";
    if (args.seed_opt->count() > 0) cfg.seed = args.seed;
    if (args.types_opt != nullptr && args.types_opt->count() > 0) {
        cfg.types.clear();
        for (const auto& tok : lastmile::split_list(args.types))
            cfg.types.push_back(lastmile::detail::parse_failure_token(tok));
    }
    if (args.methods_opt != nullptr && args.methods_opt->count() > 0) {
        cfg.methods.clear();
        for (const auto& tok : lastmile::split_list(args.methods))
            cfg.methods.push_back(lastmile::detail::parse_method_token(tok));
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"last-mile service failure prediction and explanation"};
    app.require_subcommand(1);

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic service corpus");
    std::string synth_config;
    std::string synth_out = "out";
    std::uint64_t synth_seed = 0;
    synth->add_option("--config", synth_config, "generator config file")->required();
    synth->add_option("--out", synth_out, "output directory");
    CLI::Option* synth_seed_opt =
        synth->add_option("--seed", synth_seed, "override the generator seed");

    CLI::App* ingest = app.add_subcommand("ingest", "parse and aggregate a service CSV");
    CommonArgs ingest_args;
    add_common(ingest, ingest_args, /*with_model_axes=*/false);

    CLI::App* evaluate = app.add_subcommand("evaluate", "cross-validate resampling methods");
    CommonArgs eval_args;
    add_common(evaluate, eval_args, /*with_model_axes=*/true);

    CLI::App* mine = app.add_subcommand("mine", "mine interest-ratio association rules");
    CommonArgs mine_args;
    add_common(mine, mine_args, /*with_model_axes=*/true);

    CLI::App* pipeline = app.add_subcommand("pipeline", "run the full pipeline");
    CommonArgs pipe_args;
    add_common(pipeline, pipe_args, /*with_model_axes=*/true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            lastmile::ConfigFile file = lastmile::ConfigFile::parse_file(synth_config);
            if (synth_seed_opt->count() > 0)
                file.entries.emplace_back("seed", std::to_string(synth_seed));
            lastmile::run_synth(file, synth_out);
            std::cout << "wrote dataset.csv and planted.csv to " << synth_out << "\n";
        } else if (ingest->parsed()) {
            lastmile::RunConfig cfg = build_run_config(ingest_args);
            if (cfg.input.empty())
                throw lastmile::UsageError("ingest requires --input or an `input` config key");
            lastmile::run_ingest(cfg.input, cfg.out_dir);
            std::cout << "wrote stops.csv and encoding.csv to " << cfg.out_dir << "\n";
        } else if (evaluate->parsed()) {
            lastmile::run_evaluate(build_run_config(eval_args));
            std::cout << "wrote metrics.csv and summary.txt\n";
        } else if (mine->parsed()) {
            lastmile::run_mine(build_run_config(mine_args));
            std::cout << "wrote decile_bins.csv and per-type rule tables\n";
        } else if (pipeline->parsed()) {
            lastmile::PipelineResult result = lastmile::run_pipeline(build_run_config(pipe_args));
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "pipeline complete: " << result.stops.n_rows() << " stops, "
                      << result.types.size() << " failure types\n";
        }
        return 0;
    } catch (const lastmile::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const lastmile::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
