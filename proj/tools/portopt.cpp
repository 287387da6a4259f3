#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "portopt/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"portfolio optimization over discretized holdings"};
    app.require_subcommand(1);

    std::string config_path;
    CLI::App* optimize = app.add_subcommand("optimize", "run the configured risk packages");
    optimize->add_option("--config", config_path, "run configuration file")->required();

    std::string trajectory_path;
    int hold = 1;
    CLI::App* verify = app.add_subcommand("verify", "check a trajectory against a holding rule");
    verify->add_option("--trajectory", trajectory_path, "trajectory csv to check")->required();
    verify->add_option("--hold", hold, "minimum holding period in steps")->required();

    std::string frontier_path;
    CLI::App* report = app.add_subcommand("report", "summarize a frontier file");
    report->add_option("--frontier", frontier_path, "frontier csv to summarize")->required();

    std::uint64_t seed = 0;
    int assets = 20;
    int days = 311;
    std::string out_path;
    CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic price panel");
    gen->add_option("--seed", seed, "generator seed")->required();
    gen->add_option("--assets", assets, "number of assets")->required();
    gen->add_option("--days", days, "number of trading days")->required();
    gen->add_option("--out", out_path, "output csv path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*optimize) return portopt::run_optimize(config_path, std::cout, std::cerr);
    if (*verify) return portopt::run_verify(trajectory_path, hold, std::cout, std::cerr);
    if (*report) return portopt::run_report(frontier_path, std::cout, std::cerr);
    if (*gen) return portopt::run_gen_data(seed, assets, days, out_path, std::cout, std::cerr);
    return 2;
}
