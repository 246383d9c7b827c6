#include "commands.hpp"

#include "tpmgrit/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace tpmgrit::cli;

    CLI::App app{"Time-periodic MGRIT experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
    std::size_t workers = 1;
    std::uint64_t seed = 0;
    auto* config_opt = app.add_option("--config", config_path, "flat key = value config file");
    app.add_option("--set", sets, "override one key (key=value), repeatable");
    auto* out_opt = app.add_option("--out", out, "output directory");
    auto* workers_opt = app.add_option("--workers", workers, "number of workers");
    auto* seed_opt = app.add_option("--seed", seed, "seed of the random backend");

    auto* run = app.add_subcommand("run", "solve once; writes residuals.csv, summary.csv, meta.txt");
    auto* compare = app.add_subcommand("compare", "sequential cycling vs periodic MGRIT; writes convergence.csv");
    auto* bench = app.add_subcommand("bench", "speedup against sequential cycling; writes speedup.csv");
    auto* oracle = app.add_subcommand("oracle", "print the periodic fixed point and spectral radius");

    std::size_t cycles = 0;
    std::string reference;
    auto* cycles_opt = compare->add_option("--cycles", cycles, "number of cycles/iterations q");
    auto* reference_opt = compare->add_option("--reference", reference, "oracle or cycle:N");

    std::string worker_list, m_list, relaxations;
    auto* wl_opt = bench->add_option("--worker-list", worker_list, "comma-separated worker counts");
    auto* ml_opt = bench->add_option("--m-list", m_list, "comma-separated coarsening factors");
    auto* rl_opt = bench->add_option("--relaxations", relaxations, "comma-separated F/FCF");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    ExperimentConfig config;
    try {
        if (config_opt->count()) apply_file(config, config_path);
        for (const auto& s : sets) {
            auto [key, value] = split_assignment(s);
            config.set(key, value);
        }
        if (out_opt->count()) config.set("out", out);
        if (workers_opt->count()) config.set("workers", std::to_string(workers));
        if (seed_opt->count()) config.set("seed", std::to_string(seed));
        if (cycles_opt->count()) config.set("cycles", std::to_string(cycles));
        if (reference_opt->count()) config.set("reference", reference);
        if (wl_opt->count()) config.set("bench_workers", worker_list);
        if (ml_opt->count()) config.set("bench_coarsen", m_list);
        if (rl_opt->count()) config.set("bench_relaxations", relaxations);
    } catch (const tpmgrit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }

    std::string command;
    for (auto* sub : {run, compare, bench, oracle}) {
        if (sub->parsed()) command = sub->get_name();
    }
    return dispatch(command, config, std::cout, std::cerr);
}
