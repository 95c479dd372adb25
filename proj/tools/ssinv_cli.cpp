// ssinv: solve, evaluate and simulate (s,S) inventory policies from an INI config.
#include <iostream>

#include <CLI11.hpp>

#include "ssinv/cli.hpp"

int main(int argc, char** argv) {
    namespace sc = ssinv::cli;
    CLI::App app{"(s,S) inventory policies for spectrally negative Levy demand"};
    app.require_subcommand(1);

    sc::overrides o;
    double x_min = 0.0, x_max = 0.0, x_step = 0.0;
    std::uint64_t seed = 0;
    std::string out_dir, param;
    std::vector<double> values;

    auto common = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", o.config_path, "INI configuration file")->required();
        cmd->add_option("-o,--out", out_dir, "output directory for CSV files");
    };
    auto grid = [&](CLI::App* cmd) {
        cmd->add_option("--x-min", x_min, "first grid point");
        cmd->add_option("--x-max", x_max, "last grid point");
        cmd->add_option("--x-step", x_step, "grid spacing");
    };

    auto* solve = app.add_subcommand("solve", "optimal (s*, S*) or barrier a0; writes solution.csv");
    common(solve);
    auto* value = app.add_subcommand("value", "value function on an x grid; writes value.csv");
    common(value);
    grid(value);
    auto* sweep = app.add_subcommand("sweep", "re-solve over a list of C or K values; writes sweep.csv");
    common(sweep);
    sweep->add_option("--param", param, "swept parameter")->check(CLI::IsMember({"C", "K"}));
    sweep->add_option("--values", values, "parameter values")->delimiter(',');
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates against analytic values; writes mc.csv");
    common(simulate);
    simulate->add_option("--seed", seed, "random seed");
    auto* check = app.add_subcommand("check", "consistency checks; exit 1 if any fails");
    common(check);
    check->add_option("--seed", seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : sc::config_error;
    }

    auto given = [](CLI::App* cmd, const char* name) { return cmd->count(name) > 0; };
    for (auto* cmd : {solve, value, sweep, simulate, check}) {
        if (!cmd->parsed()) continue;
        if (given(cmd, "--out")) o.out_dir = out_dir;
        if (cmd == value) {
            if (given(cmd, "--x-min")) o.x_min = x_min;
            if (given(cmd, "--x-max")) o.x_max = x_max;
            if (given(cmd, "--x-step")) o.x_step = x_step;
        }
        if ((cmd == simulate || cmd == check) && given(cmd, "--seed")) o.seed = seed;
        if (cmd == sweep) {
            if (given(cmd, "--param")) o.sweep_param = param;
            if (given(cmd, "--values")) o.sweep_values = values;
        }
    }

    if (solve->parsed()) return sc::cmd_solve(o, std::cout, std::cerr);
    if (value->parsed()) return sc::cmd_value(o, std::cout, std::cerr);
    if (sweep->parsed()) return sc::cmd_sweep(o, std::cout, std::cerr);
    if (simulate->parsed()) return sc::cmd_simulate(o, std::cout, std::cerr);
    return sc::cmd_check(o, std::cout, std::cerr);
}
