// ftraffic: command-line front end for the equilibrium and routing solvers.
//
//   ftraffic solve-ncp problem.json --out results/
//   ftraffic solve-ue network.json --demand-block per_route
//   ftraffic route scenario_a.json scenario_b.json --svg --jobs 2
//   ftraffic dynamic trajectory.csv --variant half_phi
//   ftraffic validate network.json field.csv
//   ftraffic --config run.json
//
// Exit codes: 0 converged / valid, 2 solver did not converge, 1 input or usage error.

#include "ftraffic/cli_io.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace ftraffic;

    CLI::App app{"Finsler traffic equilibrium and routing tools", "ftraffic"};
    app.require_subcommand(0, 1);

    std::string config_path;
    std::string out_dir;
    double tol = 0.0;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool svg = false;
    auto* opt_config = app.add_option("--config", config_path, "JSON run file with a \"command\" field")
                           ->check(CLI::ExistingFile);
    auto* opt_out = app.add_option("--out", out_dir, "output directory (default: current directory)");
    auto* opt_tol = app.add_option("--tol", tol, "solver tolerance override")->check(CLI::PositiveNumber);
    auto* opt_seed = app.add_option("--seed", seed, "random seed for restarts and sampling");
    auto* opt_svg = app.add_flag("--svg", svg, "also write route.svg");
    auto* opt_jobs = app.add_option("--jobs", jobs, "parallel scenario files for route")->check(CLI::PositiveNumber);

    std::vector<std::string> inputs;
    auto add_command = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->fallthrough();
        sub->add_option("inputs", inputs, "input files");
        return sub;
    };
    add_command("solve-ncp", "solve an affine or quadratic NCP problem file");
    auto* ue = add_command("solve-ue", "Wardrop equilibrium of a route-enumerated network");
    add_command("route", "shortest-time route through a congestion field");
    auto* dyn = add_command("dynamic", "evaluate or minimize the time-dependent gap functional");
    add_command("validate", "check a network, congestion field or Randers metric");

    std::string demand_block;
    auto* opt_block = ue->add_option("--demand-block", demand_block, "per_od (default) or per_route")
                          ->check(CLI::IsMember({"per_od", "per_route"}));
    std::string variant, cost_model;
    bool minimize = false;
    auto* opt_variant = dyn->add_option("--variant", variant, "half_phi_squared (default) or half_phi")
                            ->check(CLI::IsMember({"half_phi", "half_phi_squared"}));
    auto* opt_cost = dyn->add_option("--cost-model", cost_model, "zero, identity or affine(a,b)");
    auto* opt_min = dyn->add_flag("--minimize", minimize, "run the projected-gradient minimizer");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_code::input_error;
    }

    RunConfig cfg;
    try {
        if (*opt_config) {
            const std::filesystem::path path = config_path;
            apply_config_document(load_json_file(path), path.parent_path(), cfg);
        }
        if (auto subs = app.get_subcommands(); !subs.empty()) {
            const std::string name = subs.front()->get_name();
            if (!cfg.command.empty() && cfg.command != name) {
                throw InputError("config command '" + cfg.command + "' differs from '" + name + "'");
            }
            cfg.command = name;
        }
        if (cfg.command.empty()) throw InputError("no command given (see --help)");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code::input_error;
    }

    for (const auto& in : inputs) cfg.inputs.emplace_back(in);
    if (*opt_out) cfg.out_dir = out_dir;
    if (*opt_tol) cfg.tol = tol;
    if (*opt_seed) cfg.seed = seed;
    if (*opt_svg) cfg.svg = svg;
    if (*opt_jobs) cfg.jobs = jobs;
    if (*opt_block) cfg.demand_block = demand_block == "per_route" ? DemandBlock::per_route : DemandBlock::per_od;
    if (*opt_variant) cfg.variant = parse_integrand_variant(variant);
    if (*opt_cost) cfg.cost_model = cost_model;
    if (*opt_min) cfg.minimize = minimize;

    const RunSummary summary = run_command(cfg);
    std::cout << summary.to_json().dump(2) << '\n';
    for (const auto& e : summary.errors) std::cerr << "error: " << e << '\n';
    return summary.exit_code;
}
