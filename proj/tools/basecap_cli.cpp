// basecap: solve and validate the base-capacity free boundary.
//
//   basecap boundary solve --config configs/reference.json --out out/
//   basecap validate --config configs/reference.json --threads 0

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "basecap/cli.hpp"

int main(int argc, char** argv) {
    using namespace basecap;
    CLI::App app{"Free-boundary solver and validators for the finite-horizon irreversible investment problem"};
    app.set_version_flag("--version", cli::kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    bool surface = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_option("--seed", seed, "master seed (overrides the config)");
        sub->add_option("--threads", threads, "worker threads, 0 = all cores")->default_val(0);
    };

    auto* boundary = app.add_subcommand("boundary", "free-boundary curves");
    boundary->require_subcommand(1);
    auto* solve = boundary->add_subcommand("solve", "backward integral-equation solver -> boundary.csv");
    auto* bound = boundary->add_subcommand("bound", "analytic upper bound y*(t) -> upper_bound.csv");
    auto* closed = app.add_subcommand("closed-form", "infinite-horizon constants and closed-form boundary");
    auto* oracle = app.add_subcommand("oracle", "optimal-stopping dynamic program");
    oracle->require_subcommand(1);
    auto* value = oracle->add_subcommand("value", "value surface and its boundary -> oracle_boundary.csv");
    value->add_flag("--surface", surface, "also write value_surface.csv");
    auto* policy = app.add_subcommand("policy", "investment policies");
    policy->require_subcommand(1);
    auto* simulate = policy->add_subcommand("simulate", "expected profit of the tracking policy and foils");
    auto* foc = policy->add_subcommand("foc", "first-order-condition check of the tracking policy");
    auto* validate = app.add_subcommand("validate", "run every check the configuration admits");
    for (auto* sub : {solve, bound, closed, value, simulate, foc, validate}) common(sub);

    CLI11_PARSE(app, argc, argv);

    return cli::guarded(
        [&]() -> int {
            cli::Context ctx{load_config(config_path), {}, &std::cout, surface};
            if (seed) override_seed(ctx.cfg, *seed);
            ctx.out = out_dir.empty() ? ctx.cfg.output_dir : out_dir;
            set_threads(threads);
            if (solve->parsed()) return cli::cmd_boundary_solve(ctx);
            if (bound->parsed()) return cli::cmd_boundary_bound(ctx);
            if (closed->parsed()) return cli::cmd_closed_form(ctx);
            if (value->parsed()) return cli::cmd_oracle_value(ctx);
            if (simulate->parsed()) return cli::cmd_policy_simulate(ctx);
            if (foc->parsed()) return cli::cmd_policy_foc(ctx);
            return cli::cmd_validate(ctx);
        },
        std::cerr);
}
