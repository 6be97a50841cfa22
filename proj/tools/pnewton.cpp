#include "pnewton/pnewton.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
    CLI::App app{"Proximal Newton-type solvers: experiments, region checks and trace audits"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run the experiment described by a JSON config");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();

    double p = 1.0, q = 1.0, rho = 1.0, delta = 2.0;
    auto* region = app.add_subcommand("check-region", "check (p, q, rho) against the superlinear regions");
    region->add_option("--p", p, "Hessian Hoelder exponent in (0, 1]")->required();
    region->add_option("--q", q, "error-bound exponent in (0, 1]")->required();
    region->add_option("--rho", rho, "damping exponent >= 0")->required();
    region->add_option("--delta", delta, "line-search exponent")->capture_default_str();

    std::string trace_path, audit_config;
    auto* audit = app.add_subcommand("audit", "re-check a trace CSV against its config");
    audit->add_option("--trace", trace_path, "trace CSV")->required();
    audit->add_option("--config", audit_config, "experiment config that produced the trace")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return pnewton::kExitError;
    }

    if (run->parsed()) return pnewton::cmd_run(config_path);
    if (region->parsed()) return pnewton::cmd_check_region(p, q, rho, delta);
    return pnewton::cmd_audit(trace_path, audit_config);
}
