// Command-line front end: one subcommand per experiment, flat key=value
// config files with command-line overrides, machine-readable JSON errors on
// stderr.
#include <algorithm>
#include <cstddef>
#include <exception>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "experiments.hpp"
#include "plapflow/errors.hpp"

namespace {

void add_common(CLI::App* sub, plapcli::CommonOptions& o) {
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_flag("--quiet", o.quiet, "suppress progress lines on stderr");
    sub->add_option("--method", o.method, "inner solver: newton | gradient")
        ->capture_default_str();
    // Accepted for help display only; the value is consumed before parsing by
    // expand_config_tokens below.
    sub->add_option("--config", "flat key=value configuration file");
}

// The bundled CLI11 never processes a config option attached to a named
// subcommand, so config files are expanded here instead: each key=value pair
// becomes an ordinary "--key value" token sequence injected right after the
// subcommand name. Keys the user already passed explicitly are skipped, so
// command-line values always win over file values.
std::vector<std::string> expand_config_tokens(const std::vector<std::string>& raw) {
    std::string config_path;
    bool have_config = false;
    std::vector<std::string> rest;
    std::set<std::string> given;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const std::string& arg = raw[i];
        if (arg == "--config") {
            if (i + 1 == raw.size())
                throw plapflow::InvalidArgument("--config expects a file path");
            config_path = raw[++i];
            have_config = true;
        } else if (arg.rfind("--config=", 0) == 0) {
            config_path = arg.substr(std::string("--config=").size());
            have_config = true;
        } else {
            if (arg.rfind("--", 0) == 0) given.insert(arg.substr(0, arg.find('=')));
            rest.push_back(arg);
        }
    }
    if (!have_config || rest.empty()) return rest;

    static const std::set<std::string> kFlagKeys{"quiet", "dump-matrix"};
    std::vector<std::string> injected;
    for (const auto& [key, value] : plapcli::read_config_file(config_path)) {
        if (key == "config")
            throw plapflow::InvalidArgument("config files cannot set 'config'");
        const std::string opt = "--" + key;
        if (given.count(opt) > 0) continue;
        if (kFlagKeys.count(key) > 0) {
            if (value == "1" || value == "true" || value == "on" || value == "yes") {
                injected.push_back(opt);
            } else if (value != "0" && value != "false" && value != "off" &&
                       value != "no") {
                throw plapflow::InvalidArgument("config key '" + key +
                                                "' expects a boolean, got '" + value + "'");
            }
            continue;
        }
        injected.push_back(opt);
        injected.push_back(value);
    }
    std::vector<std::string> args;
    args.reserve(rest.size() + injected.size());
    args.push_back(rest.front());  // the subcommand name
    args.insert(args.end(), injected.begin(), injected.end());
    args.insert(args.end(), rest.begin() + 1, rest.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlocal p-Laplacian gradient flows on uniform grids: solvers, "
                 "convergence-rate studies, and random-graph surrogates"};
    app.require_subcommand(1);

    plapcli::SolveOptions solve_opts;
    double solve_eps = 0.0, solve_tau = 0.0;
    auto* solve = app.add_subcommand(
        "solve", "run one scheduled evolution of the smooth benchmark");
    add_common(solve, solve_opts);
    solve->add_option("--n", solve_opts.n, "cells per axis")->capture_default_str();
    solve->add_option("--kappa", solve_opts.kappa, "horizon exponent")->capture_default_str();
    solve->add_option("--p", solve_opts.p, "operator exponent (>= 2)")->capture_default_str();
    solve->add_option("--mu", solve_opts.mu, "regularization weight")->capture_default_str();
    solve->add_option("--safety", solve_opts.safety, "schedule headroom factor in (0,1]")
        ->capture_default_str();
    auto* solve_eps_opt =
        solve->add_option("--eps", solve_eps, "override the scheduled interaction radius");
    auto* solve_tau_opt =
        solve->add_option("--tau", solve_tau, "override the scheduled step size");
    solve->callback([&] {
        if (solve_eps_opt->count() > 0) solve_opts.eps = solve_eps;
        if (solve_tau_opt->count() > 0) solve_opts.tau = solve_tau;
        plapcli::run_solve(solve_opts);
    });

    plapcli::RatesApproxOptions approx_opts;
    auto* approx = app.add_subcommand(
        "rates-approx", "projection-error decay of the Lipschitz benchmark");
    add_common(approx, approx_opts);
    approx->add_option("--n-list", approx_opts.n_list, "comma-separated resolutions")
        ->capture_default_str();
    approx->add_option("--q", approx_opts.q, "error norm exponent (<= 0 for sup norm)")
        ->capture_default_str();
    approx->callback([&] { plapcli::run_rates_approx(approx_opts); });

    plapcli::RatesOperatorOptions oper_opts;
    auto* oper = app.add_subcommand(
        "rates-operator", "nonlocal-to-local operator consistency in the radius");
    add_common(oper, oper_opts);
    oper->add_option("--eps-list", oper_opts.eps_list, "comma-separated interaction radii")
        ->capture_default_str();
    oper->add_option("--p", oper_opts.p, "operator exponent (>= 2)")->capture_default_str();
    oper->add_option("--test", oper_opts.test, "test function: quadratic | affine")
        ->capture_default_str();
    oper->add_option("--margin", oper_opts.margin, "interior window margin")
        ->capture_default_str();
    oper->add_option("--fine-factor", oper_opts.fine_factor,
                     "cells per interaction radius on the evaluation grid")
        ->capture_default_str();
    oper->callback([&] { plapcli::run_rates_operator(oper_opts); });

    plapcli::RatesE2eOptions e2e_opts;
    double e2e_eps = 0.0;
    auto* e2e = app.add_subcommand(
        "rates-e2e", "scheduled flows against the fine-grid minimizer");
    add_common(e2e, e2e_opts);
    e2e->add_option("--n-list", e2e_opts.n_list, "strictly increasing resolutions")
        ->capture_default_str();
    e2e->add_option("--kappa", e2e_opts.kappa, "horizon exponent")->capture_default_str();
    e2e->add_option("--p", e2e_opts.p, "operator exponent (>= 2)")->capture_default_str();
    e2e->add_option("--mu", e2e_opts.mu, "regularization weight")->capture_default_str();
    e2e->add_option("--safety", e2e_opts.safety, "schedule headroom factor in (0,1]")
        ->capture_default_str();
    e2e->add_option("--margin", e2e_opts.margin, "interior comparison margin")
        ->capture_default_str();
    auto* e2e_eps_opt =
        e2e->add_option("--eps", e2e_eps, "override the scheduled interaction radius");
    e2e->callback([&] {
        if (e2e_eps_opt->count() > 0) e2e_opts.eps = e2e_eps;
        plapcli::run_rates_e2e(e2e_opts);
    });

    plapcli::GraphOptions graph_opts;
    auto* graph = app.add_subcommand(
        "graph", "random-graph sampling diagnostics over a seed list");
    add_common(graph, graph_opts);
    graph->add_option("--n", graph_opts.n, "cells per axis")->capture_default_str();
    graph->add_option("--eps", graph_opts.eps, "interaction radius")->capture_default_str();
    graph->add_option("--p", graph_opts.p, "operator exponent (>= 2)")->capture_default_str();
    graph->add_option("--kappa", graph_opts.kappa, "horizon exponent (theta band report)")
        ->capture_default_str();
    graph->add_option("--rho", graph_opts.rho, "edge retention scale in (0,1]")
        ->capture_default_str();
    graph->add_option("--seed", graph_opts.seeds, "seed list, e.g. 1,2,9 or 1-200")
        ->capture_default_str();
    graph->add_flag("--dump-matrix", graph_opts.dump_matrix,
                    "write the first seed's sampled matrix");
    graph->callback([&] { plapcli::run_graph(graph_opts); });

    plapcli::DenoiseOptions den_opts;
    double den_eps = 0.0, den_tau = 0.0;
    auto* den = app.add_subcommand(
        "denoise", "scheduled flow as a denoiser on a noisy signal");
    add_common(den, den_opts);
    den->add_option("--n", den_opts.n, "cells per axis for the synthesized signal")
        ->capture_default_str();
    den->add_option("--kappa", den_opts.kappa, "horizon exponent")->capture_default_str();
    den->add_option("--p", den_opts.p, "operator exponent (>= 2)")->capture_default_str();
    den->add_option("--mu", den_opts.mu, "regularization weight")->capture_default_str();
    den->add_option("--safety", den_opts.safety, "schedule headroom factor in (0,1]")
        ->capture_default_str();
    den->add_option("--sigma", den_opts.sigma, "noise level for the synthesized signal")
        ->capture_default_str();
    den->add_option("--seed", den_opts.seed, "noise seed")->capture_default_str();
    den->add_option("--input", den_opts.input,
                    "single-column CSV input signal (overrides --n and --sigma)");
    auto* den_eps_opt =
        den->add_option("--eps", den_eps, "override the scheduled interaction radius");
    auto* den_tau_opt =
        den->add_option("--tau", den_tau, "override the scheduled step size");
    den->callback([&] {
        if (den_eps_opt->count() > 0) den_opts.eps = den_eps;
        if (den_tau_opt->count() > 0) den_opts.tau = den_tau;
        plapcli::run_denoise(den_opts);
    });

    app.name(argv[0]);
    try {
        std::vector<std::string> args =
            expand_config_tokens(std::vector<std::string>(argv + 1, argv + argc));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        nlohmann::json err{{"error", "usage"}, {"message", e.what()}};
        std::cerr << err.dump() << std::endl;
        return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
    } catch (const std::exception& e) {
        nlohmann::json err{{"error", plapcli::error_kind(e)}, {"message", e.what()}};
        std::cerr << err.dump() << std::endl;
        return 1;
    }
    return 0;
}
