#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "plapflow/core.hpp"
#include "plapflow/discretize.hpp"
#include "plapflow/flow.hpp"
#include "plapflow/graph.hpp"
#include "plapflow/io.hpp"
#include "plapflow/oracle.hpp"
#include "plapflow/plap.hpp"

namespace plapcli {

namespace {

using namespace plapflow;
using nlohmann::json;

constexpr double kTwoPi = 6.283185307179586476925286766559;

// The smooth benchmark signal driving solve/e2e/denoise runs.
ScalarField smooth_benchmark() {
    return ScalarField(
        [](const std::vector<double>& x) { return std::sin(kTwoPi * x[0]) + 1.5; });
}

// The Lipschitz benchmark for the projection-rate study.
ScalarField kink_benchmark() {
    return ScalarField([](const std::vector<double>& x) { return std::abs(x[0] - 0.5); });
}

InnerSolverConfig solver_config(const CommonOptions& o) {
    InnerSolverConfig cfg;
    if (o.method == "gradient")
        cfg.method = InnerSolverConfig::Method::GradientBacktracking;
    else if (o.method != "newton")
        throw InvalidArgument("unknown --method '" + o.method + "' (newton | gradient)");
    return cfg;
}

void progress(const CommonOptions& o, const std::string& line) {
    if (!o.quiet) std::cerr << line << std::endl;
}

std::vector<double> uniform_mesh(long long steps, double tau) {
    return std::vector<double>(static_cast<std::size_t>(steps), tau);
}

Schedule resolve_schedule(int n, double kappa, double p, double safety,
                          std::optional<double> eps_override,
                          std::optional<double> tau_override) {
    ScheduleInputs inp;
    inp.n = n;
    inp.kappa = kappa;
    inp.d = 1;
    inp.p = p;
    inp.c_op = 1.0;
    inp.safety = safety;
    Schedule sched = make_schedule(inp, eps_override);
    if (tau_override) {
        if (!(*tau_override > 0.0))
            throw InvalidArgument("--tau must be > 0");
        sched.tau = *tau_override;
        const double steps = std::ceil(sched.T / sched.tau);
        if (steps > static_cast<double>(inp.step_cap))
            throw InfeasibleSchedule("--tau implies more steps than the cap");
        sched.N = std::max(1LL, static_cast<long long>(steps));
    }
    return sched;
}

// Deterministic standard normal keyed by (seed, cell); Box-Muller over the
// same counter-based uniforms the graph sampler uses.
double keyed_gaussian(std::uint64_t seed, std::size_t i, std::size_t cells) {
    const double u1 = pair_uniform(seed, i, cells + 1 + i);
    const double u2 = pair_uniform(seed ^ 0x9E3779B97F4A7C15ull, i, cells + 1 + i);
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(kTwoPi * u2);
}

json schedule_config_entry(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

// Fits log(error) against log(x), reporting null when the fit is undefined
// (zero errors or degenerate abscissae).
json rate_fit_json(const std::vector<std::pair<double, double>>& samples) {
    try {
        RatePoints pts{samples};
        pts.validate();
        auto fit = rate_regression(pts);
        return json{{"slope", fit.slope}, {"r_squared", fit.r_squared}};
    } catch (const Error&) {
        return json(nullptr);
    }
}

}  // namespace

void run_solve(const SolveOptions& o) {
    OutputTracker out(o.out);
    try {
        auto sched = resolve_schedule(o.n, o.kappa, o.p, o.safety, o.eps, o.tau);
        Partition part(1, o.n);
        std::size_t empty_rows = 0;
        auto kmat = assemble_kernel_matrix(KernelSpec::indicator(), sched.eps, o.p, part, 8,
                                           &empty_rows);
        auto f = project(smooth_benchmark(), part);
        ProblemSpec spec(o.p, o.mu, KernelSpec::indicator(), FidelityOperator::identity(),
                         f, f);
        progress(o, "solve: n=" + std::to_string(o.n) + " eps=" + format_double(sched.eps) +
                        " tau=" + format_double(sched.tau) + " N=" + std::to_string(sched.N));
        auto traj = evolve(spec, kmat, uniform_mesh(sched.N, sched.tau), solver_config(o),
                           sched);
        write_trajectory_csv(traj, out.path("trajectory.csv"));
        std::vector<double> final_vals(traj.states.back().size());
        for (std::size_t i = 0; i < final_vals.size(); ++i)
            final_vals[i] = traj.states.back()[i];
        write_signal_csv(final_vals, out.path("final_state.csv"));

        json j;
        j["config"] = {{"experiment", "solve"},
                       {"n", o.n},
                       {"kappa", o.kappa},
                       {"p", o.p},
                       {"mu", o.mu},
                       {"safety", o.safety},
                       {"method", o.method},
                       {"eps", schedule_config_entry(o.eps)},
                       {"tau", schedule_config_entry(o.tau)}};
        j["result"] = trajectory_summary_json(traj);
        j["empty_stencil_rows"] = empty_rows;
        out.write_json("summary.json", j);
    } catch (...) {
        out.discard_all();
        throw;
    }
}

void run_rates_approx(const RatesApproxOptions& o) {
    OutputTracker out(o.out);
    try {
        const auto ns = parse_int_list(o.n_list);
        const double q = o.q > 0.0 ? o.q : std::numeric_limits<double>::infinity();
        auto field = kink_benchmark();
        std::vector<double> errors(ns.size());
        run_indexed_jobs(ns.size(), [&](std::size_t i) {
            errors[i] = approximation_error(field, Partition(1, ns[i]), q);
            progress(o, "rates-approx: n=" + std::to_string(ns[i]) +
                            " error=" + format_double(errors[i]));
        });

        {
            std::ofstream csv(out.path("rates_approx.csv"), std::ios::binary);
            if (!csv) throw IoError("cannot open rates_approx.csv");
            csv << "n,error\n";
            for (std::size_t i = 0; i < ns.size(); ++i)
                csv << ns[i] << ',' << format_double(errors[i]) << "\n";
            if (!csv) throw IoError("write failed for rates_approx.csv");
        }

        std::vector<std::pair<double, double>> samples;
        for (std::size_t i = 0; i < ns.size(); ++i)
            samples.emplace_back(static_cast<double>(ns[i]), errors[i]);
        json j;
        j["config"] = {{"experiment", "rates-approx"}, {"n_list", o.n_list}, {"q", o.q}};
        j["fit"] = rate_fit_json(samples);
        json rows = json::array();
        for (std::size_t i = 0; i < ns.size(); ++i)
            rows.push_back({{"n", ns[i]}, {"error", errors[i]}});
        j["points"] = rows;
        out.write_json("summary.json", j);
    } catch (...) {
        out.discard_all();
        throw;
    }
}

void run_rates_operator(const RatesOperatorOptions& o) {
    OutputTracker out(o.out);
    try {
        const auto epss = parse_double_list(o.eps_list);
        TestFunction test;
        if (o.test == "quadratic")
            test = TestFunction::Quadratic;
        else if (o.test == "affine")
            test = TestFunction::Affine;
        else
            throw UnknownTest("unknown --test '" + o.test + "' (quadratic | affine)");

        std::vector<double> errors(epss.size());
        std::vector<int> fine_ns(epss.size());
        run_indexed_jobs(epss.size(), [&](std::size_t i) {
            fine_ns[i] = static_cast<int>(std::ceil(o.fine_factor / epss[i]));
            errors[i] = nonlocal_consistency_error(KernelSpec::indicator(), epss[i], o.p, 1,
                                                   test, o.margin, fine_ns[i]);
            progress(o, "rates-operator: eps=" + format_double(epss[i]) +
                            " fine_n=" + std::to_string(fine_ns[i]) +
                            " error=" + format_double(errors[i]));
        });

        {
            std::ofstream csv(out.path("rates_operator.csv"), std::ios::binary);
            if (!csv) throw IoError("cannot open rates_operator.csv");
            csv << "eps,fine_n,error\n";
            for (std::size_t i = 0; i < epss.size(); ++i)
                csv << format_double(epss[i]) << ',' << fine_ns[i] << ','
                    << format_double(errors[i]) << "\n";
            if (!csv) throw IoError("write failed for rates_operator.csv");
        }

        std::vector<std::pair<double, double>> samples;
        for (std::size_t i = 0; i < epss.size(); ++i) samples.emplace_back(epss[i], errors[i]);
        json j;
        j["config"] = {{"experiment", "rates-operator"},
                       {"eps_list", o.eps_list},
                       {"p", o.p},
                       {"test", o.test},
                       {"margin", o.margin},
                       {"fine_factor", o.fine_factor}};
        j["fit"] = rate_fit_json(samples);
        json rows = json::array();
        for (std::size_t i = 0; i < epss.size(); ++i)
            rows.push_back({{"eps", epss[i]}, {"fine_n", fine_ns[i]}, {"error", errors[i]}});
        j["points"] = rows;
        out.write_json("summary.json", j);
    } catch (...) {
        out.discard_all();
        throw;
    }
}

void run_rates_e2e(const RatesE2eOptions& o) {
    OutputTracker out(o.out);
    try {
        const auto ns = parse_int_list(o.n_list);
        if (ns.size() < 2)
            throw InvalidArgument("rates-e2e needs at least two resolutions");
        for (std::size_t i = 0; i + 1 < ns.size(); ++i)
            if (ns[i] >= ns[i + 1])
                throw InvalidArgument("--n-list must be strictly increasing");
        if (!(o.margin > 0.0 && o.margin < 0.5))
            throw InvalidArgument("--margin must lie in (0, 0.5)");

        const int n_fine = ns.back();
        const Partition part_fine(1, n_fine);
        auto sched_fine = resolve_schedule(n_fine, o.kappa, o.p, o.safety, o.eps, {});
        auto kmat_fine = assemble_kernel_matrix(KernelSpec::indicator(), sched_fine.eps,
                                                o.p, part_fine);
        auto f_fine = project(smooth_benchmark(), part_fine);
        ProblemSpec spec_fine(o.p, o.mu, KernelSpec::indicator(),
                              FidelityOperator::identity(), f_fine, f_fine);
        progress(o, "rates-e2e: minimizing on the fine grid n=" + std::to_string(n_fine));
        auto vstar = minimize_F_direct(spec_fine, kmat_fine, 1e-11, 200000);

        // Interior comparison window: fine cells with centers in the margin box.
        std::vector<std::size_t> window;
        for (std::size_t c = 0; c < part_fine.cell_count(); ++c) {
            const double x = part_fine.cell_center(c)[0];
            if (x > o.margin && x < 1.0 - o.margin) window.push_back(c);
        }
        // Interior rates require eps below the window clearance over the
        // domain bound (reported per resolution, never enforced).
        const double remark_bound = o.margin / (1.0 - o.margin);

        struct Row {
            Schedule sched;
            double error = 0.0;
        };
        std::vector<Row> rows(ns.size());
        run_indexed_jobs(ns.size(), [&](std::size_t i) {
            const int n = ns[i];
            auto sched = resolve_schedule(n, o.kappa, o.p, o.safety, o.eps, {});
            Partition part(1, n);
            auto kmat =
                assemble_kernel_matrix(KernelSpec::indicator(), sched.eps, o.p, part);
            auto f = project(smooth_benchmark(), part);
            ProblemSpec spec(o.p, o.mu, KernelSpec::indicator(),
                             FidelityOperator::identity(), f, f);
            auto uN = evolve_streaming(spec, kmat, uniform_mesh(sched.N, sched.tau),
                                       solver_config(o));
            double acc = 0.0;
            for (std::size_t c : window) {
                const double diff = inject(uN, part_fine.cell_center(c)) - vstar[c];
                acc += diff * diff;
            }
            rows[i] = {sched, std::sqrt(part_fine.cell_measure() * acc)};
            progress(o, "rates-e2e: n=" + std::to_string(n) + " N=" + std::to_string(sched.N) +
                            " error=" + format_double(rows[i].error));
        });

        {
            std::ofstream csv(out.path("rates_e2e.csv"), std::ios::binary);
            if (!csv) throw IoError("cannot open rates_e2e.csv");
            csv << "n,eps,tau,T,N,error,remark_eps_ok\n";
            for (std::size_t i = 0; i < ns.size(); ++i) {
                const auto& r = rows[i];
                csv << ns[i] << ',' << format_double(r.sched.eps) << ','
                    << format_double(r.sched.tau) << ',' << format_double(r.sched.T) << ','
                    << r.sched.N << ',' << format_double(r.error) << ','
                    << (r.sched.eps < remark_bound ? 1 : 0) << "\n";
            }
            if (!csv) throw IoError("write failed for rates_e2e.csv");
        }

        bool decreasing = true;
        for (std::size_t i = 0; i + 1 < rows.size(); ++i)
            decreasing = decreasing && rows[i + 1].error < rows[i].error;
        std::vector<std::pair<double, double>> samples;
        for (std::size_t i = 0; i < rows.size(); ++i)
            samples.emplace_back(static_cast<double>(ns[i]), rows[i].error);

        json j;
        j["config"] = {{"experiment", "rates-e2e"},
                       {"n_list", o.n_list},
                       {"kappa", o.kappa},
                       {"p", o.p},
                       {"mu", o.mu},
                       {"safety", o.safety},
                       {"margin", o.margin},
                       {"method", o.method},
                       {"eps", schedule_config_entry(o.eps)}};
        json jrows = json::array();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            jrows.push_back({{"n", ns[i]},
                             {"error", rows[i].error},
                             {"remark_eps_ok", rows[i].sched.eps < remark_bound},
                             {"schedule", schedule_json(rows[i].sched)}});
        }
        j["points"] = jrows;
        j["strictly_decreasing"] = decreasing;
        j["remark_eps_bound"] = remark_bound;
        j["fit"] = rate_fit_json(samples);
        out.write_json("summary.json", j);
    } catch (...) {
        out.discard_all();
        throw;
    }
}

void run_graph(const GraphOptions& o) {
    OutputTracker out(o.out);
    try {
        const auto seeds = parse_seed_list(o.seeds);
        Partition part(1, o.n);
        auto kmat = assemble_kernel_matrix(KernelSpec::indicator(), o.eps, o.p, part);
        const double threshold = std::pow(o.eps, -o.p);

        std::vector<double> devs(seeds.size());
        run_indexed_jobs(seeds.size(), [&](std::size_t i) {
            GraphModelSpec gs(kmat, o.rho, seeds[i]);
            devs[i] = row_sum_deviation(sample_graph(gs), kmat);
        });

        std::size_t within = 0;
        {
            std::ofstream csv(out.path("graph_deviation.csv"), std::ios::binary);
            if (!csv) throw IoError("cannot open graph_deviation.csv");
            csv << "seed,row_sum_deviation,threshold,within\n";
            for (std::size_t i = 0; i < seeds.size(); ++i) {
                const bool ok = devs[i] < threshold;
                within += ok ? 1 : 0;
                csv << seeds[i] << ',' << format_double(devs[i]) << ','
                    << format_double(threshold) << ',' << (ok ? 1 : 0) << "\n";
            }
            if (!csv) throw IoError("write failed for graph_deviation.csv");
        }
        progress(o, "graph: " + std::to_string(within) + "/" + std::to_string(seeds.size()) +
                        " seeds within the deviation threshold");

        if (o.dump_matrix) {
            auto sampled = sample_graph(GraphModelSpec(kmat, o.rho, seeds.front()));
            write_matrix_triplets_csv(
                sampled, out.path("matrix_seed" + std::to_string(seeds.front()) + ".csv"));
        }

        auto band = theta_band(o.eps, o.kappa, o.p, o.n);
        json j;
        j["config"] = {{"experiment", "graph"}, {"n", o.n},       {"eps", o.eps},
                       {"p", o.p},              {"kappa", o.kappa}, {"rho", o.rho},
                       {"seeds", o.seeds},      {"dump_matrix", o.dump_matrix}};
        j["threshold"] = threshold;
        j["within_threshold"] = within;
        j["seed_count"] = seeds.size();
        j["pass_fraction"] = static_cast<double>(within) / static_cast<double>(seeds.size());
        j["theta_band"] = {{"lower", band.first}, {"upper", band.second}};
        j["base_matrix"] = {{"max_entry", kmat.max_entry()},
                            {"rho_max_entry", o.rho * kmat.max_entry()},
                            {"stored_pairs", kmat.stored_entries() / 2}};
        out.write_json("summary.json", j);
    } catch (...) {
        out.discard_all();
        throw;
    }
}

void run_denoise(const DenoiseOptions& o) {
    OutputTracker out(o.out);
    try {
        std::vector<double> noisy_vals;
        std::optional<CellFunction> clean;
        int n = o.n;
        if (!o.input.empty()) {
            noisy_vals = read_signal_csv(o.input);
            if (noisy_vals.size() > 1'000'000)
                throw TooLarge("input signal longer than 10^6 cells");
            n = static_cast<int>(noisy_vals.size());
        }
        Partition part(1, n);
        if (o.input.empty()) {
            clean = project(smooth_benchmark(), part);
            noisy_vals.resize(part.cell_count());
            for (std::size_t i = 0; i < noisy_vals.size(); ++i)
                noisy_vals[i] =
                    (*clean)[i] + o.sigma * keyed_gaussian(o.seed, i, part.cell_count());
        }
        Eigen::VectorXd fv(static_cast<Eigen::Index>(noisy_vals.size()));
        for (std::size_t i = 0; i < noisy_vals.size(); ++i)
            fv[static_cast<Eigen::Index>(i)] = noisy_vals[i];
        CellFunction f(part, std::move(fv));

        auto sched = resolve_schedule(n, o.kappa, o.p, o.safety, o.eps, o.tau);
        auto kmat = assemble_kernel_matrix(KernelSpec::indicator(), sched.eps, o.p, part);
        ProblemSpec spec(o.p, o.mu, KernelSpec::indicator(), FidelityOperator::identity(),
                         f, f);
        progress(o, "denoise: n=" + std::to_string(n) + " eps=" + format_double(sched.eps) +
                        " N=" + std::to_string(sched.N));
        auto uN = evolve_streaming(spec, kmat, uniform_mesh(sched.N, sched.tau),
                                   solver_config(o));

        write_signal_csv(noisy_vals, out.path("noisy.csv"));
        std::vector<double> den(uN.size());
        for (std::size_t i = 0; i < den.size(); ++i) den[i] = uN[i];
        write_signal_csv(den, out.path("denoised.csv"));

        json j;
        j["config"] = {{"experiment", "denoise"},
                       {"n", n},
                       {"kappa", o.kappa},
                       {"p", o.p},
                       {"mu", o.mu},
                       {"safety", o.safety},
                       {"sigma", o.sigma},
                       {"seed", o.seed},
                       {"method", o.method},
                       {"input", o.input.empty() ? json(nullptr) : json(o.input)},
                       {"eps", schedule_config_entry(o.eps)},
                       {"tau", schedule_config_entry(o.tau)}};
        j["schedule"] = schedule_json(sched);
        j["final_norms"] = {{"l1", uN.lp_norm(1.0)},
                            {"l2", uN.lp_norm(2.0)},
                            {"linf", uN.linf_norm()}};
        if (clean) {
            CellFunction noise_gap(part, f.values() - clean->values());
            CellFunction result_gap(part, uN.values() - clean->values());
            j["l2_distance_to_clean"] = {{"noisy", noise_gap.lp_norm(2.0)},
                                         {"denoised", result_gap.lp_norm(2.0)}};
        }
        out.write_json("summary.json", j);
    } catch (...) {
        out.discard_all();
        throw;
    }
}

}  // namespace plapcli
