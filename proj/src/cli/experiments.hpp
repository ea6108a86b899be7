// The experiment drivers behind each CLI subcommand. Every run writes CSV
// tables plus one summary.json embedding the resolved configuration (and the
// schedule feasibility report whenever a schedule was built), and removes its
// partial outputs if it fails.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace plapcli {

struct CommonOptions {
    std::string out = "out";
    bool quiet = false;
    std::string method = "newton";  // inner solver: newton | gradient
};

// One scheduled evolution of the smooth benchmark at a single resolution.
struct SolveOptions : CommonOptions {
    int n = 64;
    double kappa = 1.0;
    double p = 3.0;
    double mu = 0.1;
    double safety = 1.0;
    std::optional<double> eps;  // override the scheduled interaction radius
    std::optional<double> tau;  // override the scheduled step size
};

// Piecewise-constant projection error of |x - 1/2| across resolutions.
struct RatesApproxOptions : CommonOptions {
    std::string n_list = "16,32,64,128,256,512,1024";
    double q = 2.0;  // L^q norm of the error; q <= 0 means the sup norm
};

// Nonlocal-to-local operator consistency across interaction radii.
struct RatesOperatorOptions : CommonOptions {
    std::string eps_list = "0.2,0.1,0.05,0.025";
    double p = 3.0;
    std::string test = "quadratic";  // quadratic | affine
    double margin = 0.25;
    int fine_factor = 16;  // cells per interaction radius: fine_n = fine_factor / eps
};

// Scheduled flows across resolutions against the fine-grid minimizer.
struct RatesE2eOptions : CommonOptions {
    std::string n_list = "64,128,256";
    double kappa = 1.0;
    double p = 3.0;
    double mu = 0.1;
    double safety = 1.0;
    double margin = 0.1;  // interior window for the comparison
    std::optional<double> eps;
};

// Random-graph sampling diagnostics over a seed list.
struct GraphOptions : CommonOptions {
    int n = 512;
    double eps = 0.4;
    double p = 3.0;
    double kappa = 1.0;
    double rho = 4.8e-3;
    std::string seeds = "1-200";
    bool dump_matrix = false;  // also write the first seed's sampled matrix
};

// Scheduled flow as a denoiser on a noisy signal (synthesized or from file).
struct DenoiseOptions : CommonOptions {
    int n = 256;
    double kappa = 1.0;
    double p = 2.0;
    double mu = 0.5;
    double safety = 1.0;
    double sigma = 0.1;         // noise level for the synthesized signal
    std::uint64_t seed = 1;     // noise seed
    std::string input;          // single-column CSV; overrides n and sigma
    std::optional<double> eps;
    std::optional<double> tau;
};

void run_solve(const SolveOptions& opts);
void run_rates_approx(const RatesApproxOptions& opts);
void run_rates_operator(const RatesOperatorOptions& opts);
void run_rates_e2e(const RatesE2eOptions& opts);
void run_graph(const GraphOptions& opts);
void run_denoise(const DenoiseOptions& opts);

}  // namespace plapcli
