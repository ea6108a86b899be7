// Sparse random-graph surrogate of a deterministic weight matrix: each
// unordered pair {i,j} keeps weight 1/rho with probability rho*K_ij,
// independently, drawn by a stateless counter-based generator so samples are
// reproducible bit-for-bit and order-independent.
#pragma once

#include <cstdint>
#include <utility>

#include "plapflow/core.hpp"
#include "plapflow/flow.hpp"

namespace plapflow {

struct GraphModelSpec {
    GraphModelSpec(const KernelMatrix& base, double rho, std::uint64_t seed);

    const KernelMatrix& base;
    double rho;
    std::uint64_t seed;
};

// Uniform draw in [0,1) keyed by (seed, min(i,j), max(i,j)): three rounds of
// the splitmix64 finalizer over the packed key. Pure function of its inputs.
double pair_uniform(std::uint64_t seed, std::size_t i, std::size_t j);

// Samples the random weight matrix: entry {i,j} (i != j, over the stored
// entries of the base) becomes 1/rho when pair_uniform < rho*K_ij, else 0;
// the diagonal is zero; the result is exactly symmetric. Throws
// ScaleViolation if rho*K_ij > 1 anywhere.
KernelMatrix sample_graph(const GraphModelSpec& spec);

// | max_i (1/n) sum_j A_ij - max_i (1/n) sum_j B_ij |  (d = 1 diagnostics).
double row_sum_deviation(const KernelMatrix& lam, const KernelMatrix& base);

// Same contract as flow's evolve, with the sampled matrix in place of the
// deterministic one.
Trajectory evolve_graph(const ProblemSpec& spec, const GraphModelSpec& gspec,
                        const std::vector<double>& time_mesh,
                        const InnerSolverConfig& cfg);

// Admissible band for the random-vs-deterministic gap parameter theta:
//   log(eps^-kappa)^{2(p-1)} / (eps^{1+3p} log n)  <<  theta^2  <<  eps^{2 kappa}.
// Returned as (lower, upper) bounds on theta^2; diagnostics only.
std::pair<double, double> theta_band(double eps, double kappa, double p, int n);

}  // namespace plapflow
