#include "plapflow/graph.hpp"

#include <cmath>

namespace plapflow {

GraphModelSpec::GraphModelSpec(const KernelMatrix& base_, double rho_, std::uint64_t seed_)
    : base(base_), rho(rho_), seed(seed_) {
    if (!(rho > 0.0 && rho <= 1.0))
        throw InvalidArgument("GraphModelSpec: rho must lie in (0,1]");
    // The base diagonal is treated as zero by the sampler, so only
    // off-diagonal weights are held to the rho * K <= 1 admissibility bound.
    const auto& m = base.matrix();
    double max_offdiag = 0.0;
    for (Eigen::Index i = 0; i < m.outerSize(); ++i)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, i); it; ++it)
            if (it.col() != i) max_offdiag = std::max(max_offdiag, it.value());
    if (rho * max_offdiag > 1.0 + 1e-15)
        throw ScaleViolation("GraphModelSpec: rho * max off-diagonal weight exceeds 1");
}

namespace {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

double pair_uniform(std::uint64_t seed, std::size_t i, std::size_t j) {
    const std::uint64_t lo = static_cast<std::uint64_t>(i < j ? i : j);
    const std::uint64_t hi = static_cast<std::uint64_t>(i < j ? j : i);
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ lo);
    h = mix64(h ^ hi);
    // Top 53 bits -> uniform double in [0,1).
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

KernelMatrix sample_graph(const GraphModelSpec& spec) {
    const auto& base = spec.base.matrix();
    const double rho = spec.rho;
    std::vector<Eigen::Triplet<double>> upper;
    for (Eigen::Index i = 0; i < base.outerSize(); ++i)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(base, i); it;
             ++it) {
            if (it.col() <= i) continue;  // strict upper triangle; diagonal stays zero
            const double prob = rho * it.value();
            if (prob > 1.0 + 1e-15)
                throw ScaleViolation("sample_graph: rho * K_ij > 1 for a pair");
            if (pair_uniform(spec.seed, static_cast<std::size_t>(i),
                             static_cast<std::size_t>(it.col())) < prob)
                upper.emplace_back(static_cast<int>(i), static_cast<int>(it.col()),
                                   1.0 / rho);
        }
    return KernelMatrix::from_upper_triplets(
        spec.base.partition(), upper, KernelMatrix::Origin::RandomGraph,
        KernelMatrix::GraphInfo{spec.seed, spec.rho});
}

double row_sum_deviation(const KernelMatrix& lam, const KernelMatrix& base) {
    if (lam.partition() != base.partition())
        throw PartitionMismatch("row_sum_deviation: partitions differ");
    const auto row_max = [](const KernelMatrix& km) {
        const auto& m = km.matrix();
        const double inv_n = 1.0 / static_cast<double>(m.rows());
        double mx = 0.0;
        for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
            double acc = 0.0;
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, i); it;
                 ++it)
                acc += it.value();
            mx = std::max(mx, inv_n * acc);
        }
        return mx;
    };
    return std::abs(row_max(lam) - row_max(base));
}

Trajectory evolve_graph(const ProblemSpec& spec, const GraphModelSpec& gspec,
                        const std::vector<double>& time_mesh,
                        const InnerSolverConfig& cfg) {
    KernelMatrix lam = sample_graph(gspec);
    return evolve(spec, lam, time_mesh, cfg);
}

std::pair<double, double> theta_band(double eps, double kappa, double p, int n) {
    if (!(eps > 0.0 && eps < 1.0))
        throw InvalidArgument("theta_band: eps must lie in (0,1)");
    if (n < 3)
        throw InvalidArgument("theta_band: n must be >= 3");
    const double log_term = kappa * std::log(1.0 / eps);
    const double lower = std::pow(log_term, 2.0 * (p - 1.0)) /
                         (std::pow(eps, 1.0 + 3.0 * p) * std::log(static_cast<double>(n)));
    const double upper = std::pow(eps, 2.0 * kappa);
    return {lower, upper};
}

}  // namespace plapflow
