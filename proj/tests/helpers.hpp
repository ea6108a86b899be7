// Shared fixtures for the unit and acceptance suites: a deterministic RNG
// wrapper, random problem builders, and the independent reference
// computations (dense linear-algebra oracles, Monte-Carlo geometry, finite
// differences, bisection) that cross-check the library along a second route.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "plapflow/core.hpp"
#include "plapflow/discretize.hpp"
#include "plapflow/plap.hpp"

namespace testutil {

using namespace plapflow;

// mt19937_64 has a standard-specified sequence; we draw doubles from the raw
// 64-bit stream directly so results do not depend on the library's
// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double unif() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double unif(double lo, double hi) { return lo + (hi - lo) * unif(); }
    int randint(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

inline CellFunction random_cell_function(const Partition& part, Rng& rng, double lo = -1.0,
                                         double hi = 1.0) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(part.cell_count()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.unif(lo, hi);
    return CellFunction(part, std::move(v));
}

// Random sparse symmetric weight matrix: each upper pair kept with the given
// probability, weights uniform in [0, max_weight]. Includes occasional
// diagonal entries, which the operator must ignore by antisymmetry.
inline KernelMatrix random_sparse_matrix(const Partition& part, Rng& rng,
                                         double keep_prob = 0.3, double max_weight = 2.0,
                                         bool with_diagonal = true) {
    std::vector<Eigen::Triplet<double>> upper;
    const std::size_t n = part.cell_count();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            if (i == j && !with_diagonal) continue;
            if (rng.unif() < keep_prob)
                upper.emplace_back(static_cast<int>(i), static_cast<int>(j),
                                   rng.unif(0.0, max_weight));
        }
    return KernelMatrix::from_upper_triplets(part, upper,
                                             KernelMatrix::Origin::Deterministic);
}

// Dense graph-Laplacian route for p = 2: apply_plap(v) == L v with
// L = diag(m * rowsum(K)) - m * K, assembled densely with Eigen.
inline Eigen::VectorXd dense_graph_laplacian_apply(const KernelMatrix& kmat,
                                                   const Eigen::VectorXd& v) {
    const std::size_t n = kmat.partition().cell_count();
    const double m = kmat.partition().cell_measure();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                kmat.entry(i, j);
    Eigen::MatrixXd L = (m * K.rowwise().sum()).asDiagonal();
    L -= m * K;
    return L * v;
}

// Dense direct solve of the p = 2 implicit step (I + tau(mu L + G)) v = phi + tau f,
// with G the identity. Independent of the sparse Newton path.
inline Eigen::VectorXd dense_p2_step_solve(const KernelMatrix& kmat, double mu, double tau,
                                           const Eigen::VectorXd& phi,
                                           const Eigen::VectorXd& f) {
    const std::size_t n = kmat.partition().cell_count();
    const double m = kmat.partition().cell_measure();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                kmat.entry(i, j);
    Eigen::MatrixXd L = (m * K.rowwise().sum()).asDiagonal();
    L -= m * K;
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                  static_cast<Eigen::Index>(n));
    A += tau * (mu * L + Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                   static_cast<Eigen::Index>(n)));
    return A.partialPivLu().solve(phi + tau * f);
}

// Dense solve of the p = 2 stationary problem (mu L + I) v = f (identity
// fidelity), the closed form behind the direct-minimizer cross-check.
inline Eigen::VectorXd dense_p2_stationary_solve(const KernelMatrix& kmat, double mu,
                                                 const Eigen::VectorXd& f) {
    const std::size_t n = kmat.partition().cell_count();
    const double m = kmat.partition().cell_measure();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                kmat.entry(i, j);
    Eigen::MatrixXd L = (m * K.rowwise().sum()).asDiagonal();
    L -= m * K;
    Eigen::MatrixXd A = mu * L + Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                           static_cast<Eigen::Index>(n));
    return A.partialPivLu().solve(f);
}

// Stratified Monte-Carlo estimate of the scaled-kernel pair average over two
// d = 1 cells [ai, ai+w] x [aj, aj+w]. One uniform sample per stratum of an
// S x S grid; stratification confines the sampling variance to the strata the
// support boundary actually crosses, which is what makes a 10^6-draw budget
// resolve a discontinuous integrand to ~1e-4 relative.
inline double mc_pair_average_1d(const KernelSpec& kernel, double eps, double p,
                                 double ai, double aj, double w, int strata_per_axis,
                                 std::uint64_t seed) {
    Rng rng(seed);
    const double cpd = compute_cpd(kernel, p, 1, 1 << 16);
    const double scale = 2.0 / (cpd * std::pow(eps, 1.0 + p));
    const double h = w / strata_per_axis;
    double acc = 0.0;
    for (int a = 0; a < strata_per_axis; ++a)
        for (int b = 0; b < strata_per_axis; ++b) {
            const double x = ai + (a + rng.unif()) * h;
            const double y = aj + (b + rng.unif()) * h;
            acc += kernel(std::abs(y - x) / eps);
        }
    return scale * acc / (static_cast<double>(strata_per_axis) * strata_per_axis);
}

// Root of the antisymmetric two-cell step reduction by bisection. For the
// d=1, n=2 instance with offdiagonal weight k, anchor (-phi, +phi), zero data
// and identity fidelity, the step preserves antisymmetry, so v = (-s, +s)
// where s solves  tau*(mu * (m k) psi_p(2s) + s) + s - phi = 0.
inline double bisect_two_cell_step(double k, double p, double mu, double tau, double phi,
                                   double m) {
    auto g = [&](double s) {
        const double diff = -2.0 * s;
        const double lap = -m * k * psi_p(diff, p);  // apply_plap at cell 1
        return tau * (mu * lap + s) + s - phi;
    };
    double lo = 0.0, hi = std::max(1.0, std::abs(phi));
    while (g(hi) < 0.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) <= 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace testutil
