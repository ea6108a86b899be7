// Independent reference computations for the acceptance suite: closed-form
// local operators on known test functions, a direct minimizer of the discrete
// objective on a deliberately different algorithm than the flow's stepper,
// a naive dense re-derivation of the nonlocal operator, and the log-log
// rate-regression harness.
#pragma once

#include <utility>
#include <vector>

#include "plapflow/core.hpp"
#include "plapflow/discretize.hpp"

namespace plapflow {

enum class TestFunction { Affine, Quadratic };

// Local p-Laplacian -div(|grad u|^{p-2} grad u) evaluated in closed form:
// Affine(u = x_1 + ... + x_d) -> 0; Quadratic(u = |x|^2/2, d = 1) ->
// -(p-1)|x|^{p-2}. Ground truth for operator-consistency sweeps.
double local_plap_closed_form(TestFunction test, const std::vector<double>& x, double p,
                              int d);

// The pointwise field underlying each test id (for projection).
ScalarField test_function_field(TestFunction test, int d);

// Minimizer of mu*nonlocal_energy + fidelity via Barzilai-Borwein gradient
// descent with an Armijo safeguard; stops when ||mu*Lap v + Gv - f||_inf
// <= tol. Shares only the operator primitives with the flow's Newton stepper,
// so the two act as independent routes to the same stationary point.
CellFunction minimize_F_direct(const ProblemSpec& spec, const KernelMatrix& kmat,
                               double tol = 1e-10, int max_iter = 20000);

// O(cells^2) double-loop re-derivation of the nonlocal operator straight from
// its defining sum, no sparsity shortcuts. Guarded to <= 4096 cells.
CellFunction brute_force_plap(const KernelMatrix& kmat, const CellFunction& v, double p);

struct RatePoints {
    // (resolution, error) samples; resolutions strictly monotone, all > 0.
    std::vector<std::pair<double, double>> samples;
    void validate() const;
};

struct RateFit {
    double slope;
    double r_squared;
};

// Least-squares fit of log(error) against log(resolution).
RateFit rate_regression(const RatePoints& pts);

// Max over interior cells (centers in (margin, 1-margin)^d) of
// |discrete nonlocal operator applied to the projected test function
//  - local closed form at the cell center|, with the scaled kernel assembled
// at resolution fine_n. Requires eps < interior_margin so the test window
// stays clear of boundary truncation, and fine_n >= 8/eps so the stencil is
// resolved.
double nonlocal_consistency_error(const KernelSpec& kernel, double eps, double p, int d,
                                  TestFunction test, double interior_margin, int fine_n,
                                  int quad_order = 8);

}  // namespace plapflow
