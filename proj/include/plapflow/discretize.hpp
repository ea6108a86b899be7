// Bridge between continuum functions and cell vectors: cell-average
// projection, piecewise-constant injection, the L^q projection error, the
// kernel moment c(p,d), and assembly of the scaled-kernel pair matrix.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "plapflow/core.hpp"

namespace plapflow {

// A deterministic pointwise map on (0,1)^d. The smoothness hint is metadata
// used by scheduling heuristics, never by the quadrature itself.
class ScalarField {
public:
    struct SmoothnessHint {
        enum class Kind { Lipschitz, Holder, Smooth } kind = Kind::Smooth;
        double s = 1.0;  // Lipschitz order
        double q = 2.0;  // Lipschitz integrability
    };

    using Fn = std::function<double(const std::vector<double>&)>;

    explicit ScalarField(Fn f, std::optional<SmoothnessHint> hint = std::nullopt)
        : f_(std::move(f)), hint_(hint) {}

    double operator()(const std::vector<double>& x) const { return f_(x); }
    const std::optional<SmoothnessHint>& hint() const { return hint_; }

private:
    Fn f_;
    std::optional<SmoothnessHint> hint_;
};

// Cell averages of g by a tensor-product composite midpoint rule with
// quad_order subdivisions per axis. Exact for cellwise-constant g.
// Throws NonFinite if g produces NaN/Inf at a quadrature node.
CellFunction project(const ScalarField& g, const Partition& part, int quad_order = 4);

// Value of the piecewise-constant extension of v at x. Cells are half-open
// [l, r): boundary points belong to the cell with the larger multi-index.
double inject(const CellFunction& v, const std::vector<double>& x);

// ||g - inject(project(g))||_{L^q} approximated on the projection's midpoint
// grid. Pass q = infinity for the sup norm, which is taken over an
// endpoint-inclusive uniform grid per cell (the sup of a piecewise error is
// attained at cell edges, which midpoint nodes never sample).
double approximation_error(const ScalarField& g, const Partition& part, double q,
                           int quad_order = 4);

// The kernel moment c(p,d) = integral over the unit ball of K(|x|)|x_d|^p dx.
// Evaluated as (exact angular factor) x (composite-midpoint radial quadrature
// of K(r) r^{d+p-1} with quad_order panels); the angular factor
// 2 pi^{(d-1)/2} Gamma((p+1)/2) / Gamma((p+d)/2) is valid for any p > -1.
// Throws DegenerateKernel when the result is <= 1e-14.
double compute_cpd(const KernelSpec& kernel, double p, int d, int quad_order = 4096);

// How a kernel-matrix entry is evaluated: the faithful two-cell average of
// the scaled kernel, or the scaled kernel at the center offset only. Center
// evaluation is a fast mode for exploratory sweeps; the pair average is the
// default and is what every quantitative check in this project uses.
enum class AssemblyMode { PairAverage, CenterValue };

// Pair matrix of the scaled kernel (2 / (c(p,d) eps^{d+p})) K(.| / eps):
// entry (i,j) is the average of the scaled kernel over pi_i x pi_j. The
// two-cell integral is reduced by the substitution t = y - x to a d-dim
// integral of K(|t|/eps) against per-axis tent overlap weights; in d=1 the
// t-range is split at the support edges and tent kinks so the composite
// midpoint rule (quad_order nodes per smooth piece) integrates the Indicator
// kernel exactly. Pairs with center distance > eps + sqrt(d)/n are pruned.
//
// Note the factor 2 in the scaling: it is applied verbatim as the scaling
// constant 2/(c(p,d) eps^{d+p}) prescribes, on top of the symmetric double
// sum the operator later performs.
//
// Rows whose off-diagonal entries are all zero (eps too small for n) are
// counted into *empty_stencil_rows when the pointer is given; this is a
// diagnostic, not an error.
KernelMatrix assemble_kernel_matrix(const KernelSpec& kernel, double eps, double p,
                                    const Partition& part, int quad_order = 8,
                                    std::size_t* empty_stencil_rows = nullptr,
                                    AssemblyMode mode = AssemblyMode::PairAverage);

// Two-column CSV (r, K(r)) -> Table kernel; r strictly increasing in [0,1].
KernelSpec load_kernel_table_csv(const std::string& path, double holder_exponent = 1.0);

}  // namespace plapflow
