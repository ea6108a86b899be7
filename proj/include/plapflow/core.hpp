// Shared domain types: the uniform partition of (0,1)^d, cell vectors,
// kernels and kernel matrices, fidelity operators, problem and schedule
// records. Types validate their invariants at construction and are
// immutable afterwards; all algorithms live in the other headers.
#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "plapflow/errors.hpp"

namespace plapflow {

// Uniform decomposition of Omega = (0,1)^d into n^d axis-aligned hypercube
// cells of side 1/n, flat-indexed in row-major multi-index order.
class Partition {
public:
    Partition(int d, int n);

    int dim() const { return d_; }
    int cells_per_axis() const { return n_; }
    std::size_t cell_count() const { return cell_count_; }
    double cell_measure() const { return cell_measure_; }  // n^{-d}
    double cell_width() const { return 1.0 / n_; }

    std::size_t flatten(const std::vector<int>& multi) const;
    std::vector<int> unflatten(std::size_t flat) const;
    std::vector<double> cell_center(std::size_t flat) const;

    // Flat index of the half-open cell [l, r) containing x; throws OutOfDomain
    // for x outside [0,1)^d (points at coordinate 1 snap into the last cell).
    std::size_t locate(const std::vector<double>& x) const;

    bool operator==(const Partition& o) const { return d_ == o.d_ && n_ == o.n_; }
    bool operator!=(const Partition& o) const { return !(*this == o); }

private:
    int d_;
    int n_;
    std::size_t cell_count_;
    double cell_measure_;
};

// Discrete state: one real per cell. Values are checked finite at
// construction, so anything downstream may assume a clean vector.
class CellFunction {
public:
    CellFunction(Partition part, Eigen::VectorXd values);

    static CellFunction constant(const Partition& part, double c);
    static CellFunction zero(const Partition& part) { return constant(part, 0.0); }

    const Partition& partition() const { return part_; }
    const Eigen::VectorXd& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
    std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

    // Lebesgue norms of the injected piecewise-constant function; for the
    // uniform partition these are the cell-measure-weighted vector norms.
    double lp_norm(double r) const;    // r in [1, inf)
    double linf_norm() const;

private:
    Partition part_;
    Eigen::VectorXd values_;
};

// Radial kernel profile K : [0, inf) -> [0, inf), bounded, supported in [0,1].
class KernelSpec {
public:
    enum class Shape { Indicator, Polynomial, Table };

    // K(r) = 1 on [0,1].
    static KernelSpec indicator(double holder_exponent = 1.0);
    // K(r) = (1 - r)_+^a, a >= 1.
    static KernelSpec polynomial(double a, double holder_exponent = 1.0);
    // Piecewise-linear interpolation of user samples on strictly increasing
    // abscissae in [0,1]; K = 0 past the last sample and beyond r = 1.
    static KernelSpec table(std::vector<double> r, std::vector<double> k,
                            double holder_exponent);

    double operator()(double r) const;
    Shape shape() const { return shape_; }
    double holder_exponent() const { return holder_; }
    double sup() const;  // max of K on [0,1]

private:
    KernelSpec() = default;
    Shape shape_ = Shape::Indicator;
    double poly_a_ = 1.0;
    double holder_ = 1.0;
    std::vector<double> tab_r_, tab_k_;
};

// Sparse symmetric nonnegative weight matrix over cell pairs: either the
// deterministic two-cell average of a scaled kernel or a random-graph sample.
class KernelMatrix {
public:
    enum class Origin { Deterministic, RandomGraph };

    struct GraphInfo {
        std::uint64_t seed = 0;
        double rho = 1.0;
    };

    // Builds from the upper triangle (i <= j); the lower triangle is mirrored,
    // which makes symmetry exact by construction. Negative weights are
    // rejected; RandomGraph origin drops any diagonal entries.
    static KernelMatrix from_upper_triplets(
        const Partition& part,
        const std::vector<Eigen::Triplet<double>>& upper,
        Origin origin,
        std::optional<GraphInfo> info = std::nullopt);

    const Partition& partition() const { return part_; }
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return mat_; }
    Origin origin() const { return origin_; }
    const std::optional<GraphInfo>& graph_info() const { return info_; }

    double entry(std::size_t i, std::size_t j) const;
    double max_entry() const;
    std::size_t stored_entries() const { return static_cast<std::size_t>(mat_.nonZeros()); }

private:
    KernelMatrix(Partition part, Eigen::SparseMatrix<double, Eigen::RowMajor> mat,
                 Origin origin, std::optional<GraphInfo> info);

    Partition part_;
    Eigen::SparseMatrix<double, Eigen::RowMajor> mat_;
    Origin origin_;
    std::optional<GraphInfo> info_;
};

// Discrete fidelity operator G = A*A on cells. Restricted to the identity and
// strictly positive diagonal maps: the only families that satisfy the
// order/sign-preservation and positive-semidefiniteness assumptions by
// construction. General matrices are rejected by the type itself.
class FidelityOperator {
public:
    enum class Kind { Identity, DiagonalPositive };

    static FidelityOperator identity();
    static FidelityOperator diagonal(CellFunction weights);

    Kind kind() const { return kind_; }
    const std::optional<CellFunction>& weights() const { return weights_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    // <Gv, v>_m with m the uniform cell measure.
    double quadratic_form(const CellFunction& v) const;
    // Operator norm of A (not A*A): 1 for identity, sqrt(max w) for diag(w).
    double c_op() const;

private:
    FidelityOperator(Kind kind, std::optional<CellFunction> w)
        : kind_(kind), weights_(std::move(w)) {}
    Kind kind_;
    std::optional<CellFunction> weights_;
};

// One flow instance: exponent, regularization weight, kernel profile,
// fidelity operator, projected data f = P(A*l) and initial state u0.
//
// The exponent must satisfy p >= 2 (well-posedness of the implicit step).
// mu >= 0 is accepted: mu = 0 degenerates to a pure fidelity flow, which the
// reference computations use as a closed-form check case.
struct ProblemSpec {
    ProblemSpec(double p, double mu, KernelSpec kernel, FidelityOperator fidelity,
                CellFunction data, CellFunction initial);

    double p;
    double mu;
    KernelSpec kernel;
    FidelityOperator fidelity;
    CellFunction data;
    CellFunction initial;
};

struct FeasibilityCondition {
    std::string name;
    bool satisfied;
    double margin;  // >= 0 iff satisfied; see flow.hpp for each condition's scale
};

// Resolved time/scale parameters for one resolution n.
struct Schedule {
    int n = 0;
    double kappa = 1.0;
    double eps = 0.0;
    double tau = 0.0;
    double T = 0.0;
    long long N = 0;  // ceil(T / tau)
    double c_op = 1.0;
    std::vector<FeasibilityCondition> feasibility_report;
};

// Output of an evolution: states u^0 .. u^N plus per-step diagnostics.
struct Trajectory {
    std::optional<Schedule> schedule;
    std::vector<double> times;            // t^0 = 0 .. t^N
    std::vector<CellFunction> states;     // length N+1
    std::vector<double> energies;         // discrete objective at each state
    std::vector<int> inner_iterations;    // length N (per implicit step)
};

namespace detail {
// Shared validation helper: throws NonFinite when v has a NaN/Inf entry.
void require_finite(const Eigen::VectorXd& v, const char* context);
}  // namespace detail

}  // namespace plapflow
