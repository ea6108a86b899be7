#include "plapflow/core.hpp"

#include <algorithm>
#include <cmath>

namespace plapflow {

namespace detail {

void require_finite(const Eigen::VectorXd& v, const char* context) {
    if (!v.allFinite())
        throw NonFinite(std::string(context) + ": non-finite entry");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Partition

Partition::Partition(int d, int n) : d_(d), n_(n) {
    if (d < 1)
        throw InvalidArgument("Partition: dimension must be >= 1");
    if (n < 1)
        throw InvalidArgument("Partition: cells per axis must be >= 1");
    double count = std::pow(static_cast<double>(n), d);
    if (count > 1e9)
        throw InvalidArgument("Partition: n^d too large");
    cell_count_ = 1;
    for (int k = 0; k < d; ++k) cell_count_ *= static_cast<std::size_t>(n);
    cell_measure_ = 1.0 / static_cast<double>(cell_count_);
}

std::size_t Partition::flatten(const std::vector<int>& multi) const {
    if (static_cast<int>(multi.size()) != d_)
        throw InvalidArgument("Partition::flatten: wrong multi-index length");
    std::size_t flat = 0;
    for (int k = 0; k < d_; ++k) {
        int m = multi[static_cast<std::size_t>(k)];
        if (m < 0 || m >= n_)
            throw InvalidArgument("Partition::flatten: multi-index out of range");
        flat = flat * static_cast<std::size_t>(n_) + static_cast<std::size_t>(m);
    }
    return flat;
}

std::vector<int> Partition::unflatten(std::size_t flat) const {
    if (flat >= cell_count_)
        throw InvalidArgument("Partition::unflatten: flat index out of range");
    std::vector<int> multi(static_cast<std::size_t>(d_));
    for (int k = d_ - 1; k >= 0; --k) {
        multi[static_cast<std::size_t>(k)] = static_cast<int>(flat % static_cast<std::size_t>(n_));
        flat /= static_cast<std::size_t>(n_);
    }
    return multi;
}

std::vector<double> Partition::cell_center(std::size_t flat) const {
    std::vector<int> multi = unflatten(flat);
    std::vector<double> c(static_cast<std::size_t>(d_));
    for (int k = 0; k < d_; ++k)
        c[static_cast<std::size_t>(k)] =
            (static_cast<double>(multi[static_cast<std::size_t>(k)]) + 0.5) / n_;
    return c;
}

std::size_t Partition::locate(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != d_)
        throw InvalidArgument("Partition::locate: wrong point dimension");
    std::vector<int> multi(static_cast<std::size_t>(d_));
    for (int k = 0; k < d_; ++k) {
        double xk = x[static_cast<std::size_t>(k)];
        if (!(xk >= 0.0 && xk <= 1.0))
            throw OutOfDomain("Partition::locate: coordinate outside [0,1]");
        int m = static_cast<int>(std::floor(xk * n_));
        if (m >= n_) m = n_ - 1;  // x == 1 snaps into the last cell
        multi[static_cast<std::size_t>(k)] = m;
    }
    return flatten(multi);
}

// ---------------------------------------------------------------------------
// CellFunction

CellFunction::CellFunction(Partition part, Eigen::VectorXd values)
    : part_(part), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != part_.cell_count())
        throw PartitionMismatch("CellFunction: value count != cell count");
    detail::require_finite(values_, "CellFunction");
}

CellFunction CellFunction::constant(const Partition& part, double c) {
    return CellFunction(
        part, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(part.cell_count()), c));
}

double CellFunction::lp_norm(double r) const {
    if (!(r >= 1.0))
        throw InvalidArgument("CellFunction::lp_norm: r must be >= 1");
    const double m = part_.cell_measure();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < values_.size(); ++i)
        acc += m * std::pow(std::abs(values_[i]), r);
    return std::pow(acc, 1.0 / r);
}

double CellFunction::linf_norm() const {
    return values_.size() == 0 ? 0.0 : values_.cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// KernelSpec

KernelSpec KernelSpec::indicator(double holder_exponent) {
    KernelSpec k;
    k.shape_ = Shape::Indicator;
    k.holder_ = holder_exponent;
    if (!(holder_exponent > 0.0 && holder_exponent <= 1.0))
        throw InvalidArgument("KernelSpec: holder exponent must lie in (0,1]");
    return k;
}

KernelSpec KernelSpec::polynomial(double a, double holder_exponent) {
    if (!(a >= 1.0))
        throw InvalidArgument("KernelSpec: polynomial exponent must be >= 1");
    if (!(holder_exponent > 0.0 && holder_exponent <= 1.0))
        throw InvalidArgument("KernelSpec: holder exponent must lie in (0,1]");
    KernelSpec k;
    k.shape_ = Shape::Polynomial;
    k.poly_a_ = a;
    k.holder_ = holder_exponent;
    return k;
}

KernelSpec KernelSpec::table(std::vector<double> r, std::vector<double> k,
                             double holder_exponent) {
    if (r.size() != k.size() || r.size() < 2)
        throw InvalidArgument("KernelSpec::table: need >= 2 matching samples");
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!std::isfinite(r[i]) || !std::isfinite(k[i]))
            throw NonFinite("KernelSpec::table: non-finite sample");
        if (k[i] < 0.0)
            throw InvalidArgument("KernelSpec::table: kernel values must be >= 0");
        if (r[i] < 0.0 || r[i] > 1.0)
            throw InvalidArgument("KernelSpec::table: abscissae must lie in [0,1]");
        if (i > 0 && r[i] <= r[i - 1])
            throw InvalidArgument("KernelSpec::table: abscissae must strictly increase");
    }
    if (!(holder_exponent > 0.0 && holder_exponent <= 1.0))
        throw InvalidArgument("KernelSpec: holder exponent must lie in (0,1]");
    KernelSpec spec;
    spec.shape_ = Shape::Table;
    spec.holder_ = holder_exponent;
    spec.tab_r_ = std::move(r);
    spec.tab_k_ = std::move(k);
    return spec;
}

double KernelSpec::operator()(double r) const {
    if (r < 0.0) r = -r;
    if (r > 1.0) return 0.0;  // support in [0,1]
    switch (shape_) {
        case Shape::Indicator:
            return 1.0;
        case Shape::Polynomial:
            return std::pow(1.0 - r, poly_a_);
        case Shape::Table: {
            if (r <= tab_r_.front())
                return r == tab_r_.front() ? tab_k_.front()
                                           : (tab_r_.front() > 0.0 ? tab_k_.front() : 0.0);
            if (r > tab_r_.back()) return 0.0;
            auto it = std::upper_bound(tab_r_.begin(), tab_r_.end(), r);
            std::size_t hi = static_cast<std::size_t>(it - tab_r_.begin());
            std::size_t lo = hi - 1;
            double w = (r - tab_r_[lo]) / (tab_r_[hi] - tab_r_[lo]);
            return tab_k_[lo] + w * (tab_k_[hi] - tab_k_[lo]);
        }
    }
    return 0.0;
}

double KernelSpec::sup() const {
    switch (shape_) {
        case Shape::Indicator:
            return 1.0;
        case Shape::Polynomial:
            return 1.0;  // attained at r = 0
        case Shape::Table:
            return *std::max_element(tab_k_.begin(), tab_k_.end());
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// KernelMatrix

KernelMatrix::KernelMatrix(Partition part, Eigen::SparseMatrix<double, Eigen::RowMajor> mat,
                           Origin origin, std::optional<GraphInfo> info)
    : part_(part), mat_(std::move(mat)), origin_(origin), info_(std::move(info)) {}

KernelMatrix KernelMatrix::from_upper_triplets(
    const Partition& part, const std::vector<Eigen::Triplet<double>>& upper,
    Origin origin, std::optional<GraphInfo> info) {
    const auto nc = static_cast<Eigen::Index>(part.cell_count());
    std::vector<Eigen::Triplet<double>> both;
    both.reserve(2 * upper.size());
    for (const auto& t : upper) {
        if (t.row() > t.col())
            throw InvalidArgument("KernelMatrix: triplets must satisfy i <= j");
        if (t.row() < 0 || t.col() >= nc)
            throw InvalidArgument("KernelMatrix: triplet index out of range");
        if (!std::isfinite(t.value()))
            throw NonFinite("KernelMatrix: non-finite weight");
        if (t.value() < 0.0)
            throw InvalidArgument("KernelMatrix: negative weight");
        if (t.row() == t.col()) {
            if (origin == Origin::RandomGraph) continue;  // graph samples have a zero diagonal
            both.push_back(t);
        } else {
            both.push_back(t);
            both.emplace_back(t.col(), t.row(), t.value());
        }
    }
    if (origin == Origin::RandomGraph && !info)
        throw InvalidArgument("KernelMatrix: random-graph origin requires seed/rho info");
    Eigen::SparseMatrix<double, Eigen::RowMajor> mat(nc, nc);
    mat.setFromTriplets(both.begin(), both.end());
    mat.makeCompressed();
    return KernelMatrix(part, std::move(mat), origin, std::move(info));
}

double KernelMatrix::entry(std::size_t i, std::size_t j) const {
    return mat_.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

double KernelMatrix::max_entry() const {
    double mx = 0.0;
    for (Eigen::Index k = 0; k < mat_.nonZeros(); ++k)
        mx = std::max(mx, mat_.valuePtr()[k]);
    return mx;
}

// ---------------------------------------------------------------------------
// FidelityOperator

FidelityOperator FidelityOperator::identity() {
    return FidelityOperator(Kind::Identity, std::nullopt);
}

FidelityOperator FidelityOperator::diagonal(CellFunction weights) {
    for (std::size_t i = 0; i < weights.size(); ++i)
        if (!(weights[i] > 0.0))
            throw InvalidArgument("FidelityOperator: diagonal weights must be > 0");
    return FidelityOperator(Kind::DiagonalPositive, std::move(weights));
}

Eigen::VectorXd FidelityOperator::apply(const Eigen::VectorXd& v) const {
    if (kind_ == Kind::Identity) return v;
    const Eigen::VectorXd& w = weights_->values();
    if (w.size() != v.size())
        throw PartitionMismatch("FidelityOperator::apply: size mismatch");
    return w.cwiseProduct(v);
}

double FidelityOperator::quadratic_form(const CellFunction& v) const {
    const double m = v.partition().cell_measure();
    if (kind_ == Kind::Identity) return m * v.values().squaredNorm();
    if (weights_->partition() != v.partition())
        throw PartitionMismatch("FidelityOperator::quadratic_form: partition mismatch");
    return m * v.values().cwiseProduct(weights_->values()).dot(v.values());
}

double FidelityOperator::c_op() const {
    if (kind_ == Kind::Identity) return 1.0;
    return std::sqrt(weights_->values().maxCoeff());
}

// ---------------------------------------------------------------------------
// ProblemSpec

ProblemSpec::ProblemSpec(double p_, double mu_, KernelSpec kernel_,
                         FidelityOperator fidelity_, CellFunction data_,
                         CellFunction initial_)
    : p(p_),
      mu(mu_),
      kernel(std::move(kernel_)),
      fidelity(std::move(fidelity_)),
      data(std::move(data_)),
      initial(std::move(initial_)) {
    if (!(p >= 2.0))
        throw InvalidArgument("ProblemSpec: p must be >= 2");
    if (!(mu >= 0.0))
        throw InvalidArgument("ProblemSpec: mu must be >= 0");
    if (data.partition() != initial.partition())
        throw PartitionMismatch("ProblemSpec: data/initial partitions differ");
    if (fidelity.kind() == FidelityOperator::Kind::DiagonalPositive &&
        fidelity.weights()->partition() != data.partition())
        throw PartitionMismatch("ProblemSpec: fidelity weights on a different partition");
}

}  // namespace plapflow
