#include "plapflow/plap.hpp"

#include <cmath>

namespace plapflow {

double psi_p(double t, double p) {
    if (t == 0.0) return 0.0;
    if (p == 2.0) return t;
    if (p == 3.0) return std::abs(t) * t;
    if (p == 4.0) return t * t * t;
    return std::pow(std::abs(t), p - 2.0) * t;
}

double psi_p_prime(double t, double p) {
    if (p == 2.0) return 1.0;
    if (t == 0.0) return 0.0;  // p > 2: |t|^{p-2} -> 0
    if (p == 3.0) return 2.0 * std::abs(t);
    if (p == 4.0) return 3.0 * t * t;
    return (p - 1.0) * std::pow(std::abs(t), p - 2.0);
}

double mass_dot(const CellFunction& u, const CellFunction& v) {
    if (u.partition() != v.partition())
        throw PartitionMismatch("mass_dot: partitions differ");
    return u.partition().cell_measure() * u.values().dot(v.values());
}

CellFunction apply_plap(const KernelMatrix& kmat, const CellFunction& v, double p) {
    if (kmat.partition() != v.partition())
        throw PartitionMismatch("apply_plap: matrix and vector on different partitions");
    if (!(p >= 2.0))
        throw InvalidArgument("apply_plap: p must be >= 2");
    const auto& mat = kmat.matrix();
    const Eigen::VectorXd& x = v.values();
    const double m = v.partition().cell_measure();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index i = 0; i < mat.outerSize(); ++i) {
        double acc = 0.0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(mat, i); it;
             ++it)
            acc += it.value() * psi_p(x[it.col()] - x[i], p);
        out[i] = -m * acc;
    }
    return CellFunction(v.partition(), std::move(out));
}

double nonlocal_energy(const KernelMatrix& kmat, const CellFunction& v, double p) {
    if (kmat.partition() != v.partition())
        throw PartitionMismatch("nonlocal_energy: matrix and vector on different partitions");
    if (!(p >= 2.0))
        throw InvalidArgument("nonlocal_energy: p must be >= 2");
    const auto& mat = kmat.matrix();
    const Eigen::VectorXd& x = v.values();
    const double m = v.partition().cell_measure();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < mat.outerSize(); ++i)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(mat, i); it;
             ++it)
            acc += it.value() * std::pow(std::abs(x[it.col()] - x[i]), p);
    return m * m * acc / (2.0 * p);
}

StepObjective::StepObjective(const KernelMatrix& kmat_, double p_, double mu_,
                             double tau_, FidelityOperator fidelity_, CellFunction data_,
                             CellFunction anchor_)
    : kmat(kmat_),
      p(p_),
      mu(mu_),
      tau(tau_),
      fidelity(std::move(fidelity_)),
      data(std::move(data_)),
      anchor(std::move(anchor_)) {
    if (!(tau > 0.0))
        throw InvalidArgument("StepObjective: tau must be > 0");
    if (!(p >= 2.0))
        throw InvalidArgument("StepObjective: p must be >= 2");
    if (!(mu >= 0.0))
        throw InvalidArgument("StepObjective: mu must be >= 0");
    if (kmat.partition() != data.partition() || kmat.partition() != anchor.partition())
        throw PartitionMismatch("StepObjective: partitions differ");
    if (fidelity.kind() == FidelityOperator::Kind::DiagonalPositive &&
        fidelity.weights()->partition() != kmat.partition())
        throw PartitionMismatch("StepObjective: fidelity weights on a different partition");
}

double step_objective_value(const StepObjective& obj, const CellFunction& v) {
    if (v.partition() != obj.kmat.partition())
        throw PartitionMismatch("step_objective_value: partition mismatch");
    const double m = v.partition().cell_measure();
    const double nl = obj.mu != 0.0 ? nonlocal_energy(obj.kmat, v, obj.p) : 0.0;
    const double fid = obj.fidelity.quadratic_form(v);
    const double data_term = m * obj.data.values().dot(v.values());
    const double prox = m * (v.values() - obj.anchor.values()).squaredNorm();
    return obj.tau * obj.mu * nl + 0.5 * obj.tau * fid - obj.tau * data_term + 0.5 * prox;
}

CellFunction step_residual(const StepObjective& obj, const CellFunction& v) {
    if (v.partition() != obj.kmat.partition())
        throw PartitionMismatch("step_residual: partition mismatch");
    Eigen::VectorXd r = v.values() - obj.anchor.values();
    if (obj.mu != 0.0)
        r += obj.tau * obj.mu * apply_plap(obj.kmat, v, obj.p).values();
    r += obj.tau * (obj.fidelity.apply(v.values()) - obj.data.values());
    return CellFunction(v.partition(), std::move(r));
}

}  // namespace plapflow
