// The discrete nonlocal p-Laplacian, its energy, and the per-step
// variational objective whose minimizer is the backward-Euler step.
#pragma once

#include "plapflow/core.hpp"

namespace plapflow {

// psi_p(t) = |t|^{p-2} t with psi_p(0) = 0. Integer p in {2,3,4} uses direct
// multiplication (exact oddness, no pow); other p >= 2 go through pow on |t|.
double psi_p(double t, double p);

// Derivative psi_p'(t) = (p-1)|t|^{p-2} (>= 0 for p >= 2).
double psi_p_prime(double t, double p);

// Mass-weighted inner product <u,v>_m = sum_i m u_i v_i. Equals the L^2 pairing
// of the injected functions on the uniform partition.
double mass_dot(const CellFunction& u, const CellFunction& v);

// (Lap v)_i = -sum_j m_j K_ij psi_p(v_j - v_i). Row-major traversal of the
// stored entries, fixed order, so results are bit-reproducible.
CellFunction apply_plap(const KernelMatrix& kmat, const CellFunction& v, double p);

// (1/2p) sum_ij m_i m_j K_ij |v_j - v_i|^p  (>= 0). Its directional derivative
// along h is <apply_plap(v), h>_m.
double nonlocal_energy(const KernelMatrix& kmat, const CellFunction& v, double p);

// One backward-Euler step's strictly convex objective:
//   tau*mu*nonlocal_energy(v) + (tau/2)<Gv,v>_m - tau<f,v>_m + (1/2)||v-phi||_m^2
// with phi the previous state. Roots of step_residual are its minimizers.
struct StepObjective {
    StepObjective(const KernelMatrix& kmat, double p, double mu, double tau,
                  FidelityOperator fidelity, CellFunction data, CellFunction anchor);

    const KernelMatrix& kmat;
    double p;
    double mu;
    double tau;
    FidelityOperator fidelity;
    CellFunction data;    // f
    CellFunction anchor;  // phi = previous state
};

double step_objective_value(const StepObjective& obj, const CellFunction& v);

// tau*(mu*apply_plap(v) + Gv - f) + v - phi. This is the gradient of
// step_objective_value in the mass-weighted geometry.
CellFunction step_residual(const StepObjective& obj, const CellFunction& v);

}  // namespace plapflow
