// Backward-Euler evolution of the discrete nonlocal flow: the inner convex
// solver for one implicit step, the full time loop, the discrete objective,
// the eps/tau/T scheduler with its feasibility report, and time interpolants.
#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "plapflow/core.hpp"
#include "plapflow/plap.hpp"

namespace plapflow {

struct InnerSolverConfig {
    enum class Method { DampedNewton, GradientBacktracking };

    double tol = 1e-10;      // residual sup-norm target
    int max_iter = 200;
    Method method = Method::DampedNewton;
    double armijo_c = 1e-4;
    double shrink = 0.5;

    void validate() const {
        if (!(tol > 0.0)) throw InvalidArgument("InnerSolverConfig: tol must be > 0");
        if (max_iter < 1) throw InvalidArgument("InnerSolverConfig: max_iter must be >= 1");
        if (!(armijo_c > 0.0 && armijo_c < 1.0))
            throw InvalidArgument("InnerSolverConfig: armijo_c must lie in (0,1)");
        if (!(shrink > 0.0 && shrink < 1.0))
            throw InvalidArgument("InnerSolverConfig: shrink must lie in (0,1)");
    }
};

// Inputs for the schedule formulas. alpha1/alpha2/alpha3 are the regularity
// exponents of the initial datum, the data term, and the kernel profile.
struct ScheduleInputs {
    int n = 2;
    double kappa = 1.0;
    int d = 1;
    double p = 2.0;
    double c_op = 1.0;
    double alpha1 = 1.0;
    double alpha2 = 1.0;
    double alpha3 = 1.0;
    double safety = 0.1;           // headroom factor for the "much less/greater" conditions
    long long step_cap = 10'000'000;

    void validate() const;
};

// Solves one implicit step: returns the v with ||step_residual(obj,v)||_inf
// <= cfg.tol, which is the unique minimizer of the strictly convex step
// objective. Warm-started at the anchor phi. Throws NoConvergence when
// max_iter is exhausted (tau too large for the Newton basin, or tol too tight).
std::pair<CellFunction, int> implicit_step(const StepObjective& obj,
                                           const InnerSolverConfig& cfg);

// Discrete objective driven to its minimum by the flow:
//   mu * nonlocal_energy(kmat, v, p) + (1/2)||A v - l||^2 in the cell metric,
// with the fidelity part written through G = A*A and f = P(A*l): for the
// identity it is (1/2)||v - f||_m^2, for diag(w) it is
// (1/2) sum_i m w_i (v_i - f_i/w_i)^2.
double discrete_F(const ProblemSpec& spec, const KernelMatrix& kmat,
                  const CellFunction& v);

struct StepRecord {
    long long k;             // step index, 1-based
    double t;                // t^k
    double energy;           // discrete_F at u^k
    int inner_iterations;
};

// Full evolution storing every state. time_mesh holds the step sizes tau^k.
Trajectory evolve(const ProblemSpec& spec, const KernelMatrix& kmat,
                  const std::vector<double>& time_mesh, const InnerSolverConfig& cfg,
                  std::optional<Schedule> schedule = std::nullopt);

// Memory-lean variant for long schedules: invokes on_step per step (if given)
// and returns only the final state. Same stepping code path as evolve.
CellFunction evolve_streaming(
    const ProblemSpec& spec, const KernelMatrix& kmat,
    const std::vector<double>& time_mesh, const InnerSolverConfig& cfg,
    const std::function<void(const StepRecord&, const CellFunction&)>& on_step = {});

// Resolves (eps, tau, T, N) for resolution n:
//   eps = max(n^{-a1/k}, n^{-a2/k}, n^{-a3/(k(1+(d+p+a3)/k))}) / safety
//         unless eps_override is given,
//   tau = safety * eps^{2(d+p)+kappa} / log(eps^-kappa)^{2p-3},
//   T   = log(eps^-kappa) / (1 + c_op^4),  N = ceil(T/tau).
// The report lists every admissibility condition with a margin (>= 0 iff
// satisfied): the tau condition's margin is safety minus the attained ratio,
// the eps floors use eps*safety/bound - 1 (ratio headroom), and the step cap
// uses (cap - N)/cap. The floor involving the Lambert-W expression is
// evaluated exactly (Halley iteration) for the report but never hard-fails;
// only eps >= 1 and N > step_cap throw InfeasibleSchedule.
Schedule make_schedule(const ScheduleInputs& inp,
                       std::optional<double> eps_override = std::nullopt);

enum class TimeMode { Interpolated, Injected };

// Piecewise-linear (Interpolated) or piecewise-constant right-continuous-
// in-k (Injected) evaluation of a trajectory at time t in [0, T].
CellFunction time_interpolant(const Trajectory& traj, double t, TimeMode mode);

// Lambert W on [0, inf): the inverse of w e^w, by Halley iteration.
double lambert_w(double y);

}  // namespace plapflow
