#include "plapflow/flow.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>

namespace plapflow {

void ScheduleInputs::validate() const {
    if (n < 2) throw InvalidArgument("ScheduleInputs: n must be >= 2");
    if (!(kappa > 0.0)) throw InvalidArgument("ScheduleInputs: kappa must be > 0");
    if (d < 1) throw InvalidArgument("ScheduleInputs: d must be >= 1");
    if (!(p >= 2.0)) throw InvalidArgument("ScheduleInputs: p must be >= 2");
    if (!(c_op >= 0.0)) throw InvalidArgument("ScheduleInputs: c_op must be >= 0");
    for (double a : {alpha1, alpha2, alpha3})
        if (!(a > 0.0 && a <= 1.0))
            throw InvalidArgument("ScheduleInputs: regularity exponents must lie in (0,1]");
    if (!(safety > 0.0 && safety <= 1.0))
        throw InvalidArgument("ScheduleInputs: safety must lie in (0,1]");
    if (step_cap < 1) throw InvalidArgument("ScheduleInputs: step_cap must be >= 1");
}

namespace {

// Newton solver for one implicit step. The Hessian of the step objective in
// the mass-weighted geometry is
//   H = I + tau*(mu*J(v) + G),   J(v) = m*(D - W),
//   W_ij = K_ij psi_p'(v_j - v_i),  D_ii = sum_j W_ij,
// a symmetric positive definite matrix (J is a weighted graph Laplacian with
// nonnegative weights). The sparsity pattern is fixed by K plus the diagonal,
// so it is allocated once and only the values are refreshed per iteration.
class NewtonStepper {
public:
    explicit NewtonStepper(const KernelMatrix& kmat) : kmat_(kmat) {
        const auto& K = kmat.matrix();
        const Eigen::Index n = K.rows();
        std::vector<Eigen::Triplet<double>> pattern;
        pattern.reserve(static_cast<std::size_t>(K.nonZeros()) + static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) pattern.emplace_back(i, i, 0.0);
        for (Eigen::Index i = 0; i < K.outerSize(); ++i)
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(K, i); it;
                 ++it)
                if (it.col() != i) pattern.emplace_back(i, it.col(), 0.0);
        H_.resize(n, n);
        H_.setFromTriplets(pattern.begin(), pattern.end());
        H_.makeCompressed();

        // Map each stored off-diagonal entry of K and each diagonal slot of H
        // to its position in H's value array.
        offdiag_pos_.reserve(static_cast<std::size_t>(K.nonZeros()));
        diag_pos_.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i)
            diag_pos_[static_cast<std::size_t>(i)] = value_index(i, i);
        for (Eigen::Index i = 0; i < K.outerSize(); ++i)
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(K, i); it;
                 ++it)
                offdiag_pos_.push_back(it.col() == i ? static_cast<Eigen::Index>(-1)
                                                     : value_index(i, it.col()));
    }

    std::pair<CellFunction, int> solve(const StepObjective& obj,
                                       const InnerSolverConfig& cfg) {
        CellFunction v = obj.anchor;  // warm start at phi
        CellFunction r = step_residual(obj, v);

        for (int iter = 0; iter < cfg.max_iter; ++iter) {
            const double rnorm = r.linf_norm();
            if (rnorm <= cfg.tol) return {std::move(v), iter};

            refresh_hessian(obj, v);
            Eigen::ConjugateGradient<Eigen::SparseMatrix<double, Eigen::RowMajor>,
                                     Eigen::Lower | Eigen::Upper>
                cg;
            cg.setTolerance(1e-4);  // inexact Newton: modest inner accuracy suffices
            cg.setMaxIterations(10 * H_.rows());
            cg.compute(H_);
            const Eigen::VectorXd delta = cg.solve(-r.values());

            // Damped Newton with a residual-monotonicity test: the objective
            // value cannot certify the ~||r||^2-sized decreases near the root
            // (they drown in rounding), but the residual norm can always be
            // compared reliably, all the way to machine precision.
            bool accepted = false;
            double alpha = 1.0;
            for (int ls = 0; ls < 60; ++ls) {
                CellFunction trial(v.partition(), v.values() + alpha * delta);
                CellFunction rt = step_residual(obj, trial);
                const double rtnorm = rt.linf_norm();
                if (rtnorm <= (1.0 - cfg.armijo_c * alpha) * rnorm || rtnorm <= cfg.tol) {
                    v = std::move(trial);
                    r = std::move(rt);
                    accepted = true;
                    break;
                }
                alpha *= cfg.shrink;
            }
            if (!accepted)
                throw NoConvergence(
                    "implicit_step: Newton line search could not reduce the residual",
                    iter, rnorm);
        }
        if (r.linf_norm() <= cfg.tol) return {std::move(v), cfg.max_iter};
        throw NoConvergence("implicit_step: Newton did not reach tolerance",
                            cfg.max_iter, r.linf_norm());
    }

private:
    Eigen::Index value_index(Eigen::Index row, Eigen::Index col) const {
        for (Eigen::Index k = H_.outerIndexPtr()[row]; k < H_.outerIndexPtr()[row + 1]; ++k)
            if (H_.innerIndexPtr()[k] == col) return k;
        throw Error("NewtonStepper: pattern lookup failed");
    }

    void refresh_hessian(const StepObjective& obj, const CellFunction& v) {
        const auto& K = kmat_.matrix();
        const Eigen::VectorXd& x = v.values();
        const double m = v.partition().cell_measure();
        const double s = obj.tau * obj.mu * m;
        double* hv = H_.valuePtr();
        std::fill(hv, hv + H_.nonZeros(), 0.0);

        std::size_t pos = 0;
        for (Eigen::Index i = 0; i < K.outerSize(); ++i)
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(K, i); it;
                 ++it, ++pos) {
                if (it.col() == i) continue;  // psi' term cancels on the diagonal
                const double wgt = s * it.value() * psi_p_prime(x[it.col()] - x[i], obj.p);
                hv[offdiag_pos_[pos]] -= wgt;
                hv[diag_pos_[static_cast<std::size_t>(i)]] += wgt;
            }
        for (Eigen::Index i = 0; i < H_.rows(); ++i) {
            double g = 1.0;
            if (obj.fidelity.kind() == FidelityOperator::Kind::DiagonalPositive)
                g = obj.fidelity.weights()->values()[i];
            hv[diag_pos_[static_cast<std::size_t>(i)]] += 1.0 + obj.tau * g;
        }
    }

    const KernelMatrix& kmat_;
    Eigen::SparseMatrix<double, Eigen::RowMajor> H_;
    std::vector<Eigen::Index> offdiag_pos_;
    std::vector<Eigen::Index> diag_pos_;
};

std::pair<CellFunction, int> gradient_backtracking_step(const StepObjective& obj,
                                                        const InnerSolverConfig& cfg) {
    CellFunction v = obj.anchor;
    CellFunction r = step_residual(obj, v);
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        const double rnorm = r.linf_norm();
        if (rnorm <= cfg.tol) return {std::move(v), iter};
        // Backtracking on the residual norm (see the Newton variant for why
        // the objective value is not a workable acceptance metric here).
        bool accepted = false;
        double alpha = 1.0;
        for (int ls = 0; ls < 60; ++ls) {
            CellFunction trial(v.partition(), v.values() - alpha * r.values());
            CellFunction rt = step_residual(obj, trial);
            const double rtnorm = rt.linf_norm();
            if (rtnorm <= (1.0 - cfg.armijo_c * alpha) * rnorm || rtnorm <= cfg.tol) {
                v = std::move(trial);
                r = std::move(rt);
                accepted = true;
                break;
            }
            alpha *= cfg.shrink;
        }
        if (!accepted)
            throw NoConvergence(
                "implicit_step: gradient line search could not reduce the residual",
                iter, rnorm);
    }
    if (r.linf_norm() <= cfg.tol) return {std::move(v), cfg.max_iter};
    throw NoConvergence("implicit_step: gradient descent did not reach tolerance",
                        cfg.max_iter, r.linf_norm());
}

}  // namespace

std::pair<CellFunction, int> implicit_step(const StepObjective& obj,
                                           const InnerSolverConfig& cfg) {
    cfg.validate();
    if (cfg.method == InnerSolverConfig::Method::GradientBacktracking)
        return gradient_backtracking_step(obj, cfg);
    NewtonStepper stepper(obj.kmat);
    return stepper.solve(obj, cfg);
}

double discrete_F(const ProblemSpec& spec, const KernelMatrix& kmat,
                  const CellFunction& v) {
    if (v.partition() != kmat.partition() || v.partition() != spec.data.partition())
        throw PartitionMismatch("discrete_F: partition mismatch");
    const double m = v.partition().cell_measure();
    double fid = 0.0;
    if (spec.fidelity.kind() == FidelityOperator::Kind::Identity) {
        fid = 0.5 * m * (v.values() - spec.data.values()).squaredNorm();
    } else {
        const Eigen::VectorXd& w = spec.fidelity.weights()->values();
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double dev = v.values()[i] - spec.data.values()[i] / w[i];
            fid += 0.5 * m * w[i] * dev * dev;
        }
    }
    const double nl = spec.mu != 0.0 ? spec.mu * nonlocal_energy(kmat, v, spec.p) : 0.0;
    return nl + fid;
}

namespace {

template <typename OnState>
CellFunction run_flow(const ProblemSpec& spec, const KernelMatrix& kmat,
                      const std::vector<double>& time_mesh, const InnerSolverConfig& cfg,
                      OnState&& on_state) {
    cfg.validate();
    if (kmat.partition() != spec.initial.partition())
        throw PartitionMismatch("evolve: kernel matrix and initial state partitions differ");
    for (double tau : time_mesh)
        if (!(tau > 0.0) || !std::isfinite(tau))
            throw InvalidArgument("evolve: every step size must be positive and finite");

    NewtonStepper newton(kmat);
    CellFunction state = spec.initial;
    double t = 0.0;
    on_state(0, t, state, 0);

    long long k = 0;
    for (double tau : time_mesh) {
        ++k;
        StepObjective obj(kmat, spec.p, spec.mu, tau, spec.fidelity, spec.data, state);
        std::pair<CellFunction, int> step =
            cfg.method == InnerSolverConfig::Method::DampedNewton
                ? newton.solve(obj, cfg)
                : gradient_backtracking_step(obj, cfg);
        state = std::move(step.first);
        t += tau;
        on_state(k, t, state, step.second);
    }
    return state;
}

}  // namespace

Trajectory evolve(const ProblemSpec& spec, const KernelMatrix& kmat,
                  const std::vector<double>& time_mesh, const InnerSolverConfig& cfg,
                  std::optional<Schedule> schedule) {
    Trajectory traj;
    traj.schedule = std::move(schedule);
    traj.states.reserve(time_mesh.size() + 1);
    traj.times.reserve(time_mesh.size() + 1);
    traj.energies.reserve(time_mesh.size() + 1);
    traj.inner_iterations.reserve(time_mesh.size());
    try {
        run_flow(spec, kmat, time_mesh, cfg,
                 [&](long long k, double t, const CellFunction& state, int iters) {
                     traj.times.push_back(t);
                     traj.states.push_back(state);
                     traj.energies.push_back(discrete_F(spec, kmat, state));
                     if (k > 0) traj.inner_iterations.push_back(iters);
                 });
    } catch (const NoConvergence& e) {
        throw NoConvergence("evolve: step " + std::to_string(traj.states.size()) + " failed: " +
                                e.what(),
                            e.iterations, e.final_residual);
    }
    return traj;
}

CellFunction evolve_streaming(
    const ProblemSpec& spec, const KernelMatrix& kmat,
    const std::vector<double>& time_mesh, const InnerSolverConfig& cfg,
    const std::function<void(const StepRecord&, const CellFunction&)>& on_step) {
    return run_flow(spec, kmat, time_mesh, cfg,
                    [&](long long k, double t, const CellFunction& state, int iters) {
                        if (k > 0 && on_step) {
                            StepRecord rec{k, t, discrete_F(spec, kmat, state), iters};
                            on_step(rec, state);
                        }
                    });
}

double lambert_w(double y) {
    if (!(y >= 0.0))
        throw InvalidArgument("lambert_w: only the branch on [0, inf) is implemented");
    if (y == 0.0) return 0.0;
    double w = std::log1p(y);  // good initial guess on [0, inf)
    for (int k = 0; k < 64; ++k) {
        const double ew = std::exp(w);
        const double f = w * ew - y;
        const double denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0);
        const double step = f / denom;
        w -= step;
        if (std::abs(step) <= 1e-15 * (1.0 + std::abs(w))) break;
    }
    return w;
}

Schedule make_schedule(const ScheduleInputs& inp, std::optional<double> eps_override) {
    inp.validate();
    const double kappa = inp.kappa;
    const double nd = static_cast<double>(inp.n);

    const double floor1 = std::pow(nd, -inp.alpha1 / kappa);
    const double floor2 = std::pow(nd, -inp.alpha2 / kappa);
    const double kernel_exp = inp.alpha3 / (kappa * (1.0 + (inp.d + inp.p + inp.alpha3) / kappa));
    const double floor3 = std::pow(nd, -kernel_exp);

    double eps;
    if (eps_override) {
        eps = *eps_override;
    } else {
        eps = std::max({floor1, floor2, floor3}) / inp.safety;
    }
    if (!(eps > 0.0 && eps < 1.0))
        throw InfeasibleSchedule(
            "make_schedule: eps = " + std::to_string(eps) +
            " is outside (0,1); n too small for the asymptotic regime");

    const double log_term = kappa * std::log(1.0 / eps);  // log(eps^-kappa) > 0
    const double tau = inp.safety * std::pow(eps, 2.0 * (inp.d + inp.p) + kappa) /
                       std::pow(log_term, 2.0 * inp.p - 3.0);
    const double c4 = std::pow(inp.c_op, 4.0);
    const double T = log_term / (1.0 + c4);
    const double Nreal = std::ceil(T / tau);
    if (!(Nreal >= 1.0))
        throw InfeasibleSchedule("make_schedule: empty horizon");
    if (Nreal > static_cast<double>(inp.step_cap))
        throw InfeasibleSchedule("make_schedule: N = " + std::to_string(Nreal) +
                                 " exceeds the step cap");
    const long long N = static_cast<long long>(Nreal);

    Schedule sched;
    sched.n = inp.n;
    sched.kappa = kappa;
    sched.eps = eps;
    sched.tau = tau;
    sched.T = T;
    sched.N = N;
    sched.c_op = inp.c_op;

    auto add = [&](const std::string& name, bool ok, double margin) {
        if (!std::isfinite(margin)) margin = std::numeric_limits<double>::max();
        sched.feasibility_report.push_back({name, ok, margin});
    };
    add("eps_below_one", eps < 1.0, 1.0 - eps);
    const double cfl = tau * std::pow(log_term, 2.0 * inp.p - 3.0) /
                       std::pow(eps, 2.0 * (inp.d + inp.p) + kappa);
    add("tau_cfl", cfl <= inp.safety + 1e-12, inp.safety - cfl);
    auto floor_margin = [&](double bound) { return eps * inp.safety / bound - 1.0; };
    add("eps_floor_initial", floor_margin(floor1) >= 0.0, floor_margin(floor1));
    add("eps_floor_data", floor_margin(floor2) >= 0.0, floor_margin(floor2));
    add("eps_floor_kernel", floor_margin(floor3) >= 0.0, floor_margin(floor3));
    // Exact form of the kernel floor: [exp(W(n^{a3/M}))]^{-1/kappa} with
    // M = max(1 + (d+p+a3)/kappa, p-1); exp(W(y)) = y / W(y).
    {
        const double M = std::max(1.0 + (inp.d + inp.p + inp.alpha3) / kappa, inp.p - 1.0);
        const double y = std::pow(nd, inp.alpha3 / M);
        const double bound = std::pow(lambert_w(y) / y, 1.0 / kappa);
        add("eps_floor_kernel_lambertw", floor_margin(bound) >= 0.0, floor_margin(bound));
    }
    add("step_cap", true,
        (static_cast<double>(inp.step_cap) - static_cast<double>(N)) /
            static_cast<double>(inp.step_cap));
    return sched;
}

CellFunction time_interpolant(const Trajectory& traj, double t, TimeMode mode) {
    if (traj.states.empty())
        throw InvalidArgument("time_interpolant: empty trajectory");
    const std::vector<double>& ts = traj.times;
    const double T = ts.back();
    if (!(t >= 0.0 && t <= T + 1e-12 * std::max(1.0, T)))
        throw OutOfRange("time_interpolant: t outside [0, T]");
    if (t <= ts.front()) return traj.states.front();
    auto it = std::lower_bound(ts.begin(), ts.end(), t);
    std::size_t k = static_cast<std::size_t>(it - ts.begin());
    if (k >= ts.size()) k = ts.size() - 1;
    if (mode == TimeMode::Injected || ts[k] == t) return traj.states[k];
    const double tau = ts[k] - ts[k - 1];
    const double w_hi = (t - ts[k - 1]) / tau;
    const double w_lo = (ts[k] - t) / tau;
    return CellFunction(traj.states[k].partition(),
                        w_lo * traj.states[k - 1].values() + w_hi * traj.states[k].values());
}

}  // namespace plapflow
