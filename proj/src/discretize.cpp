#include "plapflow/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace plapflow {

namespace {

// Walks the tensor grid {0..q-1}^d, invoking fn with the current multi-index.
template <typename Fn>
void odometer(int d, int q, Fn&& fn) {
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (;;) {
        fn(idx);
        int k = d - 1;
        while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == q) {
            idx[static_cast<std::size_t>(k)] = 0;
            --k;
        }
        if (k < 0) break;
    }
}

double checked_eval(const ScalarField& g, const std::vector<double>& x) {
    double v = g(x);
    if (!std::isfinite(v))
        throw NonFinite("quadrature: field returned NaN/Inf");
    return v;
}

}  // namespace

CellFunction project(const ScalarField& g, const Partition& part, int quad_order) {
    if (quad_order < 1)
        throw InvalidArgument("project: quad_order must be >= 1");
    const int d = part.dim();
    const double w = part.cell_width();
    const double h = w / quad_order;
    const std::size_t nodes_per_cell = [&] {
        std::size_t c = 1;
        for (int k = 0; k < d; ++k) c *= static_cast<std::size_t>(quad_order);
        return c;
    }();

    Eigen::VectorXd vals(static_cast<Eigen::Index>(part.cell_count()));
    std::vector<double> x(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < part.cell_count(); ++i) {
        const std::vector<int> multi = part.unflatten(i);
        double acc = 0.0;
        odometer(d, quad_order, [&](const std::vector<int>& sub) {
            for (int k = 0; k < d; ++k)
                x[static_cast<std::size_t>(k)] =
                    multi[static_cast<std::size_t>(k)] * w +
                    (sub[static_cast<std::size_t>(k)] + 0.5) * h;
            acc += checked_eval(g, x);
        });
        vals[static_cast<Eigen::Index>(i)] = acc / static_cast<double>(nodes_per_cell);
    }
    return CellFunction(part, std::move(vals));
}

double inject(const CellFunction& v, const std::vector<double>& x) {
    return v[v.partition().locate(x)];
}

double approximation_error(const ScalarField& g, const Partition& part, double q,
                           int quad_order) {
    if (!(q >= 1.0))
        throw InvalidArgument("approximation_error: q must be >= 1 or infinity");
    const CellFunction v = project(g, part, quad_order);
    const int d = part.dim();
    const double w = part.cell_width();
    std::vector<double> x(static_cast<std::size_t>(d));

    if (std::isinf(q)) {
        // Endpoint-inclusive grid: quad_order+1 nodes per axis covers cell
        // edges. A cell's left edge belongs to it under the half-open
        // convention; its right edge does not, so that node is pulled a hair
        // inward — the one-sided limit is what enters the essential sup, and
        // nudging keeps fields with jumps exactly on the edge (injected cell
        // vectors) from being sampled on the wrong side.
        const double h = w / quad_order;
        const double nudge = 0x1.0p-30 * h;
        double sup = 0.0;
        for (std::size_t i = 0; i < part.cell_count(); ++i) {
            const std::vector<int> multi = part.unflatten(i);
            odometer(d, quad_order + 1, [&](const std::vector<int>& sub) {
                for (int k = 0; k < d; ++k) {
                    const int s = sub[static_cast<std::size_t>(k)];
                    x[static_cast<std::size_t>(k)] =
                        multi[static_cast<std::size_t>(k)] * w + s * h -
                        (s == quad_order ? nudge : 0.0);
                }
                sup = std::max(sup, std::abs(checked_eval(g, x) - v[i]));
            });
        }
        return sup;
    }

    const double h = w / quad_order;
    const double m = part.cell_measure();
    std::size_t nodes_per_cell = 1;
    for (int k = 0; k < d; ++k) nodes_per_cell *= static_cast<std::size_t>(quad_order);
    double acc = 0.0;
    for (std::size_t i = 0; i < part.cell_count(); ++i) {
        const std::vector<int> multi = part.unflatten(i);
        double cell_acc = 0.0;
        odometer(d, quad_order, [&](const std::vector<int>& sub) {
            for (int k = 0; k < d; ++k)
                x[static_cast<std::size_t>(k)] =
                    multi[static_cast<std::size_t>(k)] * w +
                    (sub[static_cast<std::size_t>(k)] + 0.5) * h;
            cell_acc += std::pow(std::abs(checked_eval(g, x) - v[i]), q);
        });
        acc += m * cell_acc / static_cast<double>(nodes_per_cell);
    }
    return std::pow(acc, 1.0 / q);
}

double compute_cpd(const KernelSpec& kernel, double p, int d, int quad_order) {
    if (!(p >= 2.0))
        throw InvalidArgument("compute_cpd: p must be >= 2");
    if (d < 1)
        throw InvalidArgument("compute_cpd: d must be >= 1");
    if (quad_order < 1)
        throw InvalidArgument("compute_cpd: quad_order must be >= 1");

    // Angular part of the |x_d|^p moment over the unit sphere.
    const double angular =
        2.0 * std::pow(M_PI, 0.5 * (d - 1)) *
        std::exp(std::lgamma(0.5 * (p + 1.0)) - std::lgamma(0.5 * (p + d)));

    const double h = 1.0 / quad_order;
    double radial = 0.0;
    for (int k = 0; k < quad_order; ++k) {
        const double r = (k + 0.5) * h;
        radial += kernel(r) * std::pow(r, static_cast<double>(d) + p - 1.0);
    }
    radial *= h;

    const double c = angular * radial;
    if (!(c > 1e-14))
        throw DegenerateKernel("compute_cpd: kernel moment vanished");
    return c;
}

namespace {

// Integral over one smooth piece [lo, hi] of K(|t|/eps) * tent(t), where
// tent(t) = (w - |t - delta|)_+ . Composite midpoint with `nodes` points.
double piece_integral_1d(const KernelSpec& kernel, double eps, double delta, double w,
                         double lo, double hi, int nodes) {
    if (hi <= lo) return 0.0;
    const double h = (hi - lo) / nodes;
    double acc = 0.0;
    for (int k = 0; k < nodes; ++k) {
        const double t = lo + (k + 0.5) * h;
        const double tent = w - std::abs(t - delta);
        if (tent <= 0.0) continue;
        acc += kernel(std::abs(t) / eps) * tent;
    }
    return acc * h;
}

// Average of K(|y-x|/eps) over a pair of d=1 cells with center offset delta.
double pair_average_1d(const KernelSpec& kernel, double eps, double delta, double w,
                       int quad_order) {
    // Support and tent breakpoints, clipped to the overlap window.
    const double lo_win = std::max(delta - w, -eps);
    const double hi_win = std::min(delta + w, eps);
    if (hi_win <= lo_win) return 0.0;
    std::vector<double> cuts = {lo_win, hi_win};
    for (double c : {delta, 0.0, -eps, eps})
        if (c > lo_win && c < hi_win) cuts.push_back(c);
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        acc += piece_integral_1d(kernel, eps, delta, w, cuts[k], cuts[k + 1], quad_order);
    return acc / (w * w);
}

// d >= 2: tensor midpoint over the difference box with per-axis tent weights.
double pair_average_nd(const KernelSpec& kernel, double eps,
                       const std::vector<double>& delta, double w, int d,
                       int quad_order) {
    const double h = 2.0 * w / quad_order;
    std::vector<double> t(static_cast<std::size_t>(d));
    double acc = 0.0;
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (;;) {
        double tent = 1.0;
        double r2 = 0.0;
        for (int k = 0; k < d; ++k) {
            t[static_cast<std::size_t>(k)] =
                delta[static_cast<std::size_t>(k)] - w +
                (idx[static_cast<std::size_t>(k)] + 0.5) * h;
            const double tk =
                w - std::abs(t[static_cast<std::size_t>(k)] - delta[static_cast<std::size_t>(k)]);
            tent *= std::max(tk, 0.0);
            r2 += t[static_cast<std::size_t>(k)] * t[static_cast<std::size_t>(k)];
        }
        if (tent > 0.0) acc += kernel(std::sqrt(r2) / eps) * tent;
        int k = d - 1;
        while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == quad_order) {
            idx[static_cast<std::size_t>(k)] = 0;
            --k;
        }
        if (k < 0) break;
    }
    double vol_factor = 1.0;
    for (int k = 0; k < 2 * d; ++k) vol_factor *= w;
    return acc * std::pow(h, d) / vol_factor;
}

}  // namespace

KernelMatrix assemble_kernel_matrix(const KernelSpec& kernel, double eps, double p,
                                    const Partition& part, int quad_order,
                                    std::size_t* empty_stencil_rows, AssemblyMode mode) {
    if (!(eps > 0.0 && eps <= 1.0))
        throw InvalidArgument("assemble_kernel_matrix: eps must lie in (0,1]");
    if (quad_order < 1)
        throw InvalidArgument("assemble_kernel_matrix: quad_order must be >= 1");

    const int d = part.dim();
    const int n = part.cells_per_axis();
    const double w = part.cell_width();
    const double cpd = compute_cpd(kernel, p, d, 32768);
    const double scale = 2.0 / (cpd * std::pow(eps, static_cast<double>(d) + p));
    const double band = eps + std::sqrt(static_cast<double>(d)) / n;
    const int reach = std::min(n - 1, static_cast<int>(std::ceil(band * n)));

    std::vector<Eigen::Triplet<double>> upper;
    std::vector<double> delta(static_cast<std::size_t>(d));
    std::vector<int> jmulti(static_cast<std::size_t>(d));

    for (std::size_t i = 0; i < part.cell_count(); ++i) {
        const std::vector<int> imulti = part.unflatten(i);
        // Odometer over the offset box [-reach, reach]^d.
        std::vector<int> off(static_cast<std::size_t>(d), -reach);
        for (;;) {
            bool in_range = true;
            for (int k = 0; k < d && in_range; ++k) {
                const int jm = imulti[static_cast<std::size_t>(k)] + off[static_cast<std::size_t>(k)];
                if (jm < 0 || jm >= n) in_range = false;
                jmulti[static_cast<std::size_t>(k)] = jm;
            }
            if (in_range) {
                const std::size_t j = part.flatten(jmulti);
                if (j >= i) {
                    double dist2 = 0.0;
                    for (int k = 0; k < d; ++k) {
                        delta[static_cast<std::size_t>(k)] =
                            off[static_cast<std::size_t>(k)] * w;
                        dist2 += delta[static_cast<std::size_t>(k)] *
                                 delta[static_cast<std::size_t>(k)];
                    }
                    if (std::sqrt(dist2) <= band) {
                        double avg;
                        if (mode == AssemblyMode::CenterValue) {
                            avg = kernel(std::sqrt(dist2) / eps);
                        } else if (d == 1) {
                            avg = pair_average_1d(kernel, eps, delta[0], w, quad_order);
                        } else {
                            // Double the order when the support sphere cuts the
                            // difference box (discontinuous integrand).
                            double min_r2 = 0.0, max_r2 = 0.0;
                            for (int k = 0; k < d; ++k) {
                                const double lo = delta[static_cast<std::size_t>(k)] - w;
                                const double hi = delta[static_cast<std::size_t>(k)] + w;
                                const double lo_a = std::abs(lo), hi_a = std::abs(hi);
                                const double mn = (lo <= 0.0 && hi >= 0.0)
                                                      ? 0.0
                                                      : std::min(lo_a, hi_a);
                                const double mx = std::max(lo_a, hi_a);
                                min_r2 += mn * mn;
                                max_r2 += mx * mx;
                            }
                            const bool straddles =
                                min_r2 <= eps * eps && max_r2 > eps * eps;
                            avg = pair_average_nd(kernel, eps, delta, w, d,
                                                  straddles ? 2 * quad_order : quad_order);
                        }
                        const double value = scale * avg;
                        if (value != 0.0)
                            upper.emplace_back(static_cast<int>(i), static_cast<int>(j), value);
                    }
                }
            }
            int k = d - 1;
            while (k >= 0 && ++off[static_cast<std::size_t>(k)] > reach) {
                off[static_cast<std::size_t>(k)] = -reach;
                --k;
            }
            if (k < 0) break;
        }
    }

    KernelMatrix kmat = KernelMatrix::from_upper_triplets(
        part, upper, KernelMatrix::Origin::Deterministic);

    if (empty_stencil_rows) {
        std::size_t empty = 0;
        const auto& m = kmat.matrix();
        for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
            bool has_offdiag = false;
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, r); it;
                 ++it)
                if (it.col() != r && it.value() != 0.0) {
                    has_offdiag = true;
                    break;
                }
            if (!has_offdiag) ++empty;
        }
        *empty_stencil_rows = empty;
    }
    return kmat;
}

KernelSpec load_kernel_table_csv(const std::string& path, double holder_exponent) {
    std::ifstream in(path);
    if (!in)
        throw IoError("load_kernel_table_csv: cannot open " + path);
    std::vector<double> r, k;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double a, b;
        if (!(ss >> a >> b))
            throw IoError("load_kernel_table_csv: malformed line '" + line + "'");
        r.push_back(a);
        k.push_back(b);
    }
    return KernelSpec::table(std::move(r), std::move(k), holder_exponent);
}

}  // namespace plapflow
