#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "sclab/depth.hpp"
#include "sclab/grid.hpp"

namespace sclab {

// Discrete energy inner product on Cauchy data,
//   <f, g> = sum_faces grad f0 . grad g0 * h^n + sum_nodes c^-2 f1 g1 * h^n.
// All projections and the propagator are orthogonal/unitary with respect to
// this exact bilinear form, so the operator identities below hold to round-off
// rather than to discretization order.
inline double energy_inner(const CauchyData& f, const CauchyData& g, const Medium& med) {
    const GridDesc& gr = f.grid();
    require_same_grid(gr, g.grid(), "energy_inner");
    require_same_grid(gr, med.c.grid, "energy_inner");
    const int nx = gr.extent[0];
    const int ny = gr.dim == 2 ? gr.extent[1] : 1;
    const double h = gr.spacing;
    const double meas = gr.dim == 2 ? h * h : h;
    double acc = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            double df = (f.u0(i + 1, j) - f.u0(i, j)) / h;
            double dg = (g.u0(i + 1, j) - g.u0(i, j)) / h;
            acc += df * dg * meas;
        }
    if (gr.dim == 2)
        for (int j = 0; j + 1 < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                double df = (f.u0(i, j + 1) - f.u0(i, j)) / h;
                double dg = (g.u0(i, j + 1) - g.u0(i, j)) / h;
                acc += df * dg * meas;
            }
    for (std::size_t k = 0; k < f.u1.size(); ++k)
        acc += f.u1[k] * g.u1[k] / (med.c[k] * med.c[k]) * meas;
    return acc;
}

inline double energy_norm(const CauchyData& f, const Medium& med) {
    return std::sqrt(std::max(0.0, energy_inner(f, f, med)));
}

// E_W(h): the masked quadrature. Face contributions are split evenly between
// the two nodes so E_W + E_{W^c} = E_all exactly.
inline double energy(const CauchyData& f, const Medium& med, const Mask* W = nullptr) {
    const GridDesc& gr = f.grid();
    require_same_grid(gr, med.c.grid, "energy");
    if (W) require(W->size() == gr.size(), "energy: mask size mismatch");
    const int nx = gr.extent[0];
    const int ny = gr.dim == 2 ? gr.extent[1] : 1;
    const double h = gr.spacing;
    const double meas = gr.dim == 2 ? h * h : h;
    auto in = [&](int i, int j) { return !W || (*W)[gr.index(i, j)] != 0; };
    double acc = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            double df = (f.u0(i + 1, j) - f.u0(i, j)) / h;
            double e = df * df * meas;
            if (in(i, j)) acc += 0.5 * e;
            if (in(i + 1, j)) acc += 0.5 * e;
        }
    if (gr.dim == 2)
        for (int j = 0; j + 1 < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                double df = (f.u0(i, j + 1) - f.u0(i, j)) / h;
                double e = df * df * meas;
                if (in(i, j)) acc += 0.5 * e;
                if (in(i, j + 1)) acc += 0.5 * e;
            }
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            if (in(i, j)) {
                double v = f.u1(i, j);
                acc += v * v / (med.c(i, j) * med.c(i, j)) * meas;
            }
    return acc;
}

inline double kinetic_energy(const CauchyData& f, const Medium& med, const Mask* W = nullptr) {
    const GridDesc& gr = f.grid();
    require_same_grid(gr, med.c.grid, "kinetic_energy");
    const int nx = gr.extent[0];
    const int ny = gr.dim == 2 ? gr.extent[1] : 1;
    const double h = gr.spacing;
    const double meas = gr.dim == 2 ? h * h : h;
    double acc = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            if (W && !(*W)[gr.index(i, j)]) continue;
            double v = f.u1(i, j);
            acc += v * v / (med.c(i, j) * med.c(i, j)) * meas;
        }
    return acc;
}

namespace detail {

// out = c^2 Delta_h in, homogeneous Dirichlet on the boundary ring.
inline void apply_wave_operator(ScalarField& out, const ScalarField& in, const Medium& med) {
    const GridDesc& g = in.grid;
    const int nx = g.extent[0];
    const int ny = g.dim == 2 ? g.extent[1] : 1;
    const double ih2 = 1.0 / (g.spacing * g.spacing);
    if (g.dim == 1) {
        out(0) = 0.0;
        out(nx - 1) = 0.0;
        for (int i = 1; i + 1 < nx; ++i) {
            double lap = (in(i - 1) - 2.0 * in(i) + in(i + 1)) * ih2;
            out(i) = med.c(i) * med.c(i) * lap;
        }
    } else {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                if (g.boundary_node(i, j)) {
                    out(i, j) = 0.0;
                    continue;
                }
                double lap = (in(i - 1, j) + in(i + 1, j) + in(i, j - 1) + in(i, j + 1) -
                              4.0 * in(i, j)) * ih2;
                out(i, j) = med.c(i, j) * med.c(i, j) * lap;
            }
    }
}

// Chebyshev coefficients of f on [0, smax] (first-kind, Clenshaw convention).
inline std::vector<double> chebyshev_coeffs(const std::function<double(double)>& f, double smax,
                                            double tol = 1e-15) {
    const int M = 256;
    std::vector<double> samples(M);
    for (int k = 0; k < M; ++k) {
        double xi = std::cos(M_PI * (k + 0.5) / M);
        samples[k] = f(0.5 * smax * (xi + 1.0));
    }
    std::vector<double> coeff;
    int tail = 0;
    for (int j = 0; j < M && tail < 4; ++j) {
        double c = 0.0;
        for (int k = 0; k < M; ++k) c += samples[k] * std::cos(j * M_PI * (k + 0.5) / M);
        c *= 2.0 / M;
        coeff.push_back(c);
        tail = std::abs(c) < tol ? tail + 1 : 0;
    }
    return coeff;
}

}  // namespace detail

struct DiamondReport {
    double max_in_diamond = 0.0;  // max |dt u| over the discrete diamond
    double peak = 0.0;            // max |dt u| over all of [0,2T] x Upsilon
    double ratio() const { return peak > 0.0 ? max_in_diamond / peak : 0.0; }
};

// Second-order leapfrog propagator for dt^2 u = c^2 Delta u with homogeneous
// Dirichlet data on the Upsilon boundary. Cauchy data are converted to and
// from the two-level marching state with dispersion-exact maps
//   u^{-1} = cos(th) u0 - dt cos(th/2) u1,   cos(th) = I - (dt^2/2) A,
// where A = -c^2 Delta_h and the half-angle factors are Chebyshev-applied
// operator square roots. Per eigenmode the full map is then an exact rotation,
// so R_s is unitary and nu R_{2T} is self-adjoint in the energy inner product
// to round-off, uniformly in the step count.
class Propagator {
public:
    Propagator(Medium med, double T, double cfl)
        : medium_(std::move(med)), requested_T_(T), cfl_(cfl) {
        medium_.validate();
        require(cfl > 0.0 && cfl < 1.0, "CFL factor must be in (0,1)");
        const GridDesc& g = medium_.c.grid;
        double dim_cap = 1.0 / std::sqrt(static_cast<double>(g.dim));
        require(cfl <= dim_cap + 1e-12, "CFL factor must be <= 1/sqrt(dim)");
        double dt0 = cfl * g.spacing / (medium_.c_max() * std::sqrt(static_cast<double>(g.dim)));
        steps_per_T_ = 2 * static_cast<int>(std::ceil(T / (2.0 * dt0) - 1e-12));
        steps_per_T_ = std::max(steps_per_T_, 2);
        dt_ = T / steps_per_T_;
        // spectral bound for -c^2 Delta_h: 4 dim cmax^2 / h^2
        double lam_max = 4.0 * g.dim * medium_.c_max() * medium_.c_max() / (g.spacing * g.spacing);
        smax_ = dt_ * dt_ * lam_max / 4.0;
        require(smax_ < 0.999, "CFL too aggressive for the half-angle conversion");
        cheb_sqrt_ = detail::chebyshev_coeffs([](double s) { return std::sqrt(1.0 - s); }, smax_);
        cheb_invsqrt_ =
            detail::chebyshev_coeffs([](double s) { return 1.0 / std::sqrt(1.0 - s); }, smax_);
    }

    const Medium& medium() const { return medium_; }
    double dt() const { return dt_; }
    double T() const { return requested_T_; }       // snapped: dt divides T exactly
    int steps_per_T() const { return steps_per_T_; }

    // R_s: propagate Cauchy data by a signed duration. s is snapped to an
    // integer step count; the snap is available via snap_report().
    CauchyData propagate(const CauchyData& h, double s) const {
        require_same_grid(h.grid(), medium_.c.grid, "propagate");
        if (s < 0.0) return time_reverse(propagate(time_reverse(h), -s));
        int n = snap_steps(s);
        if (n == 0) return h;
        ScalarField cur = h.u0;
        pin_boundary(cur);
        ScalarField prev = insert_prev(h);
        ScalarField lap(h.grid());
        for (int step = 0; step < n; ++step) {
            detail::apply_wave_operator(lap, cur, medium_);
            for (std::size_t k = 0; k < cur.size(); ++k) {
                double next = 2.0 * cur[k] - prev[k] + dt_ * dt_ * lap[k];
                prev[k] = cur[k];
                cur[k] = next;
            }
        }
        return extract(cur, prev);
    }

    // R = nu . R_{2T}; a discrete involution.
    CauchyData reflect_map(const CauchyData& h) const {
        return time_reverse(propagate(h, 2.0 * requested_T_));
    }

    int snap_steps(double s) const {
        double raw = std::abs(s) / dt_;
        int n = static_cast<int>(std::lround(raw));
        return n;
    }
    double snap_error(double s) const { return std::abs(std::abs(s) - snap_steps(s) * dt_); }

    // Walks the field over [0, 2T] and records max |dt u| inside the discrete
    // diamond {(t,x): d*(x) < T - |t - T|}. Pure diagnostic.
    DiamondReport diamond_vanishing_check(const CauchyData& h, const DepthField& depth) const {
        require_same_grid(h.grid(), medium_.c.grid, "diamond_vanishing_check");
        const GridDesc& g = h.grid();
        int n = 2 * steps_per_T_;
        ScalarField cur = h.u0;
        pin_boundary(cur);
        ScalarField prev = insert_prev(h);
        ScalarField lap(g);
        DiamondReport rep;
        const double T = requested_T_;
        for (int step = 0; step < n; ++step) {
            detail::apply_wave_operator(lap, cur, medium_);
            for (std::size_t k = 0; k < cur.size(); ++k) {
                double next = 2.0 * cur[k] - prev[k] + dt_ * dt_ * lap[k];
                // centered dt u at time (step+... ) uses next and prev
                double dtu = (next - prev[k]) / (2.0 * dt_);
                double t = (step)*dt_;
                double a = std::abs(dtu);
                rep.peak = std::max(rep.peak, a);
                if (depth.d[k] < T - std::abs(t - T)) rep.max_in_diamond = std::max(rep.max_in_diamond, a);
                prev[k] = cur[k];
                cur[k] = next;
            }
        }
        return rep;
    }

    // Relative energy in the width-3 ring next to the Upsilon boundary; the
    // geometric margin d(bdry Upsilon, Theta) > 2T should keep this tiny.
    double boundary_ring_energy(const CauchyData& h) const {
        const GridDesc& g = h.grid();
        Mask ring(g.size(), 0);
        const int nx = g.extent[0];
        const int ny = g.dim == 2 ? g.extent[1] : 1;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                bool near = i < 3 || i >= nx - 3;
                if (g.dim == 2) near = near || j < 3 || j >= ny - 3;
                ring[g.index(i, j)] = near ? 1 : 0;
            }
        double total = energy(h, medium_);
        return total > 0.0 ? energy(h, medium_, &ring) / total : 0.0;
    }

private:
    void pin_boundary(ScalarField& f) const {
        const GridDesc& g = f.grid;
        const int nx = g.extent[0];
        const int ny = g.dim == 2 ? g.extent[1] : 1;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                if (g.boundary_node(i, j)) f(i, j) = 0.0;
    }

    ScalarField insert_prev(const CauchyData& h) const {
        // u^{-1} = (I - dt^2/2 A) u0 - dt * sqrt(I - (dt^2/4) A) u1
        ScalarField a(h.grid());
        detail::apply_wave_operator(a, h.u0, medium_);  // a = c^2 lap u0 = -A u0
        ScalarField u1 = h.u1;
        pin_boundary(u1);  // boundary ring carries no degrees of freedom
        ScalarField root = apply_cheb(cheb_sqrt_, u1);
        ScalarField prev(h.grid());
        for (std::size_t k = 0; k < prev.size(); ++k)
            prev[k] = h.u0[k] + 0.5 * dt_ * dt_ * a[k] - dt_ * root[k];
        pin_boundary(prev);
        return prev;
    }

    CauchyData extract(const ScalarField& cur, const ScalarField& prev) const {
        // u1 = (I - (dt^2/4) A)^{-1/2} [ (I - dt^2/2 A) u^N - u^{N-1} ] / dt
        ScalarField a(cur.grid);
        detail::apply_wave_operator(a, cur, medium_);
        ScalarField num(cur.grid);
        for (std::size_t k = 0; k < num.size(); ++k)
            num[k] = (cur[k] + 0.5 * dt_ * dt_ * a[k] - prev[k]) / dt_;
        CauchyData out(cur.grid);
        out.u0 = cur;
        out.u1 = apply_cheb(cheb_invsqrt_, num);
        return out;
    }

    // Clenshaw evaluation of sum_j c_j T_j(Xi) x with Xi = (2/smax) B - I,
    // B = (dt^2/4) A. Boundary nodes stay pinned to zero through A.
    ScalarField apply_cheb(const std::vector<double>& coeff, const ScalarField& x) const {
        auto apply_xi = [&](const ScalarField& v) {
            ScalarField av(v.grid);
            detail::apply_wave_operator(av, v, medium_);  // av = -A v
            ScalarField out(v.grid);
            double scale = 2.0 / smax_ * (dt_ * dt_ / 4.0);
            for (std::size_t k = 0; k < out.size(); ++k) out[k] = -scale * av[k] - v[k];
            return out;
        };
        ScalarField b1(x.grid), b2(x.grid);
        for (int j = static_cast<int>(coeff.size()) - 1; j >= 1; --j) {
            ScalarField t = apply_xi(b1);
            for (std::size_t k = 0; k < t.size(); ++k)
                t[k] = coeff[j] * x[k] + 2.0 * t[k] - b2[k];
            b2 = b1;
            b1 = t;
        }
        ScalarField t = apply_xi(b1);
        for (std::size_t k = 0; k < t.size(); ++k)
            t[k] = 0.5 * coeff[0] * x[k] + t[k] - b2[k];
        return t;
    }

    Medium medium_;
    double requested_T_;
    double cfl_;
    double dt_ = 0.0;
    double smax_ = 0.0;
    int steps_per_T_ = 0;
    std::vector<double> cheb_sqrt_, cheb_invsqrt_;
};

}  // namespace sclab
