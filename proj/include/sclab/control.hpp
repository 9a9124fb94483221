#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "sclab/projections.hpp"
#include "sclab/wave.hpp"

namespace sclab {

// ---------------------------------------------------------------------------
// initial-pulse helpers
// ---------------------------------------------------------------------------

// Gaussian-derivative pulse traveling toward +x (1D): u0 zero-mean, u1 = -c u0'.
inline CauchyData gaussian_pulse_1d(const Medium& med, double center, double width) {
    const GridDesc& g = med.c.grid;
    require(g.dim == 1, "gaussian_pulse_1d: 1D grids only");
    CauchyData h(g);
    for (int i = 0; i < g.extent[0]; ++i) {
        double s = (g.x(i) - center) / width;
        double v = -s * std::exp(-0.5 * s * s);
        double dv = -(1.0 - s * s) * std::exp(-0.5 * s * s) / width;
        h.u0(i) = v;
        h.u1(i) = -med.c(i) * dv;
        if (g.boundary_node(i)) h.u0(i) = h.u1(i) = 0.0;
    }
    return h;
}

// Collimated packet (2D): Gaussian envelope times an oscillation along a unit
// direction, one-way data u1 = -c dir.grad(u0).
inline CauchyData packet_2d(const Medium& med, double cx, double cy, double width_par,
                            double width_perp, double angle_from_axis0, double wavenumber) {
    const GridDesc& g = med.c.grid;
    require(g.dim == 2, "packet_2d: 2D grids only");
    const double dx = std::cos(angle_from_axis0), dy = std::sin(angle_from_axis0);
    CauchyData h(g);
    for (int j = 0; j < g.extent[1]; ++j)
        for (int i = 0; i < g.extent[0]; ++i) {
            double rx = g.x(i) - cx, ry = g.y(j) - cy;
            double par = rx * dx + ry * dy;
            double perp = -rx * dy + ry * dx;
            double env = std::exp(-0.5 * par * par / (width_par * width_par) -
                                  0.5 * perp * perp / (width_perp * width_perp));
            double phase = wavenumber * par;
            double u0 = env * std::sin(phase);
            // d/dpar of env*sin(phase)
            double du0 = env * (wavenumber * std::cos(phase) - par / (width_par * width_par) * std::sin(phase));
            h.u0(i, j) = u0;
            h.u1(i, j) = -med.c(i, j) * du0;
            if (g.boundary_node(i, j)) h.u0(i, j) = h.u1(i, j) = 0.0;
        }
    return h;
}

// ---------------------------------------------------------------------------
// almost direct transmission (oracle; uses knowledge of c)
// ---------------------------------------------------------------------------

struct AdtResult {
    CauchyData h_dt;   // pibar_T R_T h0
    Mask theta_T;      // the depth-T mask used
    double E = 0.0;    // full energy of h_dt
    double KE_inside = 0.0;  // kinetic energy of R_T h0 inside Theta_T
};

struct ControlContext {
    const Propagator& prop;
    const ProjectionContext& proj;

    double T() const { return prop.T(); }
    const Medium& medium() const { return prop.medium(); }
};

inline AdtResult almost_direct_transmission(const ControlContext& ctx, const CauchyData& h0) {
    const double T = ctx.T();
    CauchyData rth0 = ctx.prop.propagate(h0, T);
    AdtResult out{ctx.proj.project_inside(rth0, T), ctx.proj.depth().inside(T), 0.0, 0.0};
    out.E = energy(out.h_dt, ctx.medium());
    out.KE_inside = kinetic_energy(rth0, ctx.medium(), &out.theta_T);
    return out;
}

// ---------------------------------------------------------------------------
// the scattering control iteration
// ---------------------------------------------------------------------------

struct IterationOptions {
    int k_max = 30;
    int snapshot_every = 0;              // 0: keep only the last iterate
    std::optional<AdtResult> oracle;     // enables interior_mismatch
    double stabilization_tol = 1e-4;     // ||h_{k+1}-h_k|| / ||h0||
    int stabilization_run = 3;           // consecutive k below tol
};

struct IterationTrace {
    std::vector<double> tail_norm;          // ||h_k - h0||
    std::vector<double> inside_norm;        // ||pibar R h_k||
    std::vector<double> increment_norm;     // ||h_{k+1} - h_k||
    std::vector<double> interior_mismatch;  // ||R_-T pibar R_2T h_k - h_DT|| / ||h_DT||
    std::vector<double> recovered_E;        // E(h_k) - E(pistar R h_k)
    std::vector<double> recovered_KE;       // limit-form bracket / 4
    std::vector<double> pibar_defect;       // ||pibar h_k - h0|| / ||h0||
    std::vector<CauchyData> snapshots;
    CauchyData last;        // h_K
    CauchyData last_pRh;    // pistar R h_K
    double h0_norm = 0.0;
    int stabilized_at = -1;  // first k meeting the stabilization criterion, -1 if none

    bool stabilized() const { return stabilized_at >= 0; }
};

// h_{k+1} = h0 + (pistar R pistar R) h_k, with the full diagnostic set
// recorded at every step.
inline IterationTrace scattering_control_iterate(const ControlContext& ctx, const CauchyData& h0,
                                                 const IterationOptions& opt) {
    const Medium& med = ctx.medium();
    IterationTrace tr;
    tr.h0_norm = energy_norm(h0, med);
    const double E0 = tr.h0_norm * tr.h0_norm;

    CauchyData hk = h0;
    int below = 0;
    for (int k = 0; k <= opt.k_max; ++k) {
        CauchyData Rhk = ctx.prop.reflect_map(hk);
        CauchyData pRhk = ctx.proj.project_outside(Rhk, 0.0);
        CauchyData pibar_Rhk = Rhk;
        pibar_Rhk -= pRhk;

        CauchyData RpRhk = ctx.prop.reflect_map(pRhk);
        CauchyData ppRR = ctx.proj.project_outside(RpRhk, 0.0);

        // diagnostics
        CauchyData tail = hk;
        tail -= h0;
        tr.tail_norm.push_back(energy_norm(tail, med));
        tr.inside_norm.push_back(energy_norm(pibar_Rhk, med));
        {
            CauchyData pibar_hk = ctx.proj.project_inside(hk, 0.0);
            pibar_hk -= h0;
            tr.pibar_defect.push_back(energy_norm(pibar_hk, med) / (tr.h0_norm + 1e-300));
        }
        const double Ehk = energy(hk, med);
        const double EpRhk = energy(pRhk, med);
        tr.recovered_E.push_back(Ehk - EpRhk);
        {
            // 4 KE = E(h_k) + E(h0) - E(pRpRh_k)
            //        + 2 <pRh_k, h_k - RpRh_k> - 2 <h0, RpRh_k + Rh_k>
            CauchyData a = hk;
            a -= RpRhk;
            double term1 = energy_inner(pRhk, a, med);
            CauchyData b = RpRhk;
            b += Rhk;
            double term2 = energy_inner(h0, b, med);
            double EppRR = energy(ppRR, med);
            tr.recovered_KE.push_back(0.25 * (Ehk + E0 - EppRR + 2.0 * term1 - 2.0 * term2));
        }
        if (opt.oracle) {
            // R_{-T} pibar R_{2T} h_k against the oracle h_DT
            CauchyData r2t = time_reverse(Rhk);  // R_{2T} h_k
            CauchyData inner = ctx.prop.propagate(ctx.proj.project_inside(r2t, 0.0), -ctx.T());
            CauchyData diff = inner;
            diff -= opt.oracle->h_dt;
            double denom = std::sqrt(opt.oracle->E) + 1e-300;
            tr.interior_mismatch.push_back(energy_norm(diff, med) / denom);
        }
        if (opt.snapshot_every > 0 && k % opt.snapshot_every == 0) tr.snapshots.push_back(hk);

        if (k == opt.k_max) {
            tr.last = hk;
            tr.last_pRh = pRhk;
            tr.increment_norm.push_back(0.0);
            break;
        }
        CauchyData hnext = h0;
        hnext += ppRR;
        CauchyData inc = hnext;
        inc -= hk;
        double inc_norm = energy_norm(inc, med);
        tr.increment_norm.push_back(inc_norm);
        below = inc_norm < opt.stabilization_tol * tr.h0_norm ? below + 1 : 0;
        if (below >= opt.stabilization_run && tr.stabilized_at < 0)
            tr.stabilized_at = k + 1;
        hk = std::move(hnext);
    }
    return tr;
}

// R_{-s} pibar_{T-s} R_{T+s} h  for s in [0, T].
inline CauchyData interior_field_recovery(const ControlContext& ctx, const CauchyData& h, double s) {
    require(s >= -1e-12 && s <= ctx.T() + 1e-12, "interior_field_recovery: s must lie in [0, T]");
    CauchyData fwd = ctx.prop.propagate(h, ctx.T() + s);
    CauchyData proj = ctx.proj.project_inside(fwd, ctx.T() - s);
    return ctx.prop.propagate(proj, -s);
}

// F h_k(t) - (F pistar R_{2T} h_k)(t - 2T) -> the wave field of h_DT at t - T.
inline CauchyData wavefield_recovery_outside(const ControlContext& ctx, const CauchyData& hk,
                                             double t) {
    CauchyData a = ctx.prop.propagate(hk, t);
    CauchyData r2t = ctx.prop.propagate(hk, 2.0 * ctx.T());
    CauchyData b = ctx.prop.propagate(ctx.proj.project_outside(r2t, 0.0), t - 2.0 * ctx.T());
    a -= b;
    return a;
}

// Orthogonal projection of exterior data onto the control space H*: removes
// the component whose wave field never meets Theta in [0, 2T] (the space G,
// which the continuum theory quotients away). Alternating projections onto
// ker(pistar_{-2T}), ker(R_{-2T} pistar_{-2T} R_{2T}) and the range of
// pistar_0; each factor is orthogonal, so the iteration converges to the
// projection onto the intersection.
inline CauchyData project_hstar(const ControlContext& ctx, CauchyData v, int rounds = 2) {
    const double two_T = 2.0 * ctx.T();
    for (int r = 0; r < rounds; ++r) {
        CauchyData p1 = ctx.proj.project_outside(v, -two_T);
        v -= p1;
        CauchyData w = ctx.prop.propagate(v, two_T);
        CauchyData pw = ctx.proj.project_outside(w, -two_T);
        CauchyData p2 = ctx.prop.propagate(pw, -two_T);
        v -= p2;
        v = ctx.proj.project_outside(v, 0.0);
    }
    return v;
}

// ---------------------------------------------------------------------------
// tail admissibility: the three membership residuals for H*
// ---------------------------------------------------------------------------

struct HstarResiduals {
    double pibar_norm = 0.0;        // ||pibar h||
    double outer_norm = 0.0;        // ||pistar_{-2T} h||
    double outer_after_R = 0.0;     // ||pistar_{-2T} R_{2T} h||
    double max() const { return std::max(pibar_norm, std::max(outer_norm, outer_after_R)); }
};

inline HstarResiduals hstar_membership_residuals(const ControlContext& ctx, const CauchyData& h) {
    const Medium& med = ctx.medium();
    HstarResiduals r;
    r.pibar_norm = energy_norm(ctx.proj.project_inside(h, 0.0), med);
    r.outer_norm = energy_norm(ctx.proj.project_outside(h, -2.0 * ctx.T()), med);
    CauchyData r2t = ctx.prop.propagate(h, 2.0 * ctx.T());
    r.outer_after_R = energy_norm(ctx.proj.project_outside(r2t, -2.0 * ctx.T()), med);
    return r;
}

// ---------------------------------------------------------------------------
// minimal-norm Neumann lemma on small symmetric contractions
// ---------------------------------------------------------------------------

namespace detail {

// plain cyclic Jacobi eigensolver for small dense symmetric matrices
inline void jacobi_eigen(std::vector<double> A, int n, std::vector<double>& eigval,
                         std::vector<double>& eigvec) {
    eigvec.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) eigvec[i * n + i] = 1.0;
    auto a = [&](int i, int j) -> double& { return A[i * n + j]; };
    auto v = [&](int i, int j) -> double& { return eigvec[i * n + j]; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                double theta = 0.5 * (a(q, q) - a(p, p)) / a(p, q);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    eigval.resize(n);
    for (int i = 0; i < n; ++i) eigval[i] = a(i, i);
}

}  // namespace detail

struct MinNormCheck {
    std::vector<double> series_sum;   // sum_{k<=K} A^{2k} x
    std::vector<double> pseudo;       // eigendecomposition pseudoinverse solution
    double difference = 0.0;          // l2 distance
    int terms_used = 0;
};

// Compares the Neumann series for (I - A^2) y = x against the dense
// eigendecomposition pseudoinverse (the brute-force oracle). A must be
// symmetric with ||A|| <= 1 and dimension <= 12.
inline MinNormCheck minimal_norm_neumann_check(const std::vector<double>& A, int n,
                                               const std::vector<double>& x,
                                               int max_terms = 200000) {
    require(n >= 1 && n <= 12, "minimal_norm_neumann_check: dimension must be <= 12");
    require(static_cast<int>(A.size()) == n * n, "minimal_norm_neumann_check: bad matrix size");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            require(std::abs(A[i * n + j] - A[j * n + i]) < 1e-12,
                    "minimal_norm_neumann_check: matrix must be symmetric");

    std::vector<double> eigval, Q;
    detail::jacobi_eigen(A, n, eigval, Q);
    for (double l : eigval)
        require(std::abs(l) <= 1.0 + 1e-9, "minimal_norm_neumann_check: ||A|| must be <= 1");

    MinNormCheck out;
    // pseudoinverse in the eigenbasis: zero out |lambda| = 1 directions
    out.pseudo.assign(n, 0.0);
    for (int m = 0; m < n; ++m) {
        double lam = eigval[m];
        double denom = 1.0 - lam * lam;
        if (std::abs(denom) < 1e-12) continue;
        double proj = 0.0;
        for (int i = 0; i < n; ++i) proj += Q[i * n + m] * x[i];
        for (int i = 0; i < n; ++i) out.pseudo[i] += Q[i * n + m] * proj / denom;
    }

    std::vector<double> term = x, sum = x, tmp(n);
    auto matvec = [&](const std::vector<double>& v, std::vector<double>& w) {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += A[i * n + j] * v[j];
            w[i] = s;
        }
    };
    int k = 0;
    for (; k < max_terms; ++k) {
        matvec(term, tmp);
        matvec(tmp, term);  // term <- A^2 term
        double tn = 0.0;
        for (int i = 0; i < n; ++i) {
            sum[i] += term[i];
            tn += term[i] * term[i];
        }
        if (std::sqrt(tn) < 1e-14) break;
    }
    out.terms_used = k + 1;
    out.series_sum = sum;
    double d = 0.0;
    for (int i = 0; i < n; ++i) d += (sum[i] - out.pseudo[i]) * (sum[i] - out.pseudo[i]);
    out.difference = std::sqrt(d);
    return out;
}

}  // namespace sclab
