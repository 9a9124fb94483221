#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sclab/control.hpp"
#include "sclab/marchenko.hpp"

using namespace sclab;

namespace {

GridDesc grid1d(int cells, double length, double origin) {
    GridDesc g;
    g.dim = 1;
    g.extent = {cells + 1, 1};
    g.spacing = length / cells;
    g.origin = {origin, 0.0};
    return g;
}

// the 1D two-interface scenario used throughout: c = (1, 2, 0.5) with
// interfaces at x = 1, 2; Theta = (0, 7) inside Upsilon = (-4, 10); T = 1.6
struct TwoInterfaceLab {
    Medium med;
    Propagator prop;
    ProjectionContext proj;
    ControlContext ctx;
    CauchyData h0;

    static Medium make_medium(int cells) {
        LayeredProfile prof;
        prof.interfaces = {1.0, 2.0};
        prof.speeds = {1.0, 2.0, 0.5};
        return rasterize_layered(grid1d(cells, 14.0, -4.0), prof);
    }
    static Box theta() {
        Box b;
        b.lo = {0.0, 0.0};
        b.hi = {7.0, 0.0};
        return b;
    }
    // pulse width and T are placed so that no pulse of the multiple train
    // straddles the Theta boundary at the 0 / 2T snapshots
    explicit TwoInterfaceLab(int cells = 2100, double T = 1.6)
        : med(make_medium(cells)),
          prop(med, T, 0.45),
          proj(theta(), med),
          ctx{prop, proj},
          h0(gaussian_pulse_1d(med, 0.42, 0.07)) {}
};

struct ConstantLab {
    Medium med;
    Propagator prop;
    ProjectionContext proj;
    ControlContext ctx;

    explicit ConstantLab(int cells = 900, double T = 0.9)
        : med(constant_medium(grid1d(cells, 9.0, -3.0), 1.0)),
          prop(med, T, 0.45),
          proj(make_theta(), med),
          ctx{prop, proj} {}
    static Box make_theta() {
        Box b;
        b.lo = {0.0, 0.0};
        b.hi = {5.0, 0.0};
        return b;
    }
};

}  // namespace

TEST_CASE("almost direct transmission in a constant medium keeps all energy") {
    ConstantLab lab;
    CauchyData h0 = gaussian_pulse_1d(lab.med, 0.6, 0.1);  // 6 sigma inside Theta_T at t=T
    AdtResult adt = almost_direct_transmission(lab.ctx, h0);
    double E0 = energy(h0, lab.med);
    REQUIRE(adt.E == Catch::Approx(E0).epsilon(1e-6));
    // nothing reflected: h_DT is the propagated pulse up to the clipped
    // dispersive wake outside Theta_T
    CauchyData direct = lab.prop.propagate(h0, lab.ctx.T());
    CauchyData diff = adt.h_dt;
    diff -= direct;
    REQUIRE(energy_norm(diff, lab.med) < 1e-3 * energy_norm(h0, lab.med));
}

TEST_CASE("zero data gives a zero almost direct transmission") {
    ConstantLab lab(300, 0.5);
    CauchyData z(lab.med.c.grid);
    AdtResult adt = almost_direct_transmission(lab.ctx, z);
    REQUIRE(adt.E == 0.0);
    REQUIRE(adt.KE_inside == 0.0);
}

TEST_CASE("two-interface transmission energy matches the flux product 128/225") {
    TwoInterfaceLab lab;
    AdtResult adt = almost_direct_transmission(lab.ctx, lab.h0);
    double ratio = adt.E / energy(lab.h0, lab.med);
    // (1 - (1/3)^2)(1 - (3/5)^2) = (8/9)(16/25) = 128/225
    REQUIRE(ratio == Catch::Approx(128.0 / 225.0).epsilon(0.02));
}

TEST_CASE("constant medium: the iteration is a fixed point at k = 0") {
    ConstantLab lab;
    CauchyData h0 = gaussian_pulse_1d(lab.med, 0.4, 0.1);
    IterationOptions opt;
    opt.k_max = 4;
    IterationTrace tr = scattering_control_iterate(lab.ctx, h0, opt);
    for (double t : tr.tail_norm) REQUIRE(t < 1e-4 * tr.h0_norm);
    REQUIRE(tr.stabilized());
}

TEST_CASE("two-interface iteration: monotone inside norm, mismatch below 1e-2") {
    TwoInterfaceLab lab;
    IterationOptions opt;
    opt.k_max = 30;
    opt.oracle = almost_direct_transmission(lab.ctx, lab.h0);
    IterationTrace tr = scattering_control_iterate(lab.ctx, lab.h0, opt);

    for (std::size_t k = 0; k + 1 < tr.inside_norm.size(); ++k)
        REQUIRE(tr.inside_norm[k + 1] <= tr.inside_norm[k] + 1e-6 * tr.h0_norm);
    REQUIRE(tr.interior_mismatch.front() > tr.interior_mismatch.back());
    REQUIRE(tr.interior_mismatch.back() <= 1e-2);
    REQUIRE(tr.interior_mismatch.back() <= 1e-5);  // actual floor is far lower
    // pibar h_k = h0 at every k: the defect never grows beyond h0's own
    // boundary trace
    for (double d : tr.pibar_defect) REQUIRE(d <= tr.pibar_defect.front() + 1e-9);
    REQUIRE(tr.pibar_defect.front() < 1e-6);
    // the tail stabilizes and carries energy
    REQUIRE(tr.stabilized());
    REQUIRE(tr.tail_norm.back() > 0.01 * tr.h0_norm);
}

TEST_CASE("contraction chain: ||pRpRh_k|| <= ||pRh_k|| <= ||h_k|| + slack") {
    TwoInterfaceLab lab;
    CauchyData hk = lab.h0;
    for (int k = 0; k < 3; ++k) {
        CauchyData Rh = lab.prop.reflect_map(hk);
        CauchyData pRh = lab.proj.project_outside(Rh, 0.0);
        CauchyData pRpRh = lab.proj.project_outside(lab.prop.reflect_map(pRh), 0.0);
        double a = energy_norm(pRpRh, lab.med), b = energy_norm(pRh, lab.med),
               c = energy_norm(hk, lab.med);
        REQUIRE(a <= b + 1e-9 * c);
        REQUIRE(b <= c + 1e-9 * c);
        hk = lab.h0;
        hk += pRpRh;
    }
}

TEST_CASE("factorization I - pRpR = (I - pR)(I + pR) on random data") {
    TwoInterfaceLab lab(700, 1.6);
    std::mt19937_64 rng(5);
    CauchyData h = random_rightward_start(lab.med, 0.3, 4.0, 0.15, rng);
    auto pR = [&](const CauchyData& v) {
        return lab.proj.project_outside(lab.prop.reflect_map(v), 0.0);
    };
    CauchyData lhs = h;
    lhs -= pR(pR(h));
    CauchyData inner = h;
    inner += pR(h);
    CauchyData rhs = inner;
    rhs -= pR(inner);
    lhs -= rhs;
    REQUIRE(energy_norm(lhs, lab.med) <= 1e-9 * energy_norm(h, lab.med));
}

TEST_CASE("interior recovery is s-independent once the tail stabilizes") {
    TwoInterfaceLab lab;
    IterationOptions opt;
    opt.k_max = 20;
    opt.oracle = almost_direct_transmission(lab.ctx, lab.h0);
    IterationTrace tr = scattering_control_iterate(lab.ctx, lab.h0, opt);
    const CauchyData& h_dt = opt.oracle->h_dt;
    double denom = energy_norm(h_dt, lab.med);

    double mis_T = 0.0;
    std::vector<double> mism;
    for (double s : {0.0, lab.ctx.T() / 2.0, lab.ctx.T()}) {
        CauchyData rec = interior_field_recovery(lab.ctx, tr.last, s);
        CauchyData diff = rec;
        diff -= h_dt;
        double m = energy_norm(diff, lab.med) / denom;
        mism.push_back(m);
        if (s == lab.ctx.T()) mis_T = m;
    }
    for (double m : mism) REQUIRE(m <= std::max(2.0 * mis_T, 1e-2));

    // k = 0 with a strong scatterer is strictly worse than the iterated result
    CauchyData rec0 = interior_field_recovery(lab.ctx, lab.h0, lab.ctx.T());
    CauchyData diff0 = rec0;
    diff0 -= h_dt;
    REQUIRE(energy_norm(diff0, lab.med) / denom > mis_T * 3.0);
}

TEST_CASE("wave field recovery reproduces the transmitted field") {
    TwoInterfaceLab lab;
    IterationOptions opt;
    opt.k_max = 16;
    IterationTrace tr = scattering_control_iterate(lab.ctx, lab.h0, opt);
    AdtResult adt = almost_direct_transmission(lab.ctx, lab.h0);

    // at a time where the reflected train pollutes F h_0 but the combination
    // must reproduce the transmitted field alone
    double t = 1.5 * lab.ctx.T();
    CauchyData oracle = lab.prop.propagate(adt.h_dt, t - lab.ctx.T());
    CauchyData rec = wavefield_recovery_outside(lab.ctx, tr.last, t);
    CauchyData diff = rec;
    diff -= oracle;
    double den = energy_norm(oracle, lab.med) + 1e-300;
    double ratio_k = energy_norm(diff, lab.med) / den;
    REQUIRE(ratio_k < 0.01);

    // k = 0: the raw combination still carries the uncancelled multiples
    CauchyData rec0 = wavefield_recovery_outside(lab.ctx, lab.h0, t);
    CauchyData diff0 = rec0;
    diff0 -= oracle;
    double ratio_0 = energy_norm(diff0, lab.med) / den;
    REQUIRE(ratio_0 > 5.0 * ratio_k);

    // and restricted outside Theta the recovered field stays quiet, unlike
    // the raw wave field of h_k
    Mask outside = lab.proj.depth().outside(0.0);
    CauchyData raw = lab.prop.propagate(tr.last, t);
    REQUIRE(std::sqrt(energy(rec, lab.med, &outside)) <
            0.05 * std::sqrt(energy(raw, lab.med, &outside)));

    // zero data stays zero
    CauchyData z(lab.med.c.grid);
    REQUIRE(energy_norm(wavefield_recovery_outside(lab.ctx, z, t), lab.med) == 0.0);
}

TEST_CASE("energy and kinetic energy recovery against the oracle") {
    TwoInterfaceLab lab;
    IterationOptions opt;
    opt.k_max = 25;
    opt.oracle = almost_direct_transmission(lab.ctx, lab.h0);
    IterationTrace tr = scattering_control_iterate(lab.ctx, lab.h0, opt);

    double E_oracle = opt.oracle->E;
    double KE_oracle = opt.oracle->KE_inside;
    REQUIRE(tr.recovered_E.back() == Catch::Approx(E_oracle).epsilon(0.05));
    REQUIRE(tr.recovered_KE.back() == Catch::Approx(KE_oracle).epsilon(0.05));

    // constant medium: E_k = E(h0) for all k; KE of a traveling pulse is E/2
    ConstantLab cl;
    CauchyData p = gaussian_pulse_1d(cl.med, 0.6, 0.1);
    IterationOptions copt;
    copt.k_max = 3;
    IterationTrace ct = scattering_control_iterate(cl.ctx, p, copt);
    double E0 = energy(p, cl.med);
    for (double e : ct.recovered_E) REQUIRE(e == Catch::Approx(E0).epsilon(1e-6));
    for (double ke : ct.recovered_KE) REQUIRE(ke == Catch::Approx(E0 / 2.0).epsilon(1e-3));

    // zero data recovers zero
    CauchyData z(cl.med.c.grid);
    IterationTrace zt = scattering_control_iterate(cl.ctx, z, copt);
    REQUIRE(zt.recovered_E.back() == 0.0);
    REQUIRE(zt.recovered_KE.back() == 0.0);
}

TEST_CASE("stabilized tails satisfy the three membership residuals") {
    TwoInterfaceLab lab;
    IterationOptions opt;
    opt.k_max = 25;
    IterationTrace tr = scattering_control_iterate(lab.ctx, lab.h0, opt);
    CauchyData tail = tr.last;
    tail -= lab.h0;
    HstarResiduals r = hstar_membership_residuals(lab.ctx, tail);
    REQUIRE(r.max() <= 1e-4 * tr.h0_norm);

    // data inside Theta violate the first residual maximally
    HstarResiduals bad = hstar_membership_residuals(lab.ctx, lab.h0);
    REQUIRE(bad.pibar_norm == Catch::Approx(tr.h0_norm).epsilon(1e-6));

    CauchyData z(lab.med.c.grid);
    HstarResiduals zr = hstar_membership_residuals(lab.ctx, z);
    REQUIRE(zr.max() == 0.0);
}

TEST_CASE("minimal-norm Neumann: diagonal example gives (0, 4/3)") {
    std::vector<double> A = {1.0, 0.0, 0.0, 0.5};
    std::vector<double> x = {0.0, 1.0};
    MinNormCheck chk = minimal_norm_neumann_check(A, 2, x);
    REQUIRE(chk.series_sum[0] == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(chk.series_sum[1] == Catch::Approx(4.0 / 3.0).epsilon(1e-12));
    REQUIRE(chk.difference < 1e-10);

    // A = 0: the series is x itself
    std::vector<double> Z = {0.0, 0.0, 0.0, 0.0};
    MinNormCheck zc = minimal_norm_neumann_check(Z, 2, x);
    REQUIRE(zc.series_sum == x);
    REQUIRE(zc.difference == 0.0);
}

TEST_CASE("minimal-norm Neumann: random symmetric contractions with unit modes") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-0.95, 0.95), un(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 8;
        // random orthogonal Q via Gram-Schmidt
        std::vector<double> Q(n * n);
        for (int col = 0; col < n; ++col) {
            std::vector<double> v(n);
            for (int i = 0; i < n; ++i) v[i] = un(rng);
            for (int prev = 0; prev < col; ++prev) {
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += v[i] * Q[i * n + prev];
                for (int i = 0; i < n; ++i) v[i] -= dot * Q[i * n + prev];
            }
            double nrm = 0.0;
            for (double vi : v) nrm += vi * vi;
            nrm = std::sqrt(nrm);
            for (int i = 0; i < n; ++i) Q[i * n + col] = v[i] / nrm;
        }
        std::vector<double> lam(n);
        for (int i = 0; i < n; ++i) lam[i] = u(rng);
        lam[0] = 1.0;   // exact unit eigenvalues are allowed
        lam[1] = -1.0;
        std::vector<double> A(n * n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int m = 0; m < n; ++m) A[i * n + j] += Q[i * n + m] * lam[m] * Q[j * n + m];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < i; ++j) A[i * n + j] = A[j * n + i];  // exact symmetry

        // x in range(I - A^2)
        std::vector<double> z(n), x(n, 0.0);
        for (int i = 0; i < n; ++i) z[i] = un(rng);
        for (int i = 0; i < n; ++i) {
            double az = 0.0;
            for (int j = 0; j < n; ++j) az += A[i * n + j] * z[j];
            x[i] = az;
        }
        std::vector<double> a2z(n, 0.0);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += A[i * n + j] * x[j];
            a2z[i] = s;
        }
        for (int i = 0; i < n; ++i) x[i] = z[i] - a2z[i];  // (I - A^2) z

        MinNormCheck chk = minimal_norm_neumann_check(A, n, x);
        REQUIRE(chk.difference <= 1e-8);
    }
}
