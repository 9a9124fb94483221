#include <catch2/catch_amalgamated.hpp>

#include "sclab/depth.hpp"
#include "sclab/grid.hpp"

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

GridDesc grid2d(int cells, double length, double ox, double oy) {
    GridDesc g;
    g.dim = 2;
    g.extent = {cells + 1, cells + 1};
    g.spacing = length / cells;
    g.origin = {ox, oy};
    return g;
}

}  // namespace

TEST_CASE("unit-speed 1D depth is the signed coordinate, exactly on nodes") {
    GridDesc g = grid1d(400, 8.0, -4.0);
    Medium med = constant_medium(g, 1.0);
    Box theta;
    theta.lo = {0.0, 0.0};
    theta.hi = {3.0, 0.0};
    DepthField d = compute_depth(theta, med);
    for (int i = 0; i < g.extent[0]; ++i) {
        double x = g.x(i);
        double expect = x < 0.0 ? x : (x <= 1.5 ? x : std::min(x, 3.0 - x));
        if (x > 3.0) expect = 3.0 - x;
        REQUIRE(d.d(i) == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("1D layered depth matches the trapezoid quadrature of 1/c") {
    GridDesc g = grid1d(600, 9.0, -3.0);
    LayeredProfile prof;
    prof.interfaces = {1.0, 2.0};
    prof.speeds = {1.0, 2.0, 0.5};
    Medium med = rasterize_layered(g, prof);
    Box theta;
    theta.lo = {0.0, 0.0};
    theta.hi = {5.5, 0.0};
    DepthField d = compute_depth(theta, med);
    // trapezoid cumulative integral of 1/c from either boundary of Theta
    std::vector<double> cum(g.extent[0], 0.0);
    int i0 = static_cast<int>(std::lround((0.0 - g.origin[0]) / g.spacing));
    int i1 = static_cast<int>(std::lround((5.5 - g.origin[0]) / g.spacing));
    for (int i = i0 + 1; i < g.extent[0]; ++i)
        cum[i] = cum[i - 1] + 0.5 * (1.0 / med.c(i - 1) + 1.0 / med.c(i)) * g.spacing;
    for (int i = i0; i <= i1; ++i) {
        double expect = std::min(cum[i], cum[i1] - cum[i]);
        REQUIRE(d.d(i) == Catch::Approx(expect).margin(2 * g.spacing));
    }
}

TEST_CASE("2D half-plane depth is the signed distance to the line") {
    GridDesc g = grid2d(160, 4.0, -2.0, -2.0);
    Medium med = constant_medium(g, 1.0);
    Box theta;
    theta.lo = {-0.5, -1.9};
    theta.hi = {1.9, 1.9};  // vertical edge at x=-0.5 is the nearby boundary
    DepthField d = compute_depth(theta, med);
    for (int j = 40; j < 120; ++j)
        for (int i = 40; i < 100; ++i) {
            double x = g.x(i), y = g.y(j);
            double expect = std::min({x + 0.5, 1.9 - x, y + 1.9, 1.9 - y});
            if (!theta.contains(x, y, 2)) continue;
            if (expect != x + 0.5) continue;  // compare only where the straight edge wins
            REQUIRE(d.d(i, j) == Catch::Approx(expect).margin(4 * g.spacing));
        }
}

TEST_CASE("level masks partition and nest monotonically") {
    GridDesc g = grid1d(300, 6.0, -3.0);
    Medium med = constant_medium(g, 1.0);
    Box theta;
    theta.lo = {0.0, 0.0};
    theta.hi = {2.0, 0.0};
    DepthField d = compute_depth(theta, med);

    Mask in0 = level_mask(d, 0.0, MaskSide::inside);
    Mask out0 = level_mask(d, 0.0, MaskSide::outside);
    for (std::size_t k = 0; k < in0.size(); ++k) REQUIRE(in0[k] + out0[k] == 1);

    Mask in_early = level_mask(d, 0.3, MaskSide::inside);
    Mask in_late = level_mask(d, 0.8, MaskSide::inside);
    for (std::size_t k = 0; k < in_early.size(); ++k)
        if (in_late[k]) REQUIRE(in_early[k]);  // t1 < t2 => mask(t2) subset of mask(t1)

    // definitional split at level T
    double T = 0.5;
    Mask inT = level_mask(d, T, MaskSide::inside);
    for (std::size_t k = 0; k < inT.size(); ++k) {
        if (inT[k]) REQUIRE(d.d[k] >= T);
        else REQUIRE(d.d[k] < T);
    }
}

TEST_CASE("non-positive speed is rejected") {
    GridDesc g = grid1d(50, 1.0, 0.0);
    Medium med = constant_medium(g, 1.0);
    med.c(10) = 0.0;
    Box theta;
    theta.lo = {0.2, 0.0};
    theta.hi = {0.8, 0.0};
    REQUIRE_THROWS_AS(compute_depth(theta, med), Error);
}
