#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "sclab/grid.hpp"

namespace sclab {

// Signed travel-time depth d*_Theta: positive inside Theta, negative outside,
// zero on the boundary. Computed as the first-order fast-marching (eikonal
// |grad d| = 1/c) distance to the boundary of the Theta box, then signed by
// box membership.
struct DepthField {
    ScalarField d;   // time units
    Box source;      // boundary this depth measures from

    // Theta_t = {d* >= t}; ties go inside.
    Mask inside(double t) const {
        Mask m(d.size(), 0);
        for (std::size_t k = 0; k < d.size(); ++k) m[k] = d[k] >= t ? 1 : 0;
        return m;
    }
    // Theta_t^star = complement within Upsilon.
    Mask outside(double t) const {
        Mask m(d.size(), 0);
        for (std::size_t k = 0; k < d.size(); ++k) m[k] = d[k] >= t ? 0 : 1;
        return m;
    }
};

enum class MaskSide { inside, outside };

inline Mask level_mask(const DepthField& depth, double t, MaskSide side) {
    return side == MaskSide::inside ? depth.inside(t) : depth.outside(t);
}

namespace detail {

struct HeapEntry {
    double d;
    std::size_t k;
    bool operator>(const HeapEntry& o) const { return d > o.d; }
};

// Quadratic eikonal update at node (i,j) with slowness s and the smallest
// accepted neighbor values per axis.
inline double eikonal_update(double ax, double ay, double h, double s, int dim) {
    const double inf = std::numeric_limits<double>::infinity();
    double lo = std::min(ax, ay), hi = std::max(ax, ay);
    if (dim == 1 || hi == inf) return lo + h * s;
    if (hi - lo >= h * s) return lo + h * s;
    // two-sided update: (d-ax)^2 + (d-ay)^2 = h^2 s^2
    double sum = ax + ay;
    double diff = ax - ay;
    double rad = 2.0 * h * h * s * s - diff * diff;
    return 0.5 * (sum + std::sqrt(std::max(rad, 0.0)));
}

}  // namespace detail

// Unsigned fast-marching travel time from seed values (nodes with finite
// entries in `seed` are frozen at those values).
inline ScalarField fast_march(const GridDesc& g, const ScalarField& slowness,
                              const std::vector<double>& seed) {
    const double inf = std::numeric_limits<double>::infinity();
    ScalarField d(g, inf);
    std::vector<uint8_t> accepted(g.size(), 0);
    std::priority_queue<detail::HeapEntry, std::vector<detail::HeapEntry>, std::greater<>> heap;

    for (std::size_t k = 0; k < g.size(); ++k)
        if (std::isfinite(seed[k])) {
            d[k] = seed[k];
            heap.push({seed[k], k});
        }

    const int nx = g.extent[0];
    const int ny = g.dim == 2 ? g.extent[1] : 1;
    auto relax = [&](int i, int j) {
        std::size_t k = g.index(i, j);
        if (accepted[k]) return;
        double ax = inf, ay = inf;
        if (i > 0) ax = std::min(ax, d[g.index(i - 1, j)]);
        if (i + 1 < nx) ax = std::min(ax, d[g.index(i + 1, j)]);
        if (g.dim == 2) {
            if (j > 0) ay = std::min(ay, d[g.index(i, j - 1)]);
            if (j + 1 < ny) ay = std::min(ay, d[g.index(i, j + 1)]);
        }
        double cand = detail::eikonal_update(ax, ay, g.spacing, slowness[k], g.dim);
        if (cand < d[k]) {
            d[k] = cand;
            heap.push({cand, k});
        }
    };

    while (!heap.empty()) {
        auto [dist, k] = heap.top();
        heap.pop();
        if (accepted[k] || dist > d[k]) continue;
        accepted[k] = 1;
        int i = static_cast<int>(k % nx), j = static_cast<int>(k / nx);
        if (i > 0) relax(i - 1, j);
        if (i + 1 < nx) relax(i + 1, j);
        if (g.dim == 2) {
            if (j > 0) relax(i, j - 1);
            if (j + 1 < ny) relax(i, j + 1);
        }
    }
    return d;
}

// Slowness at the midpoint between two nodes; for layered media along an axis
// this makes the 1D cumulative distance the exact trapezoid quadrature of 1/c.
inline ScalarField face_slowness_seed(const GridDesc& g, const Medium& m, const Box& theta,
                                      std::vector<double>& seed) {
    ScalarField slowness(g);
    for (std::size_t k = 0; k < g.size(); ++k) slowness[k] = 1.0 / m.c[k];

    const int nx = g.extent[0];
    const int ny = g.dim == 2 ? g.extent[1] : 1;
    seed.assign(g.size(), std::numeric_limits<double>::infinity());

    // Seed nodes with the sub-cell distance to the nearest box face, measured
    // with the local slowness. Nodes exactly on a face get zero.
    auto face_dist = [&](double x, double lo, double hi) {
        return std::min(std::abs(x - lo), std::abs(x - hi));
    };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            double fx = face_dist(g.x(i), theta.lo[0], theta.hi[0]);
            double f = fx;
            if (g.dim == 2) f = std::min(f, face_dist(g.y(j), theta.lo[1], theta.hi[1]));
            if (f <= g.spacing * (1.0 + 1e-12)) {
                std::size_t k = g.index(i, j);
                seed[k] = f * slowness[k];
            }
        }
    return slowness;
}

inline DepthField compute_depth(const Box& theta, const Medium& m) {
    m.validate();
    const GridDesc& g = m.c.grid;
    std::vector<double> seed;
    ScalarField slowness = face_slowness_seed(g, m, theta, seed);

    // 1D: exact cumulative trapezoid sums from the seeded faces, marched both
    // ways; the heap version would give the same values, this keeps them exact.
    ScalarField dist = fast_march(g, slowness, seed);
    if (g.dim == 1) {
        const int nx = g.extent[0];
        for (int pass = 0; pass < 2; ++pass)
            for (int s = 0; s < nx; ++s) {
                int i = pass == 0 ? s : nx - 1 - s;
                int prev = pass == 0 ? i - 1 : i + 1;
                if (prev < 0 || prev >= nx) continue;
                double w = 0.5 * (slowness[g.index(prev)] + slowness[g.index(i)]) * g.spacing;
                dist[g.index(i)] = std::min(dist[g.index(i)], dist[g.index(prev)] + w);
            }
    }

    DepthField out;
    out.source = theta;
    out.d = ScalarField(g);
    const int nx = g.extent[0];
    const int ny = g.dim == 2 ? g.extent[1] : 1;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            std::size_t k = g.index(i, j);
            bool in = theta.contains(g.x(i), g.dim == 2 ? g.y(j) : 0.0, g.dim);
            out.d[k] = in ? dist[k] : -dist[k];
        }
    return out;
}

// Travel-time distance from the Upsilon boundary ring to the closure of Theta;
// used by config validation (d(bdry Upsilon, Theta) > 2T).
inline double boundary_to_theta_distance(const Box& theta, const Medium& m) {
    const GridDesc& g = m.c.grid;
    ScalarField slowness(g);
    for (std::size_t k = 0; k < g.size(); ++k) slowness[k] = 1.0 / m.c[k];
    std::vector<double> seed(g.size(), std::numeric_limits<double>::infinity());
    const int nx = g.extent[0];
    const int ny = g.dim == 2 ? g.extent[1] : 1;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            if (g.boundary_node(i, j)) seed[g.index(i, j)] = 0.0;
    ScalarField dist = fast_march(g, slowness, seed);
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            if (theta.contains(g.x(i), g.dim == 2 ? g.y(j) : 0.0, g.dim))
                best = std::min(best, dist[g.index(i, j)]);
    return best;
}

}  // namespace sclab
