#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "sclab/depth.hpp"
#include "sclab/grid.hpp"
#include "sclab/wave.hpp"

namespace sclab {

// Orthogonal projections of the discrete energy space at level t.
//
// Node classes for Theta_t = {d* >= t}:
//   interior  - inside nodes with all neighbors inside
//   band      - the outermost layer of inside nodes (carries the trace)
//   exterior  - outside nodes (the Upsilon boundary ring is pinned to zero)
//
// pibar_t h keeps h on the inside, replaces u0 outside by the discrete
// harmonic extension of its band values, and zeroes u1 outside. With the band
// holding the trace, pibar/pistar are exact orthogonal projections for the
// discrete energy inner product; the harmonic extension solve is a cached
// sparse Cholesky factorization of the 5-point (3-point in 1D) Laplacian.
class LevelProjector {
public:
    LevelProjector(const GridDesc& g, const DepthField& depth, double t)
        : LevelProjector(g, depth.inside(t), t) {}

    // mask-based variant: "inside" is the kept region, the projection moves
    // data onto its complement
    LevelProjector(const GridDesc& g, Mask inside, double t = 0.0) : grid_(g), level_(t) {
        const int nx = g.extent[0];
        const int ny = g.dim == 2 ? g.extent[1] : 1;
        inside_ = std::move(inside);
        require(inside_.size() == g.size(), "LevelProjector: mask size mismatch");
        band_.assign(g.size(), 0);
        auto is_in = [&](int i, int j) { return inside_[g.index(i, j)] != 0; };
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                if (!is_in(i, j)) continue;
                bool edge = false;
                if (i > 0 && !is_in(i - 1, j)) edge = true;
                if (i + 1 < nx && !is_in(i + 1, j)) edge = true;
                if (g.dim == 2 && j > 0 && !is_in(i, j - 1)) edge = true;
                if (g.dim == 2 && j + 1 < ny && !is_in(i, j + 1)) edge = true;
                if (edge) band_[g.index(i, j)] = 1;
            }

        // unknowns: exterior nodes off the Upsilon boundary ring
        unknown_.assign(g.size(), -1);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                std::size_t k = g.index(i, j);
                if (!inside_[k] && !g.boundary_node(i, j)) {
                    unknown_[k] = n_unknowns_;
                    ++n_unknowns_;
                }
            }
        if (n_unknowns_ > 0) factorize();
    }

    double level() const { return level_; }
    const Mask& inside_mask() const { return inside_; }
    const Mask& band_mask() const { return band_; }

    // pibar_t
    CauchyData project_inside(const CauchyData& h) const {
        require_same_grid(h.grid(), grid_, "project_inside");
        CauchyData out = h;
        extend_harmonic(out.u0);
        for (std::size_t k = 0; k < out.u1.size(); ++k)
            if (!inside_[k]) out.u1[k] = 0.0;
        return out;
    }

    // pistar_t = I - pibar_t; vanishes identically on Theta_t and its u0 has
    // zero trace on the band.
    CauchyData project_outside(const CauchyData& h) const {
        CauchyData in = project_inside(h);
        CauchyData out = h;
        out -= in;
        return out;
    }

private:
    void factorize() {
        const GridDesc& g = grid_;
        const int nx = g.extent[0];
        const int ny = g.dim == 2 ? g.extent[1] : 1;
        using Trip = Eigen::Triplet<double>;
        std::vector<Trip> trips;
        trips.reserve(static_cast<std::size_t>(n_unknowns_) * 5);
        const int stencil = 2 * g.dim;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                int row = unknown_[g.index(i, j)];
                if (row < 0) continue;
                trips.emplace_back(row, row, static_cast<double>(stencil));
                auto couple = [&](int ii, int jj) {
                    int col = unknown_[g.index(ii, jj)];
                    if (col >= 0) trips.emplace_back(row, col, -1.0);
                };
                if (i > 0) couple(i - 1, j);
                if (i + 1 < nx) couple(i + 1, j);
                if (g.dim == 2 && j > 0) couple(i, j - 1);
                if (g.dim == 2 && j + 1 < ny) couple(i, j + 1);
            }
        Eigen::SparseMatrix<double> A(n_unknowns_, n_unknowns_);
        A.setFromTriplets(trips.begin(), trips.end());
        solver_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
        solver_->compute(A);
        require(solver_->info() == Eigen::Success,
                "harmonic extension: Laplace factorization failed at level t=" +
                    std::to_string(level_));
    }

    // replace u0 outside Theta_t by the harmonic extension of its band values
    void extend_harmonic(ScalarField& u0) const {
        if (n_unknowns_ == 0) return;
        const GridDesc& g = grid_;
        const int nx = g.extent[0];
        const int ny = g.dim == 2 ? g.extent[1] : 1;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_unknowns_);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                int row = unknown_[g.index(i, j)];
                if (row < 0) continue;
                auto add_bc = [&](int ii, int jj) {
                    std::size_t kk = g.index(ii, jj);
                    if (inside_[kk]) rhs[row] += u0[kk];  // band value (interior can't touch)
                };
                if (i > 0) add_bc(i - 1, j);
                if (i + 1 < nx) add_bc(i + 1, j);
                if (g.dim == 2 && j > 0) add_bc(i, j - 1);
                if (g.dim == 2 && j + 1 < ny) add_bc(i, j + 1);
            }
        Eigen::VectorXd x = solver_->solve(rhs);
        require(solver_->info() == Eigen::Success, "harmonic extension: solve failed");
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                std::size_t k = g.index(i, j);
                if (inside_[k]) continue;
                u0[k] = g.boundary_node(i, j) ? 0.0 : x[unknown_[k]];
            }
    }

    GridDesc grid_;
    double level_;
    Mask inside_, band_;
    std::vector<int> unknown_;
    int n_unknowns_ = 0;
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver_;
};

// max |discrete Laplacian of u0| over stencil-interior nodes of W (scaled by
// h^2, so an affine field gives 0 and x^2 gives 2 h^2), plus max |u1| over W.
// Zero iff h is stationary harmonic on W discretely.
struct HarmonicResidual {
    double lap = 0.0;  // h^2-scaled
    double u1 = 0.0;
    double total() const { return lap + u1; }
};

inline HarmonicResidual stationary_harmonic_residual(const CauchyData& h, const Mask& W) {
    const GridDesc& g = h.grid();
    require(W.size() == g.size(), "stationary_harmonic_residual: mask size");
    const int nx = g.extent[0];
    const int ny = g.dim == 2 ? g.extent[1] : 1;
    HarmonicResidual r;
    auto in = [&](int i, int j) { return W[g.index(i, j)] != 0; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            if (!in(i, j)) continue;
            r.u1 = std::max(r.u1, std::abs(h.u1(i, j)));
            if (g.boundary_node(i, j)) continue;
            bool interior = in(i - 1, j) && in(i + 1, j);
            if (g.dim == 2) interior = interior && in(i, j - 1) && in(i, j + 1);
            if (!interior) continue;
            double lap;
            if (g.dim == 1)
                lap = h.u0(i - 1, j) - 2.0 * h.u0(i, j) + h.u0(i + 1, j);
            else
                lap = h.u0(i - 1, j) + h.u0(i + 1, j) + h.u0(i, j - 1) + h.u0(i, j + 1) -
                      4.0 * h.u0(i, j);
            r.lap = std::max(r.lap, std::abs(lap));
        }
    return r;
}

// Shared geometry + projector cache for one experiment: depth field for Theta
// and lazily built level projectors.
class ProjectionContext {
public:
    ProjectionContext(const Box& theta, const Medium& medium)
        : medium_(medium), depth_(compute_depth(theta, medium)) {}

    const DepthField& depth() const { return depth_; }
    const Medium& medium() const { return medium_; }

    const LevelProjector& at(double t) const {
        long long key = std::llround(t * 1e9);
        auto it = cache_.find(key);
        if (it == cache_.end())
            it = cache_.emplace(key, std::make_unique<LevelProjector>(medium_.c.grid, depth_, t)).first;
        return *it->second;
    }

    CauchyData project_inside(const CauchyData& h, double t = 0.0) const {
        return at(t).project_inside(h);
    }
    CauchyData project_outside(const CauchyData& h, double t = 0.0) const {
        return at(t).project_outside(h);
    }

    // 1D half-line geometry: projection onto data supported in the collar
    // left of Theta alone, treating the deep side as gone for good.
    const LevelProjector& left_of_theta() const {
        const GridDesc& g = medium_.c.grid;
        require(g.dim == 1, "left_of_theta: 1D only");
        if (!left_) {
            Mask inside(g.size(), 0);
            for (int i = 0; i < g.extent[0]; ++i)
                inside[g.index(i)] = g.x(i) >= depth_.source.lo[0] ? 1 : 0;
            left_ = std::make_unique<LevelProjector>(g, std::move(inside));
        }
        return *left_;
    }

private:
    Medium medium_;
    DepthField depth_;
    mutable std::map<long long, std::unique_ptr<LevelProjector>> cache_;
    mutable std::unique_ptr<LevelProjector> left_;
};

}  // namespace sclab
