#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sclab {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

// Uniform node-centered grid over a box. Nodes at origin + i*spacing,
// i = 0..extent-1 per axis; the outermost node ring is the Dirichlet
// boundary of the computational domain.
struct GridDesc {
    int dim = 1;                      // 1 or 2
    std::array<int, 2> extent{0, 1};  // node counts per axis (extent[1]=1 in 1D)
    double spacing = 1.0;
    std::array<double, 2> origin{0.0, 0.0};

    std::size_t size() const {
        return static_cast<std::size_t>(extent[0]) * static_cast<std::size_t>(dim == 2 ? extent[1] : 1);
    }
    std::size_t index(int i, int j = 0) const {
        return static_cast<std::size_t>(j) * extent[0] + i;
    }
    double x(int i) const { return origin[0] + i * spacing; }
    double y(int j) const { return origin[1] + j * spacing; }
    bool boundary_node(int i, int j = 0) const {
        if (i == 0 || i == extent[0] - 1) return true;
        if (dim == 2 && (j == 0 || j == extent[1] - 1)) return true;
        return false;
    }
    bool operator==(const GridDesc& o) const {
        return dim == o.dim && extent == o.extent && spacing == o.spacing && origin == o.origin;
    }
    bool operator!=(const GridDesc& o) const { return !(*this == o); }

    void validate() const {
        require(dim == 1 || dim == 2, "grid: dim must be 1 or 2");
        require(spacing > 0.0, "grid: spacing must be > 0");
        require(extent[0] >= 3, "grid: need at least 3 nodes per axis");
        if (dim == 2) require(extent[1] >= 3, "grid: need at least 3 nodes per axis");
        if (dim == 1) require(extent[1] == 1, "grid: extent[1] must be 1 in 1D");
    }
};

struct ScalarField {
    GridDesc grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const GridDesc& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

    double& operator()(int i, int j = 0) { return values[grid.index(i, j)]; }
    double operator()(int i, int j = 0) const { return values[grid.index(i, j)]; }
    double& operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }
    std::size_t size() const { return values.size(); }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_same_grid(const GridDesc& a, const GridDesc& b, const char* where) {
    if (a != b) throw Error(std::string(where) + ": grid descriptors differ");
}

using Mask = std::vector<uint8_t>;  // one flag per node

// Cauchy data h = (u0, u1): pressure and its time derivative.
// u0 is H^1_0(Upsilon): it vanishes on the boundary node ring.
struct CauchyData {
    ScalarField u0;
    ScalarField u1;

    CauchyData() = default;
    explicit CauchyData(const GridDesc& g) : u0(g), u1(g) {}
    CauchyData(ScalarField p, ScalarField v) : u0(std::move(p)), u1(std::move(v)) {
        require_same_grid(u0.grid, u1.grid, "CauchyData");
    }

    const GridDesc& grid() const { return u0.grid; }

    CauchyData& operator+=(const CauchyData& o) {
        require_same_grid(grid(), o.grid(), "CauchyData+=");
        for (std::size_t k = 0; k < u0.size(); ++k) u0[k] += o.u0[k];
        for (std::size_t k = 0; k < u1.size(); ++k) u1[k] += o.u1[k];
        return *this;
    }
    CauchyData& operator-=(const CauchyData& o) {
        require_same_grid(grid(), o.grid(), "CauchyData-=");
        for (std::size_t k = 0; k < u0.size(); ++k) u0[k] -= o.u0[k];
        for (std::size_t k = 0; k < u1.size(); ++k) u1[k] -= o.u1[k];
        return *this;
    }
    CauchyData& operator*=(double s) {
        for (double& v : u0.values) v *= s;
        for (double& v : u1.values) v *= s;
        return *this;
    }
};

inline CauchyData operator+(CauchyData a, const CauchyData& b) { return a += b; }
inline CauchyData operator-(CauchyData a, const CauchyData& b) { return a -= b; }
inline CauchyData operator*(double s, CauchyData a) { return a *= s; }

// nu: (f0, f1) -> (f0, -f1). Involution.
inline CauchyData time_reverse(CauchyData h) {
    for (double& v : h.u1.values) v = -v;
    return h;
}

// Piecewise-constant layered profile along one axis: speeds[0] left of
// interfaces[0], speeds[k] between interfaces[k-1] and interfaces[k], ...
struct LayeredProfile {
    int axis = 0;
    std::vector<double> interfaces;  // strictly increasing coordinates
    std::vector<double> speeds;      // size = interfaces.size() + 1

    double speed_at(double coord) const {
        std::size_t k = 0;
        while (k < interfaces.size() && coord > interfaces[k]) ++k;
        return speeds[k];
    }
    void validate() const {
        require(speeds.size() == interfaces.size() + 1, "layered: need one more speed than interfaces");
        for (std::size_t k = 0; k + 1 < interfaces.size(); ++k)
            require(interfaces[k] < interfaces[k + 1], "layered: interfaces must increase");
        for (double s : speeds) require(s > 0.0, "layered: speeds must be > 0");
    }
};

struct Medium {
    ScalarField c;  // wave speed per node
    std::optional<LayeredProfile> layered;

    double c_max() const {
        double m = 0.0;
        for (double v : c.values) m = std::max(m, v);
        return m;
    }
    double c_min() const {
        double m = std::numeric_limits<double>::infinity();
        for (double v : c.values) m = std::min(m, v);
        return m;
    }
    void validate() const {
        require(c.all_finite(), "medium: c must be finite");
        require(c_min() > 0.0, "medium: c and 1/c must be bounded (c > 0 everywhere)");
    }
};

// Exact rasterization of a layered profile. A node sitting exactly on an
// interface gets the harmonic mean of the two adjacent layer speeds squared,
// matching the heterogeneous-stencil convention at interface nodes.
inline Medium rasterize_layered(const GridDesc& g, const LayeredProfile& prof) {
    prof.validate();
    Medium m;
    m.c = ScalarField(g);
    m.layered = prof;
    const double tol = 1e-12 * g.spacing;
    auto node_speed = [&](double coord) {
        for (std::size_t k = 0; k < prof.interfaces.size(); ++k) {
            if (std::abs(coord - prof.interfaces[k]) < tol) {
                double a = prof.speeds[k] * prof.speeds[k];
                double b = prof.speeds[k + 1] * prof.speeds[k + 1];
                return std::sqrt(2.0 * a * b / (a + b));
            }
        }
        return prof.speed_at(coord);
    };
    for (int j = 0; j < (g.dim == 2 ? g.extent[1] : 1); ++j)
        for (int i = 0; i < g.extent[0]; ++i) {
            double coord = prof.axis == 0 ? g.x(i) : g.y(j);
            m.c(i, j) = node_speed(coord);
        }
    return m;
}

inline Medium constant_medium(const GridDesc& g, double speed) {
    Medium m;
    m.c = ScalarField(g, speed);
    return m;
}

// Axis-aligned box, used for the nested domains.
struct Box {
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{0.0, 0.0};

    bool contains(double x, double y, int dim) const {
        if (x < lo[0] || x > hi[0]) return false;
        if (dim == 2 && (y < lo[1] || y > hi[1])) return false;
        return true;
    }
    bool inside(const Box& outer, int dim) const {
        if (lo[0] < outer.lo[0] || hi[0] > outer.hi[0]) return false;
        if (dim == 2 && (lo[1] < outer.lo[1] || hi[1] > outer.hi[1])) return false;
        return true;
    }
};

// Nested domains Omega <= Theta' <= Theta'' <= Theta inside Upsilon (the grid box).
struct DomainNest {
    Box omega;
    Box theta_inner;   // Theta'
    Box theta_mid;     // Theta''
    Box theta;
    double T = 0.0;    // control time (possibly snapped by the propagator)

    void validate(const GridDesc& g) const {
        Box upsilon;
        upsilon.lo = {g.origin[0], g.origin[1]};
        upsilon.hi = {g.x(g.extent[0] - 1), g.dim == 2 ? g.y(g.extent[1] - 1) : 0.0};
        require(omega.inside(theta_inner, g.dim), "nesting violated: Omega must lie inside Theta'");
        require(theta_inner.inside(theta_mid, g.dim), "nesting violated: Theta' must lie inside Theta''");
        require(theta_mid.inside(theta, g.dim), "nesting violated: Theta'' must lie inside Theta");
        require(theta.inside(upsilon, g.dim), "nesting violated: Theta must lie inside Upsilon");
        require(T > 0.0, "control time T must be > 0");
    }
};

}  // namespace sclab
