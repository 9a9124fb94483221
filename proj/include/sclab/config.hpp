#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sclab/depth.hpp"
#include "sclab/grid.hpp"
#include "sclab/io.hpp"

namespace sclab {

// Experiment configuration, read from a flat `key = value` text file.
// Unknown keys are rejected; # starts a comment. Vector values are
// whitespace-separated.
struct RunConfig {
    GridDesc grid;
    Medium medium;
    DomainNest nest;
    double cfl = 0.45;
    int k_max = 30;
    double solver_tol = 1e-10;
    unsigned long long seed = 1234;
    std::string out_dir = "out";
    std::string medium_kind = "layered";  // layered | constant | file

    void validate() const {
        grid.validate();
        medium.validate();
        require(cfl > 0.0 && cfl < 1.0, "config: cfl must lie in (0,1)");
        require(k_max >= 0, "config: k_max must be >= 0");
        nest.validate(grid);
        double margin = boundary_to_theta_distance(nest.theta, medium);
        require(margin > 2.0 * nest.T,
                "config: travel-time margin violated, need d(bdry Upsilon, Theta) > 2T but "
                "d = " + std::to_string(margin) + " with 2T = " + std::to_string(2.0 * nest.T));
    }
};

namespace detail {

struct KvFile {
    std::map<std::string, std::string> kv;
    std::string path;

    bool has(const std::string& k) const { return kv.count(k) > 0; }
    std::string str(const std::string& k, const std::string& fallback = "") const {
        auto it = kv.find(k);
        return it == kv.end() ? fallback : it->second;
    }
    double num(const std::string& k, double fallback) const {
        auto it = kv.find(k);
        if (it == kv.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw Error("config: key '" + k + "' is not a number in " + path);
        }
    }
    double num_required(const std::string& k) const {
        require(has(k), "config: missing required key '" + k + "' in " + path);
        return num(k, 0.0);
    }
    std::vector<double> nums(const std::string& k) const {
        std::vector<double> out;
        auto it = kv.find(k);
        if (it == kv.end()) return out;
        std::istringstream ss(it->second);
        double v;
        while (ss >> v) out.push_back(v);
        return out;
    }
};

inline KvFile parse_kv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "config: cannot open " + path);
    KvFile f;
    f.path = path;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            // only whitespace allowed
            for (char c : line)
                require(std::isspace(static_cast<unsigned char>(c)),
                        "config: malformed line " + std::to_string(lineno) + " in " + path);
            continue;
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        require(!key.empty(), "config: empty key on line " + std::to_string(lineno));
        f.kv[key] = val;
    }
    return f;
}

inline Box parse_box(const KvFile& f, const std::string& key, int dim) {
    std::vector<double> v = f.nums(key);
    require(!v.empty(), "config: missing box '" + key + "'");
    Box b;
    if (dim == 1) {
        require(v.size() == 2, "config: box '" + key + "' needs 'lo hi' in 1D");
        b.lo = {v[0], 0.0};
        b.hi = {v[1], 0.0};
    } else {
        require(v.size() == 4, "config: box '" + key + "' needs 'lo_x lo_y hi_x hi_y' in 2D");
        b.lo = {v[0], v[1]};
        b.hi = {v[2], v[3]};
    }
    return b;
}

}  // namespace detail

inline RunConfig load_config(const std::string& path) {
    detail::KvFile f = detail::parse_kv(path);
    const std::vector<std::string> known = {
        "dim",      "cells",  "cells_y", "length",     "length_y", "origin",     "origin_y",
        "T",        "cfl",    "k_max",   "solver_tol", "seed",     "out",        "medium",
        "speed",    "interfaces", "speeds", "layer_axis", "field_file", "theta",  "theta_inner",
        "theta_mid", "omega"};
    for (const auto& [k, v] : f.kv) {
        bool ok = false;
        for (const auto& kk : known) ok = ok || kk == k;
        require(ok, "config: unknown key '" + k + "' in " + path);
    }

    RunConfig cfg;
    int dim = static_cast<int>(f.num("dim", 1));
    int cells = static_cast<int>(f.num_required("cells"));
    double length = f.num_required("length");
    cfg.grid.dim = dim;
    cfg.grid.extent[0] = cells + 1;
    cfg.grid.extent[1] = dim == 2 ? static_cast<int>(f.num("cells_y", cells)) + 1 : 1;
    cfg.grid.spacing = length / cells;
    cfg.grid.origin = {f.num("origin", 0.0), f.num("origin_y", 0.0)};
    if (dim == 2) {
        double ly = f.num("length_y", length);
        require(std::abs(ly / (cfg.grid.extent[1] - 1) - cfg.grid.spacing) < 1e-12,
                "config: 2D grids must be square-celled (length_y/cells_y == length/cells)");
    }
    cfg.grid.validate();

    cfg.medium_kind = f.str("medium", "layered");
    if (cfg.medium_kind == "constant") {
        cfg.medium = constant_medium(cfg.grid, f.num("speed", 1.0));
    } else if (cfg.medium_kind == "layered") {
        LayeredProfile prof;
        prof.axis = static_cast<int>(f.num("layer_axis", 0));
        prof.interfaces = f.nums("interfaces");
        prof.speeds = f.nums("speeds");
        if (prof.interfaces.empty() && prof.speeds.size() <= 1) {
            cfg.medium = constant_medium(cfg.grid, prof.speeds.empty() ? 1.0 : prof.speeds[0]);
        } else {
            cfg.medium = rasterize_layered(cfg.grid, prof);
        }
    } else if (cfg.medium_kind == "file") {
        cfg.medium.c = load_field_on(cfg.grid, f.str("field_file"));
    } else {
        throw Error("config: medium must be layered, constant or file");
    }

    cfg.nest.T = f.num_required("T");
    cfg.nest.theta = detail::parse_box(f, "theta", dim);
    auto shrink = [&](const Box& outer, double frac) {
        Box b = outer;
        for (int a = 0; a < dim; ++a) {
            double w = outer.hi[a] - outer.lo[a];
            b.lo[a] += frac * w;
            b.hi[a] -= frac * w;
        }
        return b;
    };
    cfg.nest.theta_mid = f.has("theta_mid") ? detail::parse_box(f, "theta_mid", dim)
                                            : shrink(cfg.nest.theta, 0.02);
    cfg.nest.theta_inner = f.has("theta_inner") ? detail::parse_box(f, "theta_inner", dim)
                                                : shrink(cfg.nest.theta, 0.04);
    cfg.nest.omega = f.has("omega") ? detail::parse_box(f, "omega", dim)
                                    : shrink(cfg.nest.theta, 0.06);

    cfg.cfl = f.num("cfl", 0.45);
    cfg.k_max = static_cast<int>(f.num("k_max", 30));
    cfg.solver_tol = f.num("solver_tol", 1e-10);
    cfg.seed = static_cast<unsigned long long>(f.num("seed", 1234));
    cfg.out_dir = f.str("out", "out");

    cfg.validate();
    return cfg;
}

}  // namespace sclab
