#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "sclab/grid.hpp"
#include "sclab/rational.hpp"

namespace sclab {

// Symbol-level model of wave propagation in a layered half-space
// Theta = {z > 0}: broken rays with energy-normalized reflection/transmission
// amplitudes, per horizontal slowness p (conserved, so everything decouples
// per p). Depth z grows into the medium; layer l occupies
// (iface_depth[l-1], iface_depth[l]), layer 0 is unbounded above and layer m
// unbounded below.
struct LayeredModel {
    std::vector<double> iface_depth;  // increasing, all > 0
    std::vector<double> speeds;       // m + 1 layer speeds
    double theta_prime_depth = 0.0;   // Theta' boundary plane (z units)
    double glancing_deg = 2.0;        // angular cutoff around interface tangency

    int layers() const { return static_cast<int>(speeds.size()); }
    int layer_of(double z) const {
        int l = 0;
        while (l < static_cast<int>(iface_depth.size()) && z > iface_depth[l]) ++l;
        return l;
    }
    void validate() const {
        require(speeds.size() == iface_depth.size() + 1, "layered model: speeds/interfaces mismatch");
        for (std::size_t i = 0; i + 1 < iface_depth.size(); ++i)
            require(iface_depth[i] < iface_depth[i + 1], "layered model: interface order");
        for (double c : speeds) require(c > 0.0, "layered model: speeds must be positive");
        for (double z : iface_depth) require(z > 0.0, "layered model: interfaces must lie inside Theta");
    }

    // vertical slowness q = sqrt(1/c^2 - p^2); <= 0 means evanescent
    double q2(int layer, double p) const {
        double c = speeds[layer];
        return 1.0 / (c * c) - p * p;
    }
    bool hyperbolic(int layer, double p) const { return q2(layer, p) > 0.0; }
    double q(int layer, double p) const { return std::sqrt(std::max(q2(layer, p), 0.0)); }
    // vertical transport speed dz/dt = c^2 q; transit time over dz is dz/(c^2 q)
    double vertical_speed(int layer, double p) const {
        return speeds[layer] * speeds[layer] * q(layer, p);
    }
    // travel time along the ray from depth z up to the Theta' plane, straight
    // ascent (the ray's own backward trace); infinite if blocked by evanescence
    double ascent_time(double z, double p) const {
        if (z <= theta_prime_depth) return 0.0;
        double t = 0.0;
        int l = layer_of(z);
        double cur = z;
        for (; l >= 0; --l) {
            double top = l == 0 ? theta_prime_depth : std::max(iface_depth[l - 1], theta_prime_depth);
            if (!hyperbolic(l, p)) return std::numeric_limits<double>::infinity();
            t += (cur - top) / vertical_speed(l, p);
            if (top <= theta_prime_depth + 1e-15) break;
            cur = top;
        }
        return t;
    }
};

// Covector in the doubled (two-sheet) phase space: position depth, vertical
// direction (+1 moving deeper, -1 moving up), fixed horizontal slowness.
struct Covector {
    double z = 0.0;
    int dir = +1;
    double p = 0.0;
    double t = 0.0;
};

struct RtCoefficients {
    double r = 0.0, t = 0.0;          // boundary amplitudes
    double r_energy = 0.0, t_energy = 0.0;  // flux-normalized pair, r_E^2 + t_E^2 = 1
    std::complex<double> r_complex{0.0, 0.0};
    bool evanescent = false;          // transmitted side evanescent (|r| = 1)
    bool glancing = false;            // within the angular cutoff of tangency
};

// Principal-symbol reflection/transmission amplitudes at a plane interface,
//   r = (q_in - q_out) / (q_in + q_out),  t = 2 q_in / (q_in + q_out),
// q = sqrt(c^-2 - p^2). Energy normalization multiplies t by sqrt(q_out/q_in)
// so that r_E^2 + t_E^2 = 1 in the doubly hyperbolic regime.
inline RtCoefficients rt_coefficients(double c_in, double c_out, double p,
                                      double glancing_deg = 2.0) {
    require(c_in > 0.0 && c_out > 0.0, "rt_coefficients: speeds must be positive");
    RtCoefficients out;
    double qi2 = 1.0 / (c_in * c_in) - p * p;
    double qo2 = 1.0 / (c_out * c_out) - p * p;
    require(qi2 > 0.0, "rt_coefficients: incident side is evanescent");
    double qi = std::sqrt(qi2);
    double sin_cut = std::sin(glancing_deg * M_PI / 180.0);
    // angle from the interface normal: cos(theta) = q c
    if (qi * c_in < sin_cut) out.glancing = true;
    if (qo2 <= 0.0) {
        double kappa = std::sqrt(-qo2);
        out.evanescent = true;
        out.r_complex = std::complex<double>(qi, -kappa) / std::complex<double>(qi, kappa);
        out.r = out.r_complex.real();
        out.r_energy = 1.0;
        out.t = out.t_energy = 0.0;
        return out;
    }
    double qo = std::sqrt(qo2);
    if (qo * c_out < sin_cut) out.glancing = true;
    out.r = (qi - qo) / (qi + qo);
    out.t = 2.0 * qi / (qi + qo);
    out.r_energy = out.r;
    out.t_energy = out.t * std::sqrt(qo / qi);
    out.r_complex = out.r;
    return out;
}

struct RayEvent {
    double time = 0.0;
    int iface = 0;
    char type = 'T';  // 'R' or 'T'
};

struct BrokenRay {
    Covector start;
    Covector terminal;
    std::vector<RayEvent> events;
    std::complex<double> amplitude{1.0, 0.0};  // energy-normalized
    bool alive = true;                          // false: terminated by a cutoff

    std::string code() const {
        std::string s;
        for (const auto& e : events) s.push_back(e.type);
        return s;
    }
};

struct RayFan {
    std::vector<BrokenRay> rays;      // alive leaves at the window end
    double truncated_mass = 0.0;      // |amp|^2 cut by the event budget
    double glancing_mass = 0.0;       // |amp|^2 terminated near tangency
    int evanescent_events = 0;

    double alive_mass() const {
        double s = 0.0;
        for (const auto& r : rays) s += std::norm(r.amplitude);
        return s;
    }
};

namespace detail {

struct RayState {
    Covector cov;
    std::complex<double> amp;
    std::vector<RayEvent> events;
};

// time to the next interface in the direction of motion; returns iface index
// or -1 when the ray runs without further events
inline int next_interface(const LayeredModel& m, const Covector& c, double& transit) {
    int l = m.layer_of(c.z);
    // on-interface positions are disambiguated by the direction of motion
    for (std::size_t i = 0; i < m.iface_depth.size(); ++i)
        if (std::abs(c.z - m.iface_depth[i]) < 1e-13) l = c.dir > 0 ? static_cast<int>(i) + 1 : static_cast<int>(i);
    int target = c.dir > 0 ? l : l - 1;
    if (target < 0 || target >= static_cast<int>(m.iface_depth.size())) return -1;
    double dz = std::abs(m.iface_depth[target] - c.z);
    transit = dz / m.vertical_speed(l, c.p);
    return target;
}

}  // namespace detail

// Every broken ray through eta within the time window, with exact event times
// and cumulative energy-normalized amplitudes.
inline RayFan trace_rays(const LayeredModel& model, const Covector& eta, double window,
                         int max_events) {
    model.validate();
    RayFan fan;
    std::vector<detail::RayState> stack{{eta, {1.0, 0.0}, {}}};
    while (!stack.empty()) {
        detail::RayState s = std::move(stack.back());
        stack.pop_back();
        double transit = 0.0;
        int iface = detail::next_interface(model, s.cov, transit);
        double remaining = window - s.cov.t;
        if (iface < 0 || transit >= remaining) {
            BrokenRay leaf;
            leaf.start = eta;
            leaf.terminal = s.cov;
            int l = model.layer_of(s.cov.z);
            leaf.terminal.z += s.cov.dir * model.vertical_speed(l, s.cov.p) * remaining;
            leaf.terminal.t = window;
            leaf.events = s.events;
            leaf.amplitude = s.amp;
            fan.rays.push_back(std::move(leaf));
            continue;
        }
        if (static_cast<int>(s.events.size()) >= max_events) {
            fan.truncated_mass += std::norm(s.amp);
            continue;
        }
        int l_in = s.cov.dir > 0 ? iface : iface + 1;
        int l_out = s.cov.dir > 0 ? iface + 1 : iface;
        RtCoefficients rt =
            rt_coefficients(model.speeds[l_in], model.speeds[l_out], s.cov.p, model.glancing_deg);
        if (rt.glancing) {
            fan.glancing_mass += std::norm(s.amp);
            continue;
        }
        double t_event = s.cov.t + transit;
        // reflected branch
        {
            detail::RayState r = s;
            r.cov.z = model.iface_depth[iface];
            r.cov.t = t_event;
            r.cov.dir = -s.cov.dir;
            r.amp = s.amp * (rt.evanescent ? rt.r_complex : std::complex<double>(rt.r_energy, 0.0));
            r.events.push_back({t_event, iface, 'R'});
            stack.push_back(std::move(r));
        }
        // transmitted branch
        if (!rt.evanescent) {
            detail::RayState t = s;
            t.cov.z = model.iface_depth[iface];
            t.cov.t = t_event;
            t.amp = s.amp * rt.t_energy;
            t.events.push_back({t_event, iface, 'T'});
            stack.push_back(std::move(t));
        } else {
            ++fan.evanescent_events;
        }
    }
    return fan;
}

// ---------------------------------------------------------------------------
// cotangent depth
// ---------------------------------------------------------------------------

// Shortest broken-ray time from the covector to the Theta' boundary plane,
// signed by base-point membership. Dijkstra over (breakpoint, motion)
// states; transmission edges require the destination layer to be hyperbolic.
inline double cotangent_depth(const LayeredModel& model, const Covector& eta) {
    model.validate();
    const double zb = model.theta_prime_depth;
    const double inf = std::numeric_limits<double>::infinity();

    // breakpoints: boundary plane + interfaces (only those below the plane matter)
    std::vector<double> bp{zb};
    for (double z : model.iface_depth)
        if (z > zb) bp.push_back(z);
    const int nb = static_cast<int>(bp.size());

    // state: (breakpoint index, motion up(0)/down(1)) = arriving there
    auto state_id = [&](int b, int up) { return 2 * b + up; };
    std::vector<double> dist(2 * nb, inf);
    using Q = std::pair<double, int>;
    std::priority_queue<Q, std::vector<Q>, std::greater<>> heap;

    auto travel = [&](double z_from, double z_to, double p) -> double {
        // straight run between adjacent breakpoints within one layer
        double zmid = 0.5 * (z_from + z_to);
        int l = model.layer_of(zmid);
        if (!model.hyperbolic(l, p)) return inf;
        return std::abs(z_to - z_from) / model.vertical_speed(l, p);
    };

    if (std::abs(eta.z - zb) <= 1e-13) return 0.0;
    if (eta.z < zb) {
        // outside: straight run down to the plane along the ray (no interfaces
        // above the plane in this model)
        int l = model.layer_of(eta.z);
        if (!model.hyperbolic(l, eta.p)) return -inf;
        return -(zb - eta.z) / model.vertical_speed(l, eta.p);
    }

    // seed: move up or down from eta to the first breakpoint either way
    {
        // up
        int b_up = -1;
        for (int b = nb - 1; b >= 0; --b)
            if (bp[b] < eta.z - 1e-13) {
                b_up = b;
                break;
            }
        if (b_up >= 0) {
            double t = travel(eta.z, bp[b_up], eta.p);
            if (t < dist[state_id(b_up, 0)]) {
                dist[state_id(b_up, 0)] = t;
                heap.push({t, state_id(b_up, 0)});
            }
        }
        // down
        int b_dn = -1;
        for (int b = 0; b < nb; ++b)
            if (bp[b] > eta.z + 1e-13) {
                b_dn = b;
                break;
            }
        if (b_dn >= 0) {
            double t = travel(eta.z, bp[b_dn], eta.p);
            if (t < dist[state_id(b_dn, 1)]) {
                dist[state_id(b_dn, 1)] = t;
                heap.push({t, state_id(b_dn, 1)});
            }
        }
    }

    double best = inf;
    while (!heap.empty()) {
        auto [d, id] = heap.top();
        heap.pop();
        if (d > dist[id]) continue;
        int b = id / 2, up = id % 2 == 0;
        if (b == 0 && up) {
            best = d;  // reached the boundary plane from below
            break;
        }
        auto push = [&](int nb_idx, int up_flag, double nd) {
            if (nd < dist[state_id(nb_idx, up_flag ? 0 : 1)]) {
                dist[state_id(nb_idx, up_flag ? 0 : 1)] = nd;
                heap.push({nd, state_id(nb_idx, up_flag ? 0 : 1)});
            }
        };
        // arriving at an interface breakpoint: continue (T) or flip (R)
        // continue upward
        if (up && b - 1 >= 0) {
            double t = travel(bp[b], bp[b - 1], eta.p);
            if (std::isfinite(t)) push(b - 1, true, d + t);
        }
        // continue downward
        if (!up && b + 1 < nb) {
            double t = travel(bp[b], bp[b + 1], eta.p);
            if (std::isfinite(t)) push(b + 1, false, d + t);
        }
        // reflect: motion reverses at the interface (never at the plane itself)
        if (b > 0) {
            if (up && b + 1 < nb) {
                double t = travel(bp[b], bp[b + 1], eta.p);
                if (std::isfinite(t)) push(b + 1, false, d + t);
            }
            if (up && b + 1 == nb) {
                // reflecting into the unbounded bottom layer: dead end
            }
            if (!up) {
                double t = travel(bp[b], bp[b - 1], eta.p);
                if (std::isfinite(t)) push(b - 1, true, d + t);
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// escapability classification
// ---------------------------------------------------------------------------

struct EscapeResult {
    enum class State { yes, no, unknown } state = State::unknown;
    std::string certificate;
    bool ok() const { return state == State::yes; }
};

namespace detail {

inline EscapeResult classify_escape(const LayeredModel& m, const Covector& cov, int sign, double T,
                                    int budget);

// base-case check: does the segment run event-free to the horizon time?
inline bool segment_escapes(const LayeredModel& m, const Covector& cov, double horizon,
                            double& t_event, int& iface, double* z_at_horizon = nullptr) {
    Covector c = cov;
    double span = std::abs(horizon - c.t);
    double transit = 0.0;
    iface = next_interface(m, c, transit);
    if (iface >= 0 && transit < span - 1e-13) {
        t_event = c.t + (horizon > c.t ? transit : -transit);
        return false;
    }
    double z_end = c.z + c.dir * m.vertical_speed(m.layer_of(c.z), c.p) * span;
    if (z_at_horizon) *z_at_horizon = z_end;
    t_event = horizon;
    return z_end < 0.0;  // left Theta = {z > 0}
}

}  // namespace detail

// (+)/(-) escapability with the recursion certificate. sign = +1 checks
// forward escape by t = 2T, sign = -1 backward escape by t = 0.
inline EscapeResult classify_escapable(const LayeredModel& model, const Covector& cov, int sign,
                                       double T, int budget = 16) {
    return detail::classify_escape(model, cov, sign, T, budget);
}

namespace detail {

inline EscapeResult classify_escape(const LayeredModel& m, const Covector& cov, int sign, double T,
                                    int budget) {
    EscapeResult res;
    if (budget <= 0) {
        res.state = EscapeResult::State::unknown;
        res.certificate = "budget exhausted";
        return res;
    }
    double horizon = sign > 0 ? 2.0 * T : 0.0;
    // moving toward the horizon: forward keeps dir, backward reverses motion
    Covector c = cov;
    if (sign < 0) c.dir = -c.dir;
    double dt_avail = sign > 0 ? horizon - cov.t : cov.t;
    if (dt_avail < 0.0) {
        res.state = EscapeResult::State::no;
        res.certificate = "outside the time window";
        return res;
    }
    Covector walker = c;
    walker.t = 0.0;
    double t_event;
    int iface;
    double z_end;
    if (segment_escapes(m, walker, dt_avail, t_event, iface, &z_end)) {
        res.state = EscapeResult::State::yes;
        res.certificate = sign > 0 ? "escaped forward" : "escaped backward";
        return res;
    }
    if (iface < 0) {
        res.state = EscapeResult::State::no;
        res.certificate = "runs inside Theta until the horizon";
        return res;
    }
    // event at t_event (relative), interface `iface`
    double t_abs = sign > 0 ? cov.t + t_event : cov.t - t_event;
    int l_in = walker.dir > 0 ? iface : iface + 1;
    int l_out = walker.dir > 0 ? iface + 1 : iface;
    RtCoefficients rt = rt_coefficients(m.speeds[l_in], m.speeds[l_out], cov.p, m.glancing_deg);
    if (rt.glancing) {
        res.state = EscapeResult::State::no;
        res.certificate = "glancing cutoff at interface " + std::to_string(iface);
        return res;
    }

    auto child = [&](int dir_after) {
        Covector n;
        n.z = m.iface_depth[iface];
        n.p = cov.p;
        n.t = t_abs;
        n.dir = sign > 0 ? dir_after : -dir_after;  // stored as physical direction
        return n;
    };
    // connecting bicharacteristics after the event (in traversal direction):
    // reflected (flip motion) and transmitted (keep motion, other layer)
    Covector refl = child(-walker.dir);
    Covector trans = child(walker.dir);

    EscapeResult r_refl = classify_escape(m, refl, sign, T, budget - 1);
    EscapeResult r_trans =
        rt.evanescent ? EscapeResult{EscapeResult::State::no, "evanescent transmission"}
                      : classify_escape(m, trans, sign, T, budget - 1);

    char buf[64];
    std::snprintf(buf, sizeof(buf), "event@iface%d t=%.6g: ", iface, t_abs);
    if (r_refl.ok() && (rt.evanescent || r_trans.ok())) {
        res.state = EscapeResult::State::yes;
        res.certificate = std::string(buf) + "all connecting escape [" + r_refl.certificate +
                          (rt.evanescent ? "" : " | " + r_trans.certificate) + "]";
        return res;
    }
    // one connecting escapable + opposite incoming escapes the other way.
    // The opposite incoming ray arrives at the same event from the far side,
    // moving against the walker; stored as a physical direction.
    Covector opposite;
    opposite.z = m.iface_depth[iface];
    opposite.p = cov.p;
    opposite.t = t_abs;
    opposite.dir = sign > 0 ? -walker.dir : walker.dir;
    // nudge to the far side so its own trace starts there
    EscapeResult r_opp = classify_escape(m, opposite, -sign, T, budget - 1);
    bool via_trans = !rt.evanescent && r_trans.ok();
    bool via_refl = r_refl.ok() && std::abs(m.speeds[l_in] - m.speeds[l_out]) > 1e-12;
    if ((via_trans || via_refl) && r_opp.ok()) {
        res.state = EscapeResult::State::yes;
        res.certificate = std::string(buf) + (via_trans ? "transmitted escape" : "reflected escape") +
                          " + opposite [" + r_opp.certificate + "]";
        return res;
    }
    res.state = EscapeResult::State::no;
    res.certificate = std::string(buf) + "no escape route";
    return res;
}

}  // namespace detail

// A returning ray leaves the backward domain of influence before t = T:
// d*(gamma(t)) < t at some sample after being > t earlier. The walk follows
// the ray segment by segment, transmitting where possible.
inline bool is_returning(const LayeredModel& model, const Covector& cov, double T) {
    Covector c = cov;
    bool was_inside = false;
    int guard = 0;
    while (c.t <= T + 1e-12 && guard++ < 256) {
        double transit;
        int iface = detail::next_interface(model, c, transit);
        double seg_end = iface >= 0 ? std::min(c.t + transit, T) : T;
        // sample depth along the segment
        for (int s = 0; s <= 8; ++s) {
            double tau = c.t + (seg_end - c.t) * s / 8.0;
            Covector probe = c;
            probe.z = c.z + c.dir * model.vertical_speed(model.layer_of(c.z), c.p) * (tau - c.t);
            probe.t = tau;
            double d = cotangent_depth(model, probe);
            if (d > tau + 1e-9) was_inside = true;
            if (was_inside && d < tau - 1e-9) return true;
        }
        if (iface < 0 || c.t + transit >= T) break;
        c.t += transit;
        c.z = model.iface_depth[iface];
        int l_in = c.dir > 0 ? iface : iface + 1;
        int l_out = c.dir > 0 ? iface + 1 : iface;
        RtCoefficients rt =
            rt_coefficients(model.speeds[l_in], model.speeds[l_out], c.p, model.glancing_deg);
        if (rt.evanescent) c.dir = -c.dir;  // total reflection, else transmit through
    }
    return false;
}

}  // namespace sclab
