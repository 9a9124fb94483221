#pragma once

#include <map>
#include <string>
#include <vector>

#include "sclab/rational.hpp"
#include "sclab/rays.hpp"

namespace sclab {

// ---------------------------------------------------------------------------
// exact (rational) amplitude bookkeeping at normal incidence
// ---------------------------------------------------------------------------

// Boundary-amplitude reflection/transmission as exact fractions; valid at
// p = 0 with rational slownesses. The energy normalization of a transmission
// is an irrational square root, so the exact path carries boundary amplitudes
// and compares coherent sums only within a fixed layer, where the conversion
// factor is common to every contribution.
struct ExactRt {
    Fraction r, t;
};

inline Fraction rational_slowness(double c) {
    for (long long den = 1; den <= 1000; ++den) {
        double scaled = den / c;  // q = 1/c
        long long num = std::llround(scaled);
        if (std::abs(scaled - num) < 1e-9 && num > 0) return Fraction(num, den);
    }
    throw Error("exact mode requires speeds with small rational reciprocals");
}

inline ExactRt exact_rt(const Fraction& q_in, const Fraction& q_out) {
    Fraction denom = q_in + q_out;
    return {(q_in - q_out) / denom, (Fraction(2) * q_in) / denom};
}

// ---------------------------------------------------------------------------
// controlled cascade: event-driven superposition with escort/cancel rules
// ---------------------------------------------------------------------------

// A source covector with both floating (energy-normalized) and exact
// (boundary) amplitudes. Exact amplitudes are meaningful at p = 0 only.
struct SymbolSource {
    Covector cov;       // position/direction at t = 0
    double amp = 1.0;   // energy-normalized
    Fraction exact_amp{1};
    std::string label;
};

struct CascadeBin {
    double z = 0.0;
    int dir = +1;
    double amp = 0.0;                // coherent energy-normalized sum
    Fraction exact{0};               // coherent boundary-amplitude sum
    bool mdt_family = false;
    double off_family_amp = 0.0;     // contributions that were never deep at t = T
    Fraction off_family_exact{0};
    std::vector<std::string> codes;
};

// A request to cancel a downward leg at one interface event with a control
// injected from outside Theta.
struct CancelRequest {
    int iface = -1;
    double time = 0.0;
    double amp = 0.0;      // energy-normalized amplitude the leg would carry
    Fraction exact{0};
    std::string code;
};

// Forward field of a set of one-way sources at normal incidence, processed
// event by event. Arrivals meeting at one interface event are superposed
// across both sides before the outgoing legs are formed, so exact
// cancellations propagate as exact zeros. Legs descending from returning rays
// are escorted: at each event either every outgoing leg is (+)-escapable, or
// the non-escapable leg is reported for cancellation.
class Cascade {
public:
    Cascade(const LayeredModel& model, double T, int max_events = 64, double prune = 1e-13)
        : model_(model), T_(T), max_events_(max_events), prune_(prune) {
        model_.validate();
        for (std::size_t l = 0; l < model_.speeds.size(); ++l)
            exact_q_.push_back(rational_slowness(model_.speeds[l]));
    }

    void run(const std::vector<SymbolSource>& sources) {
        bins_.clear();
        requests_.clear();
        arrivals_ = {};
        for (const auto& s : sources) {
            require(std::abs(s.cov.p) < 1e-15, "cascade handles normal incidence only");
            seed(s);
        }
        process();
    }

    const std::map<std::pair<long long, int>, CascadeBin>& bins() const { return bins_; }
    const std::vector<CancelRequest>& cancel_requests() const { return requests_; }

    // residual mass at t = 2T inside Theta' that is not the direct family
    double off_family_residual() const {
        double m = 0.0;
        for (const auto& [k, b] : bins_)
            if (b.z > model_.theta_prime_depth) m += std::abs(b.off_family_amp);
        return m;
    }
    Fraction off_family_residual_exact() const {
        Fraction m{0};
        for (const auto& [k, b] : bins_)
            if (b.z > model_.theta_prime_depth) {
                Fraction a = b.off_family_exact;
                if (a.num < 0) a = -a;
                m = m + a;
            }
        return m;
    }

private:
    struct Arrival {
        double time = 0.0;
        int iface = -1;
        int from_dir = +1;  // +1 arriving from above (moving down), -1 from below
        double amp = 0.0;
        Fraction exact{0};
        bool family = false;
        bool escorted = false;   // child of a returning/escorted ray
        bool returning = false;  // segment left D- before t = T
        std::string code;
        int events = 0;
        bool operator>(const Arrival& o) const { return time > o.time; }
    };

    void seed(const SymbolSource& s) {
        launch_segment(s.cov, s.amp, s.exact_amp, false, false, s.label, 0);
    }

    // follow one segment from c to its next event (or to 2T), creating either
    // an Arrival or a terminal bin entry
    void launch_segment(const Covector& c, double amp, const Fraction& exact, bool family,
                        bool escorted, const std::string& code, int events) {
        if (std::abs(amp) < prune_ && exact.zero()) return;
        double transit;
        int iface = detail::next_interface(model_, c, transit);
        double t_end = iface < 0 ? 2.0 * T_ : c.t + transit;
        bool fam = family || segment_deep_at_T(c, std::min(t_end, 2.0 * T_));
        if (iface < 0 || t_end > 2.0 * T_ - 1e-13) {
            terminal(c, amp, exact, fam, code);
            return;
        }
        Arrival a;
        a.time = t_end;
        a.iface = iface;
        a.from_dir = c.dir;
        a.amp = amp;
        a.exact = exact;
        a.family = fam;
        a.escorted = escorted;
        a.returning = segment_returns(c, t_end);
        a.code = code;
        a.events = events;
        arrivals_.push(a);
    }

    // does the segment pass cotangent depth >= T at time T?
    bool segment_deep_at_T(const Covector& c, double t_stop) const {
        if (c.t > T_ + 1e-12 || t_stop < T_ - 1e-12) return false;
        int l = model_.layer_of(c.z);
        double z_at_T = c.z + c.dir * model_.vertical_speed(l, c.p) * (T_ - c.t);
        Covector probe{z_at_T, c.dir, c.p, T_};
        return cotangent_depth(model_, probe) >= T_ - 1e-6;
    }

    // strictly inside D- at the start, strictly outside before min(t_end, T)
    bool segment_returns(const Covector& c, double t_end) const {
        double t_stop = std::min(t_end, T_);
        if (c.t >= t_stop) return false;
        bool was_inside = false;
        for (int s = 0; s <= 16; ++s) {
            double tau = c.t + (t_stop - c.t) * s / 16.0;
            int l = model_.layer_of(c.z);
            Covector probe{c.z + c.dir * model_.vertical_speed(l, c.p) * (tau - c.t), c.dir, c.p,
                           tau};
            double d = cotangent_depth(model_, probe);
            if (d > tau + 1e-9) was_inside = true;
            if (was_inside && d < tau - 1e-9) return true;
        }
        return false;
    }

    void terminal(const Covector& c, double amp, const Fraction& exact, bool family,
                  const std::string& code) {
        int l = model_.layer_of(c.z);
        double z_end = c.z + c.dir * model_.vertical_speed(l, c.p) * (2.0 * T_ - c.t);
        long long zq = std::llround(z_end * 1e9);
        auto& bin = bins_[{zq, c.dir}];
        bin.z = z_end;
        bin.dir = c.dir;
        bin.amp += amp;
        bin.exact = bin.exact + exact;
        if (family)
            bin.mdt_family = true;
        else {
            bin.off_family_amp += amp;
            bin.off_family_exact = bin.off_family_exact + exact;
        }
        if (bin.codes.size() < 64) bin.codes.push_back(code);
    }

    void process() {
        while (!arrivals_.empty()) {
            // gather every arrival of this event (same time, same interface)
            Arrival head = arrivals_.top();
            arrivals_.pop();
            std::vector<Arrival> group{head};
            std::vector<Arrival> requeue;
            while (!arrivals_.empty() && arrivals_.top().time < head.time + 1e-11) {
                Arrival nxt = arrivals_.top();
                arrivals_.pop();
                if (nxt.iface == head.iface)
                    group.push_back(nxt);
                else
                    requeue.push_back(nxt);
            }
            for (auto& a : requeue) arrivals_.push(a);

            double in_above = 0.0, in_below = 0.0;
            Fraction ex_above{0}, ex_below{0};
            bool fam_above = false, fam_below = false;
            bool demand = false;
            int events = 0;
            std::string code;
            for (const auto& a : group) {
                if (a.from_dir > 0) {
                    in_above += a.amp;
                    ex_above = ex_above + a.exact;
                    fam_above = fam_above || a.family;
                } else {
                    in_below += a.amp;
                    ex_below = ex_below + a.exact;
                    fam_below = fam_below || a.family;
                }
                demand = demand || a.escorted || a.returning;
                events = std::max(events, a.events);
                code = code.empty() ? a.code : code + "+" + a.code;
            }
            if (events >= max_events_) continue;

            const int iface = head.iface;
            const int upper = iface, lower = iface + 1;
            RtCoefficients down_rt =
                rt_coefficients(model_.speeds[upper], model_.speeds[lower], 0.0, model_.glancing_deg);
            require(!down_rt.evanescent, "cascade: evanescent interface at normal incidence");
            RtCoefficients up_rt =
                rt_coefficients(model_.speeds[lower], model_.speeds[upper], 0.0, model_.glancing_deg);
            ExactRt ex_down = exact_rt(exact_q_[upper], exact_q_[lower]);
            ExactRt ex_up = exact_rt(exact_q_[lower], exact_q_[upper]);

            // outgoing legs (energy-normalized / exact boundary amplitudes)
            double out_down = down_rt.t_energy * in_above + up_rt.r_energy * in_below;
            double out_up = down_rt.r_energy * in_above + up_rt.t_energy * in_below;
            Fraction exo_down = ex_down.t * ex_above + ex_up.r * ex_below;
            Fraction exo_up = ex_down.r * ex_above + ex_up.t * ex_below;
            bool fam = fam_above || fam_below;

            struct Leg {
                double amp;
                Fraction exact;
                int dir;
                char tag;
            };
            for (const Leg& leg : {Leg{out_down, exo_down, +1, 'd'}, Leg{out_up, exo_up, -1, 'u'}}) {
                if (std::abs(leg.amp) < prune_ && leg.exact.zero()) continue;
                Covector c{model_.iface_depth[iface], leg.dir, 0.0, head.time};
                bool escort_leg = false;
                if (demand) {
                    EscapeResult esc = classify_escapable(model_, c, +1, T_);
                    if (!esc.ok()) {
                        require(leg.dir > 0,
                                "cascade: upward leg [" + code +
                                    "] is not (+)-escapable and cannot be cancelled from outside");
                        CancelRequest req;
                        req.iface = iface;
                        req.time = head.time;
                        req.amp = leg.amp;
                        req.exact = leg.exact;
                        req.code = code;
                        requests_.push_back(req);
                        continue;  // leg is to be cancelled; do not propagate it
                    }
                    escort_leg = true;
                }
                launch_segment(c, leg.amp, leg.exact, fam, escort_leg, code + (leg.dir > 0 ? "v" : "^"),
                               events + 1);
            }
        }
    }

    LayeredModel model_;
    double T_;
    int max_events_;
    double prune_;
    std::vector<Fraction> exact_q_;
    std::priority_queue<Arrival, std::vector<Arrival>, std::greater<>> arrivals_;
    std::map<std::pair<long long, int>, CascadeBin> bins_;
    std::vector<CancelRequest> requests_;
};

// ---------------------------------------------------------------------------
// constructive tail
// ---------------------------------------------------------------------------

struct TailEntry {
    SymbolSource source;
    int target_iface = -1;
    double target_time = 0.0;
};

struct ConstructiveTail {
    std::vector<TailEntry> entries;
    double residual = 0.0;          // off-family mass at 2T inside Theta'
    Fraction residual_exact{0};
    int cascade_rounds = 0;
};

// Build the finite tail isolating the deep transmission of h0: run the
// controlled cascade, convert each reported cancellation into a source
// injected from outside Theta whose transmission annihilates the leg at its
// event, and repeat until no cancellation is requested.
inline ConstructiveTail constructive_tail(const LayeredModel& model, const SymbolSource& h0,
                                          double T, int max_rounds = 32) {
    require(h0.cov.dir > 0, "constructive_tail: source must point into the medium");
    ConstructiveTail out;
    std::vector<SymbolSource> sources{h0};
    Cascade cascade(model, T);
    for (int round = 0; round < max_rounds; ++round) {
        out.cascade_rounds = round + 1;
        cascade.run(sources);
        if (cascade.cancel_requests().empty()) break;
        const CancelRequest& req = cascade.cancel_requests().front();
        // back-trace through the layers above the target: required incoming
        // amplitude divided by the product of downward transmissions
        double t_amp = 1.0;
        Fraction t_exact{1};
        double climb = 0.0;
        for (int j = req.iface; j >= 0; --j) {
            RtCoefficients rt =
                rt_coefficients(model.speeds[j], model.speeds[j + 1], 0.0, model.glancing_deg);
            require(!rt.evanescent && !rt.glancing,
                    "constructive_tail: leg [" + req.code +
                        "] cannot be cancelled through an evanescent interface (not in S)");
            ExactRt ex = exact_rt(rational_slowness(model.speeds[j]),
                                  rational_slowness(model.speeds[j + 1]));
            t_amp *= rt.t_energy;
            t_exact = t_exact * ex.t;
            double top = j == 0 ? 0.0 : model.iface_depth[j - 1];
            climb += (model.iface_depth[j] - top) / model.vertical_speed(j, 0.0);
        }
        double t_exit = req.time - climb;  // moment the control crosses z = 0
        require(t_exit > 1e-12, "constructive_tail: leg [" + req.code +
                                    "] returns too early for an outside control");
        TailEntry e;
        e.target_iface = req.iface;
        e.target_time = req.time;
        e.source.cov = Covector{-model.vertical_speed(0, 0.0) * t_exit, +1, 0.0, 0.0};
        e.source.amp = -req.amp / t_amp;
        e.source.exact_amp = -req.exact / t_exact;
        e.source.label = "c" + std::to_string(out.entries.size() + 1);
        out.entries.push_back(e);
        sources.push_back(e.source);
    }
    cascade.run(sources);
    require(cascade.cancel_requests().empty(), "constructive_tail: cancellation did not settle");
    out.residual = cascade.off_family_residual();
    out.residual_exact = cascade.off_family_residual_exact();
    return out;
}

// ---------------------------------------------------------------------------
// symbol vectors and the amplitude-level Neumann iteration
// ---------------------------------------------------------------------------

// Finitely supported map (path code, terminal covector) -> amplitude on the
// path-indexed basis of l^2(G_eta).
struct SymbolVector {
    struct Entry {
        Covector cov;
        double amp;
    };
    std::map<std::string, Entry> entries;  // keyed by path code
    double truncated_mass = 0.0;

    double norm2() const {
        double s = 0.0;
        for (const auto& [k, e] : entries) s += e.amp * e.amp;
        return std::sqrt(s);
    }
    // coherent merge by terminal (z, dir) for physical-space comparisons
    std::map<std::pair<long long, int>, double> merged() const {
        std::map<std::pair<long long, int>, double> m;
        for (const auto& [k, e] : entries) m[{std::llround(e.cov.z * 1e9), e.cov.dir}] += e.amp;
        return m;
    }
};

inline SymbolVector identity_symbol(const Covector& eta) {
    SymbolVector v;
    v.entries[""] = {eta, 1.0};
    return v;
}

struct SymbolIterationOptions {
    double taper_band = 0.25;   // cotangent-depth width of the sigma* taper
    int max_events = 48;
    double prune = 1e-14;
    std::size_t max_support = 200000;
};

// sigma* at symbol level: 1 outside Theta, 0 deeper than the taper band,
// cos^2 ramp across [0, band] in cotangent depth.
inline double sigma_star_weight(const LayeredModel& model, const Covector& c, double band) {
    double d = cotangent_depth(model, c);
    if (d <= 0.0) return 1.0;
    if (d >= band) return 0.0;
    double x = std::cos(0.5 * M_PI * d / band);
    return x * x;
}

// composition with R~ = nu R_2T at the principal symbol level: propagate each
// entry 2T with branching, then flip the vertical mode.
inline SymbolVector symbol_reflect(const LayeredModel& model, const SymbolVector& v, double T,
                                   const SymbolIterationOptions& opt) {
    SymbolVector out;
    out.truncated_mass = v.truncated_mass;
    for (const auto& [code, e] : v.entries) {
        Covector start = e.cov;
        start.t = 0.0;
        RayFan fan = trace_rays(model, start, 2.0 * T, opt.max_events);
        out.truncated_mass += (fan.truncated_mass + fan.glancing_mass) * e.amp * e.amp;
        for (const auto& ray : fan.rays) {
            std::string key = code + ray.code() + "N";
            Covector term = ray.terminal;
            term.dir = -term.dir;  // nu
            term.t = 0.0;
            double amp = e.amp * ray.amplitude.real();
            auto it = out.entries.find(key);
            if (it == out.entries.end())
                out.entries[key] = {term, amp};
            else
                it->second.amp += amp;
        }
    }
    double n = out.norm2();
    for (auto it = out.entries.begin(); it != out.entries.end();) {
        if (std::abs(it->second.amp) < opt.prune * std::max(n, 1e-30)) {
            out.truncated_mass += it->second.amp * it->second.amp;
            it = out.entries.erase(it);
        } else
            ++it;
    }
    require(out.entries.size() <= opt.max_support,
            "symbol iteration: support exceeded the configured budget");
    return out;
}

inline SymbolVector symbol_sigma_star(const LayeredModel& model, const SymbolVector& v,
                                      const SymbolIterationOptions& opt) {
    SymbolVector out;
    out.truncated_mass = v.truncated_mass;
    for (const auto& [code, e] : v.entries) {
        double w = sigma_star_weight(model, e.cov, opt.taper_band);
        if (w == 0.0) continue;
        out.entries[code] = {e.cov, e.amp * w};
    }
    return out;
}

// one application of (sigma* R~)^2
inline SymbolVector symbol_iteration_step(const LayeredModel& model, const SymbolVector& v,
                                          double T, const SymbolIterationOptions& opt) {
    SymbolVector a = symbol_sigma_star(model, symbol_reflect(model, v, T, opt), opt);
    return symbol_sigma_star(model, symbol_reflect(model, a, T, opt), opt);
}

struct SymbolNeumannTrace {
    std::vector<double> norms;       // ||n_k||
    std::vector<double> increments;  // ||(sigma* R~)^{2(k+1)} h0||
    SymbolVector last;
};

// N_k = sum_{i<=k} (sigma* R~)^{2i} applied to the initial symbol.
inline SymbolNeumannTrace symbol_neumann_iterate(const LayeredModel& model,
                                                 const SymbolVector& h0, double T, int k_max,
                                                 const SymbolIterationOptions& opt) {
    SymbolNeumannTrace tr;
    SymbolVector term = h0;
    SymbolVector sum = h0;
    tr.norms.push_back(sum.norm2());
    for (int k = 1; k <= k_max; ++k) {
        term = symbol_iteration_step(model, term, T, opt);
        tr.increments.push_back(term.norm2());
        for (const auto& [code, e] : term.entries) {
            auto it = sum.entries.find(code);
            if (it == sum.entries.end())
                sum.entries[code] = e;
            else
                it->second.amp += e.amp;
        }
        tr.norms.push_back(sum.norm2());
        if (term.norm2() < 1e-15) break;
    }
    tr.last = sum;
    return tr;
}

// microlocal almost direct transmission: propagate to time T and keep the
// covectors of cotangent depth > T.
inline SymbolVector mdt_symbol(const LayeredModel& model, const SymbolVector& h0, double T,
                               const SymbolIterationOptions& opt) {
    SymbolVector out;
    for (const auto& [code, e] : h0.entries) {
        Covector start = e.cov;
        start.t = 0.0;
        RayFan fan = trace_rays(model, start, T, opt.max_events);
        for (const auto& ray : fan.rays) {
            Covector term = ray.terminal;
            if (cotangent_depth(model, term) <= T + 1e-12) continue;
            out.entries[code + ray.code()] = {term, e.amp * ray.amplitude.real()};
        }
    }
    return out;
}

// l2 distance between two symbol vectors restricted to Theta', compared after
// coherent merge by terminal covector (entries representing the same
// canonical transformation add).
inline double symbol_distance_inside(const LayeredModel& model, const SymbolVector& a,
                                     const SymbolVector& b) {
    auto ma = a.merged();
    auto mb = b.merged();
    double s = 0.0;
    auto consider = [&](const std::pair<long long, int>& key, double va, double vb) {
        double z = static_cast<double>(key.first) * 1e-9;
        if (z <= model.theta_prime_depth) return;
        s += (va - vb) * (va - vb);
    };
    for (const auto& [k, va] : ma) {
        auto it = mb.find(k);
        consider(k, va, it == mb.end() ? 0.0 : it->second);
    }
    for (const auto& [k, vb] : mb)
        if (!ma.count(k)) consider(k, 0.0, vb);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// layered scattering series
// ---------------------------------------------------------------------------

// Per-interface up/down outgoing amplitudes as (arrival time -> amplitude)
// maps, produced by the geometric series in the interface scattering
// operator: each application scatters every pending incoming wave once and
// hands the outgoing legs to the adjacent interfaces.
struct ScatteringSeriesResult {
    // port (iface, dir): dir +1 = leaving downward, -1 = leaving upward
    std::map<std::pair<int, int>, std::map<long long, double>> ports;
    int iterations = 0;
};

inline ScatteringSeriesResult layered_scattering_series(const LayeredModel& model,
                                                        const SymbolSource& src, int k_max,
                                                        double prune = 1e-14) {
    model.validate();
    const int m = static_cast<int>(model.iface_depth.size());
    require(m >= 1, "layered_scattering_series: need at least one interface");
    using Port = std::map<long long, double>;
    auto qt = [](double t) { return std::llround(t * 1e9); };

    ScatteringSeriesResult out;
    std::map<std::pair<int, int>, Port> incoming;
    {
        Covector c = src.cov;
        double transit;
        int iface = detail::next_interface(model, c, transit);
        require(iface >= 0, "layered_scattering_series: source ray never meets an interface");
        incoming[{iface, c.dir}][qt(c.t + transit)] += src.amp;
    }

    for (int k = 0; k < k_max; ++k) {
        out.iterations = k + 1;
        std::map<std::pair<int, int>, Port> next;
        bool any = false;
        for (const auto& [key, port] : incoming) {
            auto [iface, from_dir] = key;
            int l_in = from_dir > 0 ? iface : iface + 1;
            int l_out = from_dir > 0 ? iface + 1 : iface;
            RtCoefficients rt = rt_coefficients(model.speeds[l_in], model.speeds[l_out], src.cov.p,
                                                model.glancing_deg);
            for (const auto& [tq, amp] : port) {
                if (std::abs(amp) < prune) continue;
                double t = static_cast<double>(tq) * 1e-9;
                struct Leg {
                    double a;
                    int dir;
                };
                double r_amp = amp * rt.r_energy;
                double t_amp = rt.evanescent ? 0.0 : amp * rt.t_energy;
                for (const Leg& leg : {Leg{r_amp, -from_dir}, Leg{t_amp, from_dir}}) {
                    if (std::abs(leg.a) < prune) continue;
                    out.ports[{iface, leg.dir}][tq] += leg.a;
                    int nxt = leg.dir > 0 ? iface + 1 : iface - 1;
                    if (nxt < 0 || nxt >= m) continue;
                    int layer = leg.dir > 0 ? iface + 1 : iface;
                    double tt = std::abs(model.iface_depth[nxt] - model.iface_depth[iface]) /
                                model.vertical_speed(layer, src.cov.p);
                    next[{nxt, leg.dir}][qt(t + tt)] += leg.a;
                    any = true;
                }
            }
        }
        incoming = std::move(next);
        if (!any) break;
    }
    return out;
}

// The same port sums enumerated by exhaustive ray recursion, for the
// two-enumeration agreement check.
inline ScatteringSeriesResult ray_port_sums(const LayeredModel& model, const SymbolSource& src,
                                            int max_events) {
    ScatteringSeriesResult out;
    auto qt = [](double t) { return std::llround(t * 1e9); };

    struct Node {
        Covector cov;
        double amp;
        int events;
    };
    std::vector<Node> stack{{src.cov, src.amp, 0}};
    while (!stack.empty()) {
        Node n = stack.back();
        stack.pop_back();
        if (n.events >= max_events) continue;
        double transit;
        int iface = detail::next_interface(model, n.cov, transit);
        if (iface < 0) continue;
        double t_event = n.cov.t + transit;
        int l_in = n.cov.dir > 0 ? iface : iface + 1;
        int l_out = n.cov.dir > 0 ? iface + 1 : iface;
        RtCoefficients rt =
            rt_coefficients(model.speeds[l_in], model.speeds[l_out], n.cov.p, model.glancing_deg);
        // reflected leg
        {
            double a = n.amp * rt.r_energy;
            out.ports[{iface, -n.cov.dir}][qt(t_event)] += a;
            Node child{{model.iface_depth[iface], -n.cov.dir, n.cov.p, t_event}, a, n.events + 1};
            if (std::abs(a) > 1e-14) stack.push_back(child);
        }
        if (!rt.evanescent) {
            double a = n.amp * rt.t_energy;
            out.ports[{iface, n.cov.dir}][qt(t_event)] += a;
            Node child{{model.iface_depth[iface], n.cov.dir, n.cov.p, t_event}, a, n.events + 1};
            if (std::abs(a) > 1e-14) stack.push_back(child);
        }
    }
    return out;
}

}  // namespace sclab
