#include "evmchaos/scan.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "evmchaos/rng.hpp"

namespace evmchaos {

long GridSpec::size() const {
    if (!(step > 0.0)) throw Error("GridSpec: step must be positive");
    if (stop < start) return 0;
    return long(std::floor((stop - start) / step + 1e-9)) + 1;
}

std::vector<double> GridSpec::values() const {
    const long n = size();
    std::vector<double> v(n);
    for (long i = 0; i < n; ++i) v[i] = value(i);
    return v;
}

void diagram_initial_condition(const DiagramOptions& opt, long v0_index, int ic_index, double& q0,
                               double& p0) {
    SplitMix64 rng = substream(opt.seed, std::uint64_t(v0_index), std::uint64_t(ic_index));
    q0 = rng.uniform(opt.ic_lo, opt.ic_hi);
    p0 = rng.uniform(opt.ic_lo, opt.ic_hi);
}

BifurcationRecord diagram_cell(const Params& base, Mode mode, const NoiseMoments* nm,
                               const DiagramOptions& opt, const GridSpec& grid, long v0_index,
                               int ic_index) {
    BifurcationRecord rec;
    rec.v0 = grid.value(v0_index);
    rec.ic_index = ic_index;
    double q0, p0;
    diagram_initial_condition(opt, v0_index, ic_index, q0, p0);
    const TMatrix t = t_matrix(base.gamma, base.tau);

    if (mode == Mode::classical) {
        ClassicalState s{q0, p0, false};
        for (long i = 0; i < opt.n_transient && !s.escaped; ++i) s = classical_step(s, t, rec.v0);
        for (int i = 0; i < opt.n_record && !s.escaped; ++i) {
            s = classical_step(s, t, rec.v0);
            if (!s.escaped) rec.q_samples.push_back(s.q);
        }
        rec.escaped = s.escaped;
    } else {
        EvmState s = coherent_state(q0, p0, base.hbar);
        for (long i = 0; i < opt.n_transient && !s.escaped; ++i) s = quantum_step(s, t, rec.v0, nm);
        for (int i = 0; i < opt.n_record && !s.escaped; ++i) {
            s = quantum_step(s, t, rec.v0, nm);
            if (!s.escaped) rec.q_samples.push_back(s.q);
        }
        rec.escaped = s.escaped;
    }
    return rec;
}

std::vector<BifurcationRecord> bifurcation_diagram(const Params& base, Mode mode,
                                                   const GridSpec& grid,
                                                   const DiagramOptions& opt) {
    NoiseMoments nm;
    const NoiseMoments* pnm = nullptr;
    if (mode == Mode::quantum && (base.hbar > 0.0 || base.kbt > 0.0)) {
        nm = base_moments(base);
        pnm = &nm;
    }
    std::vector<BifurcationRecord> out;
    const long n = grid.size();
    out.reserve(std::size_t(n) * opt.n_ic);
    for (long i = 0; i < n; ++i)
        for (int j = 0; j < opt.n_ic; ++j) out.push_back(diagram_cell(base, mode, pnm, opt, grid, i, j));
    return out;
}

// ---------------------------------------------------------------------------
// thresholds
// ---------------------------------------------------------------------------

namespace {

/// Branch-following policies: settle/advance an orbit and estimate its
/// largest Lyapunov exponent, for either map.
struct ClassicalFollow {
    using State = ClassicalState;
    const TMatrix& t;
    const ThresholdOptions& opt;

    State seed() const { return State{opt.ic_q, opt.ic_p, false}; }
    State advance(State s, double v0, long n) const {
        for (long i = 0; i < n && !s.escaped; ++i) s = classical_step(s, t, v0);
        return s;
    }
    LyapunovEstimate lyap(const State& s, double v0, long n_iter) const {
        LyapunovOptions lo;
        lo.n_transient = 0;
        lo.n_iter = n_iter;
        lo.renorm_every = 4;
        return largest_lyapunov_classical(t, v0, s, lo);
    }
};

struct QuantumFollow {
    using State = EvmState;
    const TMatrix& t;
    const ThresholdOptions& opt;
    double hbar;
    const NoiseMoments* nm;

    State seed() const { return coherent_state(opt.ic_q, opt.ic_p, hbar); }
    State advance(State s, double v0, long n) const {
        for (long i = 0; i < n && !s.escaped; ++i) s = quantum_step(s, t, v0, nm);
        return s;
    }
    LyapunovEstimate lyap(const State& s, double v0, long n_iter) const {
        LyapunovOptions lo;
        lo.n_transient = 0;
        lo.n_iter = n_iter;
        lo.renorm_every = 4;
        return largest_lyapunov_evm(t, v0, nm, s, lo);
    }
};

template <class Follow>
ThresholdRecord chaos_threshold(const Follow& follow, const Params& base, double v0_lo,
                                double v0_hi, const ThresholdOptions& opt) {
    ThresholdRecord rec;
    rec.kind = ThresholdKind::chaos;
    rec.params = base;

    // end states of previous evaluations, keyed by v0: each new evaluation
    // follows the attractor branch from the nearest evaluation below it
    std::map<double, typename Follow::State> anchors;

    auto settled = [&](double v0) {
        typename Follow::State s;
        long n;
        auto it = anchors.upper_bound(v0);
        if (it == anchors.begin()) {
            s = follow.seed();
            n = 5 * opt.n_transient;
        } else {
            s = std::prev(it)->second;
            n = opt.n_transient;
        }
        s = follow.advance(s, v0, n);
        if (s.escaped)
            throw ConvergenceError("chaos threshold: orbit escaped while settling", v0);
        anchors[v0] = s;
        return s;
    };

    // chaotic = lambda above lambda_floor with 2-sigma confidence; the floor
    // keeps quasiperiodic orbits (lambda fluctuating around 0) from flipping
    // chaotic on an upward fluctuation.  Undecided estimates are refined by
    // doubling n_iter, then counted as not-yet-chaotic.
    auto chaotic = [&](double v0) {
        typename Follow::State s = settled(v0);
        long n = opt.n_iter;
        for (int r = 0;; ++r) {
            LyapunovEstimate est = follow.lyap(s, v0, n);
            rec.lambda_trace.push_back({v0, est.lambda, est.stderr_});
            if (est.escaped)
                throw ConvergenceError("chaos threshold: orbit escaped during estimation", v0);
            if (est.lambda - 2.0 * est.stderr_ > opt.lambda_floor) return true;
            if (est.lambda + 2.0 * est.stderr_ < opt.lambda_floor || r >= opt.max_refine)
                return false;
            n *= 2;
        }
    };

    // coarse ascending scan to pick the crossing (the last one by default);
    // ascending order also keeps the warm anchors causal
    const int npre = std::max(2, opt.prescan_points);
    std::vector<double> vs(npre);
    std::vector<bool> is_chaotic(npre);
    for (int i = 0; i < npre; ++i) {
        vs[i] = v0_lo + (v0_hi - v0_lo) * double(i) / double(npre - 1);
        is_chaotic[i] = chaotic(vs[i]);
    }
    int cross = -1;
    for (int i = 0; i + 1 < npre; ++i) {
        if (!is_chaotic[i] && is_chaotic[i + 1]) {
            cross = i;
            if (!opt.last_crossing) break;
        }
    }
    if (cross < 0) {
        const double l_lo = rec.lambda_trace.front()[1];
        const double l_hi = rec.lambda_trace.back()[1];
        std::ostringstream os;
        os << "chaos threshold: no regular-to-chaotic crossing in [" << v0_lo << ", " << v0_hi
           << "] (endpoint lambda " << l_lo << " and " << l_hi << ")";
        throw BracketError(os.str(), l_lo, l_hi);
    }

    double va = vs[cross], vb = vs[cross + 1];
    while (vb - va > opt.tol) {
        const double vm = 0.5 * (va + vb);
        (chaotic(vm) ? vb : va) = vm;
    }
    rec.v0_star = 0.5 * (va + vb);
    rec.bracket_width = vb - va;
    rec.params.v0 = rec.v0_star;
    return rec;
}

}  // namespace

ThresholdRecord find_threshold(const Params& base, Mode mode, ThresholdKind kind, double v0_lo,
                               double v0_hi, const ThresholdOptions& opt) {
    if (!(v0_hi > v0_lo)) throw Error("find_threshold: empty bracket");
    Params p = base;
    p.validate();
    const TMatrix t = t_matrix(p.gamma, p.tau);

    NoiseMoments nm;
    const NoiseMoments* pnm = nullptr;
    if (mode == Mode::quantum && (p.hbar > 0.0 || p.kbt > 0.0)) {
        nm = base_moments(p);
        pnm = &nm;
    }

    if (kind == ThresholdKind::chaos) {
        if (mode == Mode::classical) {
            ClassicalFollow f{t, opt};
            return chaos_threshold(f, p, v0_lo, v0_hi, opt);
        }
        QuantumFollow f{t, opt, p.hbar, pnm};
        return chaos_threshold(f, p, v0_lo, v0_hi, opt);
    }

    // hopf kind: stability loss of the periodic orbit via eigenvalue
    // continuation (classified crossing of the cycle multiplier)
    ClassifyOptions copt;
    copt.bisect_tol = opt.tol;
    copt.detect_q = opt.ic_q;
    copt.detect_p = opt.ic_p;
    copt.last_crossing = opt.last_crossing;
    BifurcationResult res =
        classify_bifurcation(p, mode == Mode::quantum ? pnm : nullptr, v0_lo, v0_hi, copt);
    if (res.type == BifurcationType::none) {
        const double nan = std::nan("");
        throw BracketError("hopf threshold: no stability-loss crossing in bracket: " +
                               (res.diagnostic.empty() ? std::string("unclassified") : res.diagnostic),
                           nan, nan);
    }
    ThresholdRecord rec;
    rec.kind = ThresholdKind::hopf;
    rec.v0_star = res.v0_star;
    rec.bracket_width = res.bracket_width;
    rec.params = p;
    rec.params.v0 = res.v0_star;
    rec.period = res.period;
    for (const auto& s : res.trace)
        rec.lambda_trace.push_back({s[0], std::log(s[1]) / double(std::max(res.period, 1)), 0.0});
    return rec;
}

std::vector<SweepPoint> sweep(const Params& base, Mode mode, ThresholdKind kind, SweepAxis axis,
                              const std::vector<double>& grid, const SweepOptions& opt) {
    if (!std::is_sorted(grid.begin(), grid.end()))
        throw Error("sweep: grid must be sorted ascending");
    std::vector<SweepPoint> out;
    out.reserve(grid.size());
    bool have_warm = false;
    double warm_center = 0.0;

    for (double x : grid) {
        Params p = base;
        switch (axis) {
            case SweepAxis::kbt: p.kbt = x; break;
            case SweepAxis::hbar: p.hbar = x; break;
            case SweepAxis::omega_c: p.omega_c = x; break;
        }
        SweepPoint point;
        point.axis_value = x;

        double lo = opt.bracket_lo, hi = opt.bracket_hi;
        if (have_warm && opt.warm_halfwidth > 0.0) {
            lo = warm_center - opt.warm_halfwidth;
            hi = warm_center + opt.warm_halfwidth;
        }
        for (int attempt = 0;; ++attempt) {
            try {
                point.record = find_threshold(p, mode, kind, lo, hi, opt.threshold);
                have_warm = true;
                warm_center = point.record->v0_star;
                break;
            } catch (const BracketError& e) {
                if (attempt >= opt.max_expand) {
                    point.error = e.what();
                    break;
                }
                const double mid = 0.5 * (lo + hi), half = (hi - lo);
                lo = mid - half;
                hi = mid + half;
            } catch (const Error& e) {
                point.error = e.what();
                break;
            }
        }
        out.push_back(std::move(point));
    }
    return out;
}

ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& axis_v0star,
                       std::optional<double> reference) {
    std::vector<std::pair<double, double>> pts = axis_v0star;
    std::sort(pts.begin(), pts.end());
    if (pts.size() < 5)
        throw ScalingError("fit_scaling: need at least 5 points, got " +
                           std::to_string(pts.size()));
    for (const auto& [x, v] : pts)
        if (!(x > 0.0)) throw ScalingError("fit_scaling: axis values must be positive");

    ScalingFit fit;
    fit.n_points = int(pts.size());
    if (reference) {
        fit.reference = *reference;
    } else {
        // Richardson-style extrapolation to axis -> 0 from the two smallest
        // points, assuming a quadratic law (exact when shift = c * axis^2)
        const double x1 = pts[0].first, v1 = pts[0].second;
        const double x2 = pts[1].first, v2 = pts[1].second;
        if (x2 - x1 < 1e-300 * x2)
            throw ScalingError("fit_scaling: duplicate smallest axis values");
        fit.reference = (x2 * x2 * v1 - x1 * x1 * v2) / (x2 * x2 - x1 * x1);
    }

    std::vector<double> lx, ly;
    for (const auto& [x, v] : pts) {
        const double shift = fit.reference - v;
        if (!(shift > 0.0)) {
            std::ostringstream os;
            os << "fit_scaling: nonpositive shift " << shift << " at axis value " << x;
            throw ScalingError(os.str());
        }
        lx.push_back(std::log(x));
        ly.push_back(std::log(shift));
    }

    const int n = int(lx.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx < 1e-300) throw ScalingError("fit_scaling: axis values are all equal");
    fit.slope = sxy / sxx;
    const double intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = ly[i] - (intercept + fit.slope * lx[i]);
        sse += r * r;
    }
    fit.ci_halfwidth = 2.0 * std::sqrt(sse / double(n - 2) / sxx);
    return fit;
}

}  // namespace evmchaos
