#include "evmchaos/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace evmchaos {

namespace {

/// Shared core of the classical step: new state plus (optionally) the tangent
/// map, reusing the single exponential evaluation.
void classical_step_core(const ClassicalState& s, const TMatrix& t, double v0, ClassicalState& out,
                         Mat2* jac) {
    const double a = t.t_qq, b = t.t_qp, c = t.t_pq, d = t.t_pp;
    out = s;
    out.q = detail::flush_subnormal(a * s.q + b * s.p);
    const double ve = v0 == 0.0 ? 0.0 : v0 * std::exp(-out.q * out.q);
    out.p = detail::flush_subnormal(c * s.q + d * s.p + ve);
    if (!(std::abs(out.q) <= kEscapeLimit && std::abs(out.p) <= kEscapeLimit)) out.escaped = true;
    if (jac) {
        const double v2 = 2.0 * out.q * ve;
        (*jac)(0, 0) = a;
        (*jac)(0, 1) = b;
        (*jac)(1, 0) = c - v2 * a;
        (*jac)(1, 1) = d - v2 * b;
    }
}

/// Shared core of the expectation-values step (ordering q, p, s_qq, s_pp,
/// s_qp).  The Jacobian follows by the chain rule through q' = a q + b p:
/// every curvature-dependent coefficient contributes its v2/v3/v4 derivative
/// times (a, b) in the first two columns.
void evm_step_core(const EvmState& s, const TMatrix& t, double v0, const NoiseMoments* nm,
                   EvmState& out, Mat5* jac) {
    const double a = t.t_qq, b = t.t_qp, c = t.t_pq, d = t.t_pp;
    out = s;
    out.q = detail::flush_subnormal(a * s.q + b * s.p);

    const double x = out.q;
    const double ve = v0 == 0.0 ? 0.0 : v0 * std::exp(-x * x);
    const double v1 = -ve;
    const double v2 = 2.0 * x * ve;
    const double v3 = ve * (2.0 - 4.0 * x * x);
    const double v4 = ve * (8.0 * x * x * x - 12.0 * x);

    NoiseCombo noise;
    double dhh = 0.0, dfh = 0.0;
    if (nm) {
        noise = combine_moments(*nm, v2, t.gamma, t.omega0);
        combine_moments_derivative(*nm, v2, t.gamma, t.omega0, dhh, dfh);
    }

    const double r_pq = c - v2 * a;
    const double r_pp = d - v2 * b;

    out.s_qq =
        detail::flush_subnormal(a * a * s.s_qq + b * b * s.s_pp + a * b * s.s_qp + noise.ff);
    out.s_pp = detail::flush_subnormal(r_pq * r_pq * s.s_qq + r_pp * r_pp * s.s_pp +
                                       r_pq * r_pp * s.s_qp + noise.hh);
    out.s_qp = detail::flush_subnormal(2.0 * r_pq * a * s.s_qq + 2.0 * b * r_pp * s.s_pp +
                                       (r_pq * b + r_pp * a) * s.s_qp + noise.fh);
    out.p = detail::flush_subnormal(c * s.q + d * s.p - v1 - 0.5 * v3 * out.s_qq);

    const double scale = std::abs(out.s_qq) + std::abs(out.s_pp) + 1e-300;
    for (double* v : {&out.s_qq, &out.s_pp}) {
        if (*v < 0.0) {
            if (*v < -1e-9 * scale) out.sigma_clipped = true;
            *v = 0.0;
        }
    }
    if (!(std::abs(out.q) <= kEscapeLimit && std::abs(out.p) <= kEscapeLimit) ||
        !std::isfinite(out.s_qq + out.s_pp + out.s_qp))
        out.escaped = true;

    if (jac) {
        Mat5& J = *jac;
        J.setZero();
        // position mean: pure rotation entries
        J(0, 0) = a;
        J(0, 1) = b;
        // position variance: quadratic form in the rotation entries
        J(2, 2) = a * a;
        J(2, 3) = b * b;
        J(2, 4) = a * b;
        // momentum mean: sheared rotation plus the truncation feedback from
        // the (already updated) position variance
        J(1, 0) = c - v2 * a - 0.5 * v4 * a * out.s_qq;
        J(1, 1) = d - v2 * b - 0.5 * v4 * b * out.s_qq;
        J(1, 2) = -0.5 * v3 * a * a;
        J(1, 3) = -0.5 * v3 * b * b;
        J(1, 4) = -0.5 * v3 * a * b;
        // momentum variance: the shear entries depend on v2(q'), and so does
        // the additive noise; both enter the mean columns via v3 * (a, b)
        const double dspp_dv2 =
            -2.0 * r_pq * a * s.s_qq - 2.0 * r_pp * b * s.s_pp - (a * r_pp + b * r_pq) * s.s_qp +
            dhh;
        J(3, 0) = dspp_dv2 * v3 * a;
        J(3, 1) = dspp_dv2 * v3 * b;
        J(3, 2) = r_pq * r_pq;
        J(3, 3) = r_pp * r_pp;
        J(3, 4) = r_pq * r_pp;
        // cross moment
        const double dsqp_dv2 =
            -2.0 * a * a * s.s_qq - 2.0 * b * b * s.s_pp - 2.0 * a * b * s.s_qp + dfh;
        J(4, 0) = dsqp_dv2 * v3 * a;
        J(4, 1) = dsqp_dv2 * v3 * b;
        J(4, 2) = 2.0 * r_pq * a;
        J(4, 3) = 2.0 * b * r_pp;
        J(4, 4) = r_pq * b + r_pp * a;
    }
}

}  // namespace

Mat2 classical_jacobian(const ClassicalState& s, const TMatrix& t, double v0) {
    ClassicalState tmp;
    Mat2 j;
    classical_step_core(s, t, v0, tmp, &j);
    return j;
}

Mat5 evm_jacobian(const EvmState& s, const TMatrix& t, double v0, const NoiseMoments* nm) {
    EvmState tmp;
    Mat5 j;
    evm_step_core(s, t, v0, nm, tmp, &j);
    return j;
}

void classical_step_with_tangent(ClassicalState& s, Vec2& tangent, const TMatrix& t, double v0) {
    // scalar form of classical_step_core + 2x2 tangent multiply: this is the
    // inner loop of long Lyapunov runs, so avoid the matrix temporaries
    const double a = t.t_qq, b = t.t_qp, c = t.t_pq, d = t.t_pp;
    const double q1 = detail::flush_subnormal(a * s.q + b * s.p);
    const double ve = v0 == 0.0 ? 0.0 : v0 * std::exp(-q1 * q1);
    const double p1 = detail::flush_subnormal(c * s.q + d * s.p + ve);
    const double v2 = 2.0 * q1 * ve;
    const double tq = tangent[0], tp = tangent[1];
    tangent[0] = a * tq + b * tp;
    tangent[1] = (c - v2 * a) * tq + (d - v2 * b) * tp;
    s.q = q1;
    s.p = p1;
    if (!(std::abs(q1) <= kEscapeLimit && std::abs(p1) <= kEscapeLimit)) s.escaped = true;
}

void evm_step_with_tangent(EvmState& s, Vec5& tangent, const TMatrix& t, double v0,
                           const NoiseMoments* nm) {
    EvmState out;
    Mat5 j;
    evm_step_core(s, t, v0, nm, out, &j);
    tangent = (j * tangent).eval();
    s = out;
}

namespace {

/// Benettin driver shared by both maps.  StepFn advances the state and
/// multiplies the tangent by the local Jacobian; the growth logs telescope,
/// so the renormalization cadence only guards the floating-point range.
template <class State, class Vec, class StepFn>
LyapunovEstimate benettin(State state, Vec tangent, const LyapunovOptions& opt, StepFn&& step) {
    LyapunovEstimate est;
    for (long i = 0; i < opt.n_transient; ++i) {
        Vec dummy = tangent;  // tangent not needed during the transient
        step(state, dummy);
        if (state.escaped) {
            est.escaped = true;
            est.lambda = std::numeric_limits<double>::quiet_NaN();
            return est;
        }
    }
    tangent.normalize();

    const int blocks = 10;
    const long block_len = std::max<long>(opt.n_iter / blocks, 1);
    const int k = std::max(opt.renorm_every, 1);
    double block_mean[blocks];
    for (int bi = 0; bi < blocks; ++bi) {
        double acc = 0.0;
        long since_renorm = 0;
        for (long i = 0; i < block_len; ++i) {
            step(state, tangent);
            if (state.escaped) {
                est.escaped = true;
                est.lambda = std::numeric_limits<double>::quiet_NaN();
                return est;
            }
            if (++since_renorm >= k) {
                const double nrm = tangent.norm();
                acc += std::log(nrm);
                tangent /= nrm;
                since_renorm = 0;
            } else {
                // keep the unnormalized magnitude inside the exponent range
                const double n2 = tangent.squaredNorm();
                if (n2 > 1e200 || n2 < 1e-200) {
                    const double nrm = std::sqrt(n2);
                    acc += std::log(nrm);
                    tangent /= nrm;
                    since_renorm = 0;
                }
            }
        }
        if (since_renorm > 0) {  // flush so each block is self-contained
            const double nrm = tangent.norm();
            acc += std::log(nrm);
            tangent /= nrm;
        }
        block_mean[bi] = acc / double(block_len);
    }

    double mean = 0.0;
    for (double b : block_mean) mean += b;
    mean /= blocks;
    double var = 0.0;
    for (double b : block_mean) var += (b - mean) * (b - mean);
    var /= (blocks - 1);
    est.lambda = mean;
    est.stderr_ = std::sqrt(var / blocks);
    est.n_iter = block_len * blocks;
    return est;
}

}  // namespace

LyapunovEstimate largest_lyapunov_classical(const TMatrix& t, double v0, const ClassicalState& ic,
                                            const LyapunovOptions& opt) {
    Vec2 tangent(opt.tangent_q, opt.tangent_p);
    return benettin(ic, tangent, opt, [&](ClassicalState& s, Vec2& v) {
        classical_step_with_tangent(s, v, t, v0);
    });
}

LyapunovEstimate largest_lyapunov_evm(const TMatrix& t, double v0, const NoiseMoments* nm,
                                      const EvmState& ic, const LyapunovOptions& opt) {
    Vec5 tangent;
    tangent << opt.tangent_q, opt.tangent_p, 0.3, 0.2, 0.1;
    return benettin(ic, tangent, opt, [&](EvmState& s, Vec5& v) {
        evm_step_with_tangent(s, v, t, v0, nm);
    });
}

// ---------------------------------------------------------------------------
// fixed points and bifurcation classification
// ---------------------------------------------------------------------------

namespace {

/// Uniform interface over the two maps for the Newton/continuation code.
struct ClassicalSystem {
    static constexpr int dim = 2;
    using Vec = Vec2;
    using Mat = Mat2;
    const TMatrix& t;
    double v0;
    double hbar;  // unused, kept for interface parity

    Vec step(const Vec& u, Mat* jac) const {
        ClassicalState s{u[0], u[1], false};
        ClassicalState out;
        classical_step_core(s, t, v0, out, jac);
        return Vec(out.q, out.p);
    }
    Vec initial(double q0, double p0) const { return Vec(q0, p0); }
};

struct EvmSystem {
    static constexpr int dim = 5;
    using Vec = Vec5;
    using Mat = Mat5;
    const TMatrix& t;
    double v0;
    double hbar;
    const NoiseMoments* nm;

    Vec step(const Vec& u, Mat* jac) const {
        EvmState s{u[0], u[1], u[2], u[3], u[4], false, false};
        EvmState out;
        evm_step_core(s, t, v0, nm, out, jac);
        Vec r;
        r << out.q, out.p, out.s_qq, out.s_pp, out.s_qp;
        return r;
    }
    Vec initial(double q0, double p0) const {
        Vec r;
        r << q0, p0, 0.5 * hbar, 0.5 * hbar, 0.0;
        return r;
    }
};

template <class Sys>
struct NewtonResult {
    typename Sys::Vec u;
    typename Sys::Mat jacobian;  // of the full period-fold composition
    double residual;
    int iterations;
};

/// Map composed over one cycle together with its chain-rule Jacobian.
template <class Sys>
typename Sys::Vec composed_map(const Sys& sys, typename Sys::Vec u, int period,
                               typename Sys::Mat* jac) {
    typename Sys::Mat total = Sys::Mat::Identity();
    typename Sys::Mat step_jac;
    for (int i = 0; i < period; ++i) {
        u = sys.step(u, jac ? &step_jac : nullptr);
        if (jac) total = step_jac * total;
    }
    if (jac) *jac = total;
    return u;
}

template <class Sys>
NewtonResult<Sys> newton_periodic(const Sys& sys, typename Sys::Vec guess, int period,
                                  const FixedPointOptions& opt) {
    using Vec = typename Sys::Vec;
    using Mat = typename Sys::Mat;
    Vec u = guess;
    double res = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= opt.max_iter; ++it) {
        Mat jac;
        Vec fu = composed_map(sys, u, period, &jac);
        Vec r = fu - u;
        res = r.template lpNorm<Eigen::Infinity>();
        if (!std::isfinite(res))
            throw ConvergenceError("newton_periodic: iteration left the finite domain", res);
        if (res < opt.tol) {
            NewtonResult<Sys> out{u, jac, res, it};
            return out;
        }
        Mat m = jac - Mat::Identity();
        Vec delta = m.partialPivLu().solve(-r);
        if (!delta.allFinite())
            throw ConvergenceError("newton_periodic: singular linearization", res);
        // cap the step: near a multiplier grazing +1 the linearization is
        // ill-conditioned and a raw step can fly far outside the basin
        const double cap = 0.5 * (1.0 + u.template lpNorm<Eigen::Infinity>());
        const double dn = delta.template lpNorm<Eigen::Infinity>();
        if (dn > cap) delta *= cap / dn;
        u += delta;
    }
    throw ConvergenceError("newton_periodic: no convergence after " +
                               std::to_string(opt.max_iter) + " iterations",
                           res);
}

template <class Sys>
std::vector<std::complex<double>> eigenvalues(const typename Sys::Mat& m) {
    Eigen::EigenSolver<typename Sys::Mat> solver(m, /*computeEigenvectors=*/false);
    std::vector<std::complex<double>> ev(Sys::dim);
    for (int i = 0; i < Sys::dim; ++i) ev[i] = solver.eigenvalues()[i];
    return ev;
}

template <class Sys>
double spectral_radius_of(const std::vector<std::complex<double>>& ev) {
    double r = 0.0;
    for (auto& e : ev) r = std::max(r, std::abs(e));
    return r;
}

/// Attractor period from a settled orbit; 0 when no period <= max_period
/// matches.  The tolerance is deliberately loose — the Newton polish that
/// follows tightens the orbit, and a spuriously small period is caught by
/// the stability check in the continuation.
template <class Sys>
int detect_period_impl(const Sys& sys, double q0, double p0, long n_transient, int max_period,
                       double tol) {
    using Vec = typename Sys::Vec;
    Vec u = sys.initial(q0, p0);
    for (long i = 0; i < n_transient; ++i) {
        u = sys.step(u, nullptr);
        if (!u.allFinite() || u.template lpNorm<Eigen::Infinity>() > kEscapeLimit) return 0;
    }
    const int window = 4 * max_period;
    std::vector<Vec> ring(window);
    double scale = 1.0;
    for (int i = 0; i < window; ++i) {
        u = sys.step(u, nullptr);
        if (!u.allFinite()) return 0;
        ring[i] = u;
        scale = std::max(scale, u.template lpNorm<Eigen::Infinity>());
    }
    for (int m = 1; m <= max_period; ++m) {
        bool ok = true;
        for (int i = 0; i + m < window && ok; ++i)
            ok = (ring[i + m] - ring[i]).template lpNorm<Eigen::Infinity>() <= tol * scale;
        if (ok) return m;
    }
    return 0;
}

/// Robust orbit solve for continuation: Newton from the warm start, with a
/// fallback that re-settles on the attractor when the solution lands on a
/// different orbit.  Wherever some multiplier of the composed map grazes +1
/// the linearization is near-singular and a Newton step can leave the basin
/// (typically falling onto a shorter coexisting orbit), so a converged
/// result is only accepted within a jump radius of the warm start.  The
/// result is canonicalized to the cycle point nearest the warm start, which
/// keeps consecutive samples on one branch point of the cycle.
template <class Sys>
NewtonResult<Sys> solve_orbit(const Sys& sys, const typename Sys::Vec& u_warm, int period,
                              double seed_q, double seed_p, long settle_iters,
                              const FixedPointOptions& fp_opt) {
    using Vec = typename Sys::Vec;
    // Branch identity is judged in (q, p) only: the second-moment components
    // are slaved to the cycle and legitimately spike where a multiplier of
    // the moment block grazes +1, so their motion between nearby parameter
    // values can be large on a branch that is perfectly continuous.
    auto qp_dist = [](const Vec& x, const Vec& y) {
        return std::max(std::abs(x[0] - y[0]), std::abs(x[1] - y[1]));
    };
    const double radius =
        0.2 * (1.0 + std::max(std::abs(u_warm[0]), std::abs(u_warm[1])));
    auto canonical = [&](NewtonResult<Sys>& nr) {
        Vec best = nr.u, cur = nr.u;
        double best_d = qp_dist(nr.u, u_warm);
        const double d0 = best_d;
        for (int k = 1; k < period; ++k) {
            cur = sys.step(cur, nullptr);
            const double d = qp_dist(cur, u_warm);
            if (d < best_d) {
                best_d = d;
                best = cur;
            }
        }
        // re-polish from the shifted representative so the returned Jacobian
        // is the composition around that point (same spectrum, right frame)
        if (best_d < d0) nr = newton_periodic(sys, best, period, fp_opt);
        return best_d;
    };
    try {
        auto nr = newton_periodic(sys, u_warm, period, fp_opt);
        if (canonical(nr) <= radius) return nr;
    } catch (const ConvergenceError&) {
        // fall through to the re-seeded attempt
    }
    Vec u = sys.initial(seed_q, seed_p);
    for (long i = 0; i < settle_iters; ++i) {
        u = sys.step(u, nullptr);
        if (!u.allFinite())
            throw ConvergenceError("orbit settling left the finite domain", 0.0);
    }
    auto nr = newton_periodic(sys, u, period, fp_opt);
    if (canonical(nr) > radius)
        throw ConvergenceError("tracked orbit lost: solutions jump between branches", 0.0);
    return nr;
}

template <class Sys>
Sys make_system(const Params& p, const TMatrix& t, const NoiseMoments* nm, double v0);

template <>
ClassicalSystem make_system<ClassicalSystem>(const Params& p, const TMatrix& t,
                                             const NoiseMoments*, double v0) {
    return ClassicalSystem{t, v0, p.hbar};
}

template <>
EvmSystem make_system<EvmSystem>(const Params& p, const TMatrix& t, const NoiseMoments* nm,
                                 double v0) {
    return EvmSystem{t, v0, p.hbar, nm};
}

template <class Sys>
BifurcationResult classify_impl(const Params& base, const NoiseMoments* nm, double v0_lo,
                                double v0_hi, const ClassifyOptions& opt) {
    using Vec = typename Sys::Vec;
    BifurcationResult result;
    const TMatrix t = t_matrix(base.gamma, base.tau);

    auto system_at = [&](double v0) { return make_system<Sys>(base, t, nm, v0); };

    // 1. establish the periodic orbit at the stable (lower) end
    int period = opt.period;
    if (period <= 0) {
        period = detect_period_impl(system_at(v0_lo), opt.detect_q, opt.detect_p,
                                    opt.detect_transient, 64, 1e-4);
        if (period == 0) {
            result.diagnostic = "no periodic attractor detected at the lower bracket end";
            return result;
        }
    }

    FixedPointOptions fp_opt;
    Vec u;
    {
        // settle onto the attractor, then polish
        Sys sys = system_at(v0_lo);
        u = sys.initial(opt.detect_q, opt.detect_p);
        for (long i = 0; i < opt.detect_transient; ++i) u = sys.step(u, nullptr);
        try {
            auto nr = newton_periodic(sys, u, period, fp_opt);
            u = nr.u;
            // a period-m orbit that is really period-d (d | m) confuses the
            // eigenvalue criteria; shrink to the smallest true period
            for (int d = 1; d < period; ++d) {
                if (period % d != 0) continue;
                typename Sys::Vec ud = composed_map(sys, u, d, nullptr);
                if ((ud - u).template lpNorm<Eigen::Infinity>() < 1e-7) {
                    period = d;
                    break;
                }
            }
        } catch (const ConvergenceError& e) {
            result.diagnostic = std::string("orbit polish failed at the lower bracket end: ") +
                                e.what();
            return result;
        }
    }
    result.period = period;

    // 2. continuation: track the orbit and its spectral radius across the bracket
    struct Sample {
        double v0, rho;
        Vec u;
    };
    std::vector<Sample> samples;
    const int npts = std::max(opt.continuation_points, 2);
    Vec u_warm = u;
    for (int i = 0; i < npts; ++i) {
        const double v0 = v0_lo + (v0_hi - v0_lo) * double(i) / double(npts - 1);
        try {
            auto nr = solve_orbit(system_at(v0), u_warm, period, opt.detect_q, opt.detect_p,
                                  opt.detect_transient, fp_opt);
            u_warm = nr.u;
            auto ev = eigenvalues<Sys>(nr.jacobian);
            const double rho = spectral_radius_of<Sys>(ev);
            samples.push_back({v0, rho, nr.u});
            result.trace.push_back({v0, rho});
        } catch (const ConvergenceError&) {
            // orbit lost (fold or basin change); keep what we have
            break;
        }
    }
    if (samples.size() < 2) {
        result.diagnostic = "continuation lost the orbit immediately (fold suspected)";
        return result;
    }

    // 3. pick the stability-loss crossing (last one by default)
    int cross = -1;
    for (int i = 0; i + 1 < int(samples.size()); ++i) {
        if (samples[i].rho <= 1.0 && samples[i + 1].rho > 1.0) {
            cross = i;
            if (!opt.last_crossing) break;
        }
    }
    if (cross < 0) {
        std::ostringstream os;
        if (samples.size() < std::size_t(npts))
            os << "continuation lost the orbit near v0 = " << samples.back().v0
               << " without a prior stability loss (fold suspected)";
        else
            os << "no stability loss in bracket: spectral radius stays "
               << (samples.front().rho > 1.0 ? "above" : "below") << " 1";
        result.diagnostic = os.str();
        return result;
    }

    // 4. bisect the crossing
    double va = samples[cross].v0, vb = samples[cross + 1].v0;
    double rho_a = samples[cross].rho, rho_b = samples[cross + 1].rho;
    Vec ua = samples[cross].u, ub = samples[cross + 1].u;
    std::vector<std::complex<double>> ev_hi =
        eigenvalues<Sys>(newton_periodic(system_at(vb), ub, period, fp_opt).jacobian);
    while (vb - va > opt.bisect_tol) {
        const double vm = 0.5 * (va + vb);
        try {
            auto nr = solve_orbit(system_at(vm), ua, period, opt.detect_q, opt.detect_p,
                                  opt.detect_transient, fp_opt);
            auto ev = eigenvalues<Sys>(nr.jacobian);
            const double rho = spectral_radius_of<Sys>(ev);
            result.trace.push_back({vm, rho});
            if (rho > 1.0) {
                vb = vm;
                ub = nr.u;
                rho_b = rho;
                ev_hi = ev;
            } else {
                va = vm;
                ua = nr.u;
                rho_a = rho;
            }
        } catch (const ConvergenceError& e) {
            result.diagnostic = std::string("Newton failed during bisection: ") + e.what();
            return result;
        }
    }
    result.v0_star = 0.5 * (va + vb);
    result.bracket_width = vb - va;

    // 4b. secant polish in v0 until the critical multiplier sits on the unit
    // circle to mu_tol (the bracket endpoints make a safe starting pair)
    {
        double v1 = va, f1 = rho_a - 1.0;
        double v2 = vb, f2 = rho_b - 1.0;
        Vec u_polish = ub;
        const double span = std::max(vb - va, 1e-12);
        for (int it = 0; it < 40 && std::abs(f2) > opt.mu_tol; ++it) {
            if (std::abs(f2 - f1) < 1e-300) break;
            double v3 = v2 - f2 * (v2 - v1) / (f2 - f1);
            if (!(v3 > va - 10 * span && v3 < vb + 10 * span)) break;
            try {
                auto nr = solve_orbit(system_at(v3), u_polish, period, opt.detect_q,
                                      opt.detect_p, opt.detect_transient, fp_opt);
                auto ev = eigenvalues<Sys>(nr.jacobian);
                const double rho = spectral_radius_of<Sys>(ev);
                result.trace.push_back({v3, rho});
                v1 = v2;
                f1 = f2;
                v2 = v3;
                f2 = rho - 1.0;
                u_polish = nr.u;
                ev_hi = ev;
            } catch (const ConvergenceError&) {
                break;  // keep the bisection answer
            }
        }
        if (std::abs(f2) <= opt.mu_tol) result.v0_star = v2;
    }

    // 5. classify by the critical eigenvalue(s) at the crossing
    std::sort(ev_hi.begin(), ev_hi.end(),
              [](const std::complex<double>& x, const std::complex<double>& y) {
                  return std::abs(x) > std::abs(y);
              });
    result.mu1 = ev_hi[0];
    const double im_scale = std::max(1.0, std::abs(ev_hi[0]));
    if (std::abs(ev_hi[0].imag()) > 1e-6 * im_scale) {
        result.type = BifurcationType::hopf;
        result.mu2 = ev_hi.size() > 1 ? ev_hi[1] : std::conj(ev_hi[0]);
    } else if (ev_hi[0].real() < 0.0) {
        result.type = BifurcationType::period_doubling;
        result.mu2 = result.mu1;
    } else {
        result.type = BifurcationType::none;
        result.mu2 = result.mu1;
        result.diagnostic = "real eigenvalue crossed +1 (fold/transcritical), not classified";
    }
    return result;
}

}  // namespace

FixedPoint2 fixed_point_classical(const TMatrix& t, double v0, Vec2 guess, int period,
                                  const FixedPointOptions& opt) {
    ClassicalSystem sys{t, v0, 0.0};
    auto nr = newton_periodic(sys, guess, period, opt);
    return FixedPoint2{nr.u, nr.jacobian, nr.residual, nr.iterations};
}

FixedPoint5 fixed_point_evm(const TMatrix& t, double v0, const NoiseMoments* nm, Vec5 guess,
                            int period, const FixedPointOptions& opt) {
    EvmSystem sys{t, v0, 0.0, nm};
    auto nr = newton_periodic(sys, guess, period, opt);
    return FixedPoint5{nr.u, nr.jacobian, nr.residual, nr.iterations};
}

int detect_period(const Params& p, const NoiseMoments* nm, double q0, double p0, long n_transient,
                  int max_period, double tol) {
    const TMatrix t = t_matrix(p.gamma, p.tau);
    if (nm) {
        EvmSystem sys{t, p.v0, p.hbar, nm};
        return detect_period_impl(sys, q0, p0, n_transient, max_period, tol);
    }
    ClassicalSystem sys{t, p.v0, p.hbar};
    return detect_period_impl(sys, q0, p0, n_transient, max_period, tol);
}

BifurcationResult classify_bifurcation(const Params& base, const NoiseMoments* nm, double v0_lo,
                                       double v0_hi, const ClassifyOptions& opt) {
    if (!(v0_hi > v0_lo)) throw Error("classify_bifurcation: empty bracket");
    if (nm) return classify_impl<EvmSystem>(base, nm, v0_lo, v0_hi, opt);
    return classify_impl<ClassicalSystem>(base, nullptr, v0_lo, v0_hi, opt);
}

}  // namespace evmchaos
