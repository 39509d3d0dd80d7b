#include "evmchaos/core_map.hpp"

#include <cmath>

#include "evmchaos/noise_kernels.hpp"

namespace evmchaos {

TMatrix t_matrix(double gamma, double tau) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw UnsupportedRegime("t_matrix: gamma must lie in (0,1), got " +
                                std::to_string(gamma));
    if (!(tau > 0.0)) throw UnsupportedRegime("t_matrix: tau must be positive");
    const double w0 = std::sqrt(1.0 - gamma * gamma);
    const double decay = std::exp(-gamma * tau);
    const double c = std::cos(w0 * tau), s = std::sin(w0 * tau);
    TMatrix t;
    t.t_qq = decay * (c + gamma * s / w0);
    t.t_qp = decay * s / w0;
    t.t_pq = -decay * (w0 + gamma * gamma / w0) * s;
    t.t_pp = decay * (c - gamma * s / w0);
    t.omega0 = w0;
    t.gamma = gamma;
    t.tau = tau;
    return t;
}

KickDerivatives kick_derivatives(double x, double v0) {
    const double ve = v0 == 0.0 ? 0.0 : v0 * std::exp(-x * x);
    KickDerivatives d;
    d.v1 = -ve;
    d.v2 = 2.0 * x * ve;
    d.v3 = ve * (2.0 - 4.0 * x * x);
    d.v4 = ve * (8.0 * x * x * x - 12.0 * x);
    return d;
}

namespace {

inline bool out_of_range(double a, double b) {
    return !(std::abs(a) <= kEscapeLimit && std::abs(b) <= kEscapeLimit);
}

}  // namespace

ClassicalState classical_step(const ClassicalState& s, const TMatrix& t, double v0) {
    if (s.escaped) return s;
    ClassicalState n = s;
    n.q = detail::flush_subnormal(t.t_qq * s.q + t.t_qp * s.p);
    const double ve = v0 == 0.0 ? 0.0 : v0 * std::exp(-n.q * n.q);
    n.p = detail::flush_subnormal(t.t_pq * s.q + t.t_pp * s.p + ve);  // kick: -V'(q')
    if (out_of_range(n.q, n.p)) n.escaped = true;
    return n;
}

EvmState quantum_step(const EvmState& s, const TMatrix& t, double v0, const NoiseMoments* nm) {
    if (s.escaped) return s;
    const double a = t.t_qq, b = t.t_qp, c = t.t_pq, d = t.t_pp;

    EvmState n = s;
    n.q = detail::flush_subnormal(a * s.q + b * s.p);

    const KickDerivatives kd = kick_derivatives(n.q, v0);
    NoiseCombo noise;
    if (nm) noise = combine_moments(*nm, kd.v2, t.gamma, t.omega0);

    // position variance propagates through the bare T entries: the kick is
    // instantaneous in momentum, so q and s_qq are continuous across it
    n.s_qq = detail::flush_subnormal(a * a * s.s_qq + b * b * s.s_pp + a * b * s.s_qp + noise.ff);

    const double r_pq = c - kd.v2 * a;  // kick-sheared momentum row
    const double r_pp = d - kd.v2 * b;
    n.s_pp = detail::flush_subnormal(r_pq * r_pq * s.s_qq + r_pp * r_pp * s.s_pp +
                                     r_pq * r_pp * s.s_qp + noise.hh);
    n.s_qp = detail::flush_subnormal(2.0 * r_pq * a * s.s_qq + 2.0 * b * r_pp * s.s_pp +
                                     (r_pq * b + r_pp * a) * s.s_qp + noise.fh);

    // Gaussian truncation: the mean momentum feels the third derivative of
    // the kick potential weighted by the updated position variance
    n.p = detail::flush_subnormal(c * s.q + d * s.p - kd.v1 - 0.5 * kd.v3 * n.s_qq);

    // the exact moment recursion is a congruence plus a psd noise term, so
    // negative variances can only be roundoff: clamp and flag
    const double scale = std::abs(n.s_qq) + std::abs(n.s_pp) + 1e-300;
    for (double* v : {&n.s_qq, &n.s_pp}) {
        if (*v < 0.0) {
            if (*v < -1e-9 * scale) n.sigma_clipped = true;
            *v = 0.0;
        }
    }

    if (out_of_range(n.q, n.p) || !std::isfinite(n.s_qq + n.s_pp + n.s_qp)) n.escaped = true;
    return n;
}

}  // namespace evmchaos
