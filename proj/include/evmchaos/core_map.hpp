#pragma once

#include "evmchaos/params.hpp"

namespace evmchaos {

/// Linear propagator of the damped oscillator over one kick period.
/// Maps (q, p) at t = n*tau + 0 to (q, p) at t = (n+1)*tau - 0.
struct TMatrix {
    double t_qq, t_qp, t_pq, t_pp;
    double omega0;  ///< reduced frequency sqrt(1 - gamma^2)
    double gamma, tau;
};

/// Closed-form propagator entries; det T = exp(-2*gamma*tau) exactly.
/// Throws UnsupportedRegime for gamma outside (0,1).
TMatrix t_matrix(double gamma, double tau);

/// Derivatives of the Gaussian kick potential at position x:
/// v1 = V'(x) = -v0*exp(-x^2), and v2..v4 its successive x-derivatives.
struct KickDerivatives {
    double v1, v2, v3, v4;
};

KickDerivatives kick_derivatives(double x, double v0);

/// Classical phase-space point.
struct ClassicalState {
    double q = 0.0, p = 0.0;
    bool escaped = false;  ///< sticky flag: orbit left the trusted region
};

/// Expectation-value state of the quantized map: means and second-order
/// central moments (s_qp is the symmetrized sum <dQ dP + dP dQ>).
struct EvmState {
    double q = 0.0, p = 0.0;
    double s_qq = 0.0, s_pp = 0.0, s_qp = 0.0;
    bool escaped = false;     ///< sticky flag: orbit left the trusted region
    bool sigma_clipped = false;  ///< roundoff pushed a variance below zero (clamped)
};

/// Coherent (minimum-uncertainty) initial moments around (q, p).
inline EvmState coherent_state(double q, double p, double hbar) {
    return EvmState{q, p, 0.5 * hbar, 0.5 * hbar, 0.0, false, false};
}

/// Magnitude beyond which an orbit is flagged escaped.
inline constexpr double kEscapeLimit = 1e6;

namespace detail {

/// Round subnormal magnitudes to zero.  Freely decaying orbits otherwise sink
/// into denormal arithmetic (orders of magnitude slower on common hardware)
/// while representing nothing: the perturbation is below 1e-307 absolute.
inline double flush_subnormal(double x) {
    return x < 2.2250738585072014e-308 && x > -2.2250738585072014e-308 ? 0.0 : x;
}

}  // namespace detail

/// One period of the classical map: damped rotation, then an impulsive
/// momentum kick -V'(q') evaluated at the updated position.
ClassicalState classical_step(const ClassicalState& s, const TMatrix& t, double v0);

/// Per-step additive noise covariance entering the moment map.
/// ff feeds s_qq, hh feeds s_pp, fh the symmetrized cross moment.
struct NoiseCombo {
    double ff = 0.0, hh = 0.0, fh = 0.0;
};

struct NoiseMoments;  // defined in noise_kernels.hpp

/// One period of the expectation-values map (means + second moments,
/// Gaussian truncation of the Heisenberg dynamics).  The position mean and
/// s_qq propagate through the bare T entries (the kick is position-diagonal);
/// the momentum row is sheared by V''(q') and the momentum mean acquires the
/// -V'''(q')/2 * s_qq' truncation term.  nm may be null for a noiseless bath.
EvmState quantum_step(const EvmState& s, const TMatrix& t, double v0, const NoiseMoments* nm);

}  // namespace evmchaos
