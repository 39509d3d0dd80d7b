#pragma once

#include <cstdint>

#include "evmchaos/core_map.hpp"
#include "evmchaos/params.hpp"

namespace evmchaos {

/// The three bath-memory kernels at frequency omega: double integrals over one
/// kick period of exp(-gamma(x+y)) * cos(omega(x-y)) against sin(w0 x)sin(w0 y),
/// cos(w0 x)cos(w0 y) and sin(w0(x+y)) respectively.
struct KernelTriple {
    double g_ss, g_cc, g_sc;
};

/// Closed-form kernel evaluation.  cos(omega(x-y)) separates the double
/// integral into products of four one-dimensional integrals, which combine
/// into two complex quantities A = int exp((-gamma+i omega)x) sin(w0 x) dx and
/// B = likewise with cos(w0 x); then g_ss = |A|^2, g_cc = |B|^2 and
/// g_sc = 2 Re(A conj B).  Stable for all omega >= 0 including omega == w0
/// and the frictionless limit.
KernelTriple kernel_triple(double omega, double omega0, double gamma, double tau);

/// Frequency integrals of the kernels against the thermal bath spectrum:
///   s_xx = (2 gamma / pi) * int_0^inf dw  hbar w coth(hbar w / 2 kbt)
///          * exp(-w/omega_c) * G_xx(w).
/// These are the raw integrals; the 1/omega0^2 normalization of the physical
/// noise covariance is applied in combine_moments.
struct NoiseMoments {
    double s_ss = 0.0, s_cc = 0.0, s_sc = 0.0;
    double rel_error = 0.0;      ///< quadrature error estimate, relative
    double tail_bound = 0.0;     ///< bound on the truncated integral tail
    double omega_max = 0.0;      ///< truncation point of the frequency integral
    std::uint64_t params_hash = 0;  ///< noise_params_hash of the generating Params
};

/// Compute the base moments for the given parameters (v0 is ignored).
/// Returns exact zeros when hbar == kbt == 0.  Relative tolerance 1e-9.
NoiseMoments base_moments(const Params& p);

/// hbar*w*coth(hbar*w / (2*kbt)) with the classical (hbar -> 0), zero-
/// temperature and small-argument limits handled explicitly.
double thermal_weight(double hbar, double kbt, double omega);

/// Combine base moments into the per-step noise covariance at local kick
/// curvature v2 = V''(q').  ff is independent of v2; hh and fh carry the
/// (gamma + v2) shear of the momentum noise.
NoiseCombo combine_moments(const NoiseMoments& nm, double v2, double gamma, double omega0);

/// d(hh)/d(v2) and d(fh)/d(v2), needed by the tangent map of the moment
/// recursion.
void combine_moments_derivative(const NoiseMoments& nm, double v2, double gamma, double omega0,
                                double& dhh_dv2, double& dfh_dv2);

}  // namespace evmchaos
