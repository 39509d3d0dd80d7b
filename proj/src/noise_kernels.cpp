#include "evmchaos/noise_kernels.hpp"

#include <cmath>
#include <complex>

#include "evmchaos/quadrature.hpp"

namespace evmchaos {

namespace {

using cplx = std::complex<double>;

/// (exp(z) - 1) / z, series-summed near the origin to avoid cancellation.
cplx phi1(cplx z) {
    if (std::abs(z) < 0.25) {
        cplx sum = 1.0, term = 1.0;
        for (int n = 1; n < 16; ++n) {
            term *= z / double(n + 1);
            sum += term;
            if (std::abs(term) < 1e-18) break;
        }
        return sum;
    }
    return (std::exp(z) - 1.0) / z;
}

/// int_0^tau exp((-gamma + i k) x) dx, entire in k.
cplx damped_exponential_integral(double k, double gamma, double tau) {
    const cplx z(-gamma * tau, k * tau);
    return tau * phi1(z);
}

}  // namespace

KernelTriple kernel_triple(double omega, double omega0, double gamma, double tau) {
    // cos(omega(x-y)) = cos wx cos wy + sin wx sin wy factorizes the double
    // integral; bundling the four resulting 1-D integrals into
    //   A = int e^{-gx} e^{iwx} sin(w0 x) dx,  B = same with cos(w0 x)
    // gives g_ss = |A|^2, g_cc = |B|^2, g_sc = 2 Re(A conj B).
    const cplx zp = damped_exponential_integral(omega + omega0, gamma, tau);
    const cplx zm = damped_exponential_integral(omega - omega0, gamma, tau);
    const cplx A = (zp - zm) * cplx(0.0, -0.5);  // (zp - zm) / (2i)
    const cplx B = 0.5 * (zp + zm);
    KernelTriple g;
    g.g_ss = std::norm(A);
    g.g_cc = std::norm(B);
    g.g_sc = 2.0 * (A.real() * B.real() + A.imag() * B.imag());
    return g;
}

double thermal_weight(double hbar, double kbt, double omega) {
    if (hbar == 0.0) return 2.0 * kbt;  // classical equipartition limit
    if (kbt == 0.0) return hbar * omega;  // zero temperature: coth -> 1
    const double x = hbar * omega / (2.0 * kbt);
    if (x < 1e-4)  // series for coth keeps the omega -> 0 end smooth
        return hbar * omega * (1.0 / x + x / 3.0 - x * x * x / 45.0);
    return hbar * omega / std::tanh(x);
}

NoiseMoments base_moments(const Params& p) {
    p.validate();
    NoiseMoments nm;
    nm.params_hash = noise_params_hash(p);
    if (p.hbar == 0.0 && p.kbt == 0.0) return nm;  // noiseless bath

    const double w0 = std::sqrt(1.0 - p.gamma * p.gamma);
    const double prefactor = 2.0 * p.gamma / M_PI;
    nm.omega_max = 40.0 * p.omega_c;

    auto integrand = [&](double w) -> std::array<double, 3> {
        const KernelTriple g = kernel_triple(w, w0, p.gamma, p.tau);
        const double weight = prefactor * thermal_weight(p.hbar, p.kbt, w) * std::exp(-w / p.omega_c);
        return {weight * g.g_ss, weight * g.g_cc, weight * g.g_sc};
    };

    // seed panels at roughly half the fastest oscillation wavelength of the
    // kernels (frequency content up to 2*tau) so the embedded pair measures
    // the error honestly from the first pass
    const double panel = std::min(M_PI / (2.0 * p.tau), nm.omega_max / 16.0);
    const int initial = int(std::ceil(nm.omega_max / panel));
    auto res = integrate_adaptive<3>(integrand, 0.0, nm.omega_max, 1e-9, 1e-300, initial);

    nm.s_ss = res.value[0];
    nm.s_cc = res.value[1];
    nm.s_sc = res.value[2];
    double rel = 0.0;
    for (int k = 0; k < 3; ++k)
        rel = std::max(rel, res.abs_error[k] / std::max(std::abs(res.value[k]), 1e-300));
    nm.rel_error = rel;

    // tail bound: |G| <= (|A|+|B|)^2 <= (4 / (w - w0))^2 for w > w0, and the
    // thermal weight grows at most linearly, so the tail is dominated by
    //   prefactor * max(hbar, 2 kbt/w) * 16 w / (w - w0)^2 * exp(-w/wc)
    // integrated from omega_max: bound crudely by its value at omega_max
    // times omega_c (the decay scale).
    {
        const double w = nm.omega_max;
        const double envelope =
            prefactor * thermal_weight(p.hbar, p.kbt, w) * 16.0 / ((w - w0) * (w - w0));
        nm.tail_bound = envelope * std::exp(-w / p.omega_c) * p.omega_c;
    }
    return nm;
}

NoiseCombo combine_moments(const NoiseMoments& nm, double v2, double gamma, double omega0) {
    const double w = gamma + v2;
    const double inv = 1.0 / (omega0 * omega0);
    NoiseCombo c;
    c.ff = nm.s_ss * inv;
    c.hh = (w * w * nm.s_ss + omega0 * omega0 * nm.s_cc - omega0 * w * nm.s_sc) * inv;
    c.fh = (-2.0 * w * nm.s_ss + omega0 * nm.s_sc) * inv;
    return c;
}

void combine_moments_derivative(const NoiseMoments& nm, double v2, double gamma, double omega0,
                                double& dhh_dv2, double& dfh_dv2) {
    const double w = gamma + v2;
    const double inv = 1.0 / (omega0 * omega0);
    dhh_dv2 = (2.0 * w * nm.s_ss - omega0 * nm.s_sc) * inv;
    dfh_dv2 = -2.0 * nm.s_ss * inv;
}

}  // namespace evmchaos
