#pragma once

#include <cstdint>
#include <string>

#include "evmchaos/errors.hpp"

namespace evmchaos {

/// Physical parameters of the kicked damped oscillator in oscillator units
/// (mass, bare frequency and kick-potential width all equal to 1).
/// The kick potential is V(x) = -(V0 * sqrt(pi)/2) erf-shaped well with
/// V'(x) = -v0 * exp(-x^2); between kicks the motion is a damped rotation.
struct Params {
    double gamma = 0.03;   ///< friction coefficient, must lie in (0, 1)
    double tau = 10.0;     ///< kick period
    double v0 = 1.0;       ///< kick strength
    double hbar = 0.0;     ///< Planck constant in oscillator units (0 = classical noise)
    double kbt = 0.0;      ///< bath temperature k_B T
    double omega_c = 25.0; ///< exponential cutoff frequency of the bath spectrum

    /// Throw if the parameter set is outside the supported regime.
    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0))
            throw UnsupportedRegime("gamma must lie in (0,1), got " + std::to_string(gamma));
        if (!(tau > 0.0))
            throw UnsupportedRegime("tau must be positive");
        if (hbar < 0.0 || kbt < 0.0)
            throw UnsupportedRegime("hbar and kbt must be nonnegative");
        if ((hbar > 0.0 || kbt > 0.0) && !(omega_c > 0.0))
            throw UnsupportedRegime("omega_c must be positive when noise is present");
    }
};

namespace detail {

inline std::uint64_t fnv1a_mix(std::uint64_t h, double x) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(x));
    __builtin_memcpy(&bits, &x, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace detail

/// Hash of the parameters that determine the bath noise moments
/// (everything except the kick strength v0).
inline std::uint64_t noise_params_hash(const Params& p) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    h = detail::fnv1a_mix(h, p.gamma);
    h = detail::fnv1a_mix(h, p.tau);
    h = detail::fnv1a_mix(h, p.hbar);
    h = detail::fnv1a_mix(h, p.kbt);
    h = detail::fnv1a_mix(h, p.omega_c);
    return h;
}

}  // namespace evmchaos
