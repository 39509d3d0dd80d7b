#pragma once

#include <complex>
#include <vector>

#include "evmchaos/core_map.hpp"

namespace evmchaos {

/// First and second moments of a (Gaussian) state, plus the Planck constant
/// they refer to.  s_qp is the symmetrized sum <dQ dP + dP dQ>.
struct MomentSet {
    double q = 0.0, p = 0.0;
    double s_qq = 0.0, s_pp = 0.0, s_qp = 0.0;
    double hbar = 0.0;
};

inline MomentSet moments_of(const EvmState& s, double hbar) {
    return MomentSet{s.q, s.p, s.s_qq, s.s_pp, s.s_qp, hbar};
}

/// Characteristic function <exp(i alpha P) exp(i beta Q)> of the Gaussian
/// state with the given moments.  The operator ordering contributes the
/// exp(i alpha beta hbar / 2) phase on top of the classical Gaussian form.
std::complex<double> characteristic_function(const MomentSet& m, double alpha, double beta);

/// Position-space density matrix sampled on a uniform grid.
struct DensityGrid {
    int n = 0;                ///< grid size (rho is n x n, row-major)
    double x_lo = 0.0, dx = 0.0;  ///< x_j = x_lo + (j + 1/2) dx
    std::vector<std::complex<double>> rho;
    double trace = 0.0;          ///< raw trace before any renormalization
    double renorm_factor = 1.0;  ///< applied scale (1 unless renormalized)
    double hermiticity = 0.0;    ///< max |rho - rho^dagger| element

    std::complex<double> at(int i, int j) const { return rho[std::size_t(i) * n + j]; }
    double x(int j) const { return x_lo + (j + 0.5) * dx; }
};

struct ReconstructionOptions {
    int n = 256;            ///< grid size, must be a power of two
    double x_halfwidth = 0.0;  ///< half-width of the x window; 0 = auto (5.5 sigma)
    double beta_factor = 6.0;  ///< beta window, in units of 1/sqrt(s_qq)
    double renorm_threshold = 1e-3;  ///< renormalize only past this trace defect
};

/// Invert the characteristic function to <x|rho|x'> by a uniform discrete
/// sum over beta at alpha = (x - x')/hbar, then symmetrize.  Requires
/// hbar > 0 and positive variances; throws std::invalid_argument otherwise.
DensityGrid density_matrix_grid(const MomentSet& m, const ReconstructionOptions& opt = {});

/// Tr rho^2 of the sampled density matrix (trapezoid in both arguments).
double purity(const DensityGrid& g);

/// Exact purity of a Gaussian state with the given moments.
double gaussian_purity(const MomentSet& m);

/// Uncertainty-product defect s_qq s_pp - (s_qp/2)^2 - hbar^2/4 for each
/// state of an orbit; negative values flag unphysical moment sets produced
/// by the truncation.
std::vector<double> heisenberg_monitor(const std::vector<EvmState>& orbit, double hbar);

}  // namespace evmchaos
