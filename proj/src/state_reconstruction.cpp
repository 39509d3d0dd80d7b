#include "evmchaos/state_reconstruction.hpp"

#include <cmath>
#include <stdexcept>

namespace evmchaos {

namespace {
using cplx = std::complex<double>;
const double kTwoPi = 6.283185307179586476925;
}  // namespace

cplx characteristic_function(const MomentSet& m, double alpha, double beta) {
    // <exp(i a P) exp(i b Q)> for a Gaussian state; the last term is the
    // operator-ordering phase exp(i a b hbar / 2) from [Q, P] = i hbar
    const cplx expo(-0.5 * (alpha * alpha * m.s_pp + beta * beta * m.s_qq +
                            alpha * beta * m.s_qp),
                    alpha * m.p + beta * m.q + 0.5 * alpha * beta * m.hbar);
    return std::exp(expo);
}

DensityGrid density_matrix_grid(const MomentSet& m, const ReconstructionOptions& opt) {
    if (!(m.hbar > 0.0))
        throw std::invalid_argument(
            "density_matrix_grid: hbar must be positive (alpha = (x - x')/hbar)");
    if (!(m.s_qq > 0.0) || m.s_pp < 0.0)
        throw std::invalid_argument("density_matrix_grid: variances must be positive");
    const int n = opt.n;
    if (n < 2 || (n & (n - 1)) != 0)
        throw std::invalid_argument("density_matrix_grid: n must be a power of two >= 2");

    const double sigma = std::sqrt(m.s_qq);
    const double halfwidth = opt.x_halfwidth > 0.0 ? opt.x_halfwidth : 5.5 * sigma;

    DensityGrid g;
    g.n = n;
    g.dx = 2.0 * halfwidth / n;
    g.x_lo = m.q - halfwidth;
    g.rho.assign(std::size_t(n) * n, cplx(0.0, 0.0));

    // midpoint beta grid, symmetric under negation; C decays as a Gaussian
    // in beta so the uniform sum is spectrally accurate
    const double beta_max = opt.beta_factor / sigma;
    const double dbeta = 2.0 * beta_max / n;
    const double beta0 = -beta_max + 0.5 * dbeta;
    const double weight = dbeta / kTwoPi;

    // Along the beta grid the term exponent is quadratic in the index k:
    //   exponent(k) = A + B k + C k^2,
    // so the terms follow the two-term recurrence t_{k+1} = t_k r_k,
    // r_{k+1} = r_k s with s = exp(2C).  |t_k| <= 1 for physical moments,
    // and the consecutive-term ratios stay O(1), so the recurrence is safe.
    const double cq = -0.5 * m.s_qq;  // beta^2 coefficient
    const cplx s_step = std::exp(cplx(2.0 * cq * dbeta * dbeta, 0.0));
    for (int i = 0; i < n; ++i) {
        const double xi = g.x(i);
        for (int j = 0; j < n; ++j) {
            const double alpha = (xi - g.x(j)) / m.hbar;
            const cplx a_term(-0.5 * alpha * alpha * m.s_pp, alpha * m.p);
            const cplx l_term(-0.5 * alpha * m.s_qp, m.q + 0.5 * alpha * m.hbar - xi);
            cplx t = std::exp(a_term + l_term * beta0 + cq * beta0 * beta0);
            cplx r = std::exp(l_term * dbeta + cplx(2.0 * cq * beta0 * dbeta + cq * dbeta * dbeta, 0.0));
            cplx sum(0.0, 0.0);
            for (int k = 0; k < n; ++k) {
                sum += t;
                t *= r;
                r *= s_step;
            }
            g.rho[std::size_t(i) * n + j] = weight * sum;
        }
    }

    // Hermiticity defect of the raw sum (analytically zero: the symmetric
    // beta grid maps the (x', x) sum onto the (x, x') sum term by term),
    // then symmetrize
    double defect = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            const cplx a = g.rho[std::size_t(i) * n + j];
            const cplx b = std::conj(g.rho[std::size_t(j) * n + i]);
            defect = std::max(defect, std::abs(a - b));
            const cplx avg = 0.5 * (a + b);
            g.rho[std::size_t(i) * n + j] = avg;
            g.rho[std::size_t(j) * n + i] = std::conj(avg);
        }
    }
    g.hermiticity = defect;

    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += g.rho[std::size_t(i) * n + i].real();
    tr *= g.dx;
    g.trace = tr;
    if (std::abs(tr - 1.0) > opt.renorm_threshold && std::abs(tr) > 1e-12) {
        g.renorm_factor = 1.0 / tr;
        for (auto& v : g.rho) v *= g.renorm_factor;
    }
    return g;
}

double purity(const DensityGrid& g) {
    // Tr rho^2 with the dx^2 measure; rho is Hermitian after symmetrization
    double s = 0.0;
    for (const auto& v : g.rho) s += std::norm(v);
    return s * g.dx * g.dx;
}

double gaussian_purity(const MomentSet& m) {
    const double det = m.s_qq * m.s_pp - 0.25 * m.s_qp * m.s_qp;
    if (!(det > 0.0))
        throw std::invalid_argument("gaussian_purity: covariance determinant must be positive");
    return 0.5 * m.hbar / std::sqrt(det);
}

std::vector<double> heisenberg_monitor(const std::vector<EvmState>& orbit, double hbar) {
    std::vector<double> d;
    d.reserve(orbit.size());
    for (const EvmState& s : orbit)
        d.push_back(s.s_qq * s.s_pp - 0.25 * s.s_qp * s.s_qp - 0.25 * hbar * hbar);
    return d;
}

}  // namespace evmchaos
