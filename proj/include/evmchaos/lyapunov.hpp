#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <string>
#include <vector>

#include "evmchaos/core_map.hpp"
#include "evmchaos/noise_kernels.hpp"

namespace evmchaos {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Vec5 = Eigen::Matrix<double, 5, 1>;

/// Tangent map of the classical step, evaluated with the kick curvature at
/// the updated position.  det J = exp(-2*gamma*tau) for every state.
Mat2 classical_jacobian(const ClassicalState& s, const TMatrix& t, double v0);

/// Tangent map of the expectation-values step in the ordering
/// (q, p, s_qq, s_pp, s_qp).  Includes the fourth potential derivative in the
/// momentum row and the curvature dependence of the noise covariance.
Mat5 evm_jacobian(const EvmState& s, const TMatrix& t, double v0, const NoiseMoments* nm);

/// Combined step + tangent propagation (shares the exponential evaluations).
void evm_step_with_tangent(EvmState& s, Vec5& tangent, const TMatrix& t, double v0,
                           const NoiseMoments* nm);
void classical_step_with_tangent(ClassicalState& s, Vec2& tangent, const TMatrix& t, double v0);

struct LyapunovEstimate {
    double lambda = 0.0;   ///< largest exponent, per kick
    double stderr_ = 0.0;  ///< block standard error (10 blocks)
    bool escaped = false;  ///< orbit left the trusted region; lambda invalid
    long n_iter = 0;
};

struct LyapunovOptions {
    long n_transient = 2000;
    long n_iter = 20000;
    int renorm_every = 1;    ///< renormalize the tangent every k kicks
    double tangent_q = 1.0;  ///< initial tangent direction (means components)
    double tangent_p = 1.0;
};

/// Benettin estimate of the largest Lyapunov exponent of the classical map:
/// propagate one tangent vector through the analytic Jacobian alongside the
/// orbit, renormalize periodically, and average the log growth per kick.
/// The standard error comes from the scatter of 10 block means.
LyapunovEstimate largest_lyapunov_classical(const TMatrix& t, double v0, const ClassicalState& ic,
                                            const LyapunovOptions& opt = {});

/// Same estimator for the five-dimensional expectation-values map.
LyapunovEstimate largest_lyapunov_evm(const TMatrix& t, double v0, const NoiseMoments* nm,
                                      const EvmState& ic, const LyapunovOptions& opt = {});

struct FixedPointOptions {
    int max_iter = 200;
    double tol = 1e-11;  ///< infinity-norm residual of map(u) - u
};

struct FixedPoint2 {
    Vec2 u;
    Mat2 jacobian;
    double residual;
    int iterations;
};

struct FixedPoint5 {
    Vec5 u;
    Mat5 jacobian;
    double residual;
    int iterations;
};

/// Newton solve for a fixed point of the period-fold composed classical map.
/// The returned Jacobian is the tangent of the full composition around the
/// cycle.  Throws ConvergenceError if the residual target is not met.
FixedPoint2 fixed_point_classical(const TMatrix& t, double v0, Vec2 guess, int period = 1,
                                  const FixedPointOptions& opt = {});

/// Same for the expectation-values map.
FixedPoint5 fixed_point_evm(const TMatrix& t, double v0, const NoiseMoments* nm, Vec5 guess,
                            int period = 1, const FixedPointOptions& opt = {});

enum class BifurcationType { none, period_doubling, hopf };

struct BifurcationResult {
    BifurcationType type = BifurcationType::none;
    double v0_star = 0.0;       ///< localized stability-loss point
    double bracket_width = 0.0; ///< final bisection bracket width
    int period = 0;             ///< period of the orbit that loses stability
    std::complex<double> mu1, mu2;  ///< critical eigenvalue(s) at v0_star
    std::string diagnostic;     ///< empty on a clean classification
    std::vector<std::array<double, 2>> trace;  ///< (v0, spectral radius) continuation samples
};

struct ClassifyOptions {
    int period = 0;          ///< 0 = detect from the attractor at the lower bracket end
    double bisect_tol = 1e-5;
    double mu_tol = 1e-8;    ///< target |max|mu| - 1| at the reported crossing
    double detect_q = 0.5, detect_p = 0.0;  ///< seed orbit for period detection
    long detect_transient = 40000;
    int continuation_points = 33;
    bool last_crossing = true;  ///< classify the highest-v0 stability loss in the bracket
};

/// Track the periodic orbit across [v0_lo, v0_hi], monitor the spectral
/// radius of its cycle Jacobian and classify how stability is lost:
/// a real eigenvalue through -1 (period doubling) or a complex conjugate
/// pair through the unit circle (Hopf / Neimark-Sacker).  mode-selected by
/// passing nm == nullptr (classical) or a valid moment set (quantum).
BifurcationResult classify_bifurcation(const Params& base, const NoiseMoments* nm, double v0_lo,
                                       double v0_hi, const ClassifyOptions& opt = {});

/// Attractor period at fixed parameters: iterate past the transient and find
/// the smallest m <= max_period with u_{n+m} == u_n to tolerance.  Returns 0
/// for aperiodic (quasiperiodic/chaotic) or escaped orbits.
int detect_period(const Params& p, const NoiseMoments* nm, double q0, double p0,
                  long n_transient = 40000, int max_period = 64, double tol = 1e-6);

}  // namespace evmchaos
