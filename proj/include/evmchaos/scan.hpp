#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "evmchaos/core_map.hpp"
#include "evmchaos/lyapunov.hpp"
#include "evmchaos/noise_kernels.hpp"

namespace evmchaos {

/// Inclusive arithmetic grid start:stop:step, materialized by index so that
/// the node values do not depend on how the grid is traversed or partitioned.
struct GridSpec {
    double start = 0.0, stop = 0.0, step = 1.0;

    long size() const;
    double value(long i) const { return start + double(i) * step; }
    std::vector<double> values() const;
};

enum class Mode { classical, quantum };

/// One cell of a bifurcation diagram: the post-transient position samples of
/// a single initial condition at a single kick strength.
struct BifurcationRecord {
    double v0 = 0.0;
    int ic_index = 0;
    std::vector<double> q_samples;
    bool escaped = false;
};

struct DiagramOptions {
    long n_transient = 2000;
    int n_record = 100;
    int n_ic = 100;
    std::uint64_t seed = 1;
    double ic_lo = -5.0, ic_hi = 5.0;
};

/// Initial condition for cell (v0_index, ic_index): uniform in the ic box,
/// drawn from a counter-based stream keyed by (seed, v0_index, ic_index).
void diagram_initial_condition(const DiagramOptions& opt, long v0_index, int ic_index, double& q0,
                               double& p0);

/// Compute one diagram cell (pure, thread-safe; nm may be null for the
/// classical map).
BifurcationRecord diagram_cell(const Params& base, Mode mode, const NoiseMoments* nm,
                               const DiagramOptions& opt, const GridSpec& grid, long v0_index,
                               int ic_index);

/// Serial reference implementation over the whole grid, ordered by
/// (v0_index, ic_index).
std::vector<BifurcationRecord> bifurcation_diagram(const Params& base, Mode mode,
                                                   const GridSpec& grid,
                                                   const DiagramOptions& opt);

enum class ThresholdKind { chaos, hopf };

/// A localized transition point in kick strength.
struct ThresholdRecord {
    ThresholdKind kind = ThresholdKind::chaos;
    double v0_star = 0.0;
    double bracket_width = 0.0;
    Params params;                      ///< full parameter set at this point
    int period = 0;                     ///< Hopf kind: period of the orbit losing stability
    std::vector<std::array<double, 3>> lambda_trace;  ///< (v0, lambda, stderr) evaluations
};

struct ThresholdOptions {
    double tol = 1e-3;            ///< target bracket width in v0
    long n_transient = 2000;      ///< lambda estimation (chaos kind)
    long n_iter = 20000;
    int max_refine = 2;           ///< n_iter doublings when lambda is within the dead band
    double lambda_floor = 1e-4;   ///< smallest exponent that counts as chaotic
    double ic_q = 0.5, ic_p = 0.0;  ///< seed orbit for branch following
    bool last_crossing = true;      ///< localize the highest-v0 transition in the bracket
    int prescan_points = 17;        ///< ascending grid used to pick the crossing (chaos kind)
};

/// Localize a transition of the selected kind inside [v0_lo, v0_hi].
///
/// chaos: bisection on the attractor Lyapunov exponent.  A point is chaotic
/// when lambda exceeds lambda_floor with two-standard-error confidence; it is
/// regular when lambda sits below the floor with the same confidence, which
/// deliberately includes quasiperiodic motion fluctuating around lambda == 0.
/// Undecided estimates are refined with a longer run and, if still marginal,
/// counted as not-yet-chaotic.  Orbits follow the attractor branch from the
/// nearest lower evaluation (warm continuation).
///
/// hopf: eigenvalue continuation of the periodic orbit (period detected at
/// the lower bracket end), bisecting the unit-circle crossing of the cycle
/// Jacobian's spectral radius.
///
/// Throws BracketError when the endpoints do not straddle the transition.
ThresholdRecord find_threshold(const Params& base, Mode mode, ThresholdKind kind, double v0_lo,
                               double v0_hi, const ThresholdOptions& opt = {});

enum class SweepAxis { kbt, hbar, omega_c };

struct SweepPoint {
    double axis_value = 0.0;
    std::optional<ThresholdRecord> record;  ///< empty on failure
    std::string error;                      ///< failure description, empty on success
};

struct SweepOptions {
    ThresholdOptions threshold;
    double bracket_lo = 5.0, bracket_hi = 5.8;  ///< bracket for the first grid point
    double warm_halfwidth = 0.15;  ///< warm bracket half-width; <= 0 keeps the full bracket
    int max_expand = 4;            ///< bracket growth attempts when endpoints agree
};

/// Threshold as a function of one noise parameter.  Each grid point recomputes
/// the bath moments and warm-starts its bracket from the previous threshold;
/// per-point failures are recorded and the sweep continues.
std::vector<SweepPoint> sweep(const Params& base, Mode mode, ThresholdKind kind, SweepAxis axis,
                              const std::vector<double>& grid, const SweepOptions& opt = {});

struct ScalingFit {
    double slope = 0.0;
    double ci_halfwidth = 0.0;  ///< two standard errors of the slope
    double reference = 0.0;     ///< threshold value extrapolated to axis -> 0
    int n_points = 0;
};

/// Least-squares slope of log(shift) vs log(axis) where
/// shift_i = reference - v0star_i.  If no reference is supplied it is
/// extrapolated from the two smallest axis values assuming a quadratic law
/// (exact for shift = c * axis^2).  Throws ScalingError for fewer than five
/// usable points or nonpositive shifts.
ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& axis_v0star,
                       std::optional<double> reference = std::nullopt);

}  // namespace evmchaos
