#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "evmchaos/core_map.hpp"
#include "evmchaos/errors.hpp"
#include "evmchaos/lyapunov.hpp"
#include "evmchaos/noise_kernels.hpp"
#include "evmchaos/rng.hpp"
#include "evmchaos/scan.hpp"
#include "evmchaos/state_reconstruction.hpp"
#include "evmchaos/version.hpp"

#include "csv_output.hpp"
#include "selftest.hpp"
#include "svg_scatter.hpp"
#include "worker_pool.hpp"

using nlohmann::ordered_json;
using namespace evmchaos;
using evmtool::CsvFile;
using evmtool::fmt;

namespace {

// ---------------------------------------------------------------------------
// option plumbing: JSON config defaults, flag overrides, effective-config echo

/// Pre-scan argv for --config and load it; CLI11 then parses on top, so any
/// flag present on the command line overrides the file value.
ordered_json load_config(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        std::string path;
        if (a == "--config" && i + 1 < argc) path = argv[i + 1];
        else if (a.rfind("--config=", 0) == 0) path = a.substr(9);
        if (!path.empty()) {
            std::ifstream in(path);
            if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
            ordered_json j = ordered_json::parse(in);  // throws on malformed JSON
            if (!j.is_object()) throw CLI::ValidationError("--config", "not a JSON object");
            return j;
        }
    }
    return ordered_json::object();
}

/// Registers options against a subcommand, seeding defaults from the config
/// file and recording the final effective values for the output metadata.
class Binder {
public:
    Binder(CLI::App* cmd, const ordered_json& cfg) : cmd_(cmd), cfg_(cfg) {
        std::string sink;
        cmd_->add_option("--config", sink, "JSON config file (flags override its values)");
    }

    template <class T>
    CLI::Option* add(const std::string& flag, const std::string& key, T& var,
                     const std::string& desc) {
        if (cfg_.contains(key)) var = cfg_.at(key).get<T>();
        fin_.push_back([key, &var](ordered_json& j) { j[key] = var; });
        return cmd_->add_option(flag, var, desc)->capture_default_str();
    }

    CLI::Option* add_flag(const std::string& flag, const std::string& key, bool& var,
                          const std::string& desc) {
        if (cfg_.contains(key)) var = cfg_.at(key).get<bool>();
        fin_.push_back([key, &var](ordered_json& j) { j[key] = var; });
        return cmd_->add_flag(flag, var, desc);
    }

    ordered_json effective(const std::string& command) const {
        ordered_json j;
        j["command"] = command;
        for (const auto& f : fin_) f(j);
        return j;
    }

private:
    CLI::App* cmd_;
    const ordered_json& cfg_;
    std::vector<std::function<void(ordered_json&)>> fin_;
};

/// "start:stop:step" (inclusive endpoints) or a single value.
GridSpec parse_grid(const std::string& s) {
    GridSpec g;
    double a, b, c;
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &a, &b, &c) == 3) {
        g = {a, b, c};
    } else if (std::sscanf(s.c_str(), "%lf", &a) == 1 && s.find(':') == std::string::npos) {
        g = {a, a, 1.0};
    } else {
        throw CLI::ValidationError("grid", "expected start:stop:step or a single value: " + s);
    }
    if (g.size() < 1) throw CLI::ValidationError("grid", "empty grid: " + s);
    return g;
}

/// "lo:hi" pair.
std::pair<double, double> parse_range(const std::string& s) {
    double lo, hi;
    if (std::sscanf(s.c_str(), "%lf:%lf", &lo, &hi) != 2 || !(lo < hi))
        throw CLI::ValidationError("range", "expected lo:hi with lo < hi: " + s);
    return {lo, hi};
}

Mode parse_mode(const std::string& s) {
    if (s == "classical") return Mode::classical;
    if (s == "quantum") return Mode::quantum;
    throw CLI::ValidationError("--mode", "expected classical or quantum: " + s);
}

/// Common physical-parameter block shared by all simulation subcommands.
struct ParamFlags {
    double gamma = 0.03, tau = 10.0, hbar = 0.0, kbt = 0.0, omega_c = 25.0;

    void bind(Binder& b) {
        b.add("--gamma", "gamma", gamma, "friction coefficient");
        b.add("--tau", "tau", tau, "kick period");
        b.add("--hbar", "hbar", hbar, "Planck constant (oscillator units)");
        b.add("--kbt", "kbt", kbt, "bath temperature k_B T");
        b.add("--omega-c", "omega_c", omega_c, "bath spectral cutoff frequency");
    }

    Params params(double v0 = 1.0) const {
        Params p;
        p.gamma = gamma; p.tau = tau; p.v0 = v0;
        p.hbar = hbar; p.kbt = kbt; p.omega_c = omega_c;
        p.validate();
        return p;
    }
};

void report_wall_time(const char* what, std::chrono::steady_clock::time_point t0) {
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "%s finished in %.2f s\n", what, dt);
}

// ---------------------------------------------------------------------------
// subcommands

struct BifurcationCmd {
    ParamFlags pf;
    std::string mode_s = "classical", v0_s = "1:9:0.005", out, svg, qrange_s;
    int n_ic = 100, n_record = 100, threads = 0;
    long n_transient = 2000;
    std::uint64_t seed = 1;
    double ic_lo = -5.0, ic_hi = 5.0;

    void bind(Binder& b) {
        b.add("--mode", "mode", mode_s, "classical or quantum");
        b.add("--v0", "v0", v0_s, "kick-strength grid start:stop:step");
        b.add("--ics", "n_ic", n_ic, "initial conditions per grid point");
        b.add("--seed", "seed", seed, "RNG seed for the IC ensemble");
        b.add("--transient", "n_transient", n_transient, "kicks discarded before recording");
        b.add("--record", "n_record", n_record, "samples recorded per cell");
        b.add("--ic-lo", "ic_lo", ic_lo, "IC box lower bound (q and p)");
        b.add("--ic-hi", "ic_hi", ic_hi, "IC box upper bound");
        b.add("--threads", "threads", threads, "worker count (0 = EVMCHAOS_THREADS or hardware)");
        b.add("--output,-o", "output", out, "CSV path (default stdout)");
        b.add("--svg", "svg", svg, "also render a (v0, q) scatter to this SVG file");
        b.add("--qrange", "qrange", qrange_s, "crop the SVG to q in lo:hi");
    }

    int run(const ordered_json& effective) {
        auto t0 = std::chrono::steady_clock::now();
        Mode mode = parse_mode(mode_s);
        Params base = pf.params();
        GridSpec grid = parse_grid(v0_s);
        NoiseMoments nm;
        const NoiseMoments* nmp = nullptr;
        if (mode == Mode::quantum) { nm = base_moments(base); nmp = &nm; }

        DiagramOptions opt;
        opt.n_transient = n_transient; opt.n_record = n_record; opt.n_ic = n_ic;
        opt.seed = seed; opt.ic_lo = ic_lo; opt.ic_hi = ic_hi;

        const long nv = grid.size();
        const std::size_t cells = std::size_t(nv) * std::size_t(n_ic);
        auto recs = evmtool::indexed_map<BifurcationRecord>(
            cells, evmtool::resolve_threads(threads), [&](std::size_t k) {
                return diagram_cell(base, mode, nmp, opt, grid, long(k) / n_ic,
                                    int(long(k) % n_ic));
            });

        CsvFile csv(out);
        csv.preamble(effective);
        csv.columns({"v0", "ic", "sample_idx", "q", "escaped"});
        for (const auto& r : recs)
            for (std::size_t s = 0; s < r.q_samples.size(); ++s)
                csv.row({fmt(r.v0), fmt(r.ic_index), fmt(long(s)), fmt(r.q_samples[s]),
                         r.escaped ? "1" : "0"});

        if (!svg.empty()) {
            double q_lo = -1e300, q_hi = 1e300;
            if (!qrange_s.empty()) std::tie(q_lo, q_hi) = parse_range(qrange_s);
            evmtool::SvgScatter plot("V0", "Q");
            for (const auto& r : recs) {
                if (r.escaped) continue;
                for (double q : r.q_samples)
                    if (q >= q_lo && q <= q_hi) plot.add(r.v0, q);
            }
            plot.write(svg);
        }
        report_wall_time("bifurcation", t0);
        return 0;
    }
};

struct AttractorCmd {
    ParamFlags pf;
    std::string mode_s = "classical", out, svg, qrange_s;
    double v0 = 8.0, ic_q = 0.5, ic_p = 0.0;
    long n_transient = 2000;
    int n_record = 10000;

    void bind(Binder& b) {
        b.add("--mode", "mode", mode_s, "classical or quantum");
        b.add("--v0", "v0", v0, "kick strength");
        b.add("--ic-q", "ic_q", ic_q, "initial position");
        b.add("--ic-p", "ic_p", ic_p, "initial momentum");
        b.add("--transient", "n_transient", n_transient, "kicks discarded before recording");
        b.add("--record", "n_record", n_record, "post-transient samples");
        b.add("--output,-o", "output", out, "CSV path (default stdout)");
        b.add("--svg", "svg", svg, "also render the (q, p) scatter to this SVG file");
        b.add("--qrange", "qrange", qrange_s, "crop the SVG to q in lo:hi");
    }

    int run(const ordered_json& effective) {
        auto t0 = std::chrono::steady_clock::now();
        Mode mode = parse_mode(mode_s);
        Params base = pf.params(v0);
        TMatrix t = t_matrix(base.gamma, base.tau);
        NoiseMoments nm;
        const NoiseMoments* nmp = nullptr;
        if (mode == Mode::quantum) { nm = base_moments(base); nmp = &nm; }

        CsvFile csv(out);
        csv.preamble(effective);
        const bool q_mode = mode == Mode::quantum;
        if (q_mode) csv.columns({"sample_idx", "q", "p", "s_qq", "s_pp", "s_qp"});
        else csv.columns({"sample_idx", "q", "p"});

        evmtool::SvgScatter plot("Q", "P");
        double q_lo = -1e300, q_hi = 1e300;
        if (!qrange_s.empty()) std::tie(q_lo, q_hi) = parse_range(qrange_s);

        ClassicalState cs{ic_q, ic_p};
        EvmState es = coherent_state(ic_q, ic_p, base.hbar);
        bool escaped = false;
        for (long k = 0; k < n_transient + n_record && !escaped; ++k) {
            if (q_mode) { es = quantum_step(es, t, v0, nmp); escaped = es.escaped; }
            else { cs = classical_step(cs, t, v0); escaped = cs.escaped; }
            if (k < n_transient || escaped) continue;
            long idx = k - n_transient;
            double q = q_mode ? es.q : cs.q, p = q_mode ? es.p : cs.p;
            if (q_mode)
                csv.row({fmt(idx), fmt(q), fmt(p), fmt(es.s_qq), fmt(es.s_pp), fmt(es.s_qp)});
            else
                csv.row({fmt(idx), fmt(q), fmt(p)});
            if (!svg.empty() && q >= q_lo && q <= q_hi) plot.add(q, p);
        }
        if (escaped) std::fprintf(stderr, "orbit escaped the trusted region; output truncated\n");
        if (!svg.empty()) plot.write(svg);
        report_wall_time("attractor", t0);
        return 0;
    }
};

struct LyapunovCmd {
    ParamFlags pf;
    std::string mode_s = "classical", v0_s = "1:9:0.01", out;
    double ic_q = 0.5, ic_p = 0.0;
    long n_transient = 2000, n_iter = 20000;
    int n_ic = 1, threads = 0;
    std::uint64_t seed = 1;

    void bind(Binder& b) {
        b.add("--mode", "mode", mode_s, "classical, quantum or both");
        b.add("--v0", "v0", v0_s, "kick-strength grid start:stop:step");
        b.add("--ic-q", "ic_q", ic_q, "orbit seed position (used when --ics 1)");
        b.add("--ic-p", "ic_p", ic_p, "orbit seed momentum");
        b.add("--ics", "n_ic", n_ic, "ensemble size; >1 draws ICs from the seeded box [-5,5]");
        b.add("--seed", "seed", seed, "RNG seed for the IC ensemble");
        b.add("--transient", "n_transient", n_transient, "kicks discarded before averaging");
        b.add("--iters", "n_iter", n_iter, "kicks averaged per exponent");
        b.add("--threads", "threads", threads, "worker count (0 = EVMCHAOS_THREADS or hardware)");
        b.add("--output,-o", "output", out, "CSV path (default stdout)");
    }

    struct Cell {
        double lambda = 0.0, se = 0.0, escaped_fraction = 0.0;
    };

    Cell cell(Mode mode, const TMatrix& t, const NoiseMoments* nmp, const Params& base, double v0,
              long vi) const {
        LyapunovOptions lo;
        lo.n_transient = n_transient; lo.n_iter = n_iter;
        Cell c;
        int escaped = 0;
        bool have = false;
        for (int j = 0; j < n_ic; ++j) {
            double q = ic_q, p = ic_p;
            if (n_ic > 1) {
                SplitMix64 rng = substream(seed, std::uint64_t(vi), std::uint64_t(j));
                q = rng.uniform(-5.0, 5.0);
                p = rng.uniform(-5.0, 5.0);
            }
            LyapunovEstimate est =
                mode == Mode::classical
                    ? largest_lyapunov_classical(t, v0, {q, p}, lo)
                    : largest_lyapunov_evm(t, v0, nmp, coherent_state(q, p, base.hbar), lo);
            if (est.escaped) { ++escaped; continue; }
            if (!have) { c.lambda = est.lambda; c.se = est.stderr_; have = true; }
        }
        c.escaped_fraction = double(escaped) / double(n_ic);
        if (!have) { c.lambda = std::nan(""); c.se = std::nan(""); }
        return c;
    }

    int run(const ordered_json& effective) {
        auto t0 = std::chrono::steady_clock::now();
        const bool both = mode_s == "both";
        Params base = pf.params();
        TMatrix t = t_matrix(base.gamma, base.tau);
        GridSpec grid = parse_grid(v0_s);
        NoiseMoments nm;
        const NoiseMoments* nmp = nullptr;
        if (both || mode_s == "quantum") { nm = base_moments(base); nmp = &nm; }

        const long nv = grid.size();
        const int workers = evmtool::resolve_threads(threads);
        std::vector<Cell> cls, qnt;
        if (both || mode_s == "classical")
            cls = evmtool::indexed_map<Cell>(std::size_t(nv), workers, [&](std::size_t i) {
                return cell(Mode::classical, t, nullptr, base, grid.value(long(i)), long(i));
            });
        if (both || mode_s == "quantum")
            qnt = evmtool::indexed_map<Cell>(std::size_t(nv), workers, [&](std::size_t i) {
                return cell(Mode::quantum, t, nmp, base, grid.value(long(i)), long(i));
            });
        if (!both && mode_s != "classical" && mode_s != "quantum")
            throw CLI::ValidationError("--mode", "expected classical, quantum or both");

        CsvFile csv(out);
        csv.preamble(effective);
        if (both) {
            csv.columns({"v0", "lambda_classical", "stderr_classical", "escaped_classical",
                         "lambda_quantum", "stderr_quantum", "escaped_quantum"});
            for (long i = 0; i < nv; ++i)
                csv.row({fmt(grid.value(i)), fmt(cls[i].lambda), fmt(cls[i].se),
                         fmt(cls[i].escaped_fraction), fmt(qnt[i].lambda), fmt(qnt[i].se),
                         fmt(qnt[i].escaped_fraction)});
        } else {
            const auto& col = mode_s == "classical" ? cls : qnt;
            csv.columns({"v0", "lambda", "stderr", "escaped_fraction"});
            for (long i = 0; i < nv; ++i)
                csv.row({fmt(grid.value(i)), fmt(col[i].lambda), fmt(col[i].se),
                         fmt(col[i].escaped_fraction)});
        }
        report_wall_time("lyapunov", t0);
        return 0;
    }
};

void bind_threshold_options(Binder& b, ThresholdOptions& topt, bool& first_crossing) {
    b.add("--tol", "tol", topt.tol, "target bracket width in v0");
    b.add("--transient", "n_transient", topt.n_transient, "kicks before exponent averaging");
    b.add("--iters", "n_iter", topt.n_iter, "kicks averaged per exponent estimate");
    b.add("--max-refine", "max_refine", topt.max_refine, "n_iter doublings on marginal points");
    b.add("--lambda-floor", "lambda_floor", topt.lambda_floor,
          "smallest exponent that counts as chaotic");
    b.add("--ic-q", "ic_q", topt.ic_q, "orbit seed position");
    b.add("--ic-p", "ic_p", topt.ic_p, "orbit seed momentum");
    b.add("--prescan", "prescan_points", topt.prescan_points,
          "grid points used to pick the crossing");
    b.add_flag("--first", "first_crossing", first_crossing,
               "localize the lowest-v0 crossing instead of the highest");
}

struct ThresholdCmd {
    ParamFlags pf;
    std::string mode_s = "classical", kind_s = "chaos", bracket_s = "5.5:5.9", out;
    ThresholdOptions topt;
    bool first_crossing = false;

    void bind(Binder& b) {
        b.add("--mode", "mode", mode_s, "classical or quantum");
        b.add("--kind", "kind", kind_s, "chaos (Lyapunov sign) or hopf (orbit multipliers)");
        b.add("--bracket", "bracket", bracket_s, "search bracket lo:hi");
        bind_threshold_options(b, topt, first_crossing);
        b.add("--output,-o", "output", out, "CSV path for the (v0, lambda, stderr) trace");
    }

    int run(const ordered_json& effective) {
        auto t0 = std::chrono::steady_clock::now();
        Mode mode = parse_mode(mode_s);
        ThresholdKind kind = kind_s == "hopf" ? ThresholdKind::hopf : ThresholdKind::chaos;
        if (kind_s != "chaos" && kind_s != "hopf")
            throw CLI::ValidationError("--kind", "expected chaos or hopf");
        auto [lo, hi] = parse_range(bracket_s);
        topt.last_crossing = !first_crossing;

        ThresholdRecord r = find_threshold(pf.params(), mode, kind, lo, hi, topt);
        std::printf("kind=%s v0_star=%.8f bracket_width=%.6f period=%d evaluations=%zu\n",
                    r.kind == ThresholdKind::hopf ? "hopf" : "chaos", r.v0_star, r.bracket_width,
                    r.period, r.lambda_trace.size());
        if (!out.empty()) {
            CsvFile csv(out);
            csv.preamble(effective,
                         {"v0_star: " + fmt(r.v0_star), "bracket_width: " + fmt(r.bracket_width)});
            csv.columns({"v0", "lambda", "stderr"});
            for (const auto& s : r.lambda_trace) csv.row({fmt(s[0]), fmt(s[1]), fmt(s[2])});
        }
        report_wall_time("threshold", t0);
        return 0;
    }
};

SweepAxis parse_axis(const std::string& s) {
    if (s == "kbt") return SweepAxis::kbt;
    if (s == "hbar") return SweepAxis::hbar;
    if (s == "omega-c" || s == "omega_c") return SweepAxis::omega_c;
    throw CLI::ValidationError("--axis", "expected kbt, hbar or omega-c: " + s);
}

std::vector<double> axis_grid(const std::string& grid_s, const std::string& values_s) {
    if (!values_s.empty()) {
        std::vector<double> g;
        std::stringstream ss(values_s);
        std::string tok;
        while (std::getline(ss, tok, ',')) g.push_back(std::stod(tok));
        if (g.empty() || !std::is_sorted(g.begin(), g.end()))
            throw CLI::ValidationError("--values", "expected an ascending comma list");
        return g;
    }
    return parse_grid(grid_s).values();
}

struct SweepCmd {
    ParamFlags pf;
    std::string mode_s = "quantum", kind_s = "chaos", axis_s = "kbt";
    std::string grid_s = "0.0005:0.01:0.0019", values_s, bracket_s = "5.0:5.8", out;
    ThresholdOptions topt;
    bool first_crossing = false;
    double warm_halfwidth = 0.15;
    int max_expand = 4;

    void bind(Binder& b) {
        b.add("--mode", "mode", mode_s, "classical or quantum");
        b.add("--kind", "kind", kind_s, "chaos or hopf");
        b.add("--axis", "axis", axis_s, "swept parameter: kbt, hbar or omega-c");
        b.add("--grid", "grid", grid_s, "axis grid start:stop:step");
        b.add("--values", "values", values_s, "explicit ascending axis values a,b,c (overrides --grid)");
        b.add("--bracket", "bracket", bracket_s, "v0 bracket for the first grid point");
        b.add("--warm-halfwidth", "warm_halfwidth", warm_halfwidth,
              "half-width of the warm bracket around the previous threshold (<=0: full bracket)");
        b.add("--max-expand", "max_expand", max_expand, "bracket growth attempts");
        bind_threshold_options(b, topt, first_crossing);
        b.add("--output,-o", "output", out, "CSV path (default stdout)");
    }

    std::vector<SweepPoint> execute() {
        Mode mode = parse_mode(mode_s);
        ThresholdKind kind = kind_s == "hopf" ? ThresholdKind::hopf : ThresholdKind::chaos;
        if (kind_s != "chaos" && kind_s != "hopf")
            throw CLI::ValidationError("--kind", "expected chaos or hopf");
        SweepOptions so;
        so.threshold = topt;
        so.threshold.last_crossing = !first_crossing;
        std::tie(so.bracket_lo, so.bracket_hi) = parse_range(bracket_s);
        so.warm_halfwidth = warm_halfwidth;
        so.max_expand = max_expand;
        return sweep(pf.params(), mode, kind, parse_axis(axis_s), axis_grid(grid_s, values_s), so);
    }

    int run(const ordered_json& effective) {
        auto t0 = std::chrono::steady_clock::now();
        auto pts = execute();
        std::vector<std::string> diag;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto& sp = pts[i];
            if (sp.record)
                diag.push_back("point " + std::to_string(i) + ": axis=" + fmt(sp.axis_value) +
                               " v0_star=" + fmt(sp.record->v0_star) +
                               " evaluations=" + std::to_string(sp.record->lambda_trace.size()));
            else
                diag.push_back("point " + std::to_string(i) + ": axis=" + fmt(sp.axis_value) +
                               " FAILED: " + sp.error);
        }
        CsvFile csv(out);
        csv.preamble(effective, diag);
        csv.columns({"axis_value", "kind", "v0_star", "bracket_width"});
        for (const auto& sp : pts)
            if (sp.record)
                csv.row({fmt(sp.axis_value), kind_s, fmt(sp.record->v0_star),
                         fmt(sp.record->bracket_width)});
        report_wall_time("sweep", t0);
        return 0;
    }
};

struct ScalingCmd {
    SweepCmd sw;  // a scaling run is a sweep plus a log-log fit
    std::string out;
    double reference = 0.0;
    bool have_reference = false;

    void bind(Binder& b) {
        sw.kind_s = "hopf";
        sw.grid_s = "0.001:0.008:0.001";
        sw.bind(b);
        auto* r = b.add("--reference", "reference", reference,
                        "zero-noise threshold V0*(0); default: extrapolated from the two smallest points");
        r->each([this](const std::string&) { have_reference = true; });
    }

    int run(const ordered_json& effective) {
        auto t0 = std::chrono::steady_clock::now();
        auto pts = sw.execute();
        std::vector<std::pair<double, double>> xy;
        for (const auto& sp : pts)
            if (sp.record) xy.push_back({sp.axis_value, sp.record->v0_star});
        ScalingFit fit = fit_scaling(xy, have_reference ? std::optional<double>(reference)
                                                        : std::nullopt);
        std::printf("slope=%.4f ci_halfwidth=%.4f reference=%.8f points=%d\n", fit.slope,
                    fit.ci_halfwidth, fit.reference, fit.n_points);
        if (!out.empty()) {
            CsvFile csv(out);
            csv.preamble(effective, {"fit: slope=" + fmt(fit.slope) +
                                         " ci_halfwidth=" + fmt(fit.ci_halfwidth) +
                                         " reference=" + fmt(fit.reference)});
            csv.columns({"axis_value", "v0_star", "shift"});
            for (const auto& [x, v] : xy) csv.row({fmt(x), fmt(v), fmt(fit.reference - v)});
        }
        report_wall_time("scaling", t0);
        return 0;
    }
};

struct NoiseTableCmd {
    ParamFlags pf;
    std::string omega_s = "0:50:0.05", out;

    void bind(Binder& b) {
        b.add("--omega", "omega", omega_s, "frequency grid start:stop:step");
        b.add("--output,-o", "output", out, "CSV path (default stdout)");
    }

    int run(const ordered_json& effective) {
        Params p = pf.params();
        TMatrix t = t_matrix(p.gamma, p.tau);
        GridSpec grid = parse_grid(omega_s);
        const double pref = 2.0 * p.gamma / M_PI;
        CsvFile csv(out);
        csv.preamble(effective);
        csv.columns({"omega", "g_ss", "g_cc", "g_sc", "integrand_ss", "integrand_cc",
                     "integrand_sc"});
        for (long i = 0; i < grid.size(); ++i) {
            double w = grid.value(i);
            KernelTriple k = kernel_triple(w, t.omega0, p.gamma, p.tau);
            double wt = pref * thermal_weight(p.hbar, p.kbt, w) * std::exp(-w / p.omega_c);
            csv.row({fmt(w), fmt(k.g_ss), fmt(k.g_cc), fmt(k.g_sc), fmt(wt * k.g_ss),
                     fmt(wt * k.g_cc), fmt(wt * k.g_sc)});
        }
        return 0;
    }
};

struct ReconstructCmd {
    std::string input, out = "rho";
    ReconstructionOptions ropt;

    void bind(Binder& b) {
        b.add("--input,-i", "input", input, "MomentSet JSON file")->required();
        b.add("--n", "n", ropt.n, "grid size (power of two)");
        b.add("--x-halfwidth", "x_halfwidth", ropt.x_halfwidth,
              "half-width of the position window (0 = auto)");
        b.add("--beta-factor", "beta_factor", ropt.beta_factor,
              "beta window in units of 1/sqrt(s_qq)");
        b.add("--output,-o", "output", out, "output base path; writes <base>_real.csv and <base>_imag.csv");
    }

    int run(const ordered_json& effective) {
        std::ifstream in(input);
        if (!in) throw std::runtime_error("cannot open moment file: " + input);
        ordered_json j = ordered_json::parse(in);
        MomentSet m;
        m.q = j.value("q", 0.0); m.p = j.value("p", 0.0);
        m.s_qq = j.at("s_qq").get<double>();
        m.s_pp = j.at("s_pp").get<double>();
        m.s_qp = j.value("s_qp", 0.0);
        m.hbar = j.at("hbar").get<double>();

        DensityGrid g = density_matrix_grid(m, ropt);
        for (int part = 0; part < 2; ++part) {
            CsvFile csv(out + (part ? "_imag.csv" : "_real.csv"));
            csv.preamble(effective, {"n: " + fmt(g.n), "x_lo: " + fmt(g.x_lo),
                                     "dx: " + fmt(g.dx)});
            for (int i = 0; i < g.n; ++i) {
                std::vector<std::string> row(std::size_t(g.n));
                for (int jj = 0; jj < g.n; ++jj)
                    row[std::size_t(jj)] = fmt(part ? g.at(i, jj).imag() : g.at(i, jj).real());
                csv.row(row);
            }
        }
        std::printf("n=%d trace=%.12f hermiticity=%.3e purity=%.12f gaussian_purity=%.12f "
                    "renorm_factor=%.9f\n",
                    g.n, g.trace, g.hermiticity, purity(g), gaussian_purity(m), g.renorm_factor);
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kicked damped oscillator: classical map, quantum expectation-value map, "
                 "bifurcation and threshold scans"};
    app.set_version_flag("--version", EVMCHAOS_VERSION);
    app.require_subcommand(1);

    ordered_json cfg;
    try {
        cfg = load_config(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    BifurcationCmd bif;   Binder b_bif(app.add_subcommand("bifurcation",
        "Post-transient position samples over a V0 grid and an IC ensemble"), cfg);
    bif.pf.bind(b_bif);   bif.bind(b_bif);

    AttractorCmd att;     Binder b_att(app.add_subcommand("attractor",
        "Post-transient (Q, P) scatter of a single orbit"), cfg);
    att.pf.bind(b_att);   att.bind(b_att);

    LyapunovCmd lya;      Binder b_lya(app.add_subcommand("lyapunov",
        "Largest Lyapunov exponent over a V0 grid"), cfg);
    lya.pf.bind(b_lya);   lya.bind(b_lya);

    ThresholdCmd thr;     Binder b_thr(app.add_subcommand("threshold",
        "Localize a chaos or Hopf transition inside a V0 bracket"), cfg);
    thr.pf.bind(b_thr);   thr.bind(b_thr);

    SweepCmd swp;         Binder b_swp(app.add_subcommand("sweep",
        "Threshold as a function of kbt, hbar or omega-c"), cfg);
    swp.pf.bind(b_swp);   swp.bind(b_swp);

    ScalingCmd scl;       Binder b_scl(app.add_subcommand("scaling",
        "Sweep plus log-log fit of the threshold shift"), cfg);
    scl.sw.pf.bind(b_scl); scl.bind(b_scl);

    NoiseTableCmd noi;    Binder b_noi(app.add_subcommand("noise-table",
        "Bath kernels and moment integrands on a frequency grid"), cfg);
    noi.pf.bind(b_noi);   noi.bind(b_noi);

    ReconstructCmd rec;   Binder b_rec(app.add_subcommand("reconstruct",
        "Position-basis density matrix from a Gaussian moment set"), cfg);
    rec.bind(b_rec);

    app.add_subcommand("selftest", "Run the built-in oracle suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 1 : 0;  // usage errors -> 1, --help/--version -> 0
    }

    try {
        if (app.got_subcommand("bifurcation")) return bif.run(b_bif.effective("bifurcation"));
        if (app.got_subcommand("attractor"))   return att.run(b_att.effective("attractor"));
        if (app.got_subcommand("lyapunov"))    return lya.run(b_lya.effective("lyapunov"));
        if (app.got_subcommand("threshold"))   return thr.run(b_thr.effective("threshold"));
        if (app.got_subcommand("sweep"))       return swp.run(b_swp.effective("sweep"));
        if (app.got_subcommand("scaling"))     return scl.run(b_scl.effective("scaling"));
        if (app.got_subcommand("noise-table")) return noi.run(b_noi.effective("noise-table"));
        if (app.got_subcommand("reconstruct")) return rec.run(b_rec.effective("reconstruct"));
        if (app.got_subcommand("selftest"))    return evmtool::run_selftest(std::cout);
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
