#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

#include "evmchaos/errors.hpp"

namespace evmchaos {

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1],
/// computed once by Newton iteration on the Legendre recurrence.
struct GaussRule {
    std::vector<double> node, weight;
    explicit GaussRule(int n);
};

const GaussRule& gauss7();
const GaussRule& gauss15();

template <std::size_t N>
struct QuadratureResult {
    std::array<double, N> value{};
    std::array<double, N> abs_error{};
    long evaluations = 0;
};

namespace detail {

template <std::size_t N, class F>
void gauss_panel(F&& f, double a, double b, const GaussRule& rule, std::array<double, N>& out) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    out.fill(0.0);
    for (std::size_t i = 0; i < rule.node.size(); ++i) {
        std::array<double, N> fx = f(mid + half * rule.node[i]);
        for (std::size_t k = 0; k < N; ++k) out[k] += rule.weight[i] * fx[k];
    }
    for (std::size_t k = 0; k < N; ++k) out[k] *= half;
}

}  // namespace detail

/// Adaptive panel integration of an array-valued integrand over [a, b].
/// Each panel carries an embedded 7/15-point Gauss pair whose difference
/// estimates the local error; the panel with the largest estimate is split
/// until every component satisfies sum|err_k| <= max(abs_tol, rel_tol*|I_k|).
/// Throws QuadratureError carrying the achieved relative error if the panel
/// budget runs out first.
template <std::size_t N, class F>
QuadratureResult<N> integrate_adaptive(F&& f, double a, double b, double rel_tol, double abs_tol,
                                       int initial_panels = 16, int max_panels = 200000) {
    struct Panel {
        double a, b, badness;
        std::array<double, N> value, err;
        bool operator<(const Panel& o) const { return badness < o.badness; }
    };
    const GaussRule& lo = gauss7();
    const GaussRule& hi = gauss15();
    long evals = 0;
    std::array<double, N> total{}, err_sum{};

    auto make_panel = [&](double pa, double pb) {
        Panel p{pa, pb, 0.0, {}, {}};
        std::array<double, N> coarse;
        detail::gauss_panel<N>(f, pa, pb, lo, coarse);
        detail::gauss_panel<N>(f, pa, pb, hi, p.value);
        evals += long(lo.node.size() + hi.node.size());
        for (std::size_t k = 0; k < N; ++k) {
            p.err[k] = std::abs(p.value[k] - coarse[k]);
            p.badness = std::max(p.badness, p.err[k]);
            total[k] += p.value[k];
            err_sum[k] += p.err[k];
        }
        return p;
    };

    auto converged = [&]() {
        for (std::size_t k = 0; k < N; ++k)
            if (err_sum[k] > std::max(abs_tol, rel_tol * std::abs(total[k]))) return false;
        return true;
    };

    initial_panels = std::max(initial_panels, 1);
    std::priority_queue<Panel> queue;
    for (int i = 0; i < initial_panels; ++i) {
        double pa = a + (b - a) * double(i) / initial_panels;
        double pb = a + (b - a) * double(i + 1) / initial_panels;
        queue.push(make_panel(pa, pb));
    }

    int panels = initial_panels;
    while (!converged()) {
        if (panels >= max_panels) {
            double achieved = 0.0;
            for (std::size_t k = 0; k < N; ++k)
                achieved = std::max(achieved, err_sum[k] / std::max(std::abs(total[k]), abs_tol));
            throw QuadratureError("adaptive quadrature: panel budget exhausted", achieved);
        }
        Panel worst = queue.top();
        queue.pop();
        for (std::size_t k = 0; k < N; ++k) {
            total[k] -= worst.value[k];
            err_sum[k] -= worst.err[k];
        }
        double m = 0.5 * (worst.a + worst.b);
        queue.push(make_panel(worst.a, m));
        queue.push(make_panel(m, worst.b));
        ++panels;
    }

    // Re-accumulate from the surviving panels: the incremental running totals
    // pick up a little cancellation noise over many split/merge cycles.
    QuadratureResult<N> res;
    res.evaluations = evals;
    while (!queue.empty()) {
        const Panel& p = queue.top();
        for (std::size_t k = 0; k < N; ++k) {
            res.value[k] += p.value[k];
            res.abs_error[k] += p.err[k];
        }
        queue.pop();
    }
    return res;
}

}  // namespace evmchaos
