#include "evmchaos/quadrature.hpp"

namespace evmchaos {

GaussRule::GaussRule(int n) : node(n), weight(n) {
    // roots of P_n by Newton iteration; the standard cosine guess brackets
    // each root well enough that a dozen iterations reach full precision
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        // Legendre recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
        auto legendre = [n](double y, double& deriv) {
            double p0 = 1.0, p1 = y;
            for (int k = 1; k < n; ++k) {
                const double p2 = ((2 * k + 1) * y * p1 - k * p0) / (k + 1);
                p0 = p1;
                p1 = p2;
            }
            deriv = n * (y * p1 - p0) / (y * y - 1.0);
            return p1;
        };
        double dp;
        for (int it = 0; it < 64; ++it) {
            const double step = legendre(x, dp) / dp;
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        legendre(x, dp);  // refresh the derivative at the converged root
        node[i] = x;
        weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

const GaussRule& gauss7() {
    static const GaussRule rule(7);
    return rule;
}

const GaussRule& gauss15() {
    static const GaussRule rule(15);
    return rule;
}

}  // namespace evmchaos
