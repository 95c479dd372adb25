// Solves the quadratic-cost problem for beta-family demand with and without a
// Gaussian component and prints a few values of the optimal cost.
#include <cstdio>

#include "ssinv/ssinv.hpp"

int main() {
    for (double sigma : {0.0, 0.2}) {
        const ssinv::levy_model model(ssinv::beta_family{0.1, sigma, 3.0, 1.0, 0.1, 1.5});
        const auto kernel = ssinv::build_kernel(model, 0.03);
        const ssinv::cost_spec spec(10.0, 10.0, 0.03);
        const auto sol = ssinv::solve(kernel, spec);
        std::printf("sigma=%.1f  Phi(q)=%.9f  s*=%.9f  a0=%.9f  S*=%.9f\n", sigma, kernel.phi_q, sol.s_star,
                    sol.a0, sol.S_star);
        for (double x : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
            std::printf("  v(%+.1f) = %.6f\n", x, ssinv::value_function(sol, x));
        }
        const ssinv::cost_spec barrier_spec(10.0, 0.0, 0.03);
        std::printf("  barrier v(0) = %.6f\n", ssinv::barrier_value(kernel, barrier_spec, 0.0));
    }
}
