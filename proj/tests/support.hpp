#ifndef SSINV_TESTS_SUPPORT_HPP
#define SSINV_TESTS_SUPPORT_HPP

#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ssinv/ssinv.hpp"

namespace ssinv::test {

inline constexpr double q_canon = 0.03;

inline beta_family beta_params(double sigma, double lambda = 1.5) {
    return beta_family{.delta_hat = 0.1, .sigma = sigma, .alpha = 3.0, .beta = 1.0, .varpi = 0.1, .lambda = lambda};
}

inline levy_model beta_model(double sigma, double lambda = 1.5) { return levy_model(beta_params(sigma, lambda)); }

inline levy_model brownian(double mu_hat, double sigma) {
    return levy_model(brownian_drift{.mu_hat = mu_hat, .sigma = sigma});
}

/// Beta function through std::tgamma, valid for negative non-integer arguments.
inline double beta_tgamma(double a, double b) { return std::tgamma(a) * std::tgamma(b) / std::tgamma(a + b); }

/// psi of the beta family through std::tgamma (independent of the library's special functions).
inline double psi_tgamma(const beta_family& p, double z) {
    return p.delta_hat * z + 0.5 * p.sigma * p.sigma * z * z +
           p.varpi / p.beta * (beta_tgamma(p.alpha + z / p.beta, 1.0 - p.lambda) - beta_tgamma(p.alpha, 1.0 - p.lambda));
}

/// e^{-y} - 1 + y without cancellation.
inline double em1py(double y) {
    if (std::abs(y) > 0.1) return std::expm1(-y) + y;
    // sum_{k >= 2} (-y)^k / k!
    double term = 0.5 * y * y;
    double acc = term;
    for (int k = 3; k < 30; ++k) {
        term *= -y / k;
        acc += term;
        if (std::abs(term) < 1e-18 * std::abs(acc)) break;
    }
    return acc;
}

/// int_0^inf g(x) nu(x) dx by tanh-sinh on (0, 1) and exp-sinh on (1, inf).
template <class G>
double integrate_density(const beta_family& p, G&& g) {
    auto nu = [&](double x) {
        return p.varpi * std::exp(-p.alpha * p.beta * x) * std::pow(-std::expm1(-p.beta * x), -p.lambda);
    };
    // below 1e-100 the integrand contributes O(1e-50) and nu overflows
    auto f = [&](double x) { return x < 1e-100 ? 0.0 : g(x) * nu(x); };
    boost::math::quadrature::tanh_sinh<double> ts;
    boost::math::quadrature::exp_sinh<double> es;
    return ts.integrate(f, 0.0, 1.0, 1e-14) + es.integrate(f, 1.0, std::numeric_limits<double>::infinity(), 1e-14);
}

}  // namespace ssinv::test

#endif  // SSINV_TESTS_SUPPORT_HPP
