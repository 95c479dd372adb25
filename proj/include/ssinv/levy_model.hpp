#ifndef SSINV_LEVY_MODEL_HPP
#define SSINV_LEVY_MODEL_HPP

#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/sin_pi.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "ssinv/detail/numeric.hpp"
#include "ssinv/error.hpp"

namespace ssinv {

/// psi(z) = delta_hat z + sigma^2 z^2 / 2 + (varpi/beta) [B(alpha + z/beta, 1 - lambda) - B(alpha, 1 - lambda)].
/// Lévy density varpi e^{-alpha beta x} (1 - e^{-beta x})^{-lambda}; poles of psi at -beta(alpha + j - 1).
struct beta_family {
    double delta_hat = 0.0;
    double sigma = 0.0;
    double alpha = 1.0;
    double beta = 1.0;
    double varpi = 0.0;
    double lambda = 1.5;
};

/// psi(z) = mu_hat z + sigma^2 z^2 / 2.
struct brownian_drift {
    double mu_hat = 0.0;
    double sigma = 1.0;
};

/// A validated spectrally negative Lévy process.
class levy_model {
public:
    using params_type = std::variant<beta_family, brownian_drift>;

    explicit levy_model(beta_family p) : params_(p) { validate(p); }
    explicit levy_model(brownian_drift p) : params_(p) { validate(p); }

    const params_type& params() const noexcept { return params_; }
    const beta_family* as_beta() const noexcept { return std::get_if<beta_family>(&params_); }
    const brownian_drift* as_brownian() const noexcept { return std::get_if<brownian_drift>(&params_); }

    double sigma() const noexcept {
        return std::visit([](const auto& p) { return p.sigma; }, params_);
    }

private:
    static void validate(const beta_family& p) {
        if (!(p.alpha > 0.0) || !(p.beta > 0.0)) {
            throw error(errc::invalid_model, "beta family requires alpha > 0 and beta > 0");
        }
        if (!(p.varpi >= 0.0) || !(p.sigma >= 0.0)) {
            throw error(errc::invalid_model, "beta family requires varpi >= 0 and sigma >= 0");
        }
        if (!(p.lambda > 0.0 && p.lambda < 3.0) || p.lambda == 1.0 || p.lambda == 2.0) {
            throw error(errc::invalid_model, "beta family requires lambda in (0,3) \\ {1,2}");
        }
        if (!std::isfinite(p.delta_hat)) {
            throw error(errc::invalid_model, "non-finite drift");
        }
        if (p.sigma == 0.0 && p.varpi == 0.0) {
            throw error(errc::invalid_model, "pure drift has monotone paths");
        }
        if (p.sigma == 0.0 && p.lambda < 2.0 && !(p.delta_hat > 0.0)) {
            throw error(errc::invalid_model,
                        "bounded variation requires a strictly positive drift (negative of a subordinator)");
        }
    }
    static void validate(const brownian_drift& p) {
        if (!(p.sigma > 0.0) || !std::isfinite(p.mu_hat)) {
            throw error(errc::invalid_model, "Brownian model requires sigma > 0 and finite drift");
        }
    }

    params_type params_;
};

namespace detail {

/// Gamma(a) / Gamma(a + y), reflecting negative arguments.
inline double gamma_ratio(double a, double y) {
    const double b = a + y;
    if (a > 0.0 && b > 0.0) return boost::math::tgamma_delta_ratio(a, y);
    if (a < 0.0 && b < 0.0) {
        // Gamma(x) = pi / (sin(pi x) Gamma(1 - x))
        const double s = boost::math::sin_pi(b) / boost::math::sin_pi(a);
        return s * boost::math::tgamma_delta_ratio(1.0 - b, y);
    }
    int sa = 1;
    int sb = 1;
    const double la = boost::math::lgamma(a, &sa);
    const double lb = boost::math::lgamma(b, &sb);
    return static_cast<double>(sa * sb) * std::exp(la - lb);
}

/// B(a, y) analytically continued in a.
inline double beta_fn(double a, double y) {
    return boost::math::tgamma(y) * gamma_ratio(a, y);
}

inline double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw error(errc::overflow, what);
    return v;
}

inline double psi_beta(const beta_family& p, double z, int order) {
    const double y = 1.0 - p.lambda;
    const double a = p.alpha + z / p.beta;
    try {
        switch (order) {
            case 0: {
                const double jump = p.varpi / p.beta * (beta_fn(a, y) - beta_fn(p.alpha, y));
                return p.delta_hat * z + 0.5 * p.sigma * p.sigma * z * z + jump;
            }
            case 1: {
                const double dg = boost::math::digamma(a) - boost::math::digamma(a + y);
                return p.delta_hat + p.sigma * p.sigma * z +
                       p.varpi / (p.beta * p.beta) * beta_fn(a, y) * dg;
            }
            case 2: {
                const double dg = boost::math::digamma(a) - boost::math::digamma(a + y);
                const double tg = boost::math::trigamma(a) - boost::math::trigamma(a + y);
                return p.sigma * p.sigma +
                       p.varpi / (p.beta * p.beta * p.beta) * beta_fn(a, y) * (dg * dg + tg);
            }
            default: break;
        }
    } catch (const std::overflow_error& e) {
        throw error(errc::overflow, e.what());
    } catch (const std::domain_error& e) {
        throw error(errc::domain, e.what());
    } catch (const boost::math::evaluation_error& e) {
        throw error(errc::overflow, e.what());
    }
    throw error(errc::domain, "Laplace exponent order must be 0, 1 or 2");
}

inline double psi_brownian(const brownian_drift& p, double z, int order) {
    switch (order) {
        case 0: return p.mu_hat * z + 0.5 * p.sigma * p.sigma * z * z;
        case 1: return p.mu_hat + p.sigma * p.sigma * z;
        case 2: return p.sigma * p.sigma;
        default: throw error(errc::domain, "Laplace exponent order must be 0, 1 or 2");
    }
}

}  // namespace detail

/// psi and its first two derivatives at any real z where the exponent is analytic
/// (for the beta family: away from the poles z = -beta(alpha + j - 1)).
inline double laplace_exponent_continued(const levy_model& m, double z, int order = 0) {
    if (std::isnan(z)) throw error(errc::domain, "NaN argument");
    const double v = std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, beta_family>) {
                return detail::psi_beta(p, z, order);
            } else {
                return detail::psi_brownian(p, z, order);
            }
        },
        m.params());
    return detail::checked(v, "Laplace exponent overflow");
}

/// psi(z) (order 0), psi'(z) (order 1) or psi''(z) (order 2) for z >= 0.
inline double laplace_exponent(const levy_model& m, double z, int order = 0) {
    if (!(z >= 0.0)) throw error(errc::domain, "Laplace exponent requires z >= 0");
    if (z == 0.0 && order == 0) return 0.0;
    return laplace_exponent_continued(m, z, order);
}

/// mu = E[X_1] = psi'(0+).
inline double mean_mu(const levy_model& m) { return laplace_exponent(m, 0.0, 1); }

/// Phi(q): the unique positive root of psi(z) = q.
inline double phi_q(const levy_model& m, double q) {
    if (!(q > 0.0)) throw error(errc::domain, "phi_q requires q > 0");
    double hi = 1.0;
    int expansions = 0;
    while (laplace_exponent(m, hi) <= q) {
        hi *= 2.0;
        if (++expansions > 200) {
            throw error(errc::bracket, "no upper bracket for Phi(q); psi does not reach q");
        }
    }
    // psi convex with psi(0) = 0 < q: exactly one crossing of q on (0, hi).
    return detail::bisect_newton([&](double z) { return laplace_exponent(m, z) - q; },
                                 [&](double z) { return laplace_exponent(m, z, 1); }, 0.0, hi,
                                 true, 1e-14);
}

enum class variation_kind { bounded, unbounded };

struct variation {
    variation_kind kind;
    double delta;  ///< natural drift when bounded, NaN otherwise
    bool bounded() const noexcept { return kind == variation_kind::bounded; }
};

inline variation variation_class(const levy_model& m) {
    if (const auto* p = m.as_beta()) {
        if (p->sigma == 0.0 && p->lambda < 2.0) {
            // int_0^1 z nu(dz) < infinity and delta_hat is the natural drift.
            if (!(p->delta_hat > 0.0)) {
                throw error(errc::invalid_model, "bounded variation with non-positive drift");
            }
            return {variation_kind::bounded, p->delta_hat};
        }
    }
    return {variation_kind::unbounded, std::numeric_limits<double>::quiet_NaN()};
}

/// Total jump intensity nu(0, infinity); infinite for infinite activity.
inline double jump_intensity(const levy_model& m) {
    if (const auto* p = m.as_beta()) {
        if (p->varpi == 0.0) return 0.0;
        if (p->lambda < 1.0) return p->varpi / p->beta * detail::beta_fn(p->alpha, 1.0 - p->lambda);
        return std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

/// Lévy density nu(x) of the jump sizes of the demand (jumps of X are -x).
inline double levy_density(const levy_model& m, double x) {
    if (!(x > 0.0)) throw error(errc::domain, "Lévy density requires x > 0");
    if (const auto* p = m.as_beta()) {
        if (p->varpi == 0.0) return 0.0;
        const double one_minus = -std::expm1(-p->beta * x);
        return p->varpi * std::exp(-p->alpha * p->beta * x) * std::pow(one_minus, -p->lambda);
    }
    return 0.0;
}

/// Roots -xi_k of psi = q on the negative axis and the poles -eta_k of psi.
struct root_sequence {
    double q = 0.0;
    double phi_q = 0.0;
    std::vector<double> xis;
    std::vector<double> etas;
    int truncation_count = 0;
};

/// Poles eta_j = beta (alpha + j - 1) of psi(-.) for the beta family.
inline double beta_pole(const beta_family& p, int j) {
    return p.beta * (p.alpha + static_cast<double>(j) - 1.0);
}

/// First `n` roots xi_{1,q} < ... < xi_{n,q}, each bracketed by consecutive poles.
inline root_sequence make_root_sequence(const levy_model& m, double q, int n) {
    const auto* p = m.as_beta();
    if (p == nullptr) throw error(errc::invalid_model, "root sequence requires a beta-family model");
    if (!(q > 0.0) || n < 1) throw error(errc::domain, "root sequence requires q > 0 and n >= 1");

    root_sequence rs;
    rs.q = q;
    rs.phi_q = phi_q(m, q);
    rs.truncation_count = n;
    rs.xis.reserve(static_cast<std::size_t>(n));
    rs.etas.reserve(static_cast<std::size_t>(n));

    auto g = [&](double xi) { return laplace_exponent_continued(m, -xi) - q; };
    auto dg = [&](double xi) { return -laplace_exponent_continued(m, -xi, 1); };

    double left = 0.0;
    for (int j = 1; j <= n; ++j) {
        const double right = beta_pole(*p, j);
        const double pad = 1e-10 * std::max(1.0, right);
        const double lo = (j == 1) ? 0.0 : left + pad;
        const double hi = right - pad;
        const double glo = g(lo);
        const double ghi = g(hi);
        if (!(glo < 0.0 && ghi > 0.0) && !(glo > 0.0 && ghi < 0.0)) {
            throw error(errc::root_not_found,
                        "psi(-xi) - q does not change sign between poles " + std::to_string(j - 1) +
                            " and " + std::to_string(j));
        }
        const double xi = detail::bisect_newton(g, dg, lo, hi, glo < 0.0, 1e-13);
        const double scale = std::abs(p->delta_hat * xi) + 0.5 * p->sigma * p->sigma * xi * xi + 1.0;
        // near a pole psi is steep: allow the residual one ulp of xi can produce
        const double conditioning = 64.0 * std::numeric_limits<double>::epsilon() * xi * std::abs(dg(xi));
        if (!(std::abs(g(xi)) < 1e-10 * scale + conditioning)) {
            throw error(errc::root_not_found, "root residual too large at index " + std::to_string(j));
        }
        rs.xis.push_back(xi);
        rs.etas.push_back(right);
        left = right;
    }
    return rs;
}

}  // namespace ssinv

#endif  // SSINV_LEVY_MODEL_HPP
