#ifndef SSINV_SCALE_KERNEL_HPP
#define SSINV_SCALE_KERNEL_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "ssinv/detail/numeric.hpp"
#include "ssinv/error.hpp"
#include "ssinv/levy_model.hpp"

namespace ssinv {

enum class kernel_kind { W, Wprime, Wbar, Z, Zbar, Wphi, Theta, ThetaBar };

/// Exponential-series representation of the q-scale function
///   W(x) = c0 e^{Phi x} - sum_k b_k e^{-r_k x},  x >= 0,
/// where the first terms are the exact residues at the roots -xi_i and the rest
/// are quadrature nodes of a fitted asymptotic tail.
struct scale_kernel {
    levy_model model;
    double q = 0.0;
    double phi_q = 0.0;
    double psi_prime_at_phi = 0.0;
    double mu = 0.0;
    variation var{variation_kind::unbounded, 0.0};
    std::optional<root_sequence> roots{};  ///< empty for the Brownian closed form
    std::vector<double> coefficients{};  ///< B_i at the exact roots

    double c0 = 0.0;                ///< 1 / psi'(Phi)
    std::vector<double> rates{};    ///< r_k: exact xi_i followed by tail nodes
    std::vector<double> weights{};  ///< b_k
    int tail_terms = 0;
    double tail_scale = 1.0;        ///< calibration factor applied to the tail weights

    double w_zero = 0.0;            ///< W(0) used by all evaluations
    double w_zero_series = 0.0;     ///< W(0) of the uncalibrated series
    double w_zero_theory = 0.0;     ///< 0 or 1/delta
    double wprime_zero = 0.0;       ///< W'(0+), possibly +inf
    double theta_bar_inf = 0.0;     ///< lim ThetaBar(x) (= Phi/q in exact arithmetic)
};

namespace detail {

struct tail_fit {
    double lc, p, d, e, theta_inf, g;
};

inline tail_fit fit_tail(const root_sequence& rs, const std::vector<double>& b) {
    const int n = static_cast<int>(b.size());
    const int first = n / 2;
    const int rows = n - first + 1;
    Eigen::MatrixXd a(rows, 4);
    Eigen::VectorXd y(rows);
    Eigen::MatrixXd a2(rows, 2);
    Eigen::VectorXd y2(rows);
    for (int r = 0; r < rows; ++r) {
        const int i = first + r;  // 1-based index
        const double di = static_cast<double>(i);
        a(r, 0) = 1.0;
        a(r, 1) = -std::log(di);
        a(r, 2) = 1.0 / di;
        a(r, 3) = 1.0 / (di * di);
        y(r) = std::log(b[static_cast<std::size_t>(i - 1)]);
        a2(r, 0) = 1.0;
        a2(r, 1) = 1.0 / di;
        const double left = (i == 1) ? 0.0 : rs.etas[static_cast<std::size_t>(i - 2)];
        y2(r) = rs.xis[static_cast<std::size_t>(i - 1)] - left;
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd c2 = a2.colPivHouseholderQr().solve(y2);
    return {c(0), c(1), c(2), c(3), c2(0), c2(1)};
}

}  // namespace detail

/// Builds the kernel. For the beta family `n_terms` exact roots are used; with
/// n_terms >= 16 the remainder of the series is approximated by a fitted tail and
/// W(0) is pinned to its theoretical value.
inline scale_kernel build_kernel(const levy_model& model, double q, int n_terms = 128) {
    if (!(q > 0.0)) throw error(errc::domain, "build_kernel requires q > 0");
    scale_kernel k{.model = model};
    k.q = q;
    k.phi_q = phi_q(model, q);
    k.psi_prime_at_phi = laplace_exponent(model, k.phi_q, 1);
    k.mu = mean_mu(model);
    k.var = variation_class(model);
    k.c0 = 1.0 / k.psi_prime_at_phi;
    k.w_zero_theory = k.var.bounded() ? 1.0 / k.var.delta : 0.0;

    if (const auto* bm = model.as_brownian()) {
        const double disc = std::sqrt(bm->mu_hat * bm->mu_hat + 2.0 * bm->sigma * bm->sigma * q);
        const double zeta = (bm->mu_hat + disc) / (bm->sigma * bm->sigma);
        k.rates = {zeta};
        k.weights = {1.0 / disc};
        k.coefficients = k.weights;
        k.w_zero_series = k.c0 - k.weights[0];
        k.w_zero = 0.0;
        k.wprime_zero = 2.0 / (bm->sigma * bm->sigma);
    } else {
        if (n_terms < 1) throw error(errc::domain, "n_terms must be >= 1");
        const auto& bp = *model.as_beta();
        k.roots = make_root_sequence(model, q, n_terms);
        const auto& rs = *k.roots;
        for (double xi : rs.xis) {
            const double b = -1.0 / laplace_exponent_continued(model, -xi, 1);
            if (!(b > 0.0) || !std::isfinite(b)) {
                throw error(errc::series_divergence, "non-positive residue coefficient");
            }
            k.coefficients.push_back(b);
        }
        k.rates = rs.xis;
        k.weights = k.coefficients;

        detail::compensated_sum head;
        head.add(k.c0);
        for (double b : k.coefficients) head.add(-b);

        if (n_terms >= 16) {
            const auto fit = detail::fit_tail(rs, k.coefficients);
            if (!(fit.p > 1.05) || !std::isfinite(fit.lc)) {
                throw error(errc::series_divergence, "series coefficients do not decay fast enough");
            }
            using gl = boost::math::quadrature::gauss<double, 24>;
            const double n_half = static_cast<double>(n_terms) + 0.5;
            const double pref = std::pow(n_half, 1.0 - fit.p) / (fit.p - 1.0);
            std::vector<double> tail_r;
            std::vector<double> tail_b;
            auto add_node = [&](double v, double w) {
                // t = (N + 1/2) v^{-1/(p-1)} maps sum_{i>N} b(i) onto v in (0,1)
                const double t = n_half * std::pow(v, -1.0 / (fit.p - 1.0));
                const double wt = 0.5 * w * pref * std::exp(fit.lc + fit.d / t + fit.e / (t * t));
                tail_r.push_back(bp.beta * (bp.alpha + t - 2.0) + fit.theta_inf + fit.g / t);
                tail_b.push_back(wt);
            };
            const auto& xs = gl::abscissa();
            const auto& ws = gl::weights();
            for (std::size_t i = 0; i < xs.size(); ++i) {
                add_node(0.5 * (1.0 + xs[i]), ws[i]);
                if (xs[i] != 0.0) add_node(0.5 * (1.0 - xs[i]), ws[i]);
            }
            detail::compensated_sum tail_sum;
            for (double b : tail_b) tail_sum.add(b);
            const double raw = head.value() - tail_sum.value();
            k.w_zero_series = raw;
            const double scale = (head.value() - k.w_zero_theory) / tail_sum.value();
            if (!std::isfinite(scale) || std::abs(scale - 1.0) > 0.5) {
                throw error(errc::series_divergence, "series fails the Cauchy check at x = 0");
            }
            k.tail_scale = scale;
            // tail weights b (u + v / r) matching W(0) and sum_k b_k / r_k = 1/q - c0/Phi
            // (the Laplace transform of W at 0, equivalently ThetaBar(inf) = Phi/q)
            detail::compensated_sum exact_moment;
            for (std::size_t i = 0; i < k.coefficients.size(); ++i) exact_moment.add(k.coefficients[i] / rs.xis[i]);
            Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
            for (std::size_t i = 0; i < tail_b.size(); ++i) {
                const double b = tail_b[i];
                const double r = tail_r[i];
                m(0, 0) += b;
                m(0, 1) += b / r;
                m(1, 0) += b / r;
                m(1, 1) += b / (r * r);
            }
            const Eigen::Vector2d rhs(head.value() - k.w_zero_theory,
                                      1.0 / q - k.c0 / k.phi_q - exact_moment.value());
            const Eigen::Vector2d uv = m.fullPivLu().solve(rhs);
            for (std::size_t i = 0; i < tail_b.size(); ++i) {
                const double factor = uv(0) + uv(1) / tail_r[i];
                if (!std::isfinite(factor) || std::abs(factor - 1.0) > 0.5) {
                    throw error(errc::series_divergence, "tail calibration is not a small correction");
                }
                tail_b[i] *= factor;
            }
            k.tail_terms = static_cast<int>(tail_b.size());
            k.rates.insert(k.rates.end(), tail_r.begin(), tail_r.end());
            k.weights.insert(k.weights.end(), tail_b.begin(), tail_b.end());
            k.w_zero = k.w_zero_theory;
        } else {
            k.w_zero_series = head.value();
            k.w_zero = head.value();
        }

        const double inf = std::numeric_limits<double>::infinity();
        if (bp.sigma > 0.0) {
            k.wprime_zero = 2.0 / (bp.sigma * bp.sigma);
        } else if (bp.lambda < 1.0 && k.var.bounded()) {
            k.wprime_zero = (q + jump_intensity(model)) / (k.var.delta * k.var.delta);
        } else {
            k.wprime_zero = inf;
        }
        if (std::isfinite(k.wprime_zero)) {
            detail::compensated_sum s;
            s.add(k.c0 * k.phi_q);
            for (std::size_t i = 0; i < k.rates.size(); ++i) s.add(k.weights[i] * k.rates[i]);
            k.wprime_zero = s.value();
        }
    }

    detail::compensated_sum tb;
    tb.add(k.c0);
    for (std::size_t i = 0; i < k.rates.size(); ++i) tb.add(k.weights[i] * k.phi_q / k.rates[i]);
    k.theta_bar_inf = tb.value();
    return k;
}

namespace detail {

template <class F>
double sum_terms(const scale_kernel& k, F&& term) {
    compensated_sum s;
    for (std::size_t i = 0; i < k.rates.size(); ++i) s.add(term(k.rates[i], k.weights[i]));
    return s.value();
}

/// W_bar(x) without the growing term: sum_k (b_k / r_k)(1 - e^{-r_k x}).
inline double decaying_wbar(const scale_kernel& k, double x) {
    return sum_terms(k, [x](double r, double b) { return b / r * -std::expm1(-r * x); });
}

/// sum_k (b_k / r_k)(x - (1 - e^{-r_k x}) / r_k).
inline double decaying_zbar(const scale_kernel& k, double x) {
    return sum_terms(k, [x](double r, double b) { return b / (r * r) * expm1_minus_x(-r * x); });
}

}  // namespace detail

/// W, W', W_bar, Z, Z_bar, W_Phi, Theta or ThetaBar at x. For x <= 0 the
/// defining extensions are returned (W' is the right derivative at 0).
inline double eval_kernel(const scale_kernel& k, kernel_kind kind, double x) {
    if (std::isnan(x)) throw error(errc::domain, "NaN argument");
    const double phi = k.phi_q;
    if (x < 0.0 || (x == 0.0 && kind != kernel_kind::Wprime && kind != kernel_kind::Theta)) {
        switch (kind) {
            case kernel_kind::Z: return 1.0;
            case kernel_kind::Zbar: return x;
            case kernel_kind::W:
            case kernel_kind::Wphi:
            case kernel_kind::ThetaBar: return x < 0.0 ? 0.0 : k.w_zero;
            default: return 0.0;
        }
    }
    if (x == 0.0) {
        if (kind == kernel_kind::Wprime) return k.wprime_zero;
        return k.wprime_zero - phi * k.w_zero;  // Theta(0)
    }
    switch (kind) {
        case kernel_kind::W:
            return k.c0 * std::exp(phi * x) -
                   detail::sum_terms(k, [x](double r, double b) { return b * std::exp(-r * x); });
        case kernel_kind::Wprime:
            return k.c0 * phi * std::exp(phi * x) +
                   detail::sum_terms(k, [x](double r, double b) { return b * r * std::exp(-r * x); });
        case kernel_kind::Wbar:
            return k.c0 * std::expm1(phi * x) / phi - detail::decaying_wbar(k, x);
        case kernel_kind::Z:
            return 1.0 + k.q * (k.c0 * std::expm1(phi * x) / phi - detail::decaying_wbar(k, x));
        case kernel_kind::Zbar:
            return x + k.q * (k.c0 * detail::expm1_minus_x(phi * x) / (phi * phi) -
                              detail::decaying_zbar(k, x));
        case kernel_kind::Wphi:
            return k.c0 - detail::sum_terms(
                              k, [x, phi](double r, double b) { return b * std::exp(-(r + phi) * x); });
        case kernel_kind::Theta:
            return detail::sum_terms(
                k, [x, phi](double r, double b) { return b * (r + phi) * std::exp(-r * x); });
        case kernel_kind::ThetaBar:
            // W(0) + sum_k b_k (1 + Phi/r_k)(1 - e^{-r_k x})
            return k.w_zero + detail::sum_terms(k, [x, phi](double r, double b) {
                       return b * (1.0 + phi / r) * -std::expm1(-r * x);
                   });
    }
    return 0.0;
}

/// (psi(s) - q) int_0^inf e^{-s x} W(x) dx by quadrature; close to 1 for an accurate kernel.
inline double laplace_check(const scale_kernel& k, double s) {
    if (!(s > k.phi_q)) throw error(errc::domain, "laplace_check requires s > Phi(q)");
    auto f = [&](double x) { return std::exp(-s * x) * eval_kernel(k, kernel_kind::W, x); };
    // x = u^2 on [0, 1] absorbs the square-root type behaviour at the origin
    auto g = [&](double u) { return 2.0 * u * f(u * u); };
    std::vector<double> near{0.0};
    for (double p = 1e-4; p < 1.0; p *= 10.0) near.push_back(p);
    near.push_back(1.0);
    const double cut = std::max(2.0, (40.0 + std::log(1.0 + k.c0 * s)) / (s - k.phi_q));
    std::vector<double> far{1.0};
    const double step = std::max(0.5 / s, cut / 200.0);
    for (double p = 1.0 + step; p < cut; p += step) far.push_back(p);
    far.push_back(cut);
    const double integral =
        detail::integrate_panels(g, near, 1e-10, 10) + detail::integrate_panels(f, far, 1e-10, 10);
    return (laplace_exponent(k.model, s) - k.q) * integral;
}

/// E_x[e^{-q tau_b^+}; tau_b^+ < tau_0^-] = W(x) / W(b).
inline double exit_up_lt(const scale_kernel& k, double x, double b) {
    if (!(b > 0.0)) throw error(errc::domain, "exit_up_lt requires b > 0");
    if (x > b) throw error(errc::domain, "exit_up_lt requires x <= b");
    if (x == b) return 1.0;
    if (x < 0.0) return 0.0;
    return eval_kernel(k, kernel_kind::W, x) / eval_kernel(k, kernel_kind::W, b);
}

/// E_x[e^{-q tau_0^-}] = 1 - (q / Phi) ThetaBar(x).
inline double ruin_lt(const scale_kernel& k, double x) {
    if (x <= 0.0) return 1.0;
    return 1.0 - k.q / k.phi_q * eval_kernel(k, kernel_kind::ThetaBar, x);
}

/// E_x[e^{-q tau_s^-} X_{tau_s^-}]
///   = Zbar(x-s) - (s - mu/q)(q/Phi) ThetaBar(x-s) + s - (q/Phi^2) W(x-s).
inline double overshoot_expectation(const scale_kernel& k, double x, double s) {
    const double y = x - s;
    if (y <= 0.0) return x;
    const double phi = k.phi_q;
    const double q = k.q;
    // Zbar(y) - (q/Phi^2) W(y) with the e^{Phi y} parts cancelled analytically
    const double zbar_minus_w =
        y - q * k.c0 * (1.0 + phi * y) / (phi * phi) - q * detail::decaying_zbar(k, y) +
        q / (phi * phi) * detail::sum_terms(k, [y](double r, double b) { return b * std::exp(-r * y); });
    return zbar_minus_w - (s - k.mu / q) * (q / phi) * eval_kernel(k, kernel_kind::ThetaBar, y) + s;
}

/// E_x[int_0^inf e^{-q t} dL_t^s] = -Zbar(x-s) - mu/q + Z(x-s)/Phi.
inline double reflected_local_time_lt(const scale_kernel& k, double x, double s) {
    const double y = x - s;
    const double phi = k.phi_q;
    const double q = k.q;
    if (y <= 0.0) return -y - k.mu / q + 1.0 / phi;
    // Z(y)/Phi - Zbar(y) with the e^{Phi y} parts cancelled analytically
    const double z_over_phi = (1.0 - q * k.c0 / phi - q * detail::decaying_wbar(k, y)) / phi;
    const double zbar_rest = y - q * k.c0 * (1.0 + phi * y) / (phi * phi) - q * detail::decaying_zbar(k, y);
    return z_over_phi - zbar_rest - k.mu / q;
}

/// Coefficients B_i from the truncated product formula
///   B_i = (Phi/q) xi_i A_i / (Phi + xi_i),
///   A_i = (1 - xi_i/eta_i) prod_{j != i} (1 - xi_i/eta_j) / (1 - xi_i/xi_j).
/// Converges to the residues as the truncation grows.
inline std::vector<double> product_form_coefficients(const root_sequence& rs) {
    const std::size_t n = rs.xis.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = rs.xis[i];
        double a = 1.0 - xi / rs.etas[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            a *= (1.0 - xi / rs.etas[j]) / (1.0 - xi / rs.xis[j]);
        }
        out[i] = rs.phi_q / rs.q * xi * a / (rs.phi_q + xi);
    }
    return out;
}

}  // namespace ssinv

#endif  // SSINV_SCALE_KERNEL_HPP
