#ifndef SSINV_POLICY_SOLVER_HPP
#define SSINV_POLICY_SOLVER_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "ssinv/cost_model.hpp"
#include "ssinv/detail/numeric.hpp"
#include "ssinv/error.hpp"
#include "ssinv/scale_kernel.hpp"

namespace ssinv {

/// G, H and the (s,S) cost surface for one kernel and cost spec, with
/// Psi(.; f~') and Psi(.; f~) prepared once.
class policy_functions {
public:
    policy_functions(const scale_kernel& k, const cost_spec& spec)
        : k_(&k), spec_(&spec), ftp_(cost_integrand(spec, transform_of::f_tilde_prime)),
          psi_ftp_eval_(ftp_, k.phi_q), psi_ft_eval_(cost_integrand(spec, transform_of::f_tilde), k.phi_q) {
        if (ftp_.poly && ftp_.poly->degree() <= 3) psi_ftp_poly_ = psi_ftp_eval_.polynomial();
        a0_ = a0_root(spec, k.phi_q);
    }

    const scale_kernel& kernel() const noexcept { return *k_; }
    const cost_spec& spec() const noexcept { return *spec_; }
    double a0() const noexcept { return a0_; }

    /// Psi(y; f~').
    double psi_ftp(double y) const { return psi_ftp_eval_(y); }
    /// Psi(s; f~).
    double psi_ft(double s) const { return psi_ft_eval_(s); }

    double theta_bar(double y) const { return eval_kernel(*k_, kernel_kind::ThetaBar, y); }

    /// ThetaBar(y) - W(0) = sum_k d_k (1 - e^{-r_k y}).
    double theta_bar_increment(double y) const {
        if (y <= 0.0) return 0.0;
        const double phi = k_->phi_q;
        return detail::sum_terms(*k_, [y, phi](double r, double b) {
            return b * (1.0 + phi / r) * -std::expm1(-r * y);
        });
    }

    /// G(s, x) - K = int_0^{x-s} Psi(x - u; f~') ThetaBar(u) du.
    double g_minus_k(double s, double x) const {
        const double len = x - s;
        if (!(len > 0.0)) return 0.0;
        const double phi = k_->phi_q;
        if (psi_ftp_poly_) {
            const auto a = psi_ftp_poly_->reflected_taylor(x);
            detail::compensated_sum total;
            double lp = len;
            for (std::size_t m = 0; m < a.size(); ++m) {
                total.add(a[m] * k_->w_zero * lp / static_cast<double>(m + 1));
                lp *= len;
            }
            for (std::size_t i = 0; i < k_->rates.size(); ++i) {
                const double r = k_->rates[i];
                const auto om = detail::one_minus_exp_moments<4>(r, len);
                double t = 0.0;
                for (std::size_t m = 0; m < a.size(); ++m) t += a[m] * om[m];
                total.add(k_->weights[i] * (1.0 + phi / r) * t);
            }
            return total.value();
        }
        const auto pts = panels(s, x);
        return detail::integrate_panels(
            [&](double u) { return psi_ftp(x - u) * theta_bar(u); }, pts, 1e-12);
    }

    /// H(s, x) = Psi(x; f~') W(0) + int_0^{x-s} Psi(x - u; f~') Theta(u) du.
    double h_value(double s, double x) const {
        const double len = x - s;
        const double head = psi_ftp(x) * k_->w_zero;
        if (!(len > 0.0)) return psi_ftp(s) * k_->w_zero;
        const double phi = k_->phi_q;
        if (psi_ftp_poly_) {
            const auto a = psi_ftp_poly_->reflected_taylor(x);
            detail::compensated_sum total;
            total.add(head);
            for (std::size_t i = 0; i < k_->rates.size(); ++i) {
                const double r = k_->rates[i];
                const auto j = detail::exp_moments<4>(-r, len);
                double t = 0.0;
                for (std::size_t m = 0; m < a.size(); ++m) t += a[m] * j[m];
                total.add(k_->weights[i] * (r + phi) * t);
            }
            return total.value();
        }
        const auto pts = panels(s, x);
        return head + detail::integrate_panels(
                          [&](double u) {
                              return psi_ftp(x - u) * eval_kernel(*k_, kernel_kind::Theta, u);
                          },
                          pts, 1e-12);
    }

    double g(double s, double x) const { return spec_->K + g_minus_k(s, x); }

    /// v~_{s,S}(S) = (Phi/q) Psi(s; f~) - K - C mu/q + (Phi/q) G(s,S) / ThetaBar(S-s).
    double tilde_at_S(double s, double S) const {
        const double phi = k_->phi_q;
        const double q = k_->q;
        return phi / q * psi_ft(s) - spec_->K - spec_->C * k_->mu / q +
               phi / q * g(s, S) / theta_bar(S - s);
    }

    /// v~_{s,S}(x) - v~_{s,S}(s+) for x > s, and 0 for x <= s.
    double tilde_increment(double s, double S, double x) const {
        if (x <= s) return 0.0;
        return g_minus_k(s, x) - theta_bar_increment(x - s) / theta_bar(S - s) * g(s, S);
    }

    /// v~_{s,S}(s+).
    double tilde_right_limit(double s, double S) const {
        return tilde_at_S(s, S) + spec_->K - k_->w_zero / theta_bar(S - s) * g(s, S);
    }

    /// v~_{s,S}(x) for any x.
    double tilde_cost(double s, double S, double x) const {
        if (!(S > s)) throw error(errc::domain, "expected cost requires S > s");
        const double at_s = tilde_at_S(s, S);
        if (x <= s) return at_s + spec_->K;
        const double ratio = theta_bar(x - s) / theta_bar(S - s);
        return -ratio * g(s, S) + g(s, x) + at_s;
    }

    /// v~_{a0}(x) - v~_{a0}(a0) for the barrier strategy.
    double barrier_increment(double x) const { return x > a0_ ? g_minus_k(a0_, x) : 0.0; }

    /// v~_{a0}(a0) = f~(a0)/q - C mu/q.
    double barrier_at_a0() const {
        return f_tilde(*spec_, a0_) / k_->q - spec_->C * k_->mu / k_->q;
    }

private:
    std::vector<double> panels(double s, double x) const {
        std::vector<double> inner;
        for (double kk : ftp_.kinks) inner.push_back(x - kk);
        const double len = x - s;
        const double step = std::max(2.0 / k_->phi_q, len / 32.0);
        for (double p = 1.0; p < len; p += step) inner.push_back(p);
        return detail::kernel_panels(len, inner);
    }

    const scale_kernel* k_;
    const cost_spec* spec_;
    integrand ftp_;
    psi_evaluator psi_ftp_eval_;
    psi_evaluator psi_ft_eval_;
    std::optional<detail::polynomial> psi_ftp_poly_;
    double a0_ = 0.0;
};

/// G(s, x).
inline double g_func(const scale_kernel& k, const cost_spec& spec, double s, double x) {
    if (!(x > s)) throw error(errc::domain, "G(s, x) requires x > s");
    return policy_functions(k, spec).g(s, x);
}

/// H(s, x) = dG/dx.
inline double h_func(const scale_kernel& k, const cost_spec& spec, double s, double x) {
    if (!(x > s)) throw error(errc::domain, "H(s, x) requires x > s");
    return policy_functions(k, spec).h_value(s, x);
}

/// k(s, x) = ThetaBar(x - s)[Psi(s; f~) - (q/Phi)(K + C mu/q)] + G(s, x).
inline double k_func(const scale_kernel& k, const cost_spec& spec, double s, double x) {
    if (!(x > s)) throw error(errc::domain, "k(s, x) requires x > s");
    const policy_functions pf(k, spec);
    return pf.theta_bar(x - s) * (pf.psi_ft(s) - k.q / k.phi_q * (spec.K + spec.C * k.mu / k.q)) +
           pf.g(s, x);
}

/// Expected total cost v_{s,S}(x) of an arbitrary (s,S) policy.
inline double expected_cost_ss(const scale_kernel& k, const cost_spec& spec, double s, double S, double x) {
    if (!(S > s)) throw error(errc::domain, "expected cost requires S > s");
    return policy_functions(k, spec).tilde_cost(s, S, x) - spec.C * x;
}

enum class policy_kind { ss, barrier };

struct fit_diagnostics {
    double left_value = 0.0;
    double right_value = 0.0;
    double left_slope = 0.0;
    double right_slope = 0.0;
    double left_second = 0.0;
    double right_second = 0.0;
    double slope_at_S = std::numeric_limits<double>::quiet_NaN();
    variation_kind variation = variation_kind::unbounded;
    bool continuous_fit = false;
    bool smooth_fit = false;
    bool slope_condition = false;
    bool passed = false;
};

struct policy_solution {
    policy_kind kind = policy_kind::ss;
    double s_star = 0.0;
    double S_star = 0.0;
    double a0 = 0.0;
    scale_kernel kernel;
    cost_spec spec;
    double residual_g = 0.0;
    double residual_h = 0.0;
    int outer_iterations = 0;
    fit_diagnostics fit{};

    /// Lower threshold: s* or a0.
    double threshold() const noexcept { return kind == policy_kind::ss ? s_star : a0; }
};

struct solver_options {
    double tol = 1e-10;
    int max_iter = 200;
    int scan_points = 64;
};

namespace detail {

struct inner_result {
    double S;
    double g;
};

/// argmin over S >= a0 of G(s, .) for s < a0, taken at a minus-to-plus crossing of H.
inline inner_result inner_minimum(const policy_functions& pf, double s, const solver_options& opt) {
    const double a0 = pf.a0();
    double width = std::max(1.0, a0 - s);
    double hi = a0 + width;
    int expansions = 0;
    while (!(pf.h_value(s, hi) > 0.0)) {
        width *= 2.0;
        hi = a0 + width;
        if (++expansions > 60) throw error(errc::bracket, "H(s, .) never becomes positive");
    }
    std::vector<double> grid(static_cast<std::size_t>(opt.scan_points) + 1);
    std::vector<double> hv(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid[i] = a0 + (hi - a0) * static_cast<double>(i) / opt.scan_points;
        hv[i] = pf.h_value(s, grid[i]);
    }
    std::optional<inner_result> best;
    auto consider = [&](double S) {
        const double gv = pf.g(s, S);
        if (!best || gv < best->g) best = inner_result{S, gv};
    };
    if (hv[0] >= 0.0) consider(a0);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        if (hv[i] < 0.0 && hv[i + 1] >= 0.0) {
            if (hv[i + 1] == 0.0) {
                consider(grid[i + 1]);
                continue;
            }
            boost::uintmax_t iters = 100;
            const auto r = boost::math::tools::toms748_solve(
                [&](double S) { return pf.h_value(s, S); }, grid[i], grid[i + 1], hv[i], hv[i + 1],
                [](double u, double v) { return std::abs(u - v) <= 4e-16 * std::max(1.0, std::abs(u)); },
                iters);
            const double S = 0.5 * (r.first + r.second);
            consider(S);
        }
    }
    if (!best) throw error(errc::root_not_found, "no minimiser of G(s, .) found");
    return *best;
}

/// Richardson-extrapolated one-sided first difference of an increment F with F(0) = 0.
template <class F>
double one_sided_slope(F&& inc, double dir) {
    double est = 0.0;
    for (double h : {1e-3, 1e-4, 1e-5, 1e-6}) {
        const double d1 = inc(dir * h) / (dir * h);
        const double d2 = inc(dir * 0.5 * h) / (dir * 0.5 * h);
        est = 2.0 * d2 - d1;
    }
    return est;
}

/// Richardson-extrapolated one-sided second difference of an increment F with F(0) = 0.
template <class F>
double one_sided_second(F&& inc, double dir) {
    double est = 0.0;
    for (double h : {1e-3, 1e-4, 1e-5, 1e-6}) {
        auto d2 = [&](double e) { return (inc(dir * 2.0 * e) - 2.0 * inc(dir * e)) / (e * e); };
        est = 2.0 * d2(0.5 * h) - d2(h);
    }
    return est;
}

/// Richardson-extrapolated central first difference.
template <class F>
double central_slope(F&& f, double x) {
    double est = 0.0;
    for (double h : {1e-3, 1e-4, 1e-5}) {
        const double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        const double d2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h;
        est = (4.0 * d2 - d1) / 3.0;
    }
    return est;
}

}  // namespace detail

/// One-sided values and derivatives of v~ at the lower threshold, and v~'(S*).
inline fit_diagnostics compute_fit_diagnostics(const policy_solution& sol) {
    const policy_functions pf(sol.kernel, sol.spec);
    fit_diagnostics d;
    d.variation = sol.kernel.var.kind;
    const bool unbounded = d.variation == variation_kind::unbounded;
    if (sol.kind == policy_kind::ss) {
        const double s = sol.s_star;
        const double S = sol.S_star;
        auto inc = [&](double e) { return pf.tilde_increment(s, S, s + e); };
        const double at_S = pf.tilde_at_S(s, S);
        d.left_value = at_S + sol.spec.K;
        d.right_value = pf.tilde_right_limit(s, S);
        d.left_slope = detail::one_sided_slope([](double) { return 0.0; }, -1.0);
        d.right_slope = detail::one_sided_slope(inc, 1.0);
        d.left_second = 0.0;
        d.right_second = detail::one_sided_second(inc, 1.0);
        d.slope_at_S = detail::central_slope([&](double x) { return pf.tilde_increment(s, S, x); }, S);
        const double scale = 1.0 + std::abs(d.left_value);
        d.continuous_fit = std::abs(d.left_value - d.right_value) / scale < 1e-6;
        d.smooth_fit = std::abs(d.left_slope - d.right_slope) < 1e-6;
        d.slope_condition = std::abs(d.slope_at_S) < 1e-6;
        d.passed = unbounded ? (d.smooth_fit && d.slope_condition) : d.continuous_fit;
    } else {
        auto inc = [&](double e) { return pf.barrier_increment(sol.a0 + e); };
        d.left_value = pf.barrier_at_a0();
        d.right_value = d.left_value;
        d.left_slope = 0.0;
        d.right_slope = detail::one_sided_slope(inc, 1.0);
        d.left_second = 0.0;
        d.right_second = detail::one_sided_second(inc, 1.0);
        d.continuous_fit = true;
        d.smooth_fit = std::abs(d.right_slope) < 1e-6;
        d.slope_condition = d.smooth_fit;
        d.passed = d.smooth_fit && (!unbounded || std::abs(d.right_second) < 1e-4);
    }
    return d;
}

/// Optimal (s*, S*) for K > 0 by bisection on m(s) = min_S G(s, S).
inline policy_solution solve_ss(const scale_kernel& k, const cost_spec& spec, solver_options opt = {}) {
    if (!(spec.K > 0.0)) throw error(errc::invalid_spec, "solve_ss requires K > 0");
    const policy_functions pf(k, spec);
    const double a0 = pf.a0();
    auto m = [&](double s) { return detail::inner_minimum(pf, s, opt); };

    double hi = a0;  // m(a0) = K > 0
    double width = 1.0;
    double lo = a0 - width;
    auto mlo = m(lo);
    int expansions = 0;
    while (!(mlo.g < 0.0)) {
        hi = lo;
        width *= 2.0;
        lo = a0 - width;
        mlo = m(lo);
        if (++expansions > 60) throw error(errc::bracket, "m(s) stays positive as s decreases");
    }
    double mhi_val = (hi == a0) ? spec.K : m(hi).g;
    int it = 0;
    while (hi - lo > opt.tol && it < opt.max_iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const auto mm = m(mid);
        ++it;
        if (mm.g < 0.0) {
            lo = mid;
            mlo = mm;
        } else {
            hi = mid;
            mhi_val = mm.g;
        }
        if (std::abs(mm.g) < 1e-13 * spec.K) {
            lo = hi = mid;
            mlo = mm;
            break;
        }
    }
    if (hi - lo > opt.tol) throw error(errc::convergence, "outer bisection did not converge");

    // secant step inside the final bracket
    double s_star = lo;
    auto best = mlo;
    if (hi > lo && mhi_val != mlo.g) {
        const double sc = lo + (hi - lo) * mlo.g / (mlo.g - mhi_val);
        if (sc > lo && sc < hi) {
            const auto msc = m(sc);
            if (std::abs(msc.g) < std::abs(best.g)) {
                s_star = sc;
                best = msc;
            }
        }
        if (hi < a0) {
            const auto mh = m(hi);
            if (std::abs(mh.g) < std::abs(best.g)) {
                s_star = hi;
                best = mh;
            }
        }
    }
    if (!(std::abs(best.g) < 1e-6 * spec.K)) {
        throw error(errc::convergence, "G(s*, S*) did not vanish");
    }

    policy_solution sol{.kind = policy_kind::ss, .s_star = s_star, .S_star = best.S, .a0 = a0, .kernel = k, .spec = spec};
    sol.residual_g = best.g;
    sol.residual_h = pf.h_value(s_star, best.S);
    sol.outer_iterations = it;
    sol.fit = compute_fit_diagnostics(sol);
    return sol;
}

/// Barrier solution for K = 0: reflect at a0.
inline policy_solution solve_barrier(const scale_kernel& k, const cost_spec& spec) {
    if (spec.K != 0.0) throw error(errc::invalid_spec, "barrier solution requires K = 0");
    const double a0 = a0_root(spec, k.phi_q);
    policy_solution sol{.kind = policy_kind::barrier, .s_star = a0, .S_star = a0, .a0 = a0, .kernel = k, .spec = spec};
    sol.residual_g = 0.0;
    sol.residual_h = psi_transform(spec, k.phi_q, a0, transform_of::f_tilde_prime);
    sol.fit = compute_fit_diagnostics(sol);
    return sol;
}

/// (s*, S*) when K > 0, the barrier a0 when K = 0.
inline policy_solution solve(const scale_kernel& k, const cost_spec& spec, solver_options opt = {}) {
    return spec.K > 0.0 ? solve_ss(k, spec, opt) : solve_barrier(k, spec);
}

/// v~ of the barrier strategy at a0.
inline double barrier_value_tilde(const scale_kernel& k, const cost_spec& spec, double x) {
    if (spec.K != 0.0) throw error(errc::invalid_spec, "barrier value requires K = 0");
    const policy_functions pf(k, spec);
    return pf.barrier_at_a0() + pf.barrier_increment(x);
}

/// v_{a0}(x) for K = 0.
inline double barrier_value(const scale_kernel& k, const cost_spec& spec, double x) {
    return barrier_value_tilde(k, spec, x) - spec.C * x;
}

/// v~ under the solved policy.
inline double value_function_tilde(const policy_solution& sol, double x) {
    if (sol.kind == policy_kind::barrier) return barrier_value_tilde(sol.kernel, sol.spec, x);
    return policy_functions(sol.kernel, sol.spec).tilde_cost(sol.s_star, sol.S_star, x);
}

/// v under the solved policy.
inline double value_function(const policy_solution& sol, double x) {
    return value_function_tilde(sol, x) - sol.spec.C * x;
}

inline fit_diagnostics fit_diagnostics_of(const policy_solution& sol) { return compute_fit_diagnostics(sol); }

}  // namespace ssinv

#endif  // SSINV_POLICY_SOLVER_HPP
