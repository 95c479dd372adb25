#ifndef SSINV_COST_MODEL_HPP
#define SSINV_COST_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "ssinv/detail/numeric.hpp"
#include "ssinv/error.hpp"
#include "ssinv/scale_kernel.hpp"

namespace ssinv {

/// A function integrated against the kernels: either an exact polynomial or a
/// callable that is smooth between `kinks` and grows at most like |x|^growth_degree.
struct integrand {
    std::optional<detail::polynomial> poly;
    std::function<double(double)> fn;
    std::vector<double> kinks;
    int growth_degree = 0;

    static integrand polynomial(std::vector<double> coeffs) {
        integrand h;
        h.poly = detail::polynomial{std::move(coeffs)};
        h.growth_degree = static_cast<int>(h.poly->degree());
        return h;
    }
    static integrand callable(std::function<double(double)> f, std::vector<double> kinks,
                              int growth_degree) {
        integrand h;
        h.fn = std::move(f);
        h.kinks = std::move(kinks);
        h.growth_degree = growth_degree;
        return h;
    }
    static integrand constant(double c) { return polynomial({c}); }

    double operator()(double x) const { return poly ? (*poly)(x) : fn(x); }
};

/// f(x) = x^2.
struct quadratic_cost {};

/// Piecewise C^1 inventory cost with declared shape constants.
struct piecewise_c1_cost {
    std::function<double(double)> f;
    std::function<double(double)> df;
    std::vector<double> kinks;
    double turning_point = 0.0;  ///< a: f~ decreasing and convex left of a, increasing right of a
    double c0 = 0.0;             ///< f~'(x) >= c0 for x >= x0
    double x0 = 0.0;
    int growth_degree = 1;
};

using cost_function = std::variant<quadratic_cost, piecewise_c1_cost>;

/// h x^+ + p x^-: holding cost h above zero, backlog penalty p below.
inline piecewise_c1_cost piecewise_linear_cost(double holding, double backlog, double C, double q) {
    piecewise_c1_cost c;
    c.f = [holding, backlog](double x) { return x >= 0.0 ? holding * x : -backlog * x; };
    c.df = [holding, backlog](double x) { return x >= 0.0 ? holding : -backlog; };
    c.kinks = {0.0};
    c.turning_point = 0.0;
    c.c0 = holding + C * q;
    c.x0 = 0.0;
    c.growth_degree = 1;
    return c;
}

/// x^2 through the general (quadrature) code path.
inline piecewise_c1_cost quadratic_as_piecewise(double C, double q) {
    piecewise_c1_cost c;
    c.f = [](double x) { return x * x; };
    c.df = [](double x) { return 2.0 * x; };
    c.turning_point = -0.5 * C * q;
    c.c0 = 2.0;
    c.x0 = c.turning_point + 1.0;
    c.growth_degree = 2;
    return c;
}

enum class transform_of { f, f_tilde, f_prime, f_tilde_prime };

struct cost_spec;
inline void validate_cost_spec(const cost_spec& spec);

/// Inventory cost f, ordering cost g(y) = C y + K, discount rate q.
struct cost_spec {
    double C = 0.0;
    double K = 0.0;
    double q = 0.0;
    cost_function f;

    cost_spec(double C_, double K_, double q_, cost_function f_ = quadratic_cost{})
        : C(C_), K(K_), q(q_), f(std::move(f_)) {
        validate_cost_spec(*this);
    }

    bool is_quadratic() const noexcept { return std::holds_alternative<quadratic_cost>(f); }

    /// The turning point a of f~.
    double turning_point() const {
        if (is_quadratic()) return -0.5 * C * q;
        return std::get<piecewise_c1_cost>(f).turning_point;
    }
};

/// f~(x) = f(x) + C q x (order 0) or its derivative (order 1).
inline double f_tilde(const cost_spec& spec, double x, int order = 0) {
    if (order != 0 && order != 1) throw error(errc::domain, "f_tilde order must be 0 or 1");
    if (spec.is_quadratic()) {
        return order == 0 ? x * x + spec.C * spec.q * x : 2.0 * x + spec.C * spec.q;
    }
    const auto& pc = std::get<piecewise_c1_cost>(spec.f);
    if (order == 0) return pc.f(x) + spec.C * spec.q * x;
    for (double k : pc.kinks) {
        if (x == k) throw error(errc::domain, "f_tilde derivative requested at a kink");
    }
    return pc.df(x) + spec.C * spec.q;
}

inline void validate_cost_spec(const cost_spec& spec) {
    if (!(spec.C >= 0.0) || !(spec.K >= 0.0) || !(spec.q > 0.0) || !std::isfinite(spec.C) ||
        !std::isfinite(spec.K)) {
        throw error(errc::invalid_spec, "cost spec requires C >= 0, K >= 0, q > 0");
    }
    if (spec.is_quadratic()) return;
    const auto& pc = std::get<piecewise_c1_cost>(spec.f);
    if (!pc.f || !pc.df) throw error(errc::invalid_spec, "cost function callables missing");
    if (std::abs(pc.f(0.0)) > 1e-12) throw error(errc::invalid_spec, "cost function must satisfy f(0) = 0");
    if (!(pc.c0 > 0.0) || pc.x0 < pc.turning_point) {
        throw error(errc::invalid_spec, "declared c0 must be positive and x0 >= a");
    }
    if (pc.growth_degree < 0 || pc.growth_degree > 8) {
        throw error(errc::invalid_spec, "growth degree must be in [0, 8]");
    }
    const double a = pc.turning_point;
    auto deriv = [&](double x) { return pc.df(x) + spec.C * spec.q; };
    double prev = -std::numeric_limits<double>::infinity();
    // log-spaced offsets 1e-3 .. 1e3 on both sides of a
    std::vector<double> offs;
    for (int i = 0; i <= 120; ++i) offs.push_back(std::pow(10.0, -3.0 + 6.0 * i / 120.0));
    for (auto it = offs.rbegin(); it != offs.rend(); ++it) {
        const double x = a - *it;
        const double d = deriv(x);
        if (!(d <= 1e-12)) throw error(errc::invalid_spec, "f~ must be decreasing left of the turning point");
        if (d < prev - 1e-9 * (1.0 + std::abs(prev))) {
            throw error(errc::invalid_spec, "f~ must be convex left of the turning point");
        }
        prev = d;
    }
    for (double o : offs) {
        const double x = a + o;
        const double d = deriv(x);
        if (!(d >= -1e-12)) throw error(errc::invalid_spec, "f~ must be increasing right of the turning point");
        if (x >= pc.x0 && d < pc.c0 * (1.0 - 1e-12)) {
            throw error(errc::invalid_spec, "f~' falls below the declared c0 beyond x0");
        }
    }
}

/// h = f, f~, f' or f~' as an integrand.
inline integrand cost_integrand(const cost_spec& spec, transform_of which) {
    const double cq = spec.C * spec.q;
    if (spec.is_quadratic()) {
        switch (which) {
            case transform_of::f: return integrand::polynomial({0.0, 0.0, 1.0});
            case transform_of::f_tilde: return integrand::polynomial({0.0, cq, 1.0});
            case transform_of::f_prime: return integrand::polynomial({0.0, 2.0});
            case transform_of::f_tilde_prime: return integrand::polynomial({cq, 2.0});
        }
    }
    const auto& pc = std::get<piecewise_c1_cost>(spec.f);
    const int deg = pc.growth_degree;
    switch (which) {
        case transform_of::f: return integrand::callable(pc.f, pc.kinks, deg);
        case transform_of::f_tilde:
            return integrand::callable([f = pc.f, cq](double x) { return f(x) + cq * x; }, pc.kinks,
                                       std::max(deg, 1));
        case transform_of::f_prime: return integrand::callable(pc.df, pc.kinks, std::max(deg - 1, 0));
        case transform_of::f_tilde_prime:
            return integrand::callable([df = pc.df, cq](double x) { return df(x) + cq; }, pc.kinks,
                                       std::max(deg - 1, 0));
    }
    throw error(errc::domain, "unknown transform");
}

namespace detail {

/// Psi(.; p) for a polynomial p: sum_k p^{(k)}(y) / Phi^{k+1}, again a polynomial.
inline polynomial psi_polynomial(const polynomial& p, double phi) {
    polynomial out;
    polynomial d = p;
    double pw = 1.0 / phi;
    for (std::size_t k = 0; k < p.c.size(); ++k) {
        out = out + scaled(d, pw);
        d = d.derivative();
        pw /= phi;
    }
    return out;
}

/// Truncation point Y for int_Y^inf e^{-phi y} |y + s|^deg dy to be negligible.
inline double exp_tail_cut(double phi, double s, int deg) {
    double y = 40.0 / phi;
    for (int i = 0; i < 6; ++i) y = (40.0 + deg * std::log(1.0 + std::abs(s) + y)) / phi;
    return y;
}

/// Panel points on [0, len] with geometric refinement towards 0 and interior kinks.
inline std::vector<double> kernel_panels(double len, std::span<const double> interior) {
    std::vector<double> pts{0.0};
    for (double p = 1e-8 * len; p < len; p *= 10.0) pts.push_back(p);
    for (double k : interior) {
        if (k > 0.0 && k < len) pts.push_back(k);
    }
    pts.push_back(len);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

}  // namespace detail

/// Psi(s; h) = int_0^inf e^{-Phi y} h(y + s) dy.
inline double psi_transform(const integrand& h, double phi, double s) {
    if (!(phi > 0.0)) throw error(errc::domain, "psi_transform requires Phi > 0");
    if (h.poly) return detail::psi_polynomial(*h.poly, phi)(s);
    const double cut = detail::exp_tail_cut(phi, s, h.growth_degree);
    std::vector<double> pts{0.0};
    for (double k : h.kinks) {
        if (k - s > 0.0 && k - s < cut) pts.push_back(k - s);
    }
    const double step = 2.0 / phi;
    for (double p = step; p < cut; p += step) pts.push_back(p);
    pts.push_back(cut);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return detail::integrate_panels([&](double y) { return std::exp(-phi * y) * h(y + s); }, pts, 1e-14);
}

inline double psi_transform(const cost_spec& spec, double phi, double s, transform_of which) {
    return psi_transform(cost_integrand(spec, which), phi, s);
}

/// Psi(.; h) for repeated evaluation. Polynomials use the closed form; otherwise exact
/// transforms are cached on a grid of nodes and
///   Psi(y) = int_y^node e^{-Phi (t - y)} h(t) dt + e^{-Phi (node - y)} Psi(node)
/// with node the next grid point above y.
class psi_evaluator {
public:
    psi_evaluator(integrand h, double phi)
        : h_(std::move(h)), phi_(phi), step_(std::min(0.25, 1.0 / phi)),
          cache_(std::make_shared<node_cache>()) {
        if (!(phi > 0.0)) throw error(errc::domain, "psi_evaluator requires Phi > 0");
        if (h_.poly) poly_ = detail::psi_polynomial(*h_.poly, phi);
    }

    double operator()(double y) const {
        if (poly_) return (*poly_)(y);
        const double idx = std::ceil(y / step_);
        if (!(std::abs(idx) < 1e12)) return psi_transform(h_, phi_, y);
        const auto n = static_cast<long long>(idx);
        const double node = static_cast<double>(n) * step_;
        const double at_node = node_value(n, node);
        if (!(node > y)) return at_node;
        std::vector<double> extra(h_.kinks.begin(), h_.kinks.end());
        const auto pts = detail::breakpoints(y, node, extra);
        const double local = detail::integrate_panels(
            [&](double t) { return std::exp(-phi_ * (t - y)) * h_(t); }, pts, 1e-14);
        return local + std::exp(-phi_ * (node - y)) * at_node;
    }

    bool is_polynomial() const noexcept { return poly_.has_value(); }
    const std::optional<detail::polynomial>& polynomial() const noexcept { return poly_; }

private:
    struct node_cache {
        std::mutex mutex;
        std::unordered_map<long long, double> values;
    };

    double node_value(long long n, double node) const {
        {
            std::lock_guard lock(cache_->mutex);
            if (auto it = cache_->values.find(n); it != cache_->values.end()) return it->second;
        }
        const double v = psi_transform(h_, phi_, node);
        std::lock_guard lock(cache_->mutex);
        cache_->values.emplace(n, v);
        return v;
    }

    integrand h_;
    double phi_;
    double step_;
    std::optional<detail::polynomial> poly_;
    std::shared_ptr<node_cache> cache_;
};

/// kappa^{(n)}(t, t'; zeta) = int_t^{t'} e^{zeta y} y^n dy.
inline double kappa(int n, double t, double t_prime, double zeta) {
    if (n < 0 || n > 3) throw error(errc::domain, "kappa order must be in {0,1,2,3}");
    if (!(t_prime > t)) throw error(errc::domain, "kappa requires t' > t");
    // e^{zeta t} int_0^L e^{zeta u} (t + u)^n du
    const auto j = detail::exp_moments<4>(zeta, t_prime - t);
    double acc = 0.0;
    double binom = 1.0;
    for (int m = 0; m <= n; ++m) {
        acc += binom * std::pow(t, n - m) * j[static_cast<std::size_t>(m)];
        binom = binom * (n - m) / (m + 1);
    }
    return std::exp(zeta * t) * acc;
}

/// phi_s(x; h) = int_s^x W(x - y) h(y) dy.
inline double phi_convolution(const scale_kernel& k, const integrand& h, double s, double x) {
    const double len = x - s;
    if (!(len > 0.0)) return 0.0;
    if (h.poly && h.poly->degree() <= 3) {
        const auto a = h.poly->reflected_taylor(x);
        const auto grow = detail::exp_moments<4>(k.phi_q, len);
        detail::compensated_sum total;
        for (std::size_t m = 0; m < a.size(); ++m) total.add(a[m] * k.c0 * grow[m]);
        for (std::size_t i = 0; i < k.rates.size(); ++i) {
            const auto j = detail::exp_moments<4>(-k.rates[i], len);
            double t = 0.0;
            for (std::size_t m = 0; m < a.size(); ++m) t += a[m] * j[m];
            total.add(-k.weights[i] * t);
        }
        return total.value();
    }
    std::vector<double> inner;
    for (double kk : h.kinks) inner.push_back(x - kk);
    const double step = std::max(2.0 / k.phi_q, len / 64.0);
    for (double p = 1.0; p < len; p += step) inner.push_back(p);
    const auto pts = detail::kernel_panels(len, inner);
    return detail::integrate_panels(
        [&](double u) { return eval_kernel(k, kernel_kind::W, u) * h(x - u); }, pts, 1e-13);
}

/// sum_k b_k int_s^x e^{-r_k (x - y)} h(y) dy, so that
/// phi_s(x; h) = c0 int_s^x e^{Phi (x - y)} h(y) dy - decaying_convolution(k, h, s, x).
inline double decaying_convolution(const scale_kernel& k, const integrand& h, double s, double x) {
    const double len = x - s;
    if (!(len > 0.0)) return 0.0;
    if (h.poly && h.poly->degree() <= 3) {
        const auto a = h.poly->reflected_taylor(x);
        detail::compensated_sum total;
        for (std::size_t i = 0; i < k.rates.size(); ++i) {
            const auto j = detail::exp_moments<4>(-k.rates[i], len);
            double t = 0.0;
            for (std::size_t m = 0; m < a.size(); ++m) t += a[m] * j[m];
            total.add(k.weights[i] * t);
        }
        return total.value();
    }
    std::vector<double> inner;
    for (double kk : h.kinks) inner.push_back(x - kk);
    const double step = std::max(2.0 / k.phi_q, len / 64.0);
    for (double p = 1.0; p < len; p += step) inner.push_back(p);
    const auto pts = detail::kernel_panels(len, inner);
    auto decay = [&](double u) {
        return detail::sum_terms(k, [u](double r, double b) { return b * std::exp(-r * u); });
    };
    return detail::integrate_panels([&](double u) { return decay(u) * h(x - u); }, pts, 1e-13);
}

inline double phi_convolution(const scale_kernel& k, const cost_spec& spec, double s, double x,
                              transform_of which) {
    return phi_convolution(k, cost_integrand(spec, which), s, x);
}

/// The unique a0 with Psi(a0; f~') = 0.
inline double a0_root(const cost_spec& spec, double phi) {
    if (!(phi > 0.0)) throw error(errc::domain, "a0_root requires Phi > 0");
    if (spec.is_quadratic()) return -0.5 * spec.C * spec.q - 1.0 / phi;
    const auto h = cost_integrand(spec, transform_of::f_tilde_prime);
    auto g = [&](double y) { return psi_transform(h, phi, y); };
    const double a = spec.turning_point();
    double hi = a;
    if (!(g(hi) > 0.0)) throw error(errc::bracket, "Psi(a; f~') is not positive");
    double width = 1.0;
    double lo = a - width;
    int expansions = 0;
    while (!(g(lo) < 0.0)) {
        hi = lo;
        width *= 2.0;
        lo = a - width;
        if (++expansions > 60) throw error(errc::bracket, "Psi(.; f~') has no sign change left of a");
    }
    boost::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(
        g, lo, hi, [](double u, double v) { return std::abs(u - v) <= 1e-14 * (1.0 + std::abs(u)); },
        iters);
    return 0.5 * (r.first + r.second);
}

}  // namespace ssinv

#endif  // SSINV_COST_MODEL_HPP
