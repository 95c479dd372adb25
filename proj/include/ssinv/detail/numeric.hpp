#ifndef SSINV_DETAIL_NUMERIC_HPP
#define SSINV_DETAIL_NUMERIC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ssinv/error.hpp"

namespace ssinv::detail {

/// Neumaier compensated accumulator.
class compensated_sum {
public:
    void add(double v) noexcept {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Root of `f` on (lo, hi) given f(lo) < 0 < f(hi) (or the reverse, per `increasing`).
/// Bisects until the bracket is below `rel_width` of its initial size, then takes one
/// Newton step with `df` if that step stays inside the final bracket and lowers |f|.
template <class F, class DF>
double bisect_newton(F&& f, DF&& df, double lo, double hi, bool increasing,
                     double rel_width = 1e-13, int max_iter = 200) {
    const double width0 = hi - lo;
    for (int it = 0; it < max_iter && (hi - lo) > rel_width * width0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (!std::isfinite(fm)) {
            throw error(errc::root_not_found, "non-finite function value inside bracket");
        }
        if ((fm < 0.0) == increasing) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double x = 0.5 * (lo + hi);
    const double fx = f(x);
    const double d = df(x);
    if (std::isfinite(d) && d != 0.0) {
        const double xn = x - fx / d;
        if (xn > lo && xn < hi) {
            const double fn = f(xn);
            if (std::abs(fn) < std::abs(fx)) x = xn;
        }
    }
    return x;
}

/// J_m(zeta, L) = int_0^L e^{zeta u} u^m du for m = 0..M-1.
/// Series for |zeta L| < 2, upward recursion otherwise (stable for zeta < 0 and
/// for zeta L >= 2).
template <std::size_t M>
std::array<double, M> exp_moments(double zeta, double len) {
    std::array<double, M> out{};
    if (len <= 0.0) return out;
    const double z = zeta * len;
    if (std::abs(z) < 2.0) {
        for (std::size_t m = 0; m < M; ++m) {
            // L^{m+1} sum_k z^k / (k! (m+k+1))
            double term = 1.0;
            double acc = 1.0 / static_cast<double>(m + 1);
            for (int k = 1; k < 60; ++k) {
                term *= z / k;
                const double add = term / static_cast<double>(m + static_cast<std::size_t>(k) + 1);
                acc += add;
                if (std::abs(add) < 1e-17 * std::abs(acc)) break;
            }
            out[m] = acc * std::pow(len, static_cast<double>(m + 1));
        }
        return out;
    }
    const double e = std::exp(z);
    out[0] = std::expm1(z) / zeta;
    double lp = 1.0;
    for (std::size_t m = 1; m < M; ++m) {
        lp *= len;
        out[m] = (lp * e - static_cast<double>(m) * out[m - 1]) / zeta;
    }
    return out;
}

/// int_0^L u^m (1 - e^{-r u}) du for m = 0..M-1 and r > 0, without cancellation at small r L.
template <std::size_t M>
std::array<double, M> one_minus_exp_moments(double r, double len) {
    std::array<double, M> out{};
    if (len <= 0.0) return out;
    const double z = r * len;
    if (z < 2.0) {
        for (std::size_t m = 0; m < M; ++m) {
            // -L^{m+1} sum_{j>=1} (-z)^j / (j! (m+j+1))
            double term = 1.0;
            double acc = 0.0;
            for (int j = 1; j < 60; ++j) {
                term *= -z / j;
                const double add = term / static_cast<double>(m + static_cast<std::size_t>(j) + 1);
                acc += add;
                if (std::abs(add) < 1e-17 * std::abs(acc)) break;
            }
            out[m] = -acc * std::pow(len, static_cast<double>(m + 1));
        }
        return out;
    }
    const auto j = exp_moments<M>(-r, len);
    double lp = len;
    for (std::size_t m = 0; m < M; ++m) {
        out[m] = lp / static_cast<double>(m + 1) - j[m];
        lp *= len;
    }
    return out;
}

/// e^y - 1 - y.
inline double expm1_minus_x(double y) {
    if (std::abs(y) < 0.5) {
        double term = y;
        double acc = 0.0;
        for (int k = 2; k < 40; ++k) {
            term *= y / k;
            acc += term;
            if (std::abs(term) < 1e-17 * std::abs(acc)) break;
        }
        return acc;
    }
    return std::expm1(y) - y;
}

/// Dense polynomial in ascending powers.
struct polynomial {
    std::vector<double> c;

    double operator()(double x) const noexcept {
        double r = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) r = r * x + c[k];
        return r;
    }

    std::size_t degree() const noexcept { return c.empty() ? 0 : c.size() - 1; }

    polynomial derivative() const {
        polynomial d;
        for (std::size_t k = 1; k < c.size(); ++k) d.c.push_back(static_cast<double>(k) * c[k]);
        return d;
    }

    /// Coefficients a_k with p(x - u) = sum_k a_k u^k.
    std::vector<double> reflected_taylor(double x) const {
        std::vector<double> a;
        polynomial d = *this;
        double fact = 1.0;
        double sign = 1.0;
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (k > 0) {
                d = d.derivative();
                fact *= static_cast<double>(k);
                sign = -sign;
            }
            a.push_back(sign * d(x) / fact);
        }
        return a;
    }
};

inline polynomial operator+(polynomial a, const polynomial& b) {
    if (a.c.size() < b.c.size()) a.c.resize(b.c.size(), 0.0);
    for (std::size_t k = 0; k < b.c.size(); ++k) a.c[k] += b.c[k];
    return a;
}

inline polynomial scaled(polynomial a, double s) {
    for (auto& v : a.c) v *= s;
    return a;
}

/// Globally adaptive Gauss-Kronrod (31 points) over consecutive panels [pts[i], pts[i+1]]:
/// the segment with the largest error estimate is bisected until the summed error is
/// below `tol` times the L1 norm over the whole range. `max_depth` bounds the number of
/// bisections per initial panel (0 means no refinement).
template <class F>
double integrate_panels(F&& f, std::span<const double> pts, double tol = 1e-12,
                        unsigned max_depth = 15) {
    using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
    struct segment {
        double a, b, value, err, l1;
        bool operator<(const segment& o) const noexcept { return err < o.err; }
    };
    auto eval = [&](double a, double b) {
        double err = 0.0;
        double l1 = 0.0;
        // max_depth 0: one Kronrod rule; its error comes back in the [-1, 1] measure
        const double v = gk::integrate(f, a, b, 0, 0.0, &err, &l1);
        if (!std::isfinite(v)) throw error(errc::quadrature, "non-finite panel integral");
        return segment{a, b, v, err * 0.5 * (b - a), l1};
    };

    // merge sliver panels: nothing can be resolved below rounding of the endpoints
    std::vector<double> cuts;
    if (!pts.empty()) {
        const double gap = 1e-9 * std::abs(pts.back() - pts.front());
        for (double p : pts) {
            if (cuts.empty() || p - cuts.back() > gap) {
                cuts.push_back(p);
            } else if (cuts.size() > 1) {
                cuts.back() = std::max(cuts.back(), p);
            }
        }
        if (cuts.back() < pts.back()) cuts.back() = pts.back();
    }

    std::vector<segment> heap;
    double err_total = 0.0;
    double l1_total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (!(cuts[i + 1] > cuts[i])) continue;
        heap.push_back(eval(cuts[i], cuts[i + 1]));
        err_total += heap.back().err;
        l1_total += heap.back().l1;
    }
    std::make_heap(heap.begin(), heap.end());
    const std::size_t budget = heap.size() * 64 * std::size_t{max_depth};
    std::vector<segment> done;
    for (std::size_t splits = 0; splits < budget && !heap.empty(); ++splits) {
        if (err_total <= tol * l1_total) break;
        std::pop_heap(heap.begin(), heap.end());
        const segment worst = heap.back();
        heap.pop_back();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            done.push_back(worst);
            continue;
        }
        const segment left = eval(worst.a, mid);
        const segment right = eval(mid, worst.b);
        err_total += left.err + right.err - worst.err;
        l1_total += left.l1 + right.l1 - worst.l1;
        for (const auto& sgm : {left, right}) {
            heap.push_back(sgm);
            std::push_heap(heap.begin(), heap.end());
        }
    }
    compensated_sum total;
    double err = 0.0;
    double l1 = 0.0;
    for (const auto* part : {&heap, &done}) {
        for (const auto& sgm : *part) {
            total.add(sgm.value);
            err += sgm.err;
            l1 += sgm.l1;
        }
    }
    if (err > 1e-5 * l1 && err > 1e-13) {
        throw error(errc::quadrature, "Gauss-Kronrod quadrature failed to converge");
    }
    return total.value();
}

/// Sorted breakpoints of [a, b] including any interior `extra` points.
inline std::vector<double> breakpoints(double a, double b, std::span<const double> extra) {
    std::vector<double> pts{a};
    for (double k : extra) {
        if (k > a && k < b) pts.push_back(k);
    }
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

}  // namespace ssinv::detail

#endif  // SSINV_DETAIL_NUMERIC_HPP
