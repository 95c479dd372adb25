#ifndef SSINV_MC_SIMULATOR_HPP
#define SSINV_MC_SIMULATOR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "ssinv/cost_model.hpp"
#include "ssinv/detail/numeric.hpp"
#include "ssinv/error.hpp"
#include "ssinv/levy_model.hpp"

namespace ssinv {

struct sim_config {
    double jump_cutoff_eps = 1e-3;
    double time_step = 1e-3;
    double horizon = 0.0;          ///< 0: chosen from the bias budget by a pilot run
    double bias_fraction = 0.1;    ///< horizon bias budget as a fraction of the target standard error
    int n_paths = 10000;
    int pilot_paths = 256;
    std::uint64_t seed = 1;
    bool antithetic = true;
    int workers = 0;               ///< 0: hardware concurrency
    int block_paths = 64;
};

struct cost_estimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n_paths = 0;
    double horizon = 0.0;
    double horizon_bias_bound = 0.0;
};

inline void validate_sim_config(const sim_config& c) {
    if (!(c.jump_cutoff_eps > 0.0) || !(c.time_step > 0.0) || !(c.horizon >= 0.0) || c.n_paths < 2 ||
        c.pilot_paths < 2 || c.block_paths < 2 || !(c.bias_fraction > 0.0)) {
        throw error(errc::invalid_spec, "invalid simulation settings");
    }
}

/// Lévy increments with jumps >= eps as compound Poisson and smaller jumps replaced by
/// their compensator plus a Gaussian of matching variance.
class levy_simulator {
public:
    levy_simulator(const levy_model& model, const sim_config& cfg) : model_(model), cfg_(cfg) {
        validate_sim_config(cfg);
        if (const auto* bm = model.as_brownian()) {
            drift_ = bm->mu_hat;
            gauss_sd_ = bm->sigma;
            return;
        }
        const auto& p = *model.as_beta();
        const double eps = cfg.jump_cutoff_eps;
        double small_var = 0.0;
        double small_mean = 0.0;
        double big_mean = 0.0;
        if (p.varpi > 0.0) {
            auto nu = [&](double x) { return levy_density(model, x); };
            boost::math::quadrature::tanh_sinh<double> ts;
            // x^k nu(x) -> 0 at the origin for the moments used here
            auto moment = [&](int k) {
                return ts.integrate(
                    [&](double x) { return x < 1e-150 ? 0.0 : std::pow(x, k) * nu(x); }, 0.0, eps);
            };
            small_var = moment(2);
            if (p.lambda < 2.0) small_mean = moment(1);
            // geometric cells from eps to where the density is negligible
            const double top = eps + 45.0 / (p.alpha * p.beta) + 10.0 / p.beta;
            std::vector<double> edges{eps};
            while (edges.back() < top) {
                const double x = edges.back();
                edges.push_back(std::min(top, x + std::min(0.02 * x, 0.05 / p.beta)));
            }
            cum_.reserve(edges.size());
            double acc = 0.0;
            detail::compensated_sum bm;
            for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
                const double a = edges[i];
                const double b = edges[i + 1];
                const double pts[] = {a, b};
                acc += detail::integrate_panels(nu, pts, 1e-12, 0);
                bm.add(detail::integrate_panels([&](double x) { return x * nu(x); }, pts, 1e-12, 0));
                cum_.push_back(acc);
                lo_.push_back(a);
                hi_.push_back(b);
                cap_.push_back(nu(a));
            }
            big_mean = bm.value();
            jump_rate_ = acc;
        }
        gauss_sd_ = std::sqrt(p.sigma * p.sigma + small_var);
        if (p.lambda < 2.0) {
            // psi(z) = delta_hat z + sigma^2 z^2/2 + int (e^{-z x} - 1) nu(dx)
            drift_ = p.delta_hat - small_mean;
        } else {
            // compensated form: mean mu plus the compensator of the retained jumps
            drift_ = mean_mu(model) + big_mean;
        }
    }

    double drift() const noexcept { return drift_; }
    double gauss_sd() const noexcept { return gauss_sd_; }
    double jump_rate() const noexcept { return jump_rate_; }
    const sim_config& config() const noexcept { return cfg_; }

    /// One jump size (a downward jump of X) from nu restricted to [eps, inf).
    template <class Rng>
    double draw_jump(Rng& rng) const {
        boost::random::uniform_01<double> u01;
        const double target = u01(rng) * jump_rate_;
        auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
        const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - cum_.begin()), cum_.size() - 1);
        // nu is decreasing: rejection against its value at the left edge of the cell
        for (;;) {
            const double x = lo_[i] + (hi_[i] - lo_[i]) * u01(rng);
            if (u01(rng) * cap_[i] <= levy_density(model_, x)) return x;
        }
    }

    /// X_T - X_0 for `n` independent paths.
    std::vector<double> sample_increments(double T, int n, std::uint64_t seed) const {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
        std::mt19937_64 rng(seq);
        boost::random::normal_distribution<double> nd;
        boost::random::exponential_distribution<double> ed;
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            double x = drift_ * T + gauss_sd_ * std::sqrt(T) * nd(rng);
            if (jump_rate_ > 0.0) {
                double t = ed(rng) / jump_rate_;
                while (t < T) {
                    x -= draw_jump(rng);
                    t += ed(rng) / jump_rate_;
                }
            }
            out.push_back(x);
        }
        return out;
    }

private:
    levy_model model_;
    sim_config cfg_;
    double drift_ = 0.0;
    double gauss_sd_ = 0.0;
    double jump_rate_ = 0.0;
    std::vector<double> cum_;
    std::vector<double> lo_;
    std::vector<double> hi_;
    std::vector<double> cap_;
};

enum class exit_functional { ruin_lt, exit_up, overshoot };

namespace detail {

enum class path_mode { kill_below, kill_outside, reorder, reflect };
enum class payoff_kind { running, discount, discount_level, exit_up };

struct path_task {
    path_mode mode = path_mode::kill_below;
    payoff_kind payoff = payoff_kind::running;
    double q = 0.0;
    double x = 0.0;
    double lower = 0.0;   ///< s (or 0 for the two-sided exit)
    double upper = 0.0;   ///< b for the two-sided exit, S for reordering
    double C = 0.0;
    double K = 0.0;
    const integrand* h = nullptr;  ///< running cost; null for none
};

struct path_result {
    double value = 0.0;
    double late_cost = 0.0;  ///< undiscounted cost over the second half of the horizon
    bool stopped = false;
};

inline double running(const integrand* h, double x) {
    if (h == nullptr) return 0.0;
    return (*h)(x);
}

/// Simulates `lanes` paths (1, or 2 for an antithetic pair) on a common time grid;
/// lane 1 sees the negated Gaussian increments of lane 0 and the same jumps.
template <class Rng>
std::array<path_result, 2> run_paths(const levy_simulator& sim, const path_task& task, double T, int lanes,
                                     Rng& rng) {
    boost::random::normal_distribution<double> nd;
    boost::random::exponential_distribution<double> ed;
    const double dt = sim.config().time_step;
    const double q = task.q;
    const double b = sim.drift();
    const double sd = sim.gauss_sd();
    const double lam = sim.jump_rate();
    const double e_dt = std::exp(-q * dt);
    const double sq_dt = std::sqrt(dt);
    const double half = 0.5 * T;
    const bool has_running = task.h != nullptr;

    std::array<path_result, 2> res{};
    std::array<double, 2> x{task.x, task.x};
    std::array<double, 2> fx{0.0, 0.0};
    std::array<bool, 2> alive{true, lanes > 1};
    const std::array<double, 2> sign{1.0, -1.0};
    double t = 0.0;
    double disc = 1.0;
    double next_jump = lam > 0.0 ? ed(rng) / lam : std::numeric_limits<double>::infinity();

    // applies the policy to lane i; true when the lane is finished
    auto control = [&](int i) -> bool {
        double& xi = x[static_cast<std::size_t>(i)];
        auto& r = res[static_cast<std::size_t>(i)];
        switch (task.mode) {
            case path_mode::reorder:
                if (xi <= task.lower) {
                    const double c = task.C * (task.upper - xi) + task.K;
                    r.value += disc * c;
                    if (t >= half) r.late_cost += c;
                    xi = task.upper;
                }
                return false;
            case path_mode::reflect:
                if (xi < task.lower) {
                    const double c = task.C * (task.lower - xi);
                    r.value += disc * c;
                    if (t >= half) r.late_cost += c;
                    xi = task.lower;
                }
                return false;
            case path_mode::kill_below:
                if (xi <= task.lower) {
                    if (task.payoff == payoff_kind::discount) r.value += disc;
                    if (task.payoff == payoff_kind::discount_level) r.value += disc * xi;
                    r.stopped = true;
                    return true;
                }
                return false;
            case path_mode::kill_outside:
                if (xi < task.lower) {
                    r.stopped = true;
                    return true;
                }
                if (xi >= task.upper) {
                    r.value += disc;
                    r.stopped = true;
                    return true;
                }
                return false;
        }
        return false;
    };

    for (int i = 0; i < 2; ++i) {
        if (!alive[static_cast<std::size_t>(i)]) continue;
        if (control(i)) alive[static_cast<std::size_t>(i)] = false;
        fx[static_cast<std::size_t>(i)] = running(task.h, x[static_cast<std::size_t>(i)]);
    }
    while (t < T && (alive[0] || alive[1])) {
        double h = dt;
        bool jump_now = false;
        if (next_jump - t <= h) {
            h = next_jump - t;
            jump_now = true;
        }
        if (T - t <= h) {
            h = T - t;
            jump_now = jump_now && next_jump <= T;
        }
        const bool full = h == dt;
        const double step_disc = full ? e_dt : std::exp(-q * h);
        const double dw = sd * (full ? sq_dt : std::sqrt(h)) * nd(rng);
        const double jump = jump_now ? sim.draw_jump(rng) : 0.0;
        const double disc_next = disc * step_disc;
        const bool late = t >= half;
        for (std::size_t i = 0; i < 2; ++i) {
            if (!alive[i]) continue;
            x[i] += b * h + sign[i] * dw;
            if (has_running) {
                const double fnew = running(task.h, x[i]);
                res[i].value += 0.5 * h * (disc * fx[i] + disc_next * fnew);
                if (late) res[i].late_cost += 0.5 * h * (fx[i] + fnew);
            }
        }
        t += h;
        disc = disc_next;
        if (jump_now) next_jump = t + ed(rng) / lam;
        for (int i = 0; i < 2; ++i) {
            const auto u = static_cast<std::size_t>(i);
            if (!alive[u]) continue;
            x[u] -= jump;
            if (control(i)) {
                alive[u] = false;
                continue;
            }
            if (has_running) fx[u] = running(task.h, x[u]);
        }
    }
    return res;
}

struct block_stats {
    double sum = 0.0;
    double sum_sq = 0.0;
    double late = 0.0;
    double abs_sum = 0.0;
    int samples = 0;
    int paths = 0;
};

/// Paths in blocks; block i draws from a stream seeded by (seed, i); blocks are
/// reduced in index order, so results do not depend on the worker count.
inline std::vector<block_stats> run_blocks(const levy_simulator& sim, const path_task& task, double T,
                                           int n_paths, std::uint64_t seed, std::uint64_t salt) {
    const auto& cfg = sim.config();
    const int per_block = cfg.block_paths;
    const int n_blocks = (n_paths + per_block - 1) / per_block;
    std::vector<block_stats> blocks(static_cast<std::size_t>(n_blocks));
    auto work = [&](int bi) {
        block_stats st;
        const int first = bi * per_block;
        const int count = std::min(per_block, n_paths - first);
        int done = 0;
        std::uint32_t draw = 0;
        while (done < count) {
            // every path (or antithetic pair) gets its own stream
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(bi), draw++};
            std::mt19937_64 rng(seq);
            double sample = 0.0;
            double late = 0.0;
            const int lanes = (cfg.antithetic && count - done >= 2) ? 2 : 1;
            const auto r = run_paths(sim, task, T, lanes, rng);
            if (lanes == 2) {
                sample = 0.5 * (r[0].value + r[1].value);
                late = 0.5 * (r[0].late_cost + r[1].late_cost);
                st.abs_sum += 0.5 * (std::abs(r[0].value) + std::abs(r[1].value));
            } else {
                sample = r[0].value;
                late = r[0].late_cost;
                st.abs_sum += std::abs(r[0].value);
            }
            done += lanes;
            st.paths += lanes;
            st.sum += sample;
            st.sum_sq += sample * sample;
            st.late += late;
            st.samples += 1;
        }
        blocks[static_cast<std::size_t>(bi)] = st;
    };
    int workers = cfg.workers > 0 ? cfg.workers : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, n_blocks));
    if (workers == 1) {
        for (int bi = 0; bi < n_blocks; ++bi) work(bi);
        return blocks;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int bi = w; bi < n_blocks; bi += workers) work(bi);
        });
    }
    for (auto& th : pool) th.join();
    return blocks;
}

struct reduced {
    double mean = 0.0;
    double std_error = 0.0;
    double late_rate = 0.0;
    double mean_abs = 0.0;
    int paths = 0;
};

inline reduced reduce(const std::vector<block_stats>& blocks, double T) {
    double sum = 0.0;
    double sum_sq = 0.0;
    double late = 0.0;
    double abs_sum = 0.0;
    int samples = 0;
    int paths = 0;
    for (const auto& b : blocks) {
        sum += b.sum;
        sum_sq += b.sum_sq;
        late += b.late;
        abs_sum += b.abs_sum;
        samples += b.samples;
        paths += b.paths;
    }
    reduced r;
    const double n = static_cast<double>(samples);
    r.mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * r.mean * r.mean) / (n - 1.0));
    r.std_error = std::sqrt(var / n);
    r.late_rate = late / n / (0.5 * T);
    r.mean_abs = abs_sum / n;
    r.paths = paths;
    return r;
}

/// Pilot run, horizon from the bias budget, then the main run.
inline cost_estimate estimate(const levy_simulator& sim, const path_task& task, bool bounded_payoff,
                              std::uint64_t salt) {
    const auto& cfg = sim.config();
    const double q = task.q;
    double T = cfg.horizon;
    auto bias_of = [&](double horizon, const reduced& pilot) {
        const double tail = std::exp(-q * horizon);
        if (bounded_payoff) return tail * 2.0 * std::max(1.0, pilot.mean_abs + std::abs(task.lower));
        return tail * 2.0 * pilot.late_rate / q;
    };
    const double pilot_T = T > 0.0 ? T : std::log(1e4) / q;
    const auto pilot = reduce(run_blocks(sim, task, pilot_T, cfg.pilot_paths, cfg.seed, salt ^ 0xA5A5u), pilot_T);
    if (T <= 0.0) {
        const double target_se = pilot.std_error * std::sqrt(static_cast<double>(pilot.paths) / cfg.n_paths);
        const double budget = std::max(cfg.bias_fraction * target_se, 1e-12);
        const double scale = bias_of(0.0, pilot);
        T = scale > budget ? std::log(scale / budget) / q : 1.0 / q;
    }
    const auto main = reduce(run_blocks(sim, task, T, cfg.n_paths, cfg.seed, salt), T);
    cost_estimate e;
    e.mean = main.mean;
    e.std_error = main.std_error;
    e.n_paths = main.paths;
    e.horizon = T;
    e.horizon_bias_bound = bias_of(T, main);
    return e;
}

}  // namespace detail

/// E_x[int e^{-qt} f(U_t) dt + sum e^{-q T_i}(C u_i + K)] under the (s,S) policy.
inline cost_estimate estimate_ss_cost(const levy_simulator& sim, const cost_spec& spec, double s, double S,
                                      double x) {
    if (!(S > s)) throw error(errc::domain, "estimate_ss_cost requires S > s");
    const auto f = cost_integrand(spec, transform_of::f);
    detail::path_task task{detail::path_mode::reorder, detail::payoff_kind::running, spec.q, x, s, S,
                           spec.C, spec.K, &f};
    return detail::estimate(sim, task, false, 1);
}

/// Same with a general running cost h and costs C, K.
inline cost_estimate estimate_ss_cost(const levy_simulator& sim, double q, const integrand& h, double C,
                                      double K, double s, double S, double x) {
    if (!(S > s)) throw error(errc::domain, "estimate_ss_cost requires S > s");
    detail::path_task task{detail::path_mode::reorder, detail::payoff_kind::running, q, x, s, S, C, K, &h};
    return detail::estimate(sim, task, false, 2);
}

/// E_x[int e^{-qt} f(U_t) dt + C int e^{-qt} dL_t] for the process reflected at s.
inline cost_estimate estimate_barrier_cost(const levy_simulator& sim, const cost_spec& spec, double s,
                                           double x) {
    if (spec.K != 0.0) throw error(errc::invalid_spec, "barrier estimate requires K = 0");
    const auto f = cost_integrand(spec, transform_of::f);
    detail::path_task task{detail::path_mode::reflect, detail::payoff_kind::running, spec.q, x, s, 0.0,
                           spec.C, 0.0, &f};
    return detail::estimate(sim, task, false, 3);
}

/// Reflected process with running cost h (may be null) and proportional cost C on dL.
inline cost_estimate estimate_reflected_cost(const levy_simulator& sim, double q, const integrand* h, double C,
                                             double s, double x) {
    detail::path_task task{detail::path_mode::reflect, detail::payoff_kind::running, q, x, s, 0.0, C, 0.0, h};
    return detail::estimate(sim, task, false, 4);
}

/// E_x[int_0^{tau_s^-} e^{-qt} h(X_t) dt].
inline cost_estimate estimate_killed_cost(const levy_simulator& sim, double q, const integrand& h, double x,
                                          double s) {
    detail::path_task task{detail::path_mode::kill_below, detail::payoff_kind::running, q, x, s, 0.0,
                           0.0, 0.0, &h};
    return detail::estimate(sim, task, false, 5);
}

/// ruin_lt: E_x[e^{-q tau_level^-}]; exit_up: E_x[e^{-q tau_level^+}; tau^+ < tau_0^-];
/// overshoot: E_x[e^{-q tau_level^-} X_tau].
inline cost_estimate estimate_exit_functional(const levy_simulator& sim, double q, exit_functional which,
                                              double x, double level) {
    detail::path_task task;
    task.q = q;
    task.x = x;
    switch (which) {
        case exit_functional::ruin_lt:
            task.mode = detail::path_mode::kill_below;
            task.payoff = detail::payoff_kind::discount;
            task.lower = level;
            break;
        case exit_functional::exit_up:
            if (!(level > 0.0) || x > level) throw error(errc::domain, "exit_up requires 0 < b and x <= b");
            task.mode = detail::path_mode::kill_outside;
            task.payoff = detail::payoff_kind::exit_up;
            task.lower = 0.0;
            task.upper = level;
            break;
        case exit_functional::overshoot:
            task.mode = detail::path_mode::kill_below;
            task.payoff = detail::payoff_kind::discount_level;
            task.lower = level;
            break;
    }
    return detail::estimate(sim, task, true, 6 + static_cast<std::uint64_t>(which));
}

}  // namespace ssinv

#endif  // SSINV_MC_SIMULATOR_HPP
