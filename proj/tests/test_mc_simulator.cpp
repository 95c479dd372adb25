#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace ssinv;
using namespace ssinv::test;

namespace {

sim_config config(int n_paths, std::uint64_t seed = 11) {
    sim_config c;
    c.n_paths = n_paths;
    c.seed = seed;
    c.workers = 1;
    return c;
}

struct sample_stats {
    double mean;
    double se;
};

sample_stats stats_of(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / (n - 1) / n)};
}

::testing::AssertionResult within_3se(const cost_estimate& e, double analytic) {
    const double z = (e.mean - analytic) / e.std_error;
    if (std::abs(e.mean - analytic) <= 3.0 * e.std_error) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << "estimate " << e.mean << " se " << e.std_error << " analytic "
                                         << analytic << " z " << z;
}

const scale_kernel& kernel02() {
    static const scale_kernel k = build_kernel(beta_model(0.2), q_canon);
    return k;
}

}  // namespace

TEST(Increments, BrownianMeanAndSpread) {
    const levy_simulator sim(brownian(0.5, 1.0), config(2));
    EXPECT_EQ(sim.jump_rate(), 0.0);
    const auto xs = sim.sample_increments(1.0, 100000, 3);
    const auto st = stats_of(xs);
    EXPECT_NEAR(st.mean, 0.5, 3 * st.se);
    EXPECT_NEAR(st.se * std::sqrt(100000.0), 1.0, 0.01);
}

TEST(Increments, MeanMatchesMeanMu) {
    for (double sigma : {0.0, 0.2}) {
        const auto m = beta_model(sigma);
        const levy_simulator sim(m, config(2));
        const auto st = stats_of(sim.sample_increments(1.0, 100000, 5));
        EXPECT_NEAR(st.mean, mean_mu(m), 3 * st.se) << sigma;
    }
}

TEST(Increments, LogMgfMatchesLaplaceExponent) {
    const auto m = beta_model(0.2);
    const levy_simulator sim(m, config(2));
    const auto xs = sim.sample_increments(1.0, 200000, 9);
    for (double z : {0.5, 1.0, 2.0}) {
        std::vector<double> e(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) e[i] = std::exp(z * xs[i]);
        const auto st = stats_of(e);
        // delta method for the log of the sample mean
        const double se_log = st.se / st.mean;
        EXPECT_NEAR(std::log(st.mean), laplace_exponent(m, z), 3 * se_log) << z;
    }
}

TEST(Increments, SmallJumpVarianceInGaussianPart) {
    const auto p = beta_params(0.2);
    const levy_simulator sim(levy_model(p), config(2));
    auto nu = [&](double x) {
        return x < 1e-150 ? 0.0 : p.varpi * std::exp(-p.alpha * p.beta * x) * std::pow(-std::expm1(-p.beta * x), -p.lambda);
    };
    boost::math::quadrature::tanh_sinh<double> ts;
    boost::math::quadrature::exp_sinh<double> es;
    const double small = ts.integrate([&](double x) { return x * x * nu(x); }, 0.0, 1e-3, 1e-14);
    EXPECT_NEAR(sim.gauss_sd() * sim.gauss_sd(), 0.04 + small, 1e-12);
    const double rate = ts.integrate(nu, 1e-3, 1.0, 1e-14) + es.integrate(nu, 1.0, INFINITY, 1e-14);
    EXPECT_NEAR(sim.jump_rate(), rate, 1e-9 * rate);
}

TEST(Determinism, SameSeedIdenticalAcrossWorkerCounts) {
    const auto m = beta_model(0.2);
    auto run = [&](int workers, std::uint64_t seed) {
        auto c = config(256, seed);
        c.workers = workers;
        const levy_simulator sim(m, c);
        return estimate_exit_functional(sim, q_canon, exit_functional::overshoot, 1.0, 0.0);
    };
    const auto a = run(1, 4);
    const auto b = run(1, 4);
    const auto c = run(3, 4);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std_error, b.std_error);
    EXPECT_EQ(a.mean, c.mean);
    EXPECT_EQ(a.std_error, c.std_error);
    EXPECT_EQ(a.horizon, c.horizon);
    EXPECT_NE(a.mean, run(1, 5).mean);
    const levy_simulator sim(m, config(2));
    EXPECT_EQ(sim.sample_increments(1.0, 10, 1), sim.sample_increments(1.0, 10, 1));
}

TEST(TrivialCases, ExitUpAtBarrierIsOne) {
    const levy_simulator sim(beta_model(0.2), config(64));
    const auto e = estimate_exit_functional(sim, q_canon, exit_functional::exit_up, 2.0, 2.0);
    EXPECT_EQ(e.mean, 1.0);
    EXPECT_EQ(e.std_error, 0.0);
    EXPECT_THROW((void)estimate_exit_functional(sim, q_canon, exit_functional::exit_up, 3.0, 2.0), error);
}

TEST(TrivialCases, OvershootBelowLevelIsX) {
    const levy_simulator sim(beta_model(0.2), config(64));
    for (double x : {-1.0, 0.0}) {
        const auto e = estimate_exit_functional(sim, q_canon, exit_functional::overshoot, x, 0.0);
        EXPECT_EQ(e.mean, x);
        EXPECT_EQ(e.std_error, 0.0);
    }
    const auto r = estimate_exit_functional(sim, q_canon, exit_functional::ruin_lt, -0.5, 0.0);
    EXPECT_EQ(r.mean, 1.0);
}

TEST(TrivialCases, UnitRunningCostIsTotalDiscountedTime) {
    const auto one = integrand::constant(1.0);
    const levy_simulator sim(beta_model(0.2), config(64));
    for (auto [s, x] : {std::pair{0.0, 1.0}, std::pair{-2.0, -2.0}}) {
        const auto e = estimate_reflected_cost(sim, q_canon, &one, 0.0, s, x);
        // trapezoidal discounting: relative error (q dt)^2 / 12
        EXPECT_NEAR(e.mean, -std::expm1(-q_canon * e.horizon) / q_canon, 1e-10 * 1.0 / q_canon);
        EXPECT_LE(1.0 / q_canon - e.mean, e.horizon_bias_bound);
    }
}

TEST(TrivialCases, ReflectionInactiveFarAboveBarrier) {
    auto c = config(64);
    c.horizon = 1.0;
    const levy_simulator sim(beta_model(0.2), c);
    EXPECT_EQ(estimate_reflected_cost(sim, q_canon, nullptr, 10.0, 0.0, 20.0).mean, 0.0);
    const cost_spec spec(10.0, 0.0, q_canon);
    const auto f = cost_integrand(spec, transform_of::f);
    const auto barrier = estimate_barrier_cost(sim, spec, 0.0, 20.0);
    const auto killed = estimate_killed_cost(sim, q_canon, f, 20.0, 0.0);
    EXPECT_LT(std::abs(barrier.mean - killed.mean), 3 * std::hypot(barrier.std_error, killed.std_error));
}

TEST(TrivialCases, OrderingCostsOnly) {
    // f = 0, C = 0: K E[sum e^{-q T_i}] = K L(x - s) / (1 - L(S - s)), L the ruin transform
    const auto zero = integrand::constant(0.0);
    const levy_simulator sim(beta_model(0.2), config(500));
    const double s = -1.0;
    const double S = 0.0;
    const double x = 0.5;
    const auto e = estimate_ss_cost(sim, q_canon, zero, 0.0, 10.0, s, S, x);
    EXPECT_GE(e.mean, 0.0);
    const double analytic = 10.0 * ruin_lt(kernel02(), x - s) / (1.0 - ruin_lt(kernel02(), S - s));
    EXPECT_TRUE(within_3se(e, analytic));
}

TEST(Validation, RejectsBadSettings) {
    auto c = config(64);
    c.time_step = 0.0;
    EXPECT_THROW(levy_simulator(beta_model(0.2), c), error);
    c = config(1);
    EXPECT_THROW(levy_simulator(beta_model(0.2), c), error);
    const levy_simulator sim(beta_model(0.2), config(64));
    EXPECT_THROW((void)estimate_ss_cost(sim, cost_spec(10, 10, q_canon), 0.0, 0.0, 0.0), error);
    EXPECT_THROW((void)estimate_barrier_cost(sim, cost_spec(10, 10, q_canon), 0.0, 0.0), error);
}

TEST(ExitFunctionals, RuinAndOvershootAtThreeStartingPoints) {
    const levy_simulator sim(beta_model(0.2), config(1000));
    for (double x : {0.3, 1.0, 2.0}) {
        EXPECT_TRUE(within_3se(estimate_exit_functional(sim, q_canon, exit_functional::ruin_lt, x, 0.0),
                               ruin_lt(kernel02(), x)))
            << x;
        EXPECT_TRUE(within_3se(estimate_exit_functional(sim, q_canon, exit_functional::overshoot, x, 0.0),
                               overshoot_expectation(kernel02(), x, 0.0)))
            << x;
    }
}

TEST(ExitFunctionals, TwoSidedExitAtThreeStartingPoints) {
    const levy_simulator sim(beta_model(0.2), config(1000));
    const auto& k = kernel02();
    const double b = 2.0;
    for (double x : {0.5, 1.0, 1.5}) {
        const double analytic = eval_kernel(k, kernel_kind::W, x) / eval_kernel(k, kernel_kind::W, b);
        EXPECT_TRUE(within_3se(estimate_exit_functional(sim, q_canon, exit_functional::exit_up, x, b), analytic))
            << x;
    }
}

TEST(ExitFunctionals, KilledAndReflectedCostsAtThreeStartingPoints) {
    const levy_simulator sim(beta_model(0.2), config(500));
    const auto& k = kernel02();
    const cost_spec spec(10.0, 0.0, q_canon);
    const auto f = cost_integrand(spec, transform_of::f);
    for (double x : {-0.5, 0.0, 1.0}) {
        EXPECT_TRUE(within_3se(estimate_killed_cost(sim, q_canon, f, x, -1.0), resolvent_cost(k, x, -1.0, f))) << x;
        EXPECT_TRUE(within_3se(estimate_reflected_cost(sim, q_canon, nullptr, 1.0, -1.0, x),
                               reflected_local_time_lt(k, x, -1.0)))
            << x;
        EXPECT_TRUE(within_3se(estimate_reflected_cost(sim, q_canon, &f, 0.0, -1.0, x),
                               reflected_running_cost(k, x, -1.0, f)))
            << x;
    }
}

TEST(ValueFunctions, SsPolicyAtThreeStartingPoints) {
    const auto& k = kernel02();
    const cost_spec spec(10.0, 10.0, q_canon);
    const auto sol = solve(k, spec);
    const levy_simulator sim(beta_model(0.2), config(500));
    for (double x : {sol.s_star - 0.5, 0.0, sol.S_star + 1.0}) {
        EXPECT_TRUE(within_3se(estimate_ss_cost(sim, spec, sol.s_star, sol.S_star, x), value_function(sol, x))) << x;
    }
    // perturbed policy is no better than the optimum
    const auto e = estimate_ss_cost(sim, spec, sol.s_star + 0.5, sol.S_star, 0.0);
    EXPECT_GE(e.mean, value_function(sol, 0.0) - 3 * e.std_error);
    EXPECT_GT(expected_cost_ss(k, spec, sol.s_star + 0.5, sol.S_star, 0.0), value_function(sol, 0.0));
}

TEST(ValueFunctions, BarrierPolicyAtThreeStartingPoints) {
    const auto& k = kernel02();
    const cost_spec spec(10.0, 0.0, q_canon);
    const auto sol = solve(k, spec);
    const levy_simulator sim(beta_model(0.2), config(500));
    for (double x : {sol.a0 - 0.5, 0.0, 1.0}) {
        EXPECT_TRUE(within_3se(estimate_barrier_cost(sim, spec, sol.a0, x), barrier_value(k, spec, x))) << x;
    }
}

TEST(Antithetic, MeanUnchangedWithinError) {
    auto on = config(1000);
    auto off = config(1000);
    off.antithetic = false;
    const auto m = beta_model(0.2);
    const auto a = estimate_exit_functional(levy_simulator(m, on), q_canon, exit_functional::ruin_lt, 1.0, 0.0);
    const auto b = estimate_exit_functional(levy_simulator(m, off), q_canon, exit_functional::ruin_lt, 1.0, 0.0);
    EXPECT_LT(std::abs(a.mean - b.mean), 3 * std::hypot(a.std_error, b.std_error));
    EXPECT_EQ(a.n_paths, b.n_paths);
}

TEST(Refinement, HalvingStepAndCutoff) {
    // independent streams: the difference has spread sqrt(2) SE, so it is held to 3 combined SE
    const auto m = beta_model(0.2);
    auto coarse = config(1000);
    auto fine = config(1000, 12);
    fine.time_step = 0.5 * coarse.time_step;
    fine.jump_cutoff_eps = 0.5 * coarse.jump_cutoff_eps;
    const auto a = estimate_exit_functional(levy_simulator(m, coarse), q_canon, exit_functional::overshoot, 1.0, 0.0);
    const auto b = estimate_exit_functional(levy_simulator(m, fine), q_canon, exit_functional::overshoot, 1.0, 0.0);
    EXPECT_LT(std::abs(a.mean - b.mean), 3 * std::hypot(a.std_error, b.std_error));
    const double analytic = overshoot_expectation(kernel02(), 1.0, 0.0);
    EXPECT_TRUE(within_3se(a, analytic));
    EXPECT_TRUE(within_3se(b, analytic));
}

TEST(Estimates, ReportHorizonAndBias) {
    const levy_simulator sim(beta_model(0.2), config(200));
    const auto e = estimate_exit_functional(sim, q_canon, exit_functional::ruin_lt, 1.0, 0.0);
    EXPECT_EQ(e.n_paths, 200);
    EXPECT_GT(e.horizon, 0.0);
    EXPECT_GT(e.horizon_bias_bound, 0.0);
    EXPECT_LE(e.horizon_bias_bound, 0.1 * e.std_error * 1.5);
}
