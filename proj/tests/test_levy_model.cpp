#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace ssinv;
using namespace ssinv::test;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace

TEST(LaplaceExponent, BrownianClosedForm) {
    const auto m = brownian(0.0, std::sqrt(2.0));
    EXPECT_NEAR(laplace_exponent(m, 2.0), 4.0, 1e-14);
    EXPECT_NEAR(laplace_exponent(m, 2.0, 1), 4.0, 1e-14);
    EXPECT_NEAR(laplace_exponent(m, 2.0, 2), 2.0, 1e-14);
}

TEST(LaplaceExponent, ZeroAtOriginExactly) {
    for (double sigma : {0.0, 0.2}) {
        EXPECT_EQ(laplace_exponent(beta_model(sigma), 0.0), 0.0);
    }
    EXPECT_EQ(laplace_exponent(beta_model(0.2, 2.5), 0.0), 0.0);
    EXPECT_EQ(laplace_exponent(brownian(0.3, 1.0), 0.0), 0.0);
}

TEST(LaplaceExponent, MatchesTgammaBetaExpression) {
    for (double lambda : {0.5, 1.5, 2.5}) {
        for (double sigma : {0.0, 0.2}) {
            const auto p = beta_params(sigma, lambda);
            if (sigma == 0.0 && lambda > 2.0) continue;
            const levy_model m(p);
            for (double z : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
                EXPECT_LT(rel(laplace_exponent(m, z), psi_tgamma(p, z)), 1e-12) << lambda << " " << z;
            }
        }
    }
}

TEST(LaplaceExponent, RejectsNegativeArgument) {
    try {
        (void)laplace_exponent(beta_model(0.2), -0.1);
        FAIL() << "expected domain error";
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::domain);
    }
}

// psi(z) - sigma^2 z^2 / 2 - int (e^{-zx} - 1 + zx) nu(dx) must be exactly mu z.
TEST(LevyDensity, ReconstructsCompensatedJumpPart) {
    for (double lambda : {0.5, 1.5, 2.5}) {
        const auto p = beta_params(0.2, lambda);
        const levy_model m(p);
        const double mu = mean_mu(m);
        for (double z : {0.1, 0.3, 1.0, 3.0, 10.0}) {
            const double jump = integrate_density(p, [z](double x) { return em1py(z * x); });
            const double reconstructed = mu * z + 0.5 * p.sigma * p.sigma * z * z + jump;
            EXPECT_LT(rel(reconstructed, laplace_exponent(m, z)), 1e-6) << lambda << " " << z;
        }
    }
}

// For lambda < 2, delta_hat is the natural drift: psi(z) = delta_hat z + int (e^{-zx} - 1) nu(dx).
TEST(LevyDensity, NaturalDriftBoundedVariation) {
    for (double lambda : {0.5, 1.5}) {
        const auto p = beta_params(0.0, lambda);
        const levy_model m(p);
        for (double z : {0.1, 1.0, 10.0}) {
            const double jump = integrate_density(p, [z](double x) { return std::expm1(-z * x); });
            EXPECT_LT(std::abs(laplace_exponent(m, z) - p.delta_hat * z - jump), 1e-8 * (1.0 + std::abs(jump)));
        }
    }
}

TEST(LevyDensity, TailDecayRate) {
    const auto p = beta_params(0.0);
    const auto m = levy_model(p);
    const double slope = (std::log(levy_density(m, 40.0)) - std::log(levy_density(m, 30.0))) / 10.0;
    EXPECT_NEAR(slope, -p.alpha * p.beta, 1e-9);
}

TEST(LevyDensity, BrownianAndDomain) {
    EXPECT_EQ(levy_density(brownian(0.1, 1.0), 1.0), 0.0);
    EXPECT_GT(levy_density(beta_model(0.2), 1.0), 0.0);
    EXPECT_THROW((void)levy_density(beta_model(0.2), 0.0), error);
    EXPECT_THROW((void)levy_density(beta_model(0.2), -1.0), error);
}

TEST(LaplaceExponent, DerivativesMatchFiniteDifferences) {
    for (double sigma : {0.0, 0.2}) {
        const auto m = beta_model(sigma);
        for (double z : {0.2, 0.5, 1.0, 2.0, 4.0, 8.0}) {
            const double h = 1e-3 * z;
            auto psi = [&](double u) { return laplace_exponent(m, u); };
            auto d1 = [&](double e) { return (psi(z + e) - psi(z - e)) / (2 * e); };
            auto d2 = [&](double e) { return (psi(z + e) - 2 * psi(z) + psi(z - e)) / (e * e); };
            const double fd1 = (4 * d1(h / 2) - d1(h)) / 3;
            const double fd2 = (4 * d2(h / 2) - d2(h)) / 3;
            EXPECT_LT(rel(laplace_exponent(m, z, 1), fd1), 1e-6) << z;
            EXPECT_LT(rel(laplace_exponent(m, z, 2), fd2), 1e-6) << z;
        }
    }
}

TEST(LaplaceExponent, ConvexOnGrid) {
    for (double sigma : {0.0, 0.2}) {
        const auto m = beta_model(sigma);
        for (double z = 0.01; z < 20.0; z *= 1.3) {
            EXPECT_GT(laplace_exponent(m, z, 2), 0.0);
            const double h = 0.5 * z;
            EXPECT_GT(laplace_exponent(m, z + h) - 2 * laplace_exponent(m, z) + laplace_exponent(m, z - h), 0.0);
        }
    }
}

TEST(MeanMu, Brownian) { EXPECT_DOUBLE_EQ(mean_mu(brownian(0.5, 1.0)), 0.5); }

TEST(MeanMu, RichardsonDifferenceOracle) {
    for (double lambda : {0.5, 1.5, 2.5}) {
        for (double sigma : {0.0, 0.2}) {
            if (sigma == 0.0 && lambda > 2.0) continue;
            const auto m = beta_model(sigma, lambda);
            auto psi = [&](double z) { return laplace_exponent_continued(m, z); };
            auto d = [&](double h) { return (psi(h) - psi(-h)) / (2 * h); };
            double h = 1e-4;
            const double r1 = (4 * d(h / 2) - d(h)) / 3;
            const double r2 = (4 * d(h / 4) - d(h / 2)) / 3;
            const double fd = (16 * r2 - r1) / 15;
            EXPECT_LT(std::abs(mean_mu(m) - fd), 1e-9) << lambda << " " << sigma;
        }
    }
    EXPECT_NEAR(mean_mu(beta_model(0.0)), -0.017134770, 1e-8);
}

TEST(PhiQ, BrownianRoots) {
    const auto m = brownian(0.0, std::sqrt(2.0));
    EXPECT_NEAR(phi_q(m, 0.04), 0.2, 1e-13);
    EXPECT_NEAR(phi_q(m, 1.0), 1.0, 1e-13);
}

TEST(PhiQ, ResidualAcrossRates) {
    for (double sigma : {0.0, 0.2}) {
        const auto m = beta_model(sigma);
        for (double q : {0.01, 0.03, 0.1, 1.0}) {
            const double phi = phi_q(m, q);
            EXPECT_GT(phi, 0.0);
            EXPECT_LT(std::abs(laplace_exponent(m, phi) - q), 1e-10);
            EXPECT_LT(std::abs(psi_tgamma(beta_params(sigma), phi) - q), 1e-10);
        }
    }
}

TEST(PhiQ, BisectionOracle) {
    for (double sigma : {0.0, 0.2}) {
        const auto p = beta_params(sigma);
        double lo = 1e-6;
        double hi = 50.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (psi_tgamma(p, mid) < q_canon ? lo : hi) = mid;
        }
        EXPECT_LT(rel(phi_q(levy_model(p), q_canon), 0.5 * (lo + hi)), 1e-12);
    }
    EXPECT_NEAR(phi_q(beta_model(0.0), q_canon), 3.387928051, 1e-8);
    EXPECT_NEAR(phi_q(beta_model(0.2), q_canon), 1.327077204, 1e-8);
}

TEST(VariationClass, Classification) {
    EXPECT_FALSE(variation_class(brownian(0.1, 1.0)).bounded());
    const auto b = variation_class(beta_model(0.0));
    ASSERT_TRUE(b.bounded());
    EXPECT_DOUBLE_EQ(b.delta, 0.1);
    EXPECT_FALSE(variation_class(beta_model(0.2)).bounded());
    EXPECT_FALSE(variation_class(beta_model(0.0, 2.5)).bounded());
    EXPECT_TRUE(variation_class(beta_model(0.0, 0.5)).bounded());
}

TEST(LevyModel, RejectsInvalidParameters) {
    auto code_of = [](auto&& make) {
        try {
            make();
        } catch (const error& e) {
            return e.code();
        }
        return errc::config;  // sentinel: nothing thrown
    };
    auto with = [](auto mutate) {
        auto p = beta_params(0.2);
        mutate(p);
        return [p] { return levy_model(p); };
    };
    EXPECT_EQ(code_of(with([](beta_family& p) { p.alpha = 0.0; })), errc::invalid_model);
    EXPECT_EQ(code_of(with([](beta_family& p) { p.beta = -1.0; })), errc::invalid_model);
    EXPECT_EQ(code_of(with([](beta_family& p) { p.lambda = 1.0; })), errc::invalid_model);
    EXPECT_EQ(code_of(with([](beta_family& p) { p.lambda = 2.0; })), errc::invalid_model);
    EXPECT_EQ(code_of(with([](beta_family& p) { p.lambda = 3.0; })), errc::invalid_model);
    EXPECT_EQ(code_of(with([](beta_family& p) { p.varpi = -0.1; })), errc::invalid_model);
    EXPECT_EQ(code_of(with([](beta_family& p) { p.sigma = 0.0, p.delta_hat = -0.1; })), errc::invalid_model);
    EXPECT_EQ(code_of(with([](beta_family& p) { p.sigma = 0.0, p.delta_hat = 0.0; })), errc::invalid_model);
    EXPECT_EQ(code_of(with([](beta_family& p) { p.sigma = 0.0, p.varpi = 0.0; })), errc::invalid_model);
    EXPECT_EQ(code_of([] { return brownian(0.1, 0.0); }), errc::invalid_model);
    EXPECT_EQ(code_of([] { return brownian(std::numeric_limits<double>::quiet_NaN(), 1.0); }), errc::invalid_model);
}

TEST(JumpIntensity, FiniteOnlyBelowLambdaOne) {
    const auto p = beta_params(0.2, 0.5);
    const double analytic = jump_intensity(levy_model(p));
    const double quad = integrate_density(p, [](double) { return 1.0; });
    EXPECT_LT(rel(analytic, quad), 1e-8);
    EXPECT_TRUE(std::isinf(jump_intensity(beta_model(0.2, 1.5))));
    EXPECT_EQ(jump_intensity(brownian(0.1, 1.0)), 0.0);
}

TEST(RootSequence, PolesAreBetaShiftedIntegers) {
    const auto p = beta_params(0.2);
    const auto rs = make_root_sequence(levy_model(p), q_canon, 5);
    for (int j = 1; j <= 5; ++j) EXPECT_DOUBLE_EQ(rs.etas[static_cast<std::size_t>(j - 1)], 2.0 + j);
    // psi(-z) blows up approaching each pole
    for (int j = 1; j <= 5; ++j) {
        const double eta = 2.0 + j;
        EXPECT_GT(std::abs(psi_tgamma(p, -(eta - 1e-6))), 1e3);
        EXPECT_GT(std::abs(psi_tgamma(p, -(eta + 1e-6))), 1e3);
    }
}

TEST(RootSequence, InterlacingAndResidualsN50) {
    for (double sigma : {0.0, 0.2}) {
        const auto p = beta_params(sigma);
        const auto rs = make_root_sequence(levy_model(p), q_canon, 50);
        ASSERT_EQ(rs.xis.size(), 50u);
        EXPECT_GT(rs.xis[0], 0.0);
        EXPECT_LT(rs.xis[0], 3.0);
        for (std::size_t j = 0; j < rs.xis.size(); ++j) {
            EXPECT_LT(rs.xis[j], rs.etas[j]);
            if (j > 0) {
                EXPECT_GT(rs.xis[j], rs.etas[j - 1]);
            }
            EXPECT_LT(std::abs(laplace_exponent_continued(levy_model(p), -rs.xis[j]) - q_canon), 1e-10) << j;
            // independent Gamma implementation, scaled by the size of the drift terms
            const double scale = 1.0 + std::abs(p.delta_hat * rs.xis[j]) + 0.5 * sigma * sigma * rs.xis[j] * rs.xis[j];
            EXPECT_LT(std::abs(psi_tgamma(p, -rs.xis[j]) - q_canon), 1e-10 * scale) << j;
        }
        EXPECT_DOUBLE_EQ(rs.phi_q, phi_q(levy_model(p), q_canon));
    }
}

TEST(RootSequence, Errors) {
    EXPECT_THROW((void)make_root_sequence(brownian(0.1, 1.0), q_canon, 5), error);
    EXPECT_THROW((void)make_root_sequence(beta_model(0.2), 0.0, 5), error);
    EXPECT_THROW((void)make_root_sequence(beta_model(0.2), q_canon, 0), error);
}

TEST(RootSequence, LargeTruncationNearPoles) {
    const auto p = beta_params(0.2);
    const auto rs = make_root_sequence(levy_model(p), q_canon, 1500);
    for (std::size_t j = 1; j < rs.xis.size(); ++j) {
        EXPECT_GT(rs.xis[j], rs.etas[j - 1]);
        EXPECT_LT(rs.xis[j], rs.etas[j]);
    }
    // the last root hugs the previous pole; psi(-xi) - q still changes sign across one ulp
    const double xi = rs.xis.back();
    EXPECT_LT(xi - rs.etas[rs.etas.size() - 2], 1e-3);
    auto g = [&](double z) { return laplace_exponent_continued(levy_model(p), -z) - q_canon; };
    EXPECT_LE(g(std::nextafter(xi, 0.0)) * g(std::nextafter(xi, 2 * xi)), 0.0);
}
