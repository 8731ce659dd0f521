#include <doctest.h>
#include <numbers>
#include <sfa/cols.hpp>
#include <sfa/montecarlo.hpp>
#include "oracles.hpp"

using namespace sfa;

namespace {
constexpr double pi = std::numbers::pi;

// Data with residuals of chosen sign of skew.
Dataset skewed(Index n, std::uint64_t seed, double sign)
{
    std::mt19937_64 g(seed);
    std::normal_distribution<double> N;
    const MatrixXd X = oracle::gaussian_matrix(n, 2, seed + 1);
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) y(i) = 2.0 + X(i, 0) - X(i, 1) + 0.3 * N(g) + sign * std::abs(N(g));
    return make_dataset(y, X, MatrixXd(n, 0));
}

} // namespace

TEST_CASE("moment inversion recovers sigma_u^2 = 1")
{
    const double m3 = (pi - 4) / pi * std::sqrt(2 / pi);
    const auto inv = invert_moments(1.0, m3);
    CHECK(inv.sigma.sigma_u_sq == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(inv.sigma.sigma_v_sq == doctest::Approx(2 / pi).epsilon(1e-13));
    CHECK_FALSE(inv.wrong_skew);
}

TEST_CASE("positive third moment zeroes sigma_u")
{
    const auto inv = invert_moments(1.0, 0.1);
    CHECK(inv.sigma.sigma_u_sq == 0.0);
    CHECK(inv.wrong_skew);
    CHECK(inv.sigma.sigma_v_sq == 1.0);

    const Dataset d = skewed(400, 3, +1.0);
    const ColsFit f = cols_fit(d, {});
    REQUIRE(f.m3 > 0.0);
    CHECK(f.wrong_skew);
    CHECK(f.sigma.sigma_u_sq == 0.0);
    CHECK(f.beta0_corrected == f.ols_coefficients(0));
    const FrontierFit ff = cols_frontier_fit(d, {});
    CHECK((ff.efficiency.array() == 1.0).all());
    CHECK(ff.mean_efficiency == 1.0);
}

TEST_CASE("negative variance is floored with a diagnostic")
{
    const auto inv = invert_moments(0.01, -1.0);
    CHECK(inv.sigma_v_floored);
    CHECK(inv.sigma.sigma_v_sq == kSigmaVFloor);
}

TEST_CASE("COLS is consistent at n = 1e5")
{
    const Dataset d = gen_irrelevant_z(100000, 0.0, std::uint64_t{17});
    const ColsFit f = cols_fit(d, {});
    CHECK(std::abs(f.sigma.sigma_u() - 1.2) < 0.05);
    CHECK(std::abs(f.sigma.sigma_v() - 0.5) < 0.05);
    CHECK(std::abs(f.beta0_corrected - 1.0) < 0.05);
}

TEST_CASE("COLS slopes are the OLS slopes and the moment identity holds")
{
    for (std::uint64_t s = 0; s < 25; ++s) {
        const Dataset d = gen_irrelevant_z(200, 0.1, 1000 + s);
        const Support all = all_columns(d.d());
        const ColsFit f = cols_fit(d, all);
        const auto ols = ols_solve<double>(d.design(all), d.y);
        CHECK(f.slopes == ols.coefficients.tail(ols.coefficients.size() - 1));
        CHECK(f.wrong_skew == (oracle::skewness(ols.residuals) > 0.0));
        if (!f.sigma_v_floored) {
            const double lhs = f.sigma.sigma_v_sq + (pi - 2) / pi * f.sigma.sigma_u_sq;
            CHECK(std::abs(lhs - f.m2) < 1e-12 * f.m2);
        }
    }
}

TEST_CASE("COLS rejects a support that fills the sample")
{
    const Dataset d = gen_irrelevant_z(20, 0.9, std::uint64_t{5});
    try {
        cols_fit(d, all_columns(d.d()));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SupportTooLarge);
    }
}

TEST_CASE("COLS frontier fit reports corrected residuals")
{
    const Dataset d = skewed(500, 8, -1.0);
    const FrontierFit f = cols_frontier_fit(d, {});
    CHECK(f.method == "COLS");
    CHECK(f.std_errors.allFinite());
    CHECK(f.mean_efficiency < 1.0);
    CHECK(f.residuals.mean() == doctest::Approx(-std::sqrt(2 / pi) * f.sigma.sigma_u()).epsilon(1e-10));
}
