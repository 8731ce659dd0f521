#include <doctest.h>
#include <numbers>
#include <sfa/cols.hpp>
#include <sfa/mle.hpp>
#include <sfa/montecarlo.hpp>
#include "oracles.hpp"

using namespace sfa;

namespace {

Dataset gaussian_noise(Index n, std::uint64_t seed)
{
    std::mt19937_64 g(seed);
    std::normal_distribution<double> N;
    const MatrixXd X = oracle::gaussian_matrix(n, 2, seed + 1);
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) y(i) = 1.0 + 0.5 * X(i, 0) + 0.2 * X(i, 1) + 0.7 * N(g);
    return make_dataset(y, X, MatrixXd(n, 0));
}

// First seed at or after `from` whose OLS residuals have the requested skew sign.
Dataset with_skew(double sign, std::uint64_t from)
{
    for (std::uint64_t s = from;; ++s) {
        Dataset d = gaussian_noise(500, s);
        const auto r = ols_solve<double>(d.design({}), d.y).residuals;
        if (sign * r.array().cube().sum() > 0.0) return d;
    }
}

} // namespace

TEST_CASE("boundary solution under positive residual skew")
{
    for (std::uint64_t from : {1u, 100u, 200u}) {
        const Dataset d = with_skew(+1.0, from);
        const MleFit m = mle_fit(d, {});
        CHECK(m.boundary_solution);
        CHECK(m.sigma.sigma_u_sq == 0.0);
        const auto ols = ols_solve<double>(d.design({}), d.y);
        const double s2 = ols.residuals.squaredNorm() / 500.0;
        const double gauss = -0.5 * 500.0 * (std::log(2 * std::numbers::pi * s2) + 1.0);
        CHECK(std::abs(m.loglik - gauss) < 1e-8);
        // COLS agrees at the boundary
        const ColsFit c = cols_fit(d, {});
        CHECK(c.wrong_skew);
        CHECK((m.coefficients - c.ols_coefficients).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(c.sigma.sigma_u_sq == 0.0);
    }
}

TEST_CASE("MLE is consistent at n = 1e4")
{
    const Dataset d = gen_irrelevant_z(10000, 0.0, std::uint64_t{8});
    const MleFit m = mle_fit(d, {});
    REQUIRE(m.converged);
    CHECK_FALSE(m.boundary_solution);
    const double truth[] = {0.3, 0.4, 0.38};
    for (int j = 0; j < 3; ++j) CHECK(std::abs(m.coefficients(j + 1) - truth[j]) < 3 * m.std_errors(j + 1));
    CHECK(std::abs(m.sigma.sigma_u() - 1.2) < 0.1);
    CHECK(m.gradient_norm < 1e-6);
    CHECK(m.std_errors.allFinite());
    CHECK((m.std_errors.array() > 0.0).all());
}

TEST_CASE("optimum dominates the COLS starting point")
{
    for (std::uint64_t s = 0; s < 15; ++s) {
        const Dataset d = gen_irrelevant_z(300, 0.0, 50 + s);
        const ColsFit c = cols_fit(d, {});
        const MleFit m = mle_fit(d, {});
        VectorXd b = c.ols_coefficients;
        b(0) = c.beta0_corrected;
        const double at_cols = loglik_at(b, c.sigma, d.design({}), d.y);
        CHECK(m.loglik >= at_cols - 1e-9);
    }
}

TEST_CASE("profile over gamma")
{
    const Dataset d = gen_irrelevant_z(2000, 0.0, std::uint64_t{21});
    const MleFit m = mle_fit(d, {});
    REQUIRE_FALSE(m.boundary_solution);
    const double gh = m.sigma.gamma();
    std::vector<double> grid{0.0, 0.5 * gh, gh, std::min(0.5 * (gh + 1.0), 0.99), 0.995};
    const auto prof = profile_gamma(d, {}, grid);
    const auto ols = ols_solve<double>(d.design({}), d.y);
    CHECK(std::abs(prof[0] - gaussian_loglik(ols.residuals)) < 1e-8);
    CHECK(std::abs(prof[2] - m.loglik) < 1e-6);
    CHECK(prof[2] >= prof[1]);
    CHECK(prof[2] >= prof[3]);
    CHECK(prof[3] >= prof[4]);
    CHECK_THROWS_AS(profile_gamma(d, {}, {1.0}), Error);
}

TEST_CASE("jitter seed does not move the optimum")
{
    const Dataset d = gen_irrelevant_z(400, 0.0, std::uint64_t{33});
    MleOptions a, b;
    b.jitter_seed = 99;
    CHECK(std::abs(mle_fit(d, {}, a).loglik - mle_fit(d, {}, b).loglik) < 1e-6);
}

TEST_CASE("frontier fit layout")
{
    const Dataset d = gen_irrelevant_z(400, 0.1, std::uint64_t{34});
    const FrontierFit f = mle_frontier_fit(d, {0, 2});
    CHECK(f.method == "MLE");
    CHECK(f.coefficients.size() == 6);
    CHECK(f.names[4] == d.Z.column_names[0]);
    CHECK(f.loglik.has_value());
    CHECK(f.efficiency.size() == 400);
    CHECK((f.efficiency.array() > 0.0).all());
    CHECK((f.efficiency.array() <= 1.0).all());
}

TEST_CASE("MLE needs room for the variance parameters")
{
    const Dataset d = gaussian_noise(5, 1);
    try {
        mle_fit(d, {});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SupportTooLarge);
    }
}

TEST_CASE("BFGS on a quadratic")
{
    MatrixXd A(2, 2);
    A << 3, 1, 1, 2;
    const Eigen::Vector2d c(1, -1);
    auto f = [&](const VectorXd& x, VectorXd& g) {
        g = A * x - c;
        return 0.5 * x.dot(A * x) - c.dot(x);
    };
    const auto r = bfgs_minimize<double>(f, VectorXd::Zero(2));
    CHECK(r.converged);
    CHECK((r.x - A.ldlt().solve(VectorXd(c))).norm() < 1e-6);
}
