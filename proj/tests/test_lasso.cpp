#include <doctest.h>
#include <algorithm>
#include <numeric>
#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <sfa/lasso.hpp>
#include <sfa/montecarlo.hpp>
#include "oracles.hpp"

using namespace sfa;

namespace {

struct Problem
{
    VectorXd y;
    MatrixXd W;
    std::vector<std::uint8_t> mask;
};

// Intercept and `p` unpenalized columns, then `d` penalized ones with a sparse signal.
Problem seeded(Index n, Index p, Index d, std::uint64_t seed)
{
    Problem pr;
    MatrixXd raw = oracle::gaussian_matrix(n, p + d, seed);
    for (Index j = 0; j < p + d; ++j) raw.col(j) *= 1.0 + 0.5 * static_cast<double>(j % 3);
    pr.W = oracle::with_intercept(raw);
    VectorXd beta = VectorXd::Zero(1 + p + d);
    beta(0) = 1.0;
    for (Index j = 1; j <= p; ++j) beta(j) = 0.5;
    for (Index j = 0; j < std::min<Index>(d, 3); ++j) beta(1 + p + j) = 0.8 / static_cast<double>(j + 1);
    pr.y = pr.W * beta + oracle::gaussian_vector(n, seed + 7);
    pr.mask.assign(static_cast<std::size_t>(1 + p + d), 1);
    std::fill(pr.mask.begin(), pr.mask.begin() + 1 + p, 0);
    return pr;
}

PenaltyPlan plan_for(const Problem& pr)
{
    PenaltyPlan plan;
    plan.mask = pr.mask;
    return plan;
}

double kkt(const Problem& pr, const LassoFit& f, bool standardize = true)
{
    return kkt_violation(pr.y, pr.W, pr.mask, penalty_weights(pr.W, pr.mask, standardize), f.coefficients,
                         f.penalty_level.value);
}

} // namespace

TEST_CASE("zero penalty reproduces OLS")
{
    const auto pr = seeded(60, 1, 5, 1);
    PenaltyPlan plan = plan_for(pr);
    plan.tolerance = 1e-12;
    const LassoProblem prob(pr.y, pr.W, pr.mask, true);
    VectorXd delta;
    LassoProblem::Options o;
    o.tolerance = 1e-12;
    const auto fit = prob.solve(0.0, delta, o);
    const VectorXd ols = oracle::normal_equations(pr.W, pr.y);
    CHECK((fit.coefficients - ols).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("null-model threshold")
{
    const auto pr = seeded(80, 2, 10, 2);
    const LassoProblem prob(pr.y, pr.W, pr.mask, true);

    // independent threshold: partial X out of y and Z, then scale by the penalty weights
    std::vector<Index> unpen{0, 1, 2}, pen;
    for (Index j = 3; j < pr.W.cols(); ++j) pen.push_back(j);
    const MatrixXd X = pr.W(Eigen::all, unpen);
    const VectorXd bx = oracle::normal_equations(X, pr.y);
    const VectorXd r = pr.y - X * bx;
    double lmax = 0.0;
    for (Index j : pen) {
        const VectorXd zj = pr.W.col(j) - X * oracle::normal_equations(X, pr.W.col(j));
        lmax = std::max(lmax, 2.0 / 80.0 * std::abs(zj.dot(r)) / sample_sd(pr.W.col(j)));
    }
    CHECK(prob.lambda_max() == doctest::Approx(lmax).epsilon(1e-10));

    VectorXd delta;
    const auto at = prob.solve(lmax * (1 + 1e-12), delta, {});
    CHECK(at.support.empty());
    CHECK((at.coefficients.head(3) - bx).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((at.coefficients.tail(pen.size()).array() == 0.0).all());

    VectorXd delta2;
    CHECK_FALSE(prob.solve(0.95 * lmax, delta2, {}).support.empty());
}

TEST_CASE("one penalized coefficient against a brute-force scalar search")
{
    for (std::uint64_t seed : {3u, 4u, 5u, 6u}) {
        const MatrixXd W = oracle::with_intercept(oracle::gaussian_matrix(8, 2, seed));
        const VectorXd y = W * Eigen::Vector3d(0.5, 1.0, 0.4) + 0.5 * oracle::gaussian_vector(8, seed + 50);
        const std::vector<std::uint8_t> mask{0, 0, 1};
        const double level = 0.15;
        const double w = sample_sd(W.col(2));
        const MatrixXd U = W.leftCols(2);

        double best = std::numeric_limits<double>::infinity(), arg = 0.0;
        for (double t = -3.0; t <= 3.0; t += 1e-5) {
            const VectorXd rest = y - t * W.col(2);
            const VectorXd r = rest - U * oracle::normal_equations(U, rest);
            const double obj = r.squaredNorm() / 8.0 + level * w * std::abs(t);
            if (obj < best) {
                best = obj;
                arg = t;
            }
        }
        PenaltyPlan plan;
        plan.mask = mask;
        plan.rule = PenaltyRule::Fixed;
        plan.fixed_level = {level};
        const auto fit = lasso_select(y, W, plan);
        CHECK(std::abs(fit.coefficients(2) - arg) < 1e-4);
        const VectorXd b = oracle::normal_equations(U, VectorXd(y - arg * W.col(2)));
        CHECK((fit.coefficients.head(2) - b).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("KKT holds along the path")
{
    for (std::uint64_t seed = 10; seed < 16; ++seed) {
        const auto pr = seeded(100, 2, 40, seed);
        PenaltyPlan plan = plan_for(pr);
        plan.grid_size = 40;
        plan.early_stop = false;
        const auto path = lasso_path(pr.y, pr.W, plan);
        for (const auto& f : path) CHECK(kkt(pr, f) < 1e-6);
    }
    // wide design, unstandardized penalty
    const auto wide = seeded(50, 1, 120, 20);
    PenaltyPlan plan = plan_for(wide);
    plan.standardize = false;
    plan.grid_size = 30;
    for (const auto& f : lasso_path(wide.y, wide.W, plan)) CHECK(kkt(wide, f, false) < 1e-6);
}

TEST_CASE("warm-started path equals cold starts")
{
    const auto pr = seeded(90, 1, 30, 31);
    const LassoProblem prob(pr.y, pr.W, pr.mask, true);
    const auto grid = make_grid(prob.lambda_max(), 25, 1e-3);
    LassoProblem::Options o;
    const auto warm = prob.path(grid, o);
    REQUIRE(warm.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        VectorXd delta;
        const auto cold = prob.solve(grid[i], delta, o);
        CHECK((cold.coefficients - warm[i].coefficients).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("objective never increases across sweeps")
{
    const auto pr = seeded(70, 1, 50, 41);
    const LassoProblem prob(pr.y, pr.W, pr.mask, true);
    for (double frac : {0.5, 0.1, 0.01}) {
        std::vector<double> trace;
        LassoProblem::Options o;
        o.objective_trace = &trace;
        VectorXd delta;
        prob.solve(frac * prob.lambda_max(), delta, o);
        REQUIRE(trace.size() >= 2);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] * (1 + 1e-12) + 1e-15);
    }
}

TEST_CASE("grid must decrease")
{
    const auto pr = seeded(30, 1, 4, 1);
    const LassoProblem prob(pr.y, pr.W, pr.mask, true);
    CHECK_THROWS_AS(prob.path({0.1, 0.2}, {}), Error);
    const auto g = make_grid(2.0, 100, 1e-4);
    CHECK(g.size() == 100);
    CHECK(g.front() == 2.0);
    CHECK(g.back() == doctest::Approx(2e-4));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
}

TEST_CASE("penalty conventions")
{
    const auto l = PenaltyLevel::from_sum_of_squares(50.0, 100);
    CHECK(l.value == 0.5);
    CHECK(l.sum_of_squares(100) == 50.0);
}

TEST_CASE("one standard error rule")
{
    std::vector<CvPoint> inc;
    for (int i = 0; i < 10; ++i) inc.push_back({10.0 - i, 1.0 + 0.1 * (10 - i), 0.01});
    const auto [imin, i1se] = one_se_indices(inc);
    CHECK(imin == 9);
    CHECK(inc[i1se].level >= inc[imin].level);

    std::vector<CvPoint> flat;
    for (int i = 0; i < 10; ++i) flat.push_back({10.0 - i, 2.0, 0.3});
    const auto [fmin, f1se] = one_se_indices(flat);
    CHECK(f1se == 0);
    CHECK(flat[f1se].level == 10.0);
    (void)fmin;

    std::vector<CvPoint> bowl{{5, 3.0, 0.1}, {4, 2.05, 0.1}, {3, 2.0, 0.1}, {2, 1.95, 0.1}, {1, 2.5, 0.1}};
    const auto [bmin, b1se] = one_se_indices(bowl);
    CHECK(bmin == 3);
    CHECK(b1se == 1);
}

TEST_CASE("fold assignment")
{
    const auto f = fold_assignment(103, 10, 5);
    std::vector<int> count(10, 0);
    for (int k : f) ++count[static_cast<std::size_t>(k)];
    for (int c : count) CHECK((c == 10 || c == 11));
    CHECK(f == fold_assignment(103, 10, 5));
    CHECK(f != fold_assignment(103, 10, 6));
    CHECK_THROWS_AS(fold_assignment(5, 10, 1), Error);
}

TEST_CASE("cross-validated 1se level matches an independent fold loop")
{
    const auto pr = seeded(200, 1, 20, 77);
    PenaltyPlan plan = plan_for(pr);
    plan.folds = 10;
    plan.seed = 123;
    plan.cv_truncate_ratio = 0.0;
    plan.cv_tolerance = 1e-10;
    const LassoProblem full(pr.y, pr.W, pr.mask, true);
    plan.grid = make_grid(full.lambda_max(), 40, 1e-3);
    const CvResult cv = cv_select(pr.y, pr.W, plan);

    // fold loop written out: seeded permutation cut into contiguous blocks
    const Index n = 200;
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 g(plan.seed);
    std::shuffle(perm.begin(), perm.end(), g);
    const std::size_t L = plan.grid.size();
    MatrixXd err(10, static_cast<Index>(L));
    for (int k = 0; k < 10; ++k) {
        std::vector<Index> train, test;
        for (Index pos = 0; pos < n; ++pos) (pos * 10 / n == k ? test : train).push_back(perm[pos]);
        std::sort(train.begin(), train.end());
        std::sort(test.begin(), test.end());
        const LassoProblem prob(pr.y(train), pr.W(train, Eigen::all), pr.mask, true);
        LassoProblem::Options o;
        o.tolerance = 1e-10;
        const auto path = prob.path(plan.grid, o);
        for (std::size_t l = 0; l < L; ++l) {
            const VectorXd res = pr.y(test) - pr.W(test, Eigen::all) * path[l].coefficients;
            err(k, static_cast<Index>(l)) = res.squaredNorm() / static_cast<double>(test.size());
        }
    }
    std::size_t lmin = 0;
    VectorXd mean(L), se(L);
    for (std::size_t l = 0; l < L; ++l) {
        const VectorXd col = err.col(static_cast<Index>(l));
        mean(l) = col.mean();
        se(l) = std::sqrt((col.array() - mean(l)).square().sum() / 9.0) / std::sqrt(10.0);
        if (mean(l) < mean(lmin)) lmin = l;
    }
    double l1se = plan.grid[lmin];
    for (std::size_t l = 0; l < L; ++l) {
        if (mean(l) <= mean(lmin) + se(lmin)) {
            l1se = std::max(l1se, plan.grid[l]);
        }
    }
    CHECK(cv.level_min.value == plan.grid[lmin]);
    CHECK(cv.level_1se.value == l1se);
    CHECK(cv.level_1se.value >= cv.level_min.value);
    REQUIRE(cv.curve.size() == L);
    for (std::size_t l = 0; l < L; ++l) CHECK(cv.curve[l].mean_error == doctest::Approx(mean(l)).epsilon(1e-6));
}

TEST_CASE("cross-validation with concurrent folds is unchanged")
{
    const auto pr = seeded(150, 1, 15, 8);
    PenaltyPlan a = plan_for(pr);
    a.grid_size = 30;
    PenaltyPlan b = a;
    b.workers = 4;
    const auto ca = cv_select(pr.y, pr.W, a);
    const auto cb = cv_select(pr.y, pr.W, b);
    CHECK(ca.level_1se.value == cb.level_1se.value);
    REQUIRE(ca.curve.size() == cb.curve.size());
    for (std::size_t i = 0; i < ca.curve.size(); ++i) CHECK(ca.curve[i].mean_error == cb.curve[i].mean_error);
}

TEST_CASE("degenerate folds")
{
    auto pr = seeded(40, 1, 5, 9);
    pr.W.col(1).setZero();
    pr.W(0, 1) = 1.0; // unpenalized column living on a single row
    PenaltyPlan plan = plan_for(pr);
    plan.folds = 5;
    try {
        cv_select(pr.y, pr.W, plan);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateFolds);
    }
}

TEST_CASE("plug-in level")
{
    using mp = boost::multiprecision::cpp_bin_float_50;
    const mp alpha = mp(0.1) / log(mp(100));
    const mp q = sqrt(mp(2)) * boost::math::erfc_inv(alpha); // Phi^{-1}(1 - alpha/2)
    const double expected = static_cast<double>(mp(2) * mp("1.1") * 10 * q);
    CHECK(plugin_level(100, 1, 1.0).sum_of_squares(100) == doctest::Approx(expected).epsilon(1e-12));
    double prev = 0.0;
    for (Index d : {1, 2, 5, 20, 200, 5000}) {
        const double l = plugin_level(100, d, 1.0).value;
        CHECK(l > prev);
        prev = l;
    }
    CHECK(plugin_level(100, 10, 0.0).value == 0.0);

    // exact fit: y lies in the span of the unpenalized block
    const auto pr = seeded(50, 2, 10, 3);
    const VectorXd exact = pr.W.leftCols(3) * Eigen::Vector3d(1.0, 2.0, -1.0);
    PenaltyPlan plan = plan_for(pr);
    CHECK(plugin_penalty(exact, pr.W, plan).value < 1e-12);
}

TEST_CASE("lasso_select rules are KKT solutions")
{
    const auto pr = seeded(120, 2, 30, 55);
    for (auto rule : {PenaltyRule::Cv1se, PenaltyRule::CvMin, PenaltyRule::PlugIn}) {
        PenaltyPlan plan = plan_for(pr);
        plan.rule = rule;
        plan.grid_size = 50;
        const auto f = lasso_select(pr.y, pr.W, plan);
        CHECK(kkt(pr, f) < 1e-6);
        CHECK_FALSE(f.support.empty());
        if (rule != PenaltyRule::PlugIn) CHECK(f.cv_curve.has_value());
    }
}

TEST_CASE("support bookkeeping")
{
    const auto pr = seeded(100, 1, 12, 60);
    PenaltyPlan plan = plan_for(pr);
    plan.grid_size = 20;
    for (const auto& f : lasso_path(pr.y, pr.W, plan)) {
        Support s;
        for (Index j = 0; j < 12; ++j) {
            if (f.coefficients(2 + j) != 0.0) s.push_back(j);
        }
        CHECK(s == f.support);
    }
}
