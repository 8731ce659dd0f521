#include <doctest.h>
#include <sfa/cli_io.hpp>
#include <sfa/frontier_model.hpp>
#include <sfa/montecarlo.hpp>
#include "oracles.hpp"

using namespace sfa;

namespace {

RawDataset fixture() { return gen_frontier_fixture(300, 7); }

FrontierSpec spec_for(const RawDataset& raw, FunctionalForm form = FunctionalForm::CobbDouglas)
{
    FrontierSpec s;
    s.form = form;
    return resolve_spec(s, raw);
}

FrontierFit fit_with(std::vector<std::string> names, std::vector<double> coefs)
{
    FrontierFit f;
    f.names = std::move(names);
    f.coefficients = Eigen::Map<VectorXd>(coefs.data(), static_cast<Index>(coefs.size()));
    return f;
}

} // namespace

TEST_CASE("Cobb-Douglas with 5 inputs and 51 selectables")
{
    const auto raw = fixture();
    const Dataset d = expand_spec(raw, spec_for(raw));
    CHECK(d.X.cols() == 6);
    CHECK(d.Z.cols() == 51);
    CHECK(d.X.column_names.front() == "(Intercept)");
    CHECK(d.X.has_intercept);
}

TEST_CASE("translog has 20 technology terms")
{
    const auto raw = fixture();
    const Dataset d = expand_spec(raw, spec_for(raw, FunctionalForm::Translog));
    CHECK(technology_terms(FunctionalForm::Translog, 5) == 20);
    CHECK(d.X.cols() == 21);
    CHECK(d.Z.cols() == 51);
}

TEST_CASE("optional second-order terms go to Z")
{
    const auto raw = fixture();
    auto s = spec_for(raw, FunctionalForm::Translog);
    s.second_order_optional = true;
    const Dataset d = expand_spec(raw, s);
    CHECK(d.X.cols() == 6);
    CHECK(d.Z.cols() == 66);
}

TEST_CASE("translog and Cobb-Douglas share the first-order block")
{
    const auto raw = fixture();
    const Dataset cd = expand_spec(raw, spec_for(raw));
    const Dataset tl = expand_spec(raw, spec_for(raw, FunctionalForm::Translog));
    CHECK(tl.X.values.leftCols(6) == cd.X.values);
    // interactions built from centered logs
    CHECK(tl.X.values.col(6) == cd.X.values.col(1).cwiseProduct(cd.X.values.col(1)));
}

TEST_CASE("expand_spec is deterministic and centers logs")
{
    const auto raw = fixture();
    const auto s = spec_for(raw);
    const Dataset a = expand_spec(raw, s);
    const Dataset b = expand_spec(raw, s);
    CHECK(a.X.values == b.X.values);
    CHECK(a.Z.values == b.Z.values);
    CHECK(a.y == b.y);
    for (Index j = 1; j < a.X.cols(); ++j) CHECK(std::abs(a.X.values.col(j).mean()) < 1e-12);
}

TEST_CASE("dummies pass through untransformed")
{
    const auto raw = fixture();
    const Dataset d = expand_spec(raw, spec_for(raw));
    const auto* dcol = raw.find("D1");
    REQUIRE(dcol);
    const auto it = std::find(d.Z.column_names.begin(), d.Z.column_names.end(), "D1");
    REQUIRE(it != d.Z.column_names.end());
    CHECK(d.Z.values.col(it - d.Z.column_names.begin()) == dcol->values);
}

TEST_CASE("expand_spec errors")
{
    auto raw = fixture();
    auto s = spec_for(raw);
    s.mandatory.push_back("nope");
    try {
        expand_spec(raw, s);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownColumn);
    }
    auto raw2 = fixture();
    raw2.columns[1].values(3) = 0.0;
    try {
        expand_spec(raw2, spec_for(raw2));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonPositiveValue);
    }
}

TEST_CASE("returns to scale")
{
    CHECK(returns_to_scale(fit_with({"(Intercept)", "a", "b", "c"}, {1.0, 0.3, 0.4, 0.38}), {"a", "b", "c"}) ==
          doctest::Approx(1.08));
    CHECK(returns_to_scale(fit_with({"(Intercept)", "a"}, {2.0, 1.0}), {"a"}) == doctest::Approx(1.0));
    CHECK(returns_to_scale(fit_with({"(Intercept)", "a", "b"}, {2.0, 0.0, 0.0}), {"a", "b"}) == 0.0);
    // an unselected optional input contributes nothing
    CHECK(returns_to_scale(fit_with({"(Intercept)", "a"}, {0.0, 0.5}), {"a"}, {"b"}) == doctest::Approx(0.5));
    try {
        returns_to_scale(fit_with({"(Intercept)"}, {0.0}), {"a"});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingCoefficient);
    }
}

TEST_CASE("composite error parameter conversions")
{
    const auto p = CompositeErrorParams::from_sd(1.2, 0.5);
    CHECK(p.sigma_u_sq == doctest::Approx(1.44));
    CHECK(p.lambda() == doctest::Approx(2.4));
    const auto q = CompositeErrorParams::from_gamma(p.sigma_sq(), p.gamma());
    CHECK(q.sigma_u_sq == doctest::Approx(p.sigma_u_sq));
    CHECK(q.sigma_v_sq == doctest::Approx(p.sigma_v_sq));
    CHECK_THROWS_AS(CompositeErrorParams::from_gamma(1.0, 1.0), Error);
    CHECK_THROWS_AS((CompositeErrorParams{-1.0, 1.0}.validate()), Error);
}

TEST_CASE("dataset subsetting and design")
{
    const Dataset d = make_dataset(oracle::gaussian_vector(10, 1), oracle::gaussian_matrix(10, 2, 2),
                                   oracle::gaussian_matrix(10, 4, 3));
    const MatrixXd W = d.design({1, 3});
    CHECK(W.cols() == 5);
    CHECK(W.col(3) == d.Z.values.col(1));
    CHECK(d.design_names({1, 3}).back() == "z4");
    const Dataset s = d.subset_rows({0, 2, 4});
    CHECK(s.n() == 3);
    CHECK(s.Z.values.row(1) == d.Z.values.row(2));
}
