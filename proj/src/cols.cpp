#include <cmath>
#include <numbers>
#include <sfa/cols.hpp>
#include <sfa/error.hpp>

namespace sfa {

namespace {
constexpr double kPi = std::numbers::pi;
}

MomentInversion invert_moments(double m2, double m3)
{
    MomentInversion out;
    double su2 = 0.0;
    if (m3 > 0.0) {
        out.wrong_skew = true;
    } else if (m3 < 0.0) {
        // (pi/(pi-4)) sqrt(pi/2) m3 is positive here; take the real cube root.
        const double su = std::cbrt(-m3 * kPi / (4.0 - kPi) * std::sqrt(kPi / 2.0));
        su2 = su * su;
    }
    double sv2 = m2 - (kPi - 2.0) / kPi * su2;
    if (!(sv2 > kSigmaVFloor)) {
        sv2 = kSigmaVFloor;
        out.sigma_v_floored = true;
    }
    out.sigma = CompositeErrorParams{su2, sv2};
    return out;
}

ColsFit cols_fit(const Dataset& data, const Support& support)
{
    const MatrixXd W = data.design(support);
    if (data.n() <= W.cols()) {
        throw Error(ErrorCode::SupportTooLarge, "COLS needs n > 1 + p + |support|");
    }
    auto ols = ols_solve<double>(W, data.y, true);
    const double n = static_cast<double>(data.n());

    ColsFit fit;
    fit.m2 = ols.residuals.squaredNorm() / n;
    fit.m3 = ols.residuals.array().cube().sum() / n;
    fit.raw_skewness = fit.m2 > 0.0 ? fit.m3 / std::pow(fit.m2, 1.5) : 0.0;
    const auto inv = invert_moments(fit.m2, fit.m3);
    fit.sigma = inv.sigma;
    fit.wrong_skew = inv.wrong_skew;
    fit.sigma_v_floored = inv.sigma_v_floored;
    if (inv.sigma_v_floored) {
        fit.diagnostics.push_back("sigma_v^2 from moments was not positive; floored at 1e-12");
    }
    if (inv.wrong_skew) {
        fit.diagnostics.push_back("positive third moment of OLS residuals (wrong skew); sigma_u^2 set to 0");
    }
    fit.ols_coefficients = ols.coefficients;
    fit.beta0_corrected = ols.coefficients(0) + std::sqrt(2.0 / kPi) * fit.sigma.sigma_u();
    fit.slopes = ols.coefficients.tail(ols.coefficients.size() - 1);
    fit.residuals = std::move(ols.residuals);
    fit.xtx_inverse = std::move(*ols.xtx_inverse);
    return fit;
}

FrontierFit cols_frontier_fit(const Dataset& data, const Support& support, EfficiencyMetric metric)
{
    const ColsFit c = cols_fit(data, support);
    const Index k = c.ols_coefficients.size();
    const double dof = static_cast<double>(data.n() - k);

    FrontierFit f;
    f.method = "COLS";
    f.names = data.design_names(support);
    f.coefficients = c.ols_coefficients;
    f.coefficients(0) = c.beta0_corrected;
    const double s2 = c.residuals.squaredNorm() / dof;
    f.std_errors = (s2 * c.xtx_inverse.diagonal()).cwiseSqrt();
    f.num_mandatory = data.p();
    f.support = support;
    f.input_terms = data.input_terms;
    f.sigma = c.sigma;
    f.sigma_sq_se = std::nan("");
    f.gamma_se = std::nan("");
    f.residuals = c.residuals.array() - std::sqrt(2.0 / kPi) * c.sigma.sigma_u();
    f.efficiency = efficiency_scores(f.residuals, c.sigma, metric);
    f.mean_efficiency = f.efficiency.mean();
    f.raw_skewness = c.raw_skewness;
    f.wrong_skew = c.wrong_skew;
    f.diagnostics = c.diagnostics;
    return f;
}

} // namespace sfa
