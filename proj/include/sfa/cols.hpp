#pragma once
#include <string>
#include <vector>
#include <sfa/frontier_model.hpp>
#include <sfa/sfa_likelihood.hpp>

namespace sfa {

/// Floor applied to a negative moment-based sigma_v^2.
inline constexpr double kSigmaVFloor = 1e-12;

struct ColsFit
{
    double beta0_corrected = 0.0;
    // OLS coefficients on [X, Z_support]; entry 0 is the uncorrected intercept.
    VectorXd ols_coefficients;
    VectorXd slopes;
    CompositeErrorParams sigma;
    double m2 = 0.0;
    double m3 = 0.0;
    double raw_skewness = 0.0;
    bool wrong_skew = false;
    bool sigma_v_floored = false;
    VectorXd residuals; // OLS residuals e_i
    MatrixXd xtx_inverse;
    std::vector<std::string> diagnostics;
};

/**
 * Moment-based recovery of (sigma_u^2, sigma_v^2) from the second and
 * third raw residual moments (denominator n). Positive third moment
 * sets sigma_u^2 = 0.
 */
struct MomentInversion
{
    CompositeErrorParams sigma;
    bool wrong_skew = false;
    bool sigma_v_floored = false;
};

MomentInversion invert_moments(double m2, double m3);

ColsFit cols_fit(const Dataset& data, const Support& support);

/// COLS as a FrontierFit: corrected intercept, OLS standard errors, efficiency scores.
FrontierFit cols_frontier_fit(const Dataset& data, const Support& support,
                              EfficiencyMetric metric = EfficiencyMetric::ConditionalMean);

} // namespace sfa
