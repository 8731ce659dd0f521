#pragma once
#include <cstdint>
#include <vector>
#include <sfa/frontier_model.hpp>
#include <sfa/optimize.hpp>
#include <sfa/sfa_likelihood.hpp>

namespace sfa {

struct MleOptions
{
    int max_iterations = 500;
    // Convergence threshold on max |grad| of the mean log-likelihood.
    double gradient_tolerance = 1e-6;
    int restarts = 3;
    std::uint64_t jitter_seed = 20240611;
    EfficiencyMetric efficiency = EfficiencyMetric::ConditionalMean;
};

struct MleFit
{
    // Coefficients on [X, Z_support]; entry 0 is the intercept.
    VectorXd coefficients;
    CompositeErrorParams sigma;
    double loglik = 0.0;
    // Standard errors for the coefficients, then sigma^2, then gamma.
    VectorXd std_errors;
    bool converged = false;
    bool boundary_solution = false;
    int iterations = 0;
    // max |grad| of the mean log-likelihood in the unconstrained parameters.
    double gradient_norm = 0.0;
    double ols_third_moment = 0.0;
    std::vector<std::string> diagnostics;

    double beta0() const { return coefficients(0); }
};

/**
 * Normal-Half-Normal maximum likelihood on [X, Z_support].
 * Quasi-Newton on (b, log sigma^2, logit gamma) started from COLS, with
 * the gamma = 0 boundary evaluated as a separate candidate whenever the
 * OLS residuals are wrongly skewed or the interior search collapses.
 */
MleFit mle_fit(const Dataset& data, const Support& support, const MleOptions& opts = {});
MleFit mle_fit(const MatrixXd& W, const VectorXd& y, const MleOptions& opts = {});

/// Log-likelihood maximized over (b, sigma^2) for each fixed gamma.
std::vector<double> profile_gamma(const Dataset& data, const Support& support, const std::vector<double>& gamma_grid,
                                  const MleOptions& opts = {});

FrontierFit mle_frontier_fit(const Dataset& data, const Support& support, const MleOptions& opts = {});

} // namespace sfa
