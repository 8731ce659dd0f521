#pragma once
#include <sfa/frontier_model.hpp>
#include <sfa/types.hpp>

namespace sfa {

/// Population moments of eps = v - u for Normal v and Half-Normal u.
struct CompositeMoments
{
    double mu1 = 0.0; // E(eps) magnitude, sqrt(2/pi) sigma_u
    double mu2 = 0.0;
    double mu3 = 0.0;
    double skewness = 0.0;
};

CompositeMoments composite_moments(const CompositeErrorParams& params);

/// Second and third central sample moments (denominator n) and skewness.
struct SampleMoments
{
    double m2 = 0.0;
    double m3 = 0.0;
    double skewness = 0.0;
};

SampleMoments sample_moments(const VectorXd& e);

/**
 * Log-likelihood evaluation. The parameter vector is laid out as
 * [coefficients on (X, Z_support)..., log sigma^2, log(gamma / (1 - gamma))]
 * and grad is taken with respect to that vector.
 */
struct LogLikEval
{
    double value = 0.0;
    VectorXd grad;
    VectorXd per_obs;
};

/// Number of non-coefficient entries at the tail of the parameter vector.
inline constexpr Index kVarianceParams = 2;

VectorXd pack_theta(const VectorXd& coefficients, const CompositeErrorParams& params);
CompositeErrorParams unpack_params(const VectorXd& theta);

/**
 * Normal-Half-Normal log density, summed:
 *   ln 2 - ln sqrt(2 pi) - ln sigma + ln Phi(-eps lambda / sigma) - eps^2 / (2 sigma^2)
 * with eps = y - W b.
 */
LogLikEval loglik(const VectorXd& theta, const MatrixXd& W, const VectorXd& y, bool want_grad = true);
LogLikEval loglik(const VectorXd& theta, const Dataset& data, const Support& support, bool want_grad = true);

/// Same density at natural parameters; admits the gamma = 0 boundary.
double loglik_at(const VectorXd& coefficients, const CompositeErrorParams& params, const MatrixXd& W,
                 const VectorXd& y);

/// Maximized Gaussian log-likelihood of an OLS fit with variance SSR / n.
double gaussian_loglik(const VectorXd& residuals);

enum class EfficiencyMetric {
    ConditionalMean,       // exp(-E[u | eps])
    ConditionalExpectation // E[exp(-u) | eps]
};

/// E[u | eps] for each residual.
VectorXd conditional_inefficiency(const VectorXd& residuals, const CompositeErrorParams& params);

VectorXd efficiency_scores(const VectorXd& residuals, const CompositeErrorParams& params,
                           EfficiencyMetric metric = EfficiencyMetric::ConditionalMean);

} // namespace sfa
