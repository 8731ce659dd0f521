#include <cmath>
#include <numbers>
#include <sfa/error.hpp>
#include <sfa/normal.hpp>
#include <sfa/sfa_likelihood.hpp>

namespace sfa {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kLog2 = std::numbers::ln2;
constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;
} // namespace

CompositeMoments composite_moments(const CompositeErrorParams& params)
{
    params.validate();
    const double su = params.sigma_u();
    CompositeMoments m;
    m.mu1 = std::sqrt(2.0 / kPi) * su;
    m.mu2 = params.sigma_v_sq + (kPi - 2.0) / kPi * params.sigma_u_sq;
    m.mu3 = (kPi - 4.0) / kPi * std::sqrt(2.0 / kPi) * su * su * su;
    m.skewness = m.mu3 / std::pow(m.mu2, 1.5);
    return m;
}

SampleMoments sample_moments(const VectorXd& e)
{
    SampleMoments s;
    const double n = static_cast<double>(e.size());
    if (e.size() == 0) return s;
    const Eigen::ArrayXd c = e.array() - e.mean();
    s.m2 = c.square().sum() / n;
    s.m3 = c.cube().sum() / n;
    s.skewness = s.m2 > 0.0 ? s.m3 / std::pow(s.m2, 1.5) : 0.0;
    return s;
}

VectorXd pack_theta(const VectorXd& coefficients, const CompositeErrorParams& params)
{
    const double s2 = params.sigma_sq();
    const double g = params.gamma();
    if (!(s2 > 0.0) || !(g > 0.0 && g < 1.0)) {
        throw Error(ErrorCode::InvalidParams, "interior parameterization needs sigma^2 > 0 and 0 < gamma < 1");
    }
    VectorXd theta(coefficients.size() + kVarianceParams);
    theta.head(coefficients.size()) = coefficients;
    theta(coefficients.size()) = std::log(s2);
    theta(coefficients.size() + 1) = std::log(g / (1.0 - g));
    return theta;
}

CompositeErrorParams unpack_params(const VectorXd& theta)
{
    const Index k = theta.size() - kVarianceParams;
    const double s2 = std::exp(theta(k));
    const double g = 1.0 / (1.0 + std::exp(-theta(k + 1)));
    return CompositeErrorParams{g * s2, (1.0 - g) * s2};
}

LogLikEval loglik(const VectorXd& theta, const MatrixXd& W, const VectorXd& y, bool want_grad)
{
    const Index k = W.cols();
    if (theta.size() != k + kVarianceParams) {
        throw Error(ErrorCode::DimensionMismatch, "parameter vector length does not match design");
    }
    if (!theta.allFinite()) throw Error(ErrorCode::InvalidParams, "non-finite parameter vector");
    const Index n = y.size();
    const double log_s2 = theta(k);
    const double logit_g = theta(k + 1);
    const double sigma = std::exp(0.5 * log_s2);
    const double sigma_sq = sigma * sigma;
    const double lambda = std::exp(0.5 * logit_g);
    const double lam_over_sigma = lambda / sigma;

    const VectorXd eps = y - W * theta.head(k);

    LogLikEval out;
    out.per_obs.resize(n);
    VectorXd score_eps; // d ell_i / d b = w_i * score_eps_i
    if (want_grad) score_eps.resize(n);
    double d_logs2 = 0.0;
    double d_logit = 0.0;
    const double konst = kLog2 - kHalfLog2Pi - 0.5 * log_s2;
    for (Index i = 0; i < n; ++i) {
        const double e = eps(i);
        const double t = -e * lam_over_sigma;
        out.per_obs(i) = konst + log_ndtr(t) - 0.5 * e * e / sigma_sq;
        if (want_grad) {
            // d ln Phi(t) / dt = phi(t) / Phi(t) = inverse Mills ratio at -t.
            const double m = inverse_mills(-t);
            score_eps(i) = e / sigma_sq + m * lam_over_sigma;
            d_logs2 += -0.5 + 0.5 * e * e / sigma_sq + 0.5 * m * e * lam_over_sigma;
            d_logit += -0.5 * m * e * lam_over_sigma;
        }
    }
    out.value = out.per_obs.sum();
    if (want_grad) {
        out.grad.resize(k + kVarianceParams);
        out.grad.head(k) = W.transpose() * score_eps;
        out.grad(k) = d_logs2;
        out.grad(k + 1) = d_logit;
    }
    return out;
}

LogLikEval loglik(const VectorXd& theta, const Dataset& data, const Support& support, bool want_grad)
{
    for (auto j : support) {
        if (j < 0 || j >= data.d()) throw Error(ErrorCode::DimensionMismatch, "support index outside Z");
    }
    return loglik(theta, data.design(support), data.y, want_grad);
}

double loglik_at(const VectorXd& coefficients, const CompositeErrorParams& params, const MatrixXd& W,
                 const VectorXd& y)
{
    params.validate();
    const double sigma = std::sqrt(params.sigma_sq());
    const double lam_over_sigma = params.lambda() / sigma;
    const VectorXd eps = y - W * coefficients;
    double total = 0.0;
    for (Index i = 0; i < eps.size(); ++i) {
        const double e = eps(i);
        total += kLog2 - kHalfLog2Pi - std::log(sigma) + log_ndtr(-e * lam_over_sigma) - 0.5 * e * e / (sigma * sigma);
    }
    return total;
}

double gaussian_loglik(const VectorXd& residuals)
{
    const double n = static_cast<double>(residuals.size());
    const double s2 = residuals.squaredNorm() / n;
    return -0.5 * n * (std::log(2.0 * kPi) + std::log(s2) + 1.0);
}

VectorXd conditional_inefficiency(const VectorXd& residuals, const CompositeErrorParams& params)
{
    params.validate();
    VectorXd out = VectorXd::Zero(residuals.size());
    if (params.sigma_u_sq == 0.0) return out;
    const double s2 = params.sigma_sq();
    const double sigma_star = params.sigma_u() * params.sigma_v() / std::sqrt(s2);
    for (Index i = 0; i < residuals.size(); ++i) {
        const double mu_star = -residuals(i) * params.sigma_u_sq / s2;
        const double a = mu_star / sigma_star;
        // phi(a)/Phi(a) + a, i.e. r(-a) - (-a) with r the inverse Mills ratio.
        const double t = -a;
        double excess;
        if (t < 8.0) {
            excess = inverse_mills(t) - t;
        } else {
            const double R = detail::mills_ratio_cf(t);
            excess = (1.0 - t * R) / R;
        }
        out(i) = sigma_star * std::max(excess, 0.0);
    }
    return out;
}

VectorXd efficiency_scores(const VectorXd& residuals, const CompositeErrorParams& params, EfficiencyMetric metric)
{
    params.validate();
    if (params.sigma_u_sq == 0.0) return VectorXd::Ones(residuals.size());
    if (metric == EfficiencyMetric::ConditionalMean) {
        return (-conditional_inefficiency(residuals, params)).array().exp().matrix();
    }
    const double s2 = params.sigma_sq();
    const double sigma_star = params.sigma_u() * params.sigma_v() / std::sqrt(s2);
    VectorXd out(residuals.size());
    for (Index i = 0; i < residuals.size(); ++i) {
        const double mu_star = -residuals(i) * params.sigma_u_sq / s2;
        const double a = mu_star / sigma_star;
        const double log_te = -mu_star + 0.5 * sigma_star * sigma_star + log_ndtr(a - sigma_star) - log_ndtr(a);
        out(i) = std::min(std::exp(log_te), 1.0);
    }
    return out;
}

} // namespace sfa
