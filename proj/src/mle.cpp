#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sfa/cols.hpp>
#include <sfa/error.hpp>
#include <sfa/mle.hpp>

namespace sfa {

namespace {

constexpr double kPi = std::numbers::pi;
// Interior fits with gamma below this are treated as collapsing to the boundary.
constexpr double kGammaCollapse = 1e-7;

struct Interior
{
    VectorXd theta;
    double loglik = -std::numeric_limits<double>::infinity();
    double gradient_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

// Negative mean log-likelihood and its gradient.
struct Objective
{
    const MatrixXd& W;
    const VectorXd& y;
    double n;

    double operator()(const VectorXd& theta, VectorXd& grad) const
    {
        LogLikEval ev;
        try {
            ev = loglik(theta, W, y, true);
        } catch (const Error&) {
            grad.setZero(theta.size());
            return std::numeric_limits<double>::infinity();
        }
        grad = -ev.grad / n;
        return -ev.value / n;
    }
};

// Newton steps on the FD Hessian; cleans up the last digits BFGS leaves.
void newton_polish(const Objective& obj, VectorXd& theta, double& f, VectorXd& g, int steps)
{
    auto grad_only = [&](const VectorXd& t, VectorXd& out) { obj(t, out); };
    for (int s = 0; s < steps; ++s) {
        const MatrixXd H = fd_hessian<double>(grad_only, theta);
        Eigen::LDLT<MatrixXd> ldlt(H);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
        const VectorXd step = ldlt.solve(g);
        if (!step.allFinite()) return;
        VectorXd g_new(theta.size());
        double alpha = 1.0;
        bool improved = false;
        for (int b = 0; b < 20; ++b) {
            const VectorXd cand = theta - alpha * step;
            const double f_new = obj(cand, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-14 * std::abs(f)) {
                if (g_new.lpNorm<Eigen::Infinity>() <= g.lpNorm<Eigen::Infinity>() || f_new < f) {
                    theta = cand;
                    f = f_new;
                    g = g_new;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!improved) return;
    }
}

Interior optimize_from(const Objective& obj, const VectorXd& start, const MleOptions& opts)
{
    BfgsOptions bo;
    bo.max_iterations = opts.max_iterations;
    bo.gradient_tolerance = opts.gradient_tolerance;
    auto r = bfgs_minimize<double>(obj, start, bo);
    Interior out;
    out.iterations = r.iterations;
    if (!std::isfinite(r.value)) return out;
    newton_polish(obj, r.x, r.value, r.grad, 8);
    out.theta = r.x;
    out.loglik = -r.value * obj.n;
    out.gradient_norm = r.grad.lpNorm<Eigen::Infinity>();
    out.converged = out.gradient_norm < opts.gradient_tolerance;
    return out;
}

VectorXd interior_start(const MatrixXd& W, const VectorXd& y, const VectorXd& ols_coef, double m2, double m3)
{
    const auto inv = invert_moments(m2, m3);
    VectorXd b = ols_coef;
    double s2 = inv.sigma.sigma_sq();
    double g = inv.sigma.gamma();
    if (inv.wrong_skew || !(g > 0.0)) {
        // Fallback: OLS slopes, gamma = 0.5 at the OLS residual variance.
        s2 = (y - W * ols_coef).squaredNorm() / static_cast<double>(y.size());
        g = 0.5;
    }
    g = std::clamp(g, 0.01, 0.99);
    b(0) += std::sqrt(2.0 / kPi) * std::sqrt(g * s2);
    return pack_theta(b, CompositeErrorParams::from_gamma(s2, g));
}

} // namespace

MleFit mle_fit(const MatrixXd& W, const VectorXd& y, const MleOptions& opts)
{
    const Index n = y.size();
    const Index k = W.cols();
    if (n <= k + kVarianceParams) {
        throw Error(ErrorCode::SupportTooLarge, "MLE needs n > k + 2");
    }
    const auto ols = ols_solve<double>(W, y, true);
    const double m2 = ols.residuals.squaredNorm() / static_cast<double>(n);
    const double m3 = ols.residuals.array().cube().sum() / static_cast<double>(n);

    const Objective obj{W, y, static_cast<double>(n)};

    Interior best = optimize_from(obj, interior_start(W, y, ols.coefficients, m2, m3), opts);
    int iterations = best.iterations;
    if (!best.converged) {
        std::mt19937_64 rng(opts.jitter_seed);
        std::normal_distribution<double> jitter(0.0, 0.5);
        const VectorXd base = interior_start(W, y, ols.coefficients, m2, m3);
        for (int r = 0; r < opts.restarts && !best.converged; ++r) {
            VectorXd start = base;
            start(k) += jitter(rng);
            start(k + 1) += 2.0 * jitter(rng);
            start(0) += std::sqrt(std::exp(base(k))) * jitter(rng);
            Interior cand = optimize_from(obj, start, opts);
            iterations += cand.iterations;
            if (cand.converged || cand.loglik > best.loglik) best = std::move(cand);
        }
    }

    const bool interior_ok = best.converged && unpack_params(best.theta).gamma() > kGammaCollapse;
    const double boundary_ll = gaussian_loglik(ols.residuals);
    const bool consider_boundary = m3 > 0.0 || !interior_ok;

    MleFit fit;
    fit.ols_third_moment = m3;
    fit.iterations = iterations;

    if (consider_boundary && (!interior_ok || boundary_ll >= best.loglik)) {
        if (!(m3 > 0.0) && !interior_ok) {
            throw Error(ErrorCode::NoConvergence, "MLE did not converge after restarts and the OLS residuals are not wrongly skewed");
        }
        const double s2 = ols.residuals.squaredNorm() / static_cast<double>(n);
        fit.coefficients = ols.coefficients;
        fit.sigma = CompositeErrorParams{0.0, s2};
        fit.loglik = boundary_ll;
        fit.converged = true;
        fit.boundary_solution = true;
        fit.gradient_norm = 0.0;
        fit.std_errors.resize(k + 2);
        fit.std_errors.head(k) = (s2 * ols.xtx_inverse->diagonal()).cwiseSqrt();
        fit.std_errors(k) = s2 * std::sqrt(2.0 / static_cast<double>(n));
        fit.std_errors(k + 1) = std::nan("");
        fit.diagnostics.push_back("boundary solution gamma = 0 (OLS residual third moment " + std::to_string(m3) + ")");
        return fit;
    }

    fit.coefficients = best.theta.head(k);
    fit.sigma = unpack_params(best.theta);
    fit.loglik = best.loglik;
    fit.converged = true;
    fit.gradient_norm = best.gradient_norm;

    // Standard errors: inverse negative Hessian of the summed log-likelihood,
    // mapped to (b, sigma^2, gamma) by the delta method.
    auto grad_sum = [&](const VectorXd& t, VectorXd& out) {
        out = loglik(t, W, y, true).grad;
    };
    const MatrixXd H = fd_hessian<double>(grad_sum, best.theta);
    Eigen::LDLT<MatrixXd> ldlt(-H);
    fit.std_errors = VectorXd::Constant(k + 2, std::nan(""));
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        const MatrixXd cov = ldlt.solve(MatrixXd::Identity(k + 2, k + 2));
        VectorXd jac = VectorXd::Ones(k + 2);
        const double g = fit.sigma.gamma();
        jac(k) = fit.sigma.sigma_sq();
        jac(k + 1) = g * (1.0 - g);
        for (Index j = 0; j < k + 2; ++j) {
            const double v = cov(j, j) * jac(j) * jac(j);
            fit.std_errors(j) = v > 0.0 ? std::sqrt(v) : std::nan("");
        }
    } else {
        fit.diagnostics.push_back("negative Hessian not positive definite; standard errors unavailable");
    }
    return fit;
}

MleFit mle_fit(const Dataset& data, const Support& support, const MleOptions& opts)
{
    return mle_fit(data.design(support), data.y, opts);
}

std::vector<double> profile_gamma(const Dataset& data, const Support& support, const std::vector<double>& gamma_grid,
                                  const MleOptions& opts)
{
    const MatrixXd W = data.design(support);
    const VectorXd& y = data.y;
    const Index k = W.cols();
    const double n = static_cast<double>(y.size());
    const auto ols = ols_solve<double>(W, y, false);
    const double s2_ols = ols.residuals.squaredNorm() / n;

    std::vector<double> out;
    out.reserve(gamma_grid.size());
    for (double g : gamma_grid) {
        if (!(g >= 0.0 && g < 1.0)) throw Error(ErrorCode::InvalidParams, "gamma grid must lie in [0,1)");
        if (g == 0.0) {
            out.push_back(gaussian_loglik(ols.residuals));
            continue;
        }
        const double logit = std::log(g / (1.0 - g));
        auto reduced = [&](const VectorXd& x, VectorXd& grad) {
            VectorXd theta(k + 2);
            theta.head(k + 1) = x;
            theta(k + 1) = logit;
            LogLikEval ev;
            try {
                ev = loglik(theta, W, y, true);
            } catch (const Error&) {
                grad.setZero(x.size());
                return std::numeric_limits<double>::infinity();
            }
            grad = -ev.grad.head(k + 1) / n;
            return -ev.value / n;
        };
        VectorXd start(k + 1);
        start.head(k) = ols.coefficients;
        start(0) += std::sqrt(2.0 / kPi) * std::sqrt(g * s2_ols);
        start(k) = std::log(s2_ols);
        BfgsOptions bo;
        bo.max_iterations = opts.max_iterations;
        bo.gradient_tolerance = opts.gradient_tolerance * 1e-2;
        const auto r = bfgs_minimize<double>(reduced, start, bo);
        out.push_back(-r.value * n);
    }
    return out;
}

FrontierFit mle_frontier_fit(const Dataset& data, const Support& support, const MleOptions& opts)
{
    const MleFit m = mle_fit(data, support, opts);
    const Index k = m.coefficients.size();
    FrontierFit f;
    f.method = "MLE";
    f.names = data.design_names(support);
    f.coefficients = m.coefficients;
    f.std_errors = m.std_errors.head(k);
    f.sigma_sq_se = m.std_errors(k);
    f.gamma_se = m.std_errors(k + 1);
    f.num_mandatory = data.p();
    f.support = support;
    f.input_terms = data.input_terms;
    f.sigma = m.sigma;
    f.residuals = data.y - data.design(support) * m.coefficients;
    f.efficiency = efficiency_scores(f.residuals, m.sigma, opts.efficiency);
    f.mean_efficiency = f.efficiency.mean();
    f.wrong_skew = m.ols_third_moment > 0.0;
    const double n = static_cast<double>(data.n());
    const VectorXd ols_resid = partial_out<double>(data.y, data.design(support));
    const double m2 = ols_resid.squaredNorm() / n;
    f.raw_skewness = m2 > 0.0 ? (ols_resid.array().cube().sum() / n) / std::pow(m2, 1.5) : 0.0;
    f.loglik = m.loglik;
    f.converged = m.converged;
    f.boundary_solution = m.boundary_solution;
    f.diagnostics = m.diagnostics;
    return f;
}

} // namespace sfa
