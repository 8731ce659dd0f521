#pragma once
#include <cstdint>
#include <optional>
#include <vector>
#include <Eigen/Dense>
#include <sfa/frontier_model.hpp>
#include <sfa/types.hpp>

namespace sfa {

/**
 * Penalty level in the solver's normalization,
 *   (1/n) ||y - W theta||^2 + level * sum_j w_j |theta_j|,
 * with conversions to the unnormalized convention
 *   ||y - W theta||^2 + lambda * sum_j w_j |theta_j|,  lambda = n * level.
 */
struct PenaltyLevel
{
    double value = 0.0;

    static PenaltyLevel from_sum_of_squares(double lambda, Index n) { return {lambda / static_cast<double>(n)}; }
    double sum_of_squares(Index n) const { return value * static_cast<double>(n); }
};

enum class PenaltyRule { Fixed, CvMin, Cv1se, PlugIn };

struct PenaltyPlan
{
    // 1 = penalized, per column of the design. Empty means: X unpenalized, Z penalized.
    std::vector<std::uint8_t> mask;
    PenaltyRule rule = PenaltyRule::Cv1se;
    PenaltyLevel fixed_level;
    int folds = 10;
    int grid_size = 100;
    // Smallest grid level relative to the largest; 0 picks 1e-4 (n > d) or 1e-2.
    double min_ratio = 0.0;
    // Explicit strictly decreasing grid; overrides grid_size/min_ratio.
    std::vector<double> grid;
    // Penalize coefficients on the standardized scale (weights w_j = column sd).
    bool standardize = true;
    double tolerance = 1e-8;
    // Looser tolerance for the fold fits, which only feed prediction errors.
    double cv_tolerance = 1e-4;
    // Stop the CV curve once its mean exceeds (1 + ratio) times the running minimum; 0 keeps the full grid.
    double cv_truncate_ratio = 0.2;
    long max_sweeps = 100000;
    std::uint64_t seed = 1;
    int workers = 1;
    double plugin_c = 1.1;
    // 0 means 0.1 / ln(n).
    double plugin_alpha = 0.0;
    int plugin_iterations = 5;
    // Truncate the full-data path once explained variation saturates.
    bool early_stop = true;
};

struct CvPoint
{
    double level;
    double mean_error;
    double se_error;
};

struct LassoFit
{
    // Original-scale coefficients over all design columns.
    VectorXd coefficients;
    // Penalized columns with nonzero coefficient (indices into Z for Dataset fits).
    Support support;
    PenaltyLevel penalty_level;
    VectorXd residuals;
    double objective = 0.0;
    long sweeps = 0;
    std::optional<std::vector<CvPoint>> cv_curve;
};

/**
 * One response against a design with unpenalized and penalized columns.
 * The unpenalized block (which must contain the intercept when the
 * response is not centered) is profiled out exactly; coordinate descent
 * runs on the residualized penalized block.
 */
class LassoProblem
{
public:
    LassoProblem(const VectorXd& y, const MatrixXd& W, const std::vector<std::uint8_t>& mask, bool standardize);

    Index n() const { return n_; }
    Index num_penalized() const { return static_cast<Index>(pen_.size()); }
    const std::vector<Index>& penalized_columns() const { return pen_; }
    const VectorXd& weights() const { return w_; }

    /// Smallest level at which every penalized coefficient is zero.
    double lambda_max() const;

    struct Options
    {
        double tolerance = 1e-8;
        long max_sweeps = 100000;
        // Level of the warm start, for screening; negative means unknown.
        double previous_level = -1.0;
        // Stop the path once explained variation saturates.
        bool early_stop = false;
        std::vector<double>* objective_trace = nullptr;
    };

    /// Solves at one level, warm-starting from delta (penalized coefficients).
    /// grad_cache, when given, holds (2/n) Pt'r at delta on entry and at the solution on exit.
    LassoFit solve(double level, VectorXd& delta, const Options& opts, VectorXd* grad_cache = nullptr) const;

    /// Warm-started path over a decreasing grid.
    std::vector<LassoFit> path(const std::vector<double>& grid, const Options& opts) const;

    /// Expands penalized coefficients into a full original-scale coefficient vector.
    VectorXd full_coefficients(const VectorXd& delta) const;

    double objective(const VectorXd& delta, double level) const;

private:
    Index n_ = 0;
    Index k_ = 0;
    std::vector<Index> unpen_;
    std::vector<Index> pen_;
    MatrixXd Pt_;        // penalized columns with the unpenalized block projected out
    VectorXd yt_;        // response, same projection
    MatrixXd coef_map_;  // unpenalized coefficients: b = b0 - coef_map * delta
    VectorXd b0_;
    VectorXd w_;         // penalty weights
    VectorXd cdiag_;     // ||Pt_j||^2 / n
    double scale_ = 1.0;
};

/// Default penalty mask for a dataset: X unpenalized, Z penalized.
std::vector<std::uint8_t> default_mask(const Dataset& data);

/// Log-spaced decreasing grid from lambda_max.
std::vector<double> make_grid(double lambda_max, int size, double min_ratio);

std::vector<LassoFit> lasso_path(const Dataset& data, const PenaltyPlan& plan);
std::vector<LassoFit> lasso_path(const VectorXd& y, const MatrixXd& W, const PenaltyPlan& plan);

struct CvResult
{
    PenaltyLevel level_min;
    PenaltyLevel level_1se;
    std::vector<CvPoint> curve;
};

/// K-fold cross-validation over the plan's grid (computed on the full data).
CvResult cv_select(const Dataset& data, const PenaltyPlan& plan);
CvResult cv_select(const VectorXd& y, const MatrixXd& W, const PenaltyPlan& plan);

/// Fold index (0..folds-1) of each observation: seeded permutation cut into contiguous blocks.
std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed);

/// One-standard-error rule on a curve ordered by decreasing level.
std::pair<std::size_t, std::size_t> one_se_indices(const std::vector<CvPoint>& curve);

/// 2 c Phi^{-1}(1 - alpha / (2 d)) sigma / sqrt(n), in solver normalization.
PenaltyLevel plugin_level(Index n, Index d, double sigma_hat, double c = 1.1, double alpha = 0.0);

PenaltyLevel plugin_penalty(const Dataset& data, const PenaltyPlan& plan);
PenaltyLevel plugin_penalty(const VectorXd& y, const MatrixXd& W, const PenaltyPlan& plan);

/// Fits at the level chosen by plan.rule.
LassoFit lasso_select(const VectorXd& y, const MatrixXd& W, const PenaltyPlan& plan);
LassoFit lasso_select(const Dataset& data, const PenaltyPlan& plan);

/// Per-column penalty weights implied by the plan (sd of penalized columns, else 1).
VectorXd penalty_weights(const MatrixXd& W, const std::vector<std::uint8_t>& mask, bool standardize);

/**
 * Largest violation of the optimality conditions on the original design:
 * |(2/n) W_j'(y - W theta) - level w_j sign(theta_j)| for active penalized j,
 * max(0, |(2/n) W_j'r| - level w_j) for inactive penalized j,
 * |(2/n) W_j'r| for unpenalized j.
 */
double kkt_violation(const VectorXd& y, const MatrixXd& W, const std::vector<std::uint8_t>& mask,
                     const VectorXd& weights, const VectorXd& coefficients, double level);

} // namespace sfa
