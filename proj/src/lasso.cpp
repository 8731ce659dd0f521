#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>
#include <sfa/error.hpp>
#include <sfa/lasso.hpp>
#include <sfa/normal.hpp>

namespace sfa {

namespace {

// Columns whose residualized squared norm (per row) falls below this are frozen at zero.
constexpr double kFrozenColumn = 1e-13;

// Early path termination, as in common CV software: stop once the fraction of
// explained variation is nearly saturated or stops moving.
constexpr double kDevRatioMax = 0.999;
constexpr double kDevChangeMin = 1e-5;
constexpr int kMinPathLevels = 5;

// Unconverged active-set sweeps before trying an exact orthant step.
constexpr int kSweepsBeforeOrthantStep = 50;

double soft_threshold(double z, double t)
{
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

std::vector<std::uint8_t> resolve_mask(const std::vector<std::uint8_t>& mask, Index k)
{
    if (static_cast<Index>(mask.size()) != k) {
        throw Error(ErrorCode::DimensionMismatch, "penalty mask length differs from design width");
    }
    return mask;
}

} // namespace

LassoProblem::LassoProblem(const VectorXd& y, const MatrixXd& W, const std::vector<std::uint8_t>& mask, bool standardize)
    : n_(y.size()), k_(W.cols())
{
    if (W.rows() != n_) throw Error(ErrorCode::DimensionMismatch, "response length differs from design rows");
    if (n_ < 2) throw Error(ErrorCode::EmptyData, "lasso needs n >= 2");
    resolve_mask(mask, k_);
    for (Index j = 0; j < k_; ++j) (mask[j] ? pen_ : unpen_).push_back(j);

    const Index d = num_penalized();
    const Index k0 = static_cast<Index>(unpen_.size());
    Pt_ = W(Eigen::all, pen_);
    w_ = VectorXd::Ones(d);
    if (standardize) {
        for (Index j = 0; j < d; ++j) {
            const double s = sample_sd(Pt_.col(j));
            w_(j) = s > 0.0 ? s : 1.0;
        }
    }
    yt_ = y;
    if (k0 > 0) {
        if (k0 >= n_) throw Error(ErrorCode::RankDeficient, "unpenalized block has at least as many columns as rows");
        const MatrixXd U = W(Eigen::all, unpen_);
        Eigen::HouseholderQR<MatrixXd> qr(U);
        detail::check_rank(qr, k0, "lasso unpenalized block");
        const MatrixXd Q1 = qr.householderQ() * MatrixXd::Identity(n_, k0);
        const auto R = qr.matrixQR().topLeftCorner(k0, k0).triangularView<Eigen::Upper>();
        const MatrixXd QtP = Q1.transpose() * Pt_;
        const VectorXd Qty = Q1.transpose() * y;
        Pt_.noalias() -= Q1 * QtP;
        yt_.noalias() -= Q1 * Qty;
        coef_map_ = R.solve(QtP);
        b0_ = R.solve(Qty);
    }
    cdiag_ = Pt_.colwise().squaredNorm().transpose() / static_cast<double>(n_);
    scale_ = yt_.squaredNorm() / static_cast<double>(n_);
}

double LassoProblem::lambda_max() const
{
    if (num_penalized() == 0) return 0.0;
    const VectorXd g = (2.0 / static_cast<double>(n_)) * (Pt_.transpose() * yt_);
    return (g.cwiseAbs().array() / w_.array()).maxCoeff();
}

double LassoProblem::objective(const VectorXd& delta, double level) const
{
    const VectorXd r = yt_ - Pt_ * delta;
    return r.squaredNorm() / static_cast<double>(n_) + level * w_.cwiseProduct(delta).lpNorm<1>();
}

VectorXd LassoProblem::full_coefficients(const VectorXd& delta) const
{
    VectorXd theta = VectorXd::Zero(k_);
    for (std::size_t j = 0; j < pen_.size(); ++j) theta(pen_[j]) = delta(static_cast<Index>(j));
    if (!unpen_.empty()) {
        VectorXd b = b0_;
        for (Index j = 0; j < delta.size(); ++j) {
            if (delta(j) != 0.0) b.noalias() -= delta(j) * coef_map_.col(j);
        }
        for (std::size_t j = 0; j < unpen_.size(); ++j) theta(unpen_[j]) = b(static_cast<Index>(j));
    }
    return theta;
}

namespace {

struct CdState
{
    VectorXd r;     // residual yt - Pt delta
    VectorXd grad;  // (2/n) Pt' r
};

} // namespace

LassoFit LassoProblem::solve(double level, VectorXd& delta, const Options& opts, VectorXd* grad_cache) const
{
    const Index d = num_penalized();
    const double n = static_cast<double>(n_);
    if (delta.size() != d) delta = VectorXd::Zero(d);
    if (!(level >= 0.0)) throw Error(ErrorCode::InvalidParams, "penalty level must be non-negative");

    CdState st;
    st.r = yt_;
    for (Index j = 0; j < d; ++j) {
        if (delta(j) != 0.0) st.r.noalias() -= delta(j) * Pt_.col(j);
    }
    if (grad_cache && grad_cache->size() == d) {
        st.grad = *grad_cache;
    } else {
        st.grad = (2.0 / n) * (Pt_.transpose() * st.r);
    }

    // Converged when the largest coordinate move, measured on the fitted scale, is below tol * sd(yt).
    const double thr = opts.tolerance * opts.tolerance * std::max(scale_, 1e-300);
    long sweeps = 0;

    auto push_trace = [&]() {
        if (opts.objective_trace) {
            opts.objective_trace->push_back(st.r.squaredNorm() / n + level * w_.cwiseProduct(delta).lpNorm<1>());
        }
    };

    auto sweep = [&](const std::vector<Index>& set) {
        double max_move = 0.0;
        for (Index j : set) {
            const double c = cdiag_(j);
            if (c < kFrozenColumn) continue;
            const double old = delta(j);
            const double z = Pt_.col(j).dot(st.r) / n + c * old;
            const double upd = soft_threshold(z, 0.5 * level * w_(j)) / c;
            if (upd != old) {
                st.r.noalias() -= (upd - old) * Pt_.col(j);
                delta(j) = upd;
                max_move = std::max(max_move, c * (upd - old) * (upd - old));
            }
        }
        ++sweeps;
        push_trace();
        if (sweeps > opts.max_sweeps) {
            throw Error(ErrorCode::NoConvergence, "coordinate descent exceeded the sweep limit");
        }
        return max_move;
    };

    // Strong set: current actives plus coordinates close to the KKT boundary.
    std::vector<char> in_strong(static_cast<std::size_t>(d), 0);
    std::vector<Index> strong;
    double prev = opts.previous_level;
    if (!(prev >= level)) {
        prev = level;
        for (Index j = 0; j < d; ++j) prev = std::max(prev, std::abs(st.grad(j)) / w_(j));
    }
    const double screen = std::max(2.0 * level - prev, 0.0);
    for (Index j = 0; j < d; ++j) {
        if (delta(j) != 0.0 || std::abs(st.grad(j)) >= screen * w_(j)) {
            in_strong[static_cast<std::size_t>(j)] = 1;
            strong.push_back(j);
        }
    }

    // Exact minimizer of the quadratic on the current orthant of the active
    // coordinates, approached along the segment until the first sign change.
    auto orthant_step = [&](const std::vector<Index>& active) {
        const Index a = static_cast<Index>(active.size());
        if (a == 0) return;
        MatrixXd PA(n_, a);
        VectorXd cur(a), sgn(a), wa(a);
        for (Index i = 0; i < a; ++i) {
            const Index j = active[static_cast<std::size_t>(i)];
            PA.col(i) = Pt_.col(j);
            cur(i) = delta(j);
            sgn(i) = cur(i) > 0.0 ? 1.0 : -1.0;
            wa(i) = w_(j);
        }
        MatrixXd G(a, a);
        G.setZero();
        G.selfadjointView<Eigen::Lower>().rankUpdate(PA.transpose());
        Eigen::LDLT<MatrixXd> ldlt(G);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
        const VectorXd rhs = PA.transpose() * yt_ - (0.5 * n * level) * wa.cwiseProduct(sgn);
        const VectorXd target = ldlt.solve(rhs);
        if (!target.allFinite()) return;
        double t = 1.0;
        for (Index i = 0; i < a; ++i) {
            if (target(i) * sgn(i) <= 0.0) t = std::min(t, cur(i) / (cur(i) - target(i)));
        }
        for (Index i = 0; i < a; ++i) {
            const Index j = active[static_cast<std::size_t>(i)];
            double v = cur(i) + t * (target(i) - cur(i));
            if (target(i) * sgn(i) <= 0.0 && cur(i) / (cur(i) - target(i)) <= t) v = 0.0;
            delta(j) = v;
        }
        st.r = yt_ - Pt_ * delta;
        ++sweeps;
        push_trace();
    };

    for (;;) {
        for (;;) {
            const double move = sweep(strong);
            if (move < thr) break;
            std::vector<Index> active;
            for (Index j : strong) {
                if (delta(j) != 0.0) active.push_back(j);
            }
            int slow = 0;
            while (sweep(active) >= thr) {
                if (++slow % kSweepsBeforeOrthantStep == 0) {
                    orthant_step(active);
                    active.erase(std::remove_if(active.begin(), active.end(), [&](Index j) { return delta(j) == 0.0; }),
                                 active.end());
                }
            }
        }
        st.grad.noalias() = (2.0 / n) * (Pt_.transpose() * st.r);
        bool added = false;
        for (Index j = 0; j < d; ++j) {
            if (in_strong[static_cast<std::size_t>(j)] || cdiag_(j) < kFrozenColumn) continue;
            if (std::abs(st.grad(j)) > level * w_(j)) {
                in_strong[static_cast<std::size_t>(j)] = 1;
                strong.push_back(j);
                added = true;
            }
        }
        if (!added) break;
    }
    if (grad_cache) *grad_cache = st.grad;

    LassoFit fit;
    fit.coefficients = full_coefficients(delta);
    for (std::size_t j = 0; j < pen_.size(); ++j) {
        if (delta(static_cast<Index>(j)) != 0.0) fit.support.push_back(static_cast<Index>(j));
    }
    fit.penalty_level = {level};
    fit.residuals = st.r;
    fit.objective = st.r.squaredNorm() / n + level * w_.cwiseProduct(delta).lpNorm<1>();
    fit.sweeps = sweeps;
    return fit;
}

std::vector<LassoFit> LassoProblem::path(const std::vector<double>& grid, const Options& opts) const
{
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] < grid[i - 1])) throw Error(ErrorCode::InvalidParams, "penalty grid must be strictly decreasing");
    }
    std::vector<LassoFit> out;
    out.reserve(grid.size());
    VectorXd delta = VectorXd::Zero(num_penalized());
    VectorXd grad;
    Options o = opts;
    const double null_dev = yt_.squaredNorm();
    double prev_ratio = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        o.previous_level = i == 0 ? -1.0 : grid[i - 1];
        out.push_back(solve(grid[i], delta, o, &grad));
        if (opts.early_stop && null_dev > 0.0 && static_cast<int>(i) + 1 >= kMinPathLevels) {
            const double ratio = 1.0 - out.back().residuals.squaredNorm() / null_dev;
            if (ratio > kDevRatioMax || ratio - prev_ratio < kDevChangeMin * ratio) break;
            prev_ratio = ratio;
        } else if (null_dev > 0.0) {
            prev_ratio = 1.0 - out.back().residuals.squaredNorm() / null_dev;
        }
    }
    return out;
}

std::vector<std::uint8_t> default_mask(const Dataset& data)
{
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(data.p() + data.d()), 0);
    std::fill(mask.begin() + data.p(), mask.end(), 1);
    return mask;
}

std::vector<double> make_grid(double lambda_max, int size, double min_ratio)
{
    if (size < 1) throw Error(ErrorCode::InvalidParams, "grid size must be positive");
    if (!(lambda_max > 0.0) || size == 1) return {std::max(lambda_max, 0.0)};
    if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw Error(ErrorCode::InvalidParams, "grid ratio must lie in (0,1)");
    std::vector<double> grid(static_cast<std::size_t>(size));
    const double step = std::log(min_ratio) / static_cast<double>(size - 1);
    for (int i = 0; i < size; ++i) grid[static_cast<std::size_t>(i)] = lambda_max * std::exp(step * i);
    return grid;
}

namespace {

LassoProblem::Options solver_options(const PenaltyPlan& plan)
{
    LassoProblem::Options o;
    o.tolerance = plan.tolerance;
    o.max_sweeps = plan.max_sweeps;
    return o;
}

std::vector<double> plan_grid(const LassoProblem& prob, const PenaltyPlan& plan)
{
    if (!plan.grid.empty()) return plan.grid;
    double ratio = plan.min_ratio;
    if (!(ratio > 0.0)) ratio = prob.n() > prob.num_penalized() ? 1e-4 : 1e-2;
    return make_grid(prob.lambda_max(), plan.grid_size, ratio);
}

const std::vector<std::uint8_t>& mask_for(const MatrixXd& W, const PenaltyPlan& plan)
{
    if (plan.mask.empty()) {
        throw Error(ErrorCode::InvalidConfig, "penalty plan needs a mask for a bare design");
    }
    resolve_mask(plan.mask, W.cols());
    return plan.mask;
}

PenaltyPlan with_default_mask(const Dataset& data, PenaltyPlan plan)
{
    if (plan.mask.empty()) plan.mask = default_mask(data);
    return plan;
}

} // namespace

std::vector<LassoFit> lasso_path(const VectorXd& y, const MatrixXd& W, const PenaltyPlan& plan)
{
    const LassoProblem prob(y, W, mask_for(W, plan), plan.standardize);
    auto o = solver_options(plan);
    o.early_stop = plan.early_stop && plan.grid.empty();
    return prob.path(plan_grid(prob, plan), o);
}

std::vector<LassoFit> lasso_path(const Dataset& data, const PenaltyPlan& plan)
{
    return lasso_path(data.y, data.design(all_columns(data.d())), with_default_mask(data, plan));
}

std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed)
{
    if (folds < 2 || n < folds) throw Error(ErrorCode::DegenerateFolds, "need n >= folds >= 2");
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold(static_cast<std::size_t>(n));
    for (Index pos = 0; pos < n; ++pos) {
        fold[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos)])] = static_cast<int>(pos * folds / n);
    }
    return fold;
}

std::pair<std::size_t, std::size_t> one_se_indices(const std::vector<CvPoint>& curve)
{
    if (curve.empty()) throw Error(ErrorCode::InvalidParams, "empty cross-validation curve");
    std::size_t imin = 0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i].mean_error < curve[imin].mean_error) imin = i;
    }
    const double bound = curve[imin].mean_error + curve[imin].se_error;
    std::size_t i1se = imin;
    for (std::size_t i = 0; i <= imin; ++i) {
        if (curve[i].mean_error <= bound) {
            i1se = i;
            break;
        }
    }
    return {imin, i1se};
}

CvResult cv_select(const VectorXd& y, const MatrixXd& W, const PenaltyPlan& plan)
{
    const auto& mask = mask_for(W, plan);
    const Index n = y.size();
    std::vector<double> grid = plan.grid;
    if (grid.empty()) {
        const LassoProblem full(y, W, mask, plan.standardize);
        grid = plan_grid(full, plan);
    }
    const auto fold = fold_assignment(n, plan.folds, plan.seed);
    const int K = plan.folds;
    const std::size_t L = grid.size();

    struct FoldState
    {
        std::optional<LassoProblem> prob;
        MatrixXd Wte;
        VectorXd yte;
        VectorXd delta;
        VectorXd grad;
    };
    std::vector<FoldState> fs(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        std::vector<Index> train, test;
        for (Index i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
        auto& f = fs[static_cast<std::size_t>(k)];
        try {
            f.prob.emplace(select_rows<double>(y, train), select_rows<double>(W, train), mask, plan.standardize);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::RankDeficient) {
                throw Error(ErrorCode::DegenerateFolds, "training fold " + std::to_string(k) + ": " + e.what());
            }
            throw;
        }
        f.Wte = select_rows<double>(W, test);
        f.yte = select_rows<double>(y, test);
    }

    LassoProblem::Options o = solver_options(plan);
    o.tolerance = plan.cv_tolerance;
    MatrixXd err(K, static_cast<Index>(L));
    auto solve_fold = [&](int k, std::size_t l) {
        auto& f = fs[static_cast<std::size_t>(k)];
        LassoProblem::Options ok = o;
        ok.previous_level = l == 0 ? -1.0 : grid[l - 1];
        const LassoFit fit = f.prob->solve(grid[l], f.delta, ok, &f.grad);
        err(k, static_cast<Index>(l)) = (f.yte - f.Wte * fit.coefficients).squaredNorm() / static_cast<double>(f.yte.size());
    };

    // Folds advance through the grid in lockstep so the curve can be cut once
    // its mean has climbed well past the running minimum.
    CvResult res;
    double best = std::numeric_limits<double>::infinity();
    const int workers = std::clamp(plan.workers, 1, K);
    for (std::size_t l = 0; l < L; ++l) {
        if (workers == 1) {
            for (int k = 0; k < K; ++k) solve_fold(k, l);
        } else {
            std::vector<std::exception_ptr> failures(static_cast<std::size_t>(workers));
            std::vector<std::thread> pool;
            for (int t = 0; t < workers; ++t) {
                pool.emplace_back([&, t] {
                    try {
                        for (int k = t; k < K; k += workers) solve_fold(k, l);
                    } catch (...) {
                        failures[static_cast<std::size_t>(t)] = std::current_exception();
                    }
                });
            }
            for (auto& th : pool) th.join();
            for (auto& f : failures) {
                if (f) std::rethrow_exception(f);
            }
        }
        const auto col = err.col(static_cast<Index>(l));
        const double mean = col.mean();
        res.curve.push_back({grid[l], mean, sample_sd(col) / std::sqrt(static_cast<double>(K))});
        best = std::min(best, mean);
        if (plan.cv_truncate_ratio > 0.0 && mean > (1.0 + plan.cv_truncate_ratio) * best) break;
    }

    const auto [imin, i1se] = one_se_indices(res.curve);
    res.level_min = {res.curve[imin].level};
    res.level_1se = {res.curve[i1se].level};
    return res;
}

CvResult cv_select(const Dataset& data, const PenaltyPlan& plan)
{
    return cv_select(data.y, data.design(all_columns(data.d())), with_default_mask(data, plan));
}

PenaltyLevel plugin_level(Index n, Index d, double sigma_hat, double c, double alpha)
{
    if (n < 2 || d < 1) throw Error(ErrorCode::InvalidParams, "plug-in level needs n >= 2 and d >= 1");
    const double nn = static_cast<double>(n);
    if (!(alpha > 0.0)) alpha = 0.1 / std::log(nn);
    const double q = norm_quantile(1.0 - alpha / (2.0 * static_cast<double>(d)));
    return {2.0 * c * q * sigma_hat / std::sqrt(nn)};
}

namespace {

struct PluginOutcome
{
    PenaltyLevel level;
    LassoFit fit;
};

PluginOutcome plugin_iterate(const LassoProblem& prob, const VectorXd& y, const MatrixXd& W, const PenaltyPlan& plan)
{
    const Index n = prob.n();
    const Index d = prob.num_penalized();
    const auto& mask = plan.mask;
    std::vector<Index> unpen;
    for (Index j = 0; j < W.cols(); ++j) {
        if (!mask[static_cast<std::size_t>(j)]) unpen.push_back(j);
    }
    const Index k0 = static_cast<Index>(unpen.size());

    // Initial residuals: the response with the unpenalized block profiled out.
    const VectorXd r0 = partial_out<double>(y, select_columns<double>(W, unpen));
    double sigma = std::sqrt(r0.squaredNorm() / static_cast<double>(n - k0));

    auto o = solver_options(plan);
    VectorXd delta = VectorXd::Zero(d);
    PluginOutcome out;
    out.level = plugin_level(n, std::max<Index>(d, 1), sigma, plan.plugin_c, plan.plugin_alpha);
    if (d == 0) {
        out.fit = prob.solve(0.0, delta, o);
        return out;
    }
    for (int it = 0; it < plan.plugin_iterations; ++it) {
        out.fit = prob.solve(out.level.value, delta, o);
        const Index s = static_cast<Index>(out.fit.support.size());
        if (k0 + s < n) {
            std::vector<Index> cols = unpen;
            for (Index j : out.fit.support) cols.push_back(prob.penalized_columns()[static_cast<std::size_t>(j)]);
            const VectorXd r = partial_out<double>(y, select_columns<double>(W, cols));
            sigma = std::sqrt(r.squaredNorm() / static_cast<double>(n - k0 - s));
        } else {
            sigma = std::sqrt(out.fit.residuals.squaredNorm() / static_cast<double>(n));
        }
        out.level = plugin_level(n, d, sigma, plan.plugin_c, plan.plugin_alpha);
    }
    out.fit = prob.solve(out.level.value, delta, o);
    return out;
}

} // namespace

PenaltyLevel plugin_penalty(const VectorXd& y, const MatrixXd& W, const PenaltyPlan& plan)
{
    const LassoProblem prob(y, W, mask_for(W, plan), plan.standardize);
    return plugin_iterate(prob, y, W, plan).level;
}

PenaltyLevel plugin_penalty(const Dataset& data, const PenaltyPlan& plan)
{
    return plugin_penalty(data.y, data.design(all_columns(data.d())), with_default_mask(data, plan));
}

LassoFit lasso_select(const VectorXd& y, const MatrixXd& W, const PenaltyPlan& plan)
{
    const LassoProblem prob(y, W, mask_for(W, plan), plan.standardize);
    auto o = solver_options(plan);
    VectorXd delta;
    switch (plan.rule) {
    case PenaltyRule::Fixed:
        return prob.solve(plan.fixed_level.value, delta, o);
    case PenaltyRule::PlugIn:
        return plugin_iterate(prob, y, W, plan).fit;
    case PenaltyRule::CvMin:
    case PenaltyRule::Cv1se: {
        const CvResult cv = cv_select(y, W, plan);
        const double level = plan.rule == PenaltyRule::CvMin ? cv.level_min.value : cv.level_1se.value;
        // Walk the grid down to the chosen level so the solution matches the path.
        std::vector<double> grid;
        for (const auto& pt : cv.curve) {
            grid.push_back(pt.level);
            if (pt.level == level) break;
        }
        auto fits = prob.path(grid, o);
        LassoFit fit = std::move(fits.back());
        fit.cv_curve = cv.curve;
        return fit;
    }
    }
    throw Error(ErrorCode::InvalidConfig, "unknown penalty rule");
}

LassoFit lasso_select(const Dataset& data, const PenaltyPlan& plan)
{
    return lasso_select(data.y, data.design(all_columns(data.d())), with_default_mask(data, plan));
}

VectorXd penalty_weights(const MatrixXd& W, const std::vector<std::uint8_t>& mask, bool standardize)
{
    resolve_mask(mask, W.cols());
    VectorXd w = VectorXd::Ones(W.cols());
    if (!standardize) return w;
    for (Index j = 0; j < W.cols(); ++j) {
        if (!mask[static_cast<std::size_t>(j)]) continue;
        const double s = sample_sd(W.col(j));
        w(j) = s > 0.0 ? s : 1.0;
    }
    return w;
}

double kkt_violation(const VectorXd& y, const MatrixXd& W, const std::vector<std::uint8_t>& mask,
                     const VectorXd& weights, const VectorXd& coefficients, double level)
{
    resolve_mask(mask, W.cols());
    const VectorXd g = (2.0 / static_cast<double>(y.size())) * (W.transpose() * (y - W * coefficients));
    double worst = 0.0;
    for (Index j = 0; j < W.cols(); ++j) {
        double v;
        if (!mask[static_cast<std::size_t>(j)]) {
            v = std::abs(g(j));
        } else if (coefficients(j) != 0.0) {
            v = std::abs(g(j) - level * weights(j) * (coefficients(j) > 0.0 ? 1.0 : -1.0));
        } else {
            v = std::max(0.0, std::abs(g(j)) - level * weights(j));
        }
        worst = std::max(worst, v);
    }
    return worst;
}

} // namespace sfa
