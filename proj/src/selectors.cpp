#include <algorithm>
#include <future>
#include <numeric>
#include <random>
#include <set>
#include <sfa/cols.hpp>
#include <sfa/error.hpp>
#include <sfa/selectors.hpp>

namespace sfa {

const char* to_string(Selector s)
{
    switch (s) {
        case Selector::None: return "NoZ";
        case Selector::All: return "AllZ";
        case Selector::PSL: return "PSL";
        case Selector::PDL: return "PDL";
    }
    return "?";
}

const char* to_string(Stage2 s)
{
    return s == Stage2::Cols ? "COLS" : "MLE";
}

std::string method_chain(Selector s, Stage2 m)
{
    return std::string(to_string(s)) + "-" + to_string(m);
}

SelectionResult psl_select(const Dataset& data, const PenaltyPlan& plan)
{
    PenaltyPlan p = plan;
    p.mask = default_mask(data);
    const LassoFit fit = lasso_select(data, p);
    SelectionResult out;
    out.method = Selector::PSL;
    out.support = fit.support;
    out.per_stage_supports = {fit.support};
    out.penalty_levels_used = {fit.penalty_level};
    return out;
}

SelectionResult pdl_select(const Dataset& data, const PenaltyPlan& plan)
{
    const Index n = data.n();
    const Index d = data.d();
    MatrixXd W(n, d + 1);
    W.col(0).setOnes();
    W.rightCols(d) = data.Z.values;
    PenaltyPlan p = plan;
    p.mask.assign(static_cast<std::size_t>(d + 1), 1);
    p.mask[0] = 0;

    std::vector<VectorXd> responses{data.y};
    for (Index j = 0; j < data.p(); ++j) {
        if (data.X.is_intercept_column(j)) continue;
        responses.push_back(data.X.values.col(j));
    }

    std::vector<LassoFit> fits(responses.size());
    if (plan.workers > 1 && responses.size() > 1) {
        PenaltyPlan inner = p;
        inner.workers = 1;
        std::vector<std::future<LassoFit>> jobs;
        for (const auto& r : responses) {
            jobs.push_back(std::async(std::launch::async, [&, r] { return lasso_select(r, W, inner); }));
        }
        for (std::size_t s = 0; s < jobs.size(); ++s) fits[s] = jobs[s].get();
    } else {
        for (std::size_t s = 0; s < responses.size(); ++s) fits[s] = lasso_select(responses[s], W, p);
    }

    SelectionResult out;
    out.method = Selector::PDL;
    std::set<Index> uni;
    for (const auto& f : fits) {
        out.per_stage_supports.push_back(f.support);
        out.penalty_levels_used.push_back(f.penalty_level);
        uni.insert(f.support.begin(), f.support.end());
    }
    out.support.assign(uni.begin(), uni.end());
    return out;
}

SelectionResult select_support(const Dataset& data, Selector s, const PenaltyPlan& plan)
{
    switch (s) {
        case Selector::PSL: return psl_select(data, plan);
        case Selector::PDL: return pdl_select(data, plan);
        case Selector::None: {
            SelectionResult out;
            out.method = Selector::None;
            return out;
        }
        case Selector::All: {
            SelectionResult out;
            out.method = Selector::All;
            out.support = all_columns(data.d());
            return out;
        }
    }
    throw Error(ErrorCode::InvalidConfig, "unknown selector");
}

FrontierFit post_fit(const Dataset& data, const SelectionResult& selection, Stage2 stage2, const Stage2Options& opts)
{
    const Index k = data.p() + static_cast<Index>(selection.support.size());
    const Index need = stage2 == Stage2::Mle ? k + kVarianceParams : k;
    if (data.n() <= need) {
        throw Error(ErrorCode::SupportTooLarge, "post-selection design has " + std::to_string(k) + " columns for "
                                                    + std::to_string(data.n()) + " observations");
    }
    FrontierFit fit;
    if (stage2 == Stage2::Cols) {
        fit = cols_frontier_fit(data, selection.support, opts.efficiency);
    } else {
        MleOptions mo = opts.mle;
        mo.efficiency = opts.efficiency;
        fit = mle_frontier_fit(data, selection.support, mo);
    }
    fit.method = method_chain(selection.method, stage2);
    return fit;
}

std::pair<std::vector<Index>, std::vector<Index>> split_halves(Index n, std::uint64_t seed)
{
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto mid = perm.begin() + n / 2;
    std::vector<Index> a(perm.begin(), mid), b(mid, perm.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return {a, b};
}

namespace {

std::string support_string(const Support& s)
{
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "}";
}

// Coefficient and squared-SE contributions of one half-fit on the union layout.
void scatter(const FrontierFit& f, Index p, const Support& uni, VectorXd& coef, VectorXd& var)
{
    for (Index j = 0; j < p; ++j) {
        coef(j) += f.coefficients(j);
        var(j) += f.std_errors(j) * f.std_errors(j);
    }
    for (std::size_t s = 0; s < f.support.size(); ++s) {
        const auto pos = std::lower_bound(uni.begin(), uni.end(), f.support[s]) - uni.begin();
        const Index j = p + static_cast<Index>(s);
        coef(p + pos) += f.coefficients(j);
        var(p + pos) += f.std_errors(j) * f.std_errors(j);
    }
}

} // namespace

CrossFitResult cross_fit(const Dataset& data, Selector s, const PenaltyPlan& plan, Stage2 stage2,
                         const std::vector<Index>& half_a, const std::vector<Index>& half_b, const Stage2Options& opts)
{
    if (data.n() < 40) throw Error(ErrorCode::SupportTooLarge, "cross-fitting needs n >= 40");
    CrossFitResult out;
    out.half_a = half_a;
    out.half_b = half_b;
    const Dataset da = data.subset_rows(half_a);
    const Dataset db = data.subset_rows(half_b);
    out.selection_a = select_support(da, s, plan);
    out.selection_b = select_support(db, s, plan);
    out.fit_on_b = post_fit(db, out.selection_a, stage2, opts);
    out.fit_on_a = post_fit(da, out.selection_b, stage2, opts);

    std::set<Index> u(out.selection_a.support.begin(), out.selection_a.support.end());
    u.insert(out.selection_b.support.begin(), out.selection_b.support.end());
    const Support uni(u.begin(), u.end());
    const Index p = data.p();
    const Index k = p + static_cast<Index>(uni.size());

    VectorXd coef = VectorXd::Zero(k), var = VectorXd::Zero(k);
    scatter(out.fit_on_b, p, uni, coef, var);
    scatter(out.fit_on_a, p, uni, coef, var);

    FrontierFit& f = out.fit;
    f.method = method_chain(s, stage2) + "-CF";
    f.names = data.design_names(uni);
    f.coefficients = 0.5 * coef;
    f.std_errors = 0.5 * var.cwiseSqrt();
    f.num_mandatory = p;
    f.support = uni;
    f.input_terms = data.input_terms;
    const auto& fa = out.fit_on_a;
    const auto& fb = out.fit_on_b;
    f.sigma = CompositeErrorParams{0.5 * (fa.sigma.sigma_u_sq + fb.sigma.sigma_u_sq),
                                   0.5 * (fa.sigma.sigma_v_sq + fb.sigma.sigma_v_sq)};
    f.sigma_sq_se = 0.5 * std::sqrt(fa.sigma_sq_se * fa.sigma_sq_se + fb.sigma_sq_se * fb.sigma_sq_se);
    f.gamma_se = 0.5 * std::sqrt(fa.gamma_se * fa.gamma_se + fb.gamma_se * fb.gamma_se);

    // Residuals and efficiency scores come from the fit computed on each observation's own half.
    const Index n = data.n();
    f.residuals.resize(n);
    f.efficiency.resize(n);
    for (std::size_t i = 0; i < half_a.size(); ++i) {
        f.residuals(half_a[i]) = fa.residuals(static_cast<Index>(i));
        f.efficiency(half_a[i]) = fa.efficiency(static_cast<Index>(i));
    }
    for (std::size_t i = 0; i < half_b.size(); ++i) {
        f.residuals(half_b[i]) = fb.residuals(static_cast<Index>(i));
        f.efficiency(half_b[i]) = fb.efficiency(static_cast<Index>(i));
    }
    f.mean_efficiency = f.efficiency.mean();
    f.raw_skewness = 0.5 * (fa.raw_skewness + fb.raw_skewness);
    f.wrong_skew = fa.wrong_skew || fb.wrong_skew;
    if (fa.loglik && fb.loglik) f.loglik = *fa.loglik + *fb.loglik;
    f.converged = fa.converged && fb.converged;
    f.boundary_solution = fa.boundary_solution || fb.boundary_solution;
    f.diagnostics.push_back("support selected on half A: " + support_string(out.selection_a.support));
    f.diagnostics.push_back("support selected on half B: " + support_string(out.selection_b.support));
    for (const auto& dmsg : fa.diagnostics) f.diagnostics.push_back("half A fit: " + dmsg);
    for (const auto& dmsg : fb.diagnostics) f.diagnostics.push_back("half B fit: " + dmsg);
    return out;
}

CrossFitResult cross_fit(const Dataset& data, Selector s, const PenaltyPlan& plan, Stage2 stage2, std::uint64_t seed,
                         const Stage2Options& opts)
{
    const auto [a, b] = split_halves(data.n(), seed);
    return cross_fit(data, s, plan, stage2, a, b, opts);
}

} // namespace sfa
