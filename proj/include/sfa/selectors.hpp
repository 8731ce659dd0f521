#pragma once
#include <cstdint>
#include <string>
#include <vector>
#include <sfa/frontier_model.hpp>
#include <sfa/lasso.hpp>
#include <sfa/mle.hpp>

namespace sfa {

enum class Selector { None, All, PSL, PDL };
enum class Stage2 { Cols, Mle };

const char* to_string(Selector s);
const char* to_string(Stage2 s);

/// "PSL-COLS", "PDL-MLE", "NoZ-COLS", "AllZ-MLE", ...
std::string method_chain(Selector s, Stage2 m);

struct SelectionResult
{
    Support support;
    // One entry for PSL, 1 + (non-intercept X columns) for PDL.
    std::vector<Support> per_stage_supports;
    Selector method = Selector::PSL;
    std::vector<PenaltyLevel> penalty_levels_used;
};

/// One LASSO of y on [X unpenalized, Z penalized].
SelectionResult psl_select(const Dataset& data, const PenaltyPlan& plan);

/**
 * LASSO of y on Z, then of each non-intercept X column on Z, each with
 * its own penalty choice; the support is the union.
 */
SelectionResult pdl_select(const Dataset& data, const PenaltyPlan& plan);

/// Dispatch including the trivial selectors (None: empty, All: every Z column).
SelectionResult select_support(const Dataset& data, Selector s, const PenaltyPlan& plan);

struct Stage2Options
{
    MleOptions mle;
    EfficiencyMetric efficiency = EfficiencyMetric::ConditionalMean;
};

/// Second-stage COLS or MLE restricted to the selected support.
FrontierFit post_fit(const Dataset& data, const SelectionResult& selection, Stage2 stage2,
                     const Stage2Options& opts = {});

struct CrossFitResult
{
    FrontierFit fit;
    // Support selected on each half (first: selected on half A, fitted on B).
    SelectionResult selection_a;
    SelectionResult selection_b;
    FrontierFit fit_on_b;
    FrontierFit fit_on_a;
    std::vector<Index> half_a;
    std::vector<Index> half_b;
};

/**
 * Two-fold cross-fitting: select on one half, fit on the other, swap, and
 * average. Coefficients live on [X, union of both supports]; a column
 * selected in only one half enters the other half's vector as zero.
 * Standard errors combine as sqrt((se_1^2 + se_2^2) / 4).
 */
CrossFitResult cross_fit(const Dataset& data, Selector s, const PenaltyPlan& plan, Stage2 stage2,
                         std::uint64_t seed, const Stage2Options& opts = {});

/// Same with explicit halves.
CrossFitResult cross_fit(const Dataset& data, Selector s, const PenaltyPlan& plan, Stage2 stage2,
                         const std::vector<Index>& half_a, const std::vector<Index>& half_b,
                         const Stage2Options& opts = {});

/// Seeded random split into two halves of sizes floor(n/2) and ceil(n/2).
std::pair<std::vector<Index>, std::vector<Index>> split_halves(Index n, std::uint64_t seed);

} // namespace sfa
