#pragma once
#include <optional>
#include <string>
#include <vector>
#include <sfa/core_linalg.hpp>
#include <sfa/types.hpp>

namespace sfa {

using Design = DesignMatrix<double>;

/**
 * Estimation-ready data: log output y, mandatory block X (intercept in
 * column 0) and selectable block Z. All share the same row count.
 */
struct Dataset
{
    VectorXd y;
    Design X;
    Design Z;
    // Names of first-order log-input terms, wherever they live (X or Z).
    std::vector<std::string> input_terms;

    Index n() const { return y.size(); }
    Index p() const { return X.cols(); }
    Index d() const { return Z.cols(); }

    // Throws DimensionMismatch / UnknownColumn on inconsistent blocks.
    void validate() const;

    // [X, Z_support] as one matrix.
    MatrixXd design(const Support& support) const;
    std::vector<std::string> design_names(const Support& support) const;

    Dataset subset_rows(const std::vector<Index>& rows) const;
};

/// Support {0, ..., d-1}.
inline Support all_columns(Index d)
{
    Support s(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) s[static_cast<std::size_t>(j)] = j;
    return s;
}

/// Dataset whose X holds only an intercept and whose Z is the given block.
Dataset make_dataset(VectorXd y, MatrixXd X_no_intercept, MatrixXd Z,
                     std::vector<std::string> x_names = {}, std::vector<std::string> z_names = {});

enum class ColumnRole { Output, Input, Selectable, Dummy };

struct RawColumn
{
    std::string name;
    ColumnRole role;
    VectorXd values;
};

/// Data in levels as read from disk, before logs and expansions.
struct RawDataset
{
    std::vector<RawColumn> columns;

    Index n() const { return columns.empty() ? 0 : columns.front().values.size(); }
    const RawColumn* find(const std::string& name) const;
};

enum class FunctionalForm { CobbDouglas, Translog };

struct FrontierSpec
{
    FunctionalForm form = FunctionalForm::CobbDouglas;
    std::string output;
    std::vector<std::string> mandatory;
    // Selectable names. A name whose raw role is Input enters Z in log form.
    std::vector<std::string> selectable;
    // Translog second-order terms go to Z instead of X.
    bool second_order_optional = false;
    bool mean_deviate_logs = true;
};

/**
 * Composite-error variances. sigma_u_sq = 0 is the no-inefficiency
 * boundary.
 */
struct CompositeErrorParams
{
    double sigma_u_sq = 0.0;
    double sigma_v_sq = 1.0;

    double sigma_sq() const { return sigma_u_sq + sigma_v_sq; }
    double sigma_u() const;
    double sigma_v() const;
    double lambda() const;
    double gamma() const { return sigma_u_sq / sigma_sq(); }

    static CompositeErrorParams from_sd(double sigma_u, double sigma_v);
    static CompositeErrorParams from_gamma(double sigma_sq, double gamma);

    void validate() const;
};

/// Result of any second-stage estimator, in the layout [X, Z_support].
struct FrontierFit
{
    std::string method;
    std::vector<std::string> names;
    VectorXd coefficients;
    VectorXd std_errors;
    Index num_mandatory = 0;
    Support support;
    // First-order log-input terms of the data this fit was computed on.
    std::vector<std::string> input_terms;
    CompositeErrorParams sigma;
    double sigma_sq_se = 0.0;
    double gamma_se = 0.0;
    // Composite residuals y - frontier.
    VectorXd residuals;
    VectorXd efficiency;
    double mean_efficiency = 1.0;
    double raw_skewness = 0.0;
    bool wrong_skew = false;
    std::optional<double> loglik;
    bool converged = true;
    bool boundary_solution = false;
    std::vector<std::string> diagnostics;

    std::optional<Index> index_of(const std::string& name) const;
};

/// Logs, centering and translog expansion of a level dataset.
Dataset expand_spec(const RawDataset& raw, const FrontierSpec& spec);

/// Number of technology terms (first plus second order) for p inputs.
Index technology_terms(FunctionalForm form, Index p);

/**
 * Sum of first-order input elasticities. Inputs that were selectable and
 * not selected contribute zero; a missing mandatory input is an error.
 */
double returns_to_scale(const FrontierFit& fit, const FrontierSpec& spec);

/// Same, over an explicit list of first-order term names.
double returns_to_scale(const FrontierFit& fit, const std::vector<std::string>& mandatory_inputs,
                        const std::vector<std::string>& optional_inputs = {});

} // namespace sfa
