#pragma once
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>
#include <sfa/frontier_model.hpp>
#include <sfa/lasso.hpp>
#include <sfa/selectors.hpp>

namespace sfa {

using Rng = std::mt19937_64;

/// Engine for replication `rep`, stream `stream` of a run seeded with base_seed.
Rng replication_rng(std::uint64_t base_seed, std::uint64_t rep, std::uint64_t stream);

/// 64-bit seed derived the same way, for components that take a seed.
std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t rep, std::uint64_t stream);

struct IrrelevantZParams
{
    double beta0 = 1.0;
    std::vector<double> beta{0.3, 0.4, 0.38};
    double sigma_v = 0.5;  // standard deviation
    double sigma_u = 1.2;  // standard deviation of the pre-truncation Normal
};

/// Three N(0,1) inputs and round(c n) irrelevant N(0,1) columns in Z.
Dataset gen_irrelevant_z(Index n, double c, Rng& rng, const IrrelevantZParams& prm = {});
Dataset gen_irrelevant_z(Index n, double c, std::uint64_t seed, const IrrelevantZParams& prm = {});

struct BelloniParams
{
    Index d = 200;
    double rho = 0.5;
    double c_x = 0.8;
    double c_y = 0.6;
    double beta0 = 1.0;
    double beta = 1.0;
    double sigma_v_sq = 0.5;  // variance
    double sigma_u_sq = 1.2;  // variance of the pre-truncation Normal
};

/// delta_j = 1 / j^2, j = 1..d.
VectorXd belloni_delta(Index d);

/// Lower Cholesky factor of the Toeplitz matrix rho^|k-l|.
MatrixXd toeplitz_factor(Index d, double rho);

/// X = [1, x] with x = c_x Z delta + eta; Z has d correlated Normal columns.
Dataset gen_belloni_d1(Index n, Rng& rng, const BelloniParams& prm = {});
Dataset gen_belloni_d1(Index n, std::uint64_t seed, const BelloniParams& prm = {});

/// Population R^2 of x on Z: c_x^2 d'S d / (c_x^2 d'S d + 1).
double belloni_x_r2(const BelloniParams& prm = {});

struct FixtureParams
{
    int inputs = 5;
    int continuous = 39;
    // Eleven period dummies (one period is the base) plus one binary trait.
    int dummies = 12;
    // Z columns 0..relevant-1 shift the frontier; the next `inputs` columns drive the inputs only.
    int relevant = 6;
    double z_effect = 0.15;
    double sigma_v = 0.15;
    double sigma_u = 0.25;
    // Replace v - u by v + u, which skews residuals the wrong way.
    bool positive_skew = false;
};

/**
 * Level data shaped like a farm panel: one output ("Output"), `inputs`
 * positive inputs ("X1".."X5"), continuous selectables "Z1".. and 0/1
 * dummies "D1"...
 */
RawDataset gen_frontier_fixture(Index n, std::uint64_t seed, const FixtureParams& prm = {});

enum class DesignKind { IrrelevantZ, BelloniD1 };

struct EstimatorSpec
{
    enum class Kind { OlsResiduals, LassoResiduals, Frontier };
    std::string name;
    Kind kind = Kind::Frontier;
    Selector selector = Selector::None;
    Stage2 stage2 = Stage2::Cols;
    bool cross_fit = false;

    /// OLS of y on [X, Z]; residual moments only.
    static EstimatorSpec ols();
    /// Partially penalized LASSO at the plan's rule; residual moments only.
    static EstimatorSpec lasso();
    static EstimatorSpec chain(Selector s, Stage2 m, bool cross_fit = false);
};

enum class SummaryKind { MeanSkewness, WrongSkewCount, StandardizedDist, MeanEfficiencyDist };

struct McDesign
{
    DesignKind kind = DesignKind::IrrelevantZ;
    Index n = 400;
    double c = 0.0;
    int reps = 1000;
    std::uint64_t base_seed = 1;
    // 0 means hardware concurrency.
    int workers = 0;
    std::vector<EstimatorSpec> estimators;
    std::vector<SummaryKind> summaries{SummaryKind::MeanSkewness, SummaryKind::WrongSkewCount};
    PenaltyPlan plan;
    Stage2Options stage2;
    IrrelevantZParams irrelevant;
    BelloniParams belloni;
    bool keep_rep_level = true;

    std::string cell_label() const;
};

struct RepRecord
{
    int rep = 0;
    std::string estimator;
    bool failed = false;
    std::string error;
    double skewness = 0.0;
    bool wrong_skew = false;
    // Coefficient on the first non-intercept X column.
    double beta = std::numeric_limits<double>::quiet_NaN();
    double beta_se = std::numeric_limits<double>::quiet_NaN();
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double gamma_se = std::numeric_limits<double>::quiet_NaN();
    double sigma_u_sq = std::numeric_limits<double>::quiet_NaN();
    double mean_efficiency = std::numeric_limits<double>::quiet_NaN();
    bool boundary = false;
    Index num_z = 0;
};

// Mean efficiency at or above this counts as "no inefficiency found".
inline constexpr double kFullEfficiency = 0.999;

struct CellStats
{
    std::string cell;
    std::string estimator;
    int reps = 0;
    int failures = 0;
    double mean_skewness = 0.0;
    double se_skewness = 0.0;
    int wrong_skew_count = 0;
    double mean_beta = 0.0;
    double se_beta = 0.0;
    double mean_num_z = 0.0;
    double mean_efficiency = 0.0;
    int full_efficiency_count = 0;
    int boundary_count = 0;
    std::string first_error;
};

struct McSummary
{
    std::vector<CellStats> cells;
    std::vector<RepRecord> rep_level;
    std::vector<SummaryKind> summaries;

    const CellStats& cell(const std::string& estimator) const;
};

/// Runs all replications on a worker pool; aggregation is in replication order.
McSummary run_design(const McDesign& design);

/// One replication, as run_design does it.
std::vector<RepRecord> run_replication(const McDesign& design, int rep);

/// Aggregates records (any order) into per-estimator cells.
std::vector<CellStats> aggregate(const std::string& cell_label, const std::vector<EstimatorSpec>& estimators,
                                 std::vector<RepRecord> records);

struct StandardizedDist
{
    std::vector<double> values;
    std::vector<double> edges;
    std::vector<int> counts;
    double mean = 0.0;
    double sd = 0.0;
    int missing_se = 0;
};

enum class McParam { Beta, Gamma };

/// (theta_hat - theta0) / SE per replication, binned on [lo, hi].
StandardizedDist standardized_dist(const std::vector<RepRecord>& rep_level, const std::string& estimator,
                                   McParam parameter, double theta0, int bins = 40, double lo = -4.0, double hi = 4.0);

void write_summary_csv(std::ostream& os, const McSummary& s);
void write_rep_csv(std::ostream& os, const std::vector<RepRecord>& recs);

} // namespace sfa
