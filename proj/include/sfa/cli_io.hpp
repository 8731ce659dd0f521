#pragma once
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>
#include <sfa/frontier_model.hpp>
#include <sfa/lasso.hpp>
#include <sfa/montecarlo.hpp>
#include <sfa/ortho.hpp>
#include <sfa/selectors.hpp>

namespace sfa {

inline constexpr const char* kVersion = "0.1.0";

enum class Command { Estimate, MonteCarlo, Ortho };

using Schema = std::vector<std::pair<std::string, ColumnRole>>;

struct RunConfig
{
    Command command = Command::Estimate;
    std::string input_path;
    std::string schema_path;
    Schema schema;
    FrontierSpec spec;
    Selector selector = Selector::PDL;
    Stage2 stage2 = Stage2::Cols;
    bool cross_fit = false;
    // Run all of {NoZ, AllZ, PSL, PDL} x {COLS, MLE}.
    bool compare = false;
    PenaltyPlan plan;
    Stage2Options stage2_options;
    std::uint64_t seed = 1;
    std::string output_path;

    // montecarlo
    DesignKind design = DesignKind::IrrelevantZ;
    std::vector<Index> grid_n{100, 200, 400, 800, 1600};
    std::vector<double> grid_c{0.0, 0.01, 0.1, 0.2, 0.3, 0.5, 0.9};
    int reps = 1000;
    int workers = 0;
    std::vector<EstimatorSpec> estimators{EstimatorSpec::ols()};
    std::vector<SummaryKind> summaries{SummaryKind::MeanSkewness, SummaryKind::WrongSkewCount};
    bool write_rep_level = false;

    // ortho
    Index ortho_n = 1000000;

    // Effective key/value pairs after overrides; the digest is taken over these.
    std::map<std::string, std::string> entries;
};

/// "key = value" lines; '#' starts a comment; blank lines ignored.
std::map<std::string, std::string> parse_key_values(std::istream& in);
std::map<std::string, std::string> read_key_value_file(const std::string& path);

/// Builds a config from key/value pairs. Unknown keys and bad values throw InvalidConfig.
RunConfig make_config(const std::map<std::string, std::string>& entries);

/// FNV-1a over the sorted "key=value" lines; the output directory is left out.
std::uint64_t config_digest(const std::map<std::string, std::string>& entries);

/// "# sfa <version> seed=<seed> config=<digest hex>"
std::string metadata_header(const RunConfig& cfg);

ColumnRole parse_role(const std::string& s);
const char* to_string(ColumnRole r);

/// "column,role" lines, optional header "column,role".
Schema read_schema(std::istream& in);
Schema read_schema_file(const std::string& path);

/// Columns come back in file order, restricted to the schema.
RawDataset load_csv(std::istream& in, const Schema& schema);
RawDataset load_csv(const std::string& path, const Schema& schema);

/// Writes level data with a header row and the matching "column,role" schema.
void write_csv(std::ostream& os, const RawDataset& raw);
void write_schema(std::ostream& os, const RawDataset& raw);

/// Fills output, mandatory (Input columns) and selectable (Selectable and Dummy columns) when left empty.
FrontierSpec resolve_spec(const FrontierSpec& spec, const RawDataset& raw);

struct CoefficientRow
{
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
};

struct EstimateReport
{
    std::string method;
    // Empty on success; in comparison mode a failed column keeps its message here.
    std::string error;
    std::vector<CoefficientRow> coefficients;
    Index num_mandatory = 0;
    std::vector<std::string> input_terms;
    double rts = 0.0;
    double mean_efficiency = 1.0;
    Index num_z = 0;
    bool wrong_skew = false;
    CompositeErrorParams sigma;
    std::optional<double> loglik;
    std::vector<double> penalty_levels;
    std::uint64_t seed = 0;
};

EstimateReport make_report(const FrontierFit& fit, const FrontierSpec& spec, const SelectionResult* selection,
                           Index n, std::uint64_t seed);

/// One estimation (or the 8-column comparison) on a prepared dataset.
std::vector<EstimateReport> estimate_dataset(const Dataset& data, const RunConfig& cfg);

/// Loads, expands and estimates; writes estimate.txt and estimate.csv under output_path when set.
std::vector<EstimateReport> run_estimate(const RunConfig& cfg);

/// Side-by-side table: coefficient rows with SEs in parentheses, then RTS, Mean Eff and Num Z.
void write_estimate_table(std::ostream& os, const std::vector<EstimateReport>& reports);
void write_estimate_csv(std::ostream& os, const std::vector<EstimateReport>& reports);

struct MonteCarloOutput
{
    McSummary summary;
    std::vector<std::string> files;
};

/// Runs every (n, c) cell; writes summary.csv and per-estimator n-by-c grids.
MonteCarloOutput run_montecarlo(const RunConfig& cfg);

/// Rows n, columns c, one value per cell of `cells` for the estimator.
void write_grid_csv(std::ostream& os, const std::vector<CellStats>& cells, const std::vector<Index>& grid_n,
                    const std::vector<double>& grid_c, const std::string& estimator, SummaryKind what);

struct OrthoOutput
{
    std::vector<OrthoReport> reports;
    RhoReport rho_demeaned;
    RhoReport rho_shifted;
    HomoskewnessReport homoskewness;
    std::string text;
};

/// Every moment at truth, A'' at a shifted delta, the rho condition and the homoskewness probe.
OrthoOutput run_ortho(const RunConfig& cfg);

/// Writes `content` prefixed by the metadata header to dir/name; returns the path.
std::string write_output(const RunConfig& cfg, const std::string& name, const std::string& content);

/// 0 success, 2 configuration, 3 data, 4 numerical.
int exit_code(ErrorKind k);

} // namespace sfa
