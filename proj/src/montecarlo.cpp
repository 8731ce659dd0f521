#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <thread>
#include <sfa/error.hpp>
#include <sfa/montecarlo.hpp>
#include <sfa/sfa_likelihood.hpp>

namespace sfa {

std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t rep, std::uint64_t stream)
{
    const std::uint64_t s = base_seed + rep;
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
}

Rng replication_rng(std::uint64_t base_seed, std::uint64_t rep, std::uint64_t stream)
{
    return Rng(replication_seed(base_seed, rep, stream));
}

namespace {

MatrixXd normal_matrix(Index rows, Index cols, Rng& rng)
{
    std::normal_distribution<double> N(0.0, 1.0);
    MatrixXd m(rows, cols);
    // Row-major fill so a row's draws are contiguous in the stream.
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) m(i, j) = N(rng);
    }
    return m;
}

VectorXd composite_error(Index n, double sigma_v, double sigma_u, Rng& rng)
{
    std::normal_distribution<double> N(0.0, 1.0);
    VectorXd e(n);
    for (Index i = 0; i < n; ++i) {
        const double v = sigma_v * N(rng);
        const double u = std::abs(sigma_u * N(rng));
        e(i) = v - u;
    }
    return e;
}

} // namespace

Dataset gen_irrelevant_z(Index n, double c, Rng& rng, const IrrelevantZParams& prm)
{
    if (n < 10) throw Error(ErrorCode::InvalidParams, "irrelevant-Z design needs n >= 10");
    if (!(c >= 0.0 && c < 1.0)) throw Error(ErrorCode::InvalidParams, "irrelevant-Z design needs c in [0,1)");
    const Index p = static_cast<Index>(prm.beta.size());
    const Index d = static_cast<Index>(std::lround(c * static_cast<double>(n)));
    MatrixXd X = normal_matrix(n, p, rng);
    MatrixXd Z = normal_matrix(n, d, rng);
    const VectorXd e = composite_error(n, prm.sigma_v, prm.sigma_u, rng);
    const VectorXd beta = Eigen::Map<const VectorXd>(prm.beta.data(), p);
    VectorXd y = (X * beta).array() + prm.beta0;
    y += e;
    return make_dataset(std::move(y), std::move(X), std::move(Z));
}

Dataset gen_irrelevant_z(Index n, double c, std::uint64_t seed, const IrrelevantZParams& prm)
{
    Rng rng(seed);
    return gen_irrelevant_z(n, c, rng, prm);
}

VectorXd belloni_delta(Index d)
{
    VectorXd delta(d);
    for (Index j = 0; j < d; ++j) delta(j) = 1.0 / static_cast<double>((j + 1) * (j + 1));
    return delta;
}

MatrixXd toeplitz_factor(Index d, double rho)
{
    MatrixXd S(d, d);
    for (Index k = 0; k < d; ++k) {
        for (Index l = 0; l < d; ++l) S(k, l) = std::pow(rho, static_cast<double>(std::abs(k - l)));
    }
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::InvalidParams, "Toeplitz covariance is not positive definite");
    return llt.matrixL();
}

Dataset gen_belloni_d1(Index n, Rng& rng, const BelloniParams& prm)
{
    if (n < 10) throw Error(ErrorCode::InvalidParams, "decaying-signal design needs n >= 10");
    const MatrixXd L = toeplitz_factor(prm.d, prm.rho);
    const MatrixXd Z = normal_matrix(n, prm.d, rng) * L.transpose();
    const VectorXd zd = Z * belloni_delta(prm.d);
    std::normal_distribution<double> N(0.0, 1.0);
    VectorXd x(n);
    for (Index i = 0; i < n; ++i) x(i) = prm.c_x * zd(i) + N(rng);
    const VectorXd e = composite_error(n, std::sqrt(prm.sigma_v_sq), std::sqrt(prm.sigma_u_sq), rng);
    VectorXd y = (prm.beta * x + prm.c_y * zd + e).array() + prm.beta0;
    return make_dataset(std::move(y), MatrixXd(x), Z);
}

Dataset gen_belloni_d1(Index n, std::uint64_t seed, const BelloniParams& prm)
{
    Rng rng(seed);
    return gen_belloni_d1(n, rng, prm);
}

RawDataset gen_frontier_fixture(Index n, std::uint64_t seed, const FixtureParams& prm)
{
    if (prm.inputs < 1 || prm.relevant < 0 || prm.continuous < prm.relevant + prm.inputs || prm.dummies < 1) {
        throw Error(ErrorCode::InvalidParams, "inconsistent fixture shape");
    }
    Rng rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> unif;
    const Index k = prm.inputs, dc = prm.continuous, dd = prm.dummies;

    MatrixXd Z(n, dc);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < dc; ++j) Z(i, j) = nd(rng);
    }
    MatrixXd D = MatrixXd::Zero(n, dd);
    for (Index i = 0; i < n; ++i) {
        const Index period = static_cast<Index>(unif(rng) * static_cast<double>(dd));
        if (period > 0 && period < dd) D(i, period - 1) = 1.0;
        D(i, dd - 1) = unif(rng) < 0.4 ? 1.0 : 0.0;
    }
    MatrixXd LX(n, k);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < k; ++j) LX(i, j) = 0.6 * Z(i, prm.relevant + j) + 0.8 * nd(rng);
    }
    // Elasticities summing to 1.06.
    const std::vector<double> beta{0.40, 0.55, 0.05, 0.04, 0.02};

    RawDataset raw;
    VectorXd ly = VectorXd::Constant(n, 10.0);
    for (Index j = 0; j < k; ++j) {
        ly += beta[static_cast<std::size_t>(j) % beta.size()] * LX.col(j);
        raw.columns.push_back({"X" + std::to_string(j + 1), ColumnRole::Input, (LX.col(j).array() + 3.0).exp().matrix()});
    }
    for (Index j = 0; j < prm.relevant; ++j) ly += prm.z_effect * Z.col(j);
    for (Index i = 0; i < n; ++i) {
        const double v = prm.sigma_v * nd(rng);
        const double u = prm.sigma_u * std::abs(nd(rng));
        ly(i) += prm.positive_skew ? v + u : v - u;
    }
    raw.columns.insert(raw.columns.begin(), RawColumn{"Output", ColumnRole::Output, ly.array().exp().matrix()});
    for (Index j = 0; j < dc; ++j) raw.columns.push_back({"Z" + std::to_string(j + 1), ColumnRole::Selectable, Z.col(j)});
    for (Index j = 0; j < dd; ++j) raw.columns.push_back({"D" + std::to_string(j + 1), ColumnRole::Dummy, D.col(j)});
    return raw;
}

double belloni_x_r2(const BelloniParams& prm)
{
    const MatrixXd L = toeplitz_factor(prm.d, prm.rho);
    const VectorXd delta = belloni_delta(prm.d);
    const double q = (L.transpose() * delta).squaredNorm() * prm.c_x * prm.c_x;
    return q / (q + 1.0);
}

EstimatorSpec EstimatorSpec::ols()
{
    EstimatorSpec e;
    e.name = "OLS";
    e.kind = Kind::OlsResiduals;
    e.selector = Selector::All;
    return e;
}

EstimatorSpec EstimatorSpec::lasso()
{
    EstimatorSpec e;
    e.name = "LASSO";
    e.kind = Kind::LassoResiduals;
    e.selector = Selector::PSL;
    return e;
}

EstimatorSpec EstimatorSpec::chain(Selector s, Stage2 m, bool cf)
{
    EstimatorSpec e;
    e.name = method_chain(s, m) + (cf ? "-CF" : "");
    e.kind = Kind::Frontier;
    e.selector = s;
    e.stage2 = m;
    e.cross_fit = cf;
    return e;
}

std::string McDesign::cell_label() const
{
    char buf[96];
    if (kind == DesignKind::IrrelevantZ) {
        std::snprintf(buf, sizeof buf, "IrrelevantZ(n=%ld,c=%g)", static_cast<long>(n), c);
    } else {
        std::snprintf(buf, sizeof buf, "BelloniD1(n=%ld,d=%ld)", static_cast<long>(n), static_cast<long>(belloni.d));
    }
    return buf;
}

const CellStats& McSummary::cell(const std::string& estimator) const
{
    for (const auto& c : cells) {
        if (c.estimator == estimator) return c;
    }
    throw Error(ErrorCode::InvalidConfig, "no summary cell for estimator '" + estimator + "'");
}

namespace {

enum Stream : std::uint64_t { kData = 0, kFolds = 1, kSplit = 2 };

void fill_from_fit(RepRecord& r, const FrontierFit& f, Index x_col)
{
    r.skewness = f.raw_skewness;
    r.wrong_skew = f.wrong_skew;
    if (x_col < f.coefficients.size()) {
        r.beta = f.coefficients(x_col);
        r.beta_se = f.std_errors(x_col);
    }
    r.sigma_u_sq = f.sigma.sigma_u_sq;
    r.gamma = f.sigma.gamma();
    r.gamma_se = f.gamma_se;
    r.mean_efficiency = f.mean_efficiency;
    r.boundary = f.sigma.sigma_u_sq == 0.0;
    r.num_z = static_cast<Index>(f.support.size());
}

} // namespace

std::vector<RepRecord> run_replication(const McDesign& design, int rep)
{
    Rng rng = replication_rng(design.base_seed, static_cast<std::uint64_t>(rep), kData);
    const Dataset data = design.kind == DesignKind::IrrelevantZ ? gen_irrelevant_z(design.n, design.c, rng, design.irrelevant)
                                                                : gen_belloni_d1(design.n, rng, design.belloni);
    PenaltyPlan plan = design.plan;
    plan.seed = replication_seed(design.base_seed, static_cast<std::uint64_t>(rep), kFolds);
    plan.workers = 1;
    const std::uint64_t split_seed = replication_seed(design.base_seed, static_cast<std::uint64_t>(rep), kSplit);
    const Index x_col = data.p() > 1 ? 1 : 0;

    std::map<Selector, SelectionResult> selections;
    std::vector<RepRecord> out;
    for (const auto& est : design.estimators) {
        RepRecord r;
        r.rep = rep;
        r.estimator = est.name;
        try {
            switch (est.kind) {
                case EstimatorSpec::Kind::OlsResiduals: {
                    const auto ols = ols_solve<double>(data.design(all_columns(data.d())), data.y, false);
                    const auto m = sample_moments(ols.residuals);
                    r.skewness = m.skewness;
                    r.wrong_skew = m.m3 > 0.0;
                    r.beta = ols.coefficients(x_col);
                    r.num_z = data.d();
                    break;
                }
                case EstimatorSpec::Kind::LassoResiduals: {
                    const LassoFit f = lasso_select(data, plan);
                    const auto m = sample_moments(f.residuals);
                    r.skewness = m.skewness;
                    r.wrong_skew = m.m3 > 0.0;
                    r.beta = f.coefficients(x_col);
                    r.num_z = static_cast<Index>(f.support.size());
                    break;
                }
                case EstimatorSpec::Kind::Frontier: {
                    FrontierFit f;
                    if (est.cross_fit) {
                        f = cross_fit(data, est.selector, plan, est.stage2, split_seed, design.stage2).fit;
                    } else {
                        auto it = selections.find(est.selector);
                        if (it == selections.end()) {
                            it = selections.emplace(est.selector, select_support(data, est.selector, plan)).first;
                        }
                        f = post_fit(data, it->second, est.stage2, design.stage2);
                    }
                    fill_from_fit(r, f, x_col);
                    break;
                }
            }
        } catch (const std::exception& e) {
            r.failed = true;
            r.error = e.what();
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<CellStats> aggregate(const std::string& cell_label, const std::vector<EstimatorSpec>& estimators,
                                 std::vector<RepRecord> records)
{
    std::sort(records.begin(), records.end(), [](const RepRecord& a, const RepRecord& b) {
        return a.rep != b.rep ? a.rep < b.rep : a.estimator < b.estimator;
    });
    std::vector<CellStats> cells;
    for (const auto& est : estimators) {
        CellStats c;
        c.cell = cell_label;
        c.estimator = est.name;
        std::vector<double> skew, beta, eff, nz;
        for (const auto& r : records) {
            if (r.estimator != est.name) continue;
            ++c.reps;
            if (r.failed) {
                if (c.failures++ == 0) c.first_error = r.error;
                continue;
            }
            skew.push_back(r.skewness);
            if (r.wrong_skew) ++c.wrong_skew_count;
            if (std::isfinite(r.beta)) beta.push_back(r.beta);
            if (std::isfinite(r.mean_efficiency)) {
                eff.push_back(r.mean_efficiency);
                if (r.mean_efficiency >= kFullEfficiency) ++c.full_efficiency_count;
            }
            if (r.boundary) ++c.boundary_count;
            nz.push_back(static_cast<double>(r.num_z));
        }
        auto mean_se = [](const std::vector<double>& v, double& mean, double& se) {
            if (v.empty()) {
                mean = se = std::nan("");
                return;
            }
            const VectorXd m = Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
            mean = m.mean();
            se = v.size() > 1 ? sample_sd(m) / std::sqrt(static_cast<double>(v.size())) : 0.0;
        };
        double dummy;
        mean_se(skew, c.mean_skewness, c.se_skewness);
        mean_se(beta, c.mean_beta, c.se_beta);
        mean_se(eff, c.mean_efficiency, dummy);
        mean_se(nz, c.mean_num_z, dummy);
        cells.push_back(std::move(c));
    }
    return cells;
}

McSummary run_design(const McDesign& design)
{
    if (design.reps < 1) throw Error(ErrorCode::InvalidConfig, "reps must be positive");
    if (design.estimators.empty()) throw Error(ErrorCode::InvalidConfig, "design lists no estimators");
    const int reps = design.reps;
    int workers = design.workers > 0 ? design.workers : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, reps);

    std::vector<std::vector<RepRecord>> slots(static_cast<std::size_t>(reps));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int r = next++; r < reps; r = next++) slots[static_cast<std::size_t>(r)] = run_replication(design, r);
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    McSummary s;
    s.summaries = design.summaries;
    for (auto& v : slots) {
        for (auto& r : v) s.rep_level.push_back(std::move(r));
    }
    s.cells = aggregate(design.cell_label(), design.estimators, s.rep_level);
    if (!design.keep_rep_level) s.rep_level.clear();
    return s;
}

StandardizedDist standardized_dist(const std::vector<RepRecord>& rep_level, const std::string& estimator,
                                   McParam parameter, double theta0, int bins, double lo, double hi)
{
    if (bins < 1 || !(hi > lo)) throw Error(ErrorCode::InvalidParams, "invalid histogram range");
    StandardizedDist out;
    int seen = 0;
    for (const auto& r : rep_level) {
        if (r.estimator != estimator || r.failed) continue;
        ++seen;
        const double est = parameter == McParam::Beta ? r.beta : r.gamma;
        const double se = parameter == McParam::Beta ? r.beta_se : r.gamma_se;
        if (!std::isfinite(est) || !(se > 0.0) || !std::isfinite(se)) {
            ++out.missing_se;
            continue;
        }
        out.values.push_back((est - theta0) / se);
    }
    if (out.values.empty()) {
        throw Error(ErrorCode::MissingSE, "no replication of '" + estimator + "' carries a standard error"
                                              + (seen ? "" : " (no records)"));
    }
    const VectorXd v = Eigen::Map<const VectorXd>(out.values.data(), static_cast<Index>(out.values.size()));
    out.mean = v.mean();
    out.sd = sample_sd(v);
    out.counts.assign(static_cast<std::size_t>(bins), 0);
    out.edges.resize(static_cast<std::size_t>(bins + 1));
    const double w = (hi - lo) / bins;
    for (int b = 0; b <= bins; ++b) out.edges[static_cast<std::size_t>(b)] = lo + w * b;
    for (double x : out.values) {
        const int b = std::clamp(static_cast<int>(std::floor((x - lo) / w)), 0, bins - 1);
        ++out.counts[static_cast<std::size_t>(b)];
    }
    return out;
}

namespace {

std::string fmt3(double x)
{
    if (std::isnan(x)) return "NA";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}

bool wants(const McSummary& s, SummaryKind k)
{
    return std::find(s.summaries.begin(), s.summaries.end(), k) != s.summaries.end();
}

} // namespace

void write_summary_csv(std::ostream& os, const McSummary& s)
{
    os << "cell,estimator,reps,failures";
    if (wants(s, SummaryKind::MeanSkewness)) os << ",mean_skewness,mc_se_skewness";
    if (wants(s, SummaryKind::WrongSkewCount)) os << ",wrong_skew_count";
    if (wants(s, SummaryKind::StandardizedDist)) os << ",mean_beta,mc_se_beta,mean_num_z";
    if (wants(s, SummaryKind::MeanEfficiencyDist)) os << ",mean_efficiency,full_efficiency_count,boundary_count";
    os << '\n';
    for (const auto& c : s.cells) {
        os << '"' << c.cell << "\"," << c.estimator << ',' << c.reps << ',' << c.failures;
        if (wants(s, SummaryKind::MeanSkewness)) os << ',' << fmt3(c.mean_skewness) << ',' << fmt3(c.se_skewness);
        if (wants(s, SummaryKind::WrongSkewCount)) os << ',' << c.wrong_skew_count;
        if (wants(s, SummaryKind::StandardizedDist)) {
            os << ',' << fmt3(c.mean_beta) << ',' << fmt3(c.se_beta) << ',' << fmt3(c.mean_num_z);
        }
        if (wants(s, SummaryKind::MeanEfficiencyDist)) {
            os << ',' << fmt3(c.mean_efficiency) << ',' << c.full_efficiency_count << ',' << c.boundary_count;
        }
        os << '\n';
    }
}

void write_rep_csv(std::ostream& os, const std::vector<RepRecord>& recs)
{
    os << "rep,estimator,failed,skewness,wrong_skew,beta,beta_se,gamma,gamma_se,sigma_u_sq,mean_efficiency,boundary,num_z\n";
    auto num = [](double x) {
        if (std::isnan(x)) return std::string("NA");
        char buf[48];
        std::snprintf(buf, sizeof buf, "%.6g", x);
        return std::string(buf);
    };
    for (const auto& r : recs) {
        os << r.rep << ',' << r.estimator << ',' << (r.failed ? 1 : 0) << ',' << num(r.skewness) << ','
           << (r.wrong_skew ? 1 : 0) << ',' << num(r.beta) << ',' << num(r.beta_se) << ',' << num(r.gamma) << ','
           << num(r.gamma_se) << ',' << num(r.sigma_u_sq) << ',' << num(r.mean_efficiency) << ','
           << (r.boundary ? 1 : 0) << ',' << r.num_z << '\n';
    }
}

} // namespace sfa
