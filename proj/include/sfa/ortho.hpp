#pragma once
#include <cstdint>
#include <string>
#include <vector>
#include <sfa/types.hpp>

namespace sfa {

enum class MomentId { A, Aprime, Adoubleprime, Astar_cols, Astar_mle, Bstar, Cstar };
enum class Nuisance { Delta, PiX, PiY };
enum class Verdict { Orthogonal, NotOrthogonal, Inconclusive };

const char* to_string(MomentId id);
const char* to_string(Nuisance n);
const char* to_string(Verdict v);

struct MomentSpec
{
    MomentId id = MomentId::A;
    std::vector<Nuisance> nuisances;
    bool requires_demeaned_z = false;
};

MomentSpec moment_spec(MomentId id);

/**
 * Point at which a moment is evaluated. For A, A' and A'' `delta` is the
 * coefficient on z in the original regression; for the starred moments it
 * is the coefficient on z in the regression of y_perp on (x_perp, z).
 * `rho` enters the Mills ratio argument of the likelihood moments.
 */
struct OrthoParams
{
    double beta0 = 0.0;
    double beta = 0.0;
    double delta = 0.0;
    double pi_x = 0.0;
    double pi_y = 0.0;
    double rho = 1.0;
};

/// Scalar-covariate design: z ~ N(z_mean, 1), x = exz (z - z_mean) + N(0, 1 - exz^2).
struct OrthoDesign
{
    double beta0 = 1.0;
    double beta = 0.5;
    double delta = 0.8;
    double exz = 0.5;
    double z_mean = 0.0;
    // sigma = lambda = 1.
    double sigma_u = 0.70710678118654752;
    double sigma_v = 0.70710678118654752;
    // Composite error scaled by exp(hetero * z / 2).
    double hetero = 0.0;
};

/// Population quantities implied by an OrthoDesign.
struct OrthoTruth
{
    OrthoDesign design;
    double pi_x = 0.0;
    double pi_y = 0.0;
    // Coefficient on z after partialling, chosen so that eps_star = eps exactly.
    double delta_star = 0.0;
    double mean_u = 0.0;
    double rho = 1.0;

    /// True parameters in the layout each moment expects.
    OrthoParams params(MomentId id) const;
};

OrthoTruth ortho_truth(const OrthoDesign& d);

struct OrthoSample
{
    VectorXd x, z, y;
    // Composite error v - u.
    VectorXd eps;
    OrthoTruth truth;
};

OrthoSample make_ortho_sample(Index n, std::uint64_t seed, const OrthoDesign& d = {});

struct Estimate
{
    double value = 0.0;
    double se = 0.0;
};

/// |value| < 3 se: orthogonal; > 5 se: not orthogonal; otherwise inconclusive.
Verdict classify(const Estimate& e);

/// Sample average of the moment function with its Monte Carlo standard error.
Estimate eval_moment(const MomentSpec& spec, const OrthoParams& params, const OrthoSample& sample);

struct DerivativeEntry
{
    Nuisance nuisance = Nuisance::Delta;
    Estimate derivative;
    Verdict verdict = Verdict::Inconclusive;
};

/// Central difference in one nuisance direction on the same sample (common random numbers).
DerivativeEntry derivative_check(const MomentSpec& spec, const OrthoParams& params, const OrthoSample& sample,
                                 Nuisance nuisance, double h = 1e-4);

struct OrthoReport
{
    MomentId id = MomentId::A;
    Estimate moment_value;
    std::vector<DerivativeEntry> derivatives;
};

/// Moment value plus a derivative check for every nuisance of the spec.
OrthoReport ortho_report(const MomentSpec& spec, const OrthoParams& params, const OrthoSample& sample,
                         double h = 1e-4);

struct RhoReport
{
    Estimate value;
    Verdict verdict = Verdict::Inconclusive;
    // Decomposition: value = E[z r] + rho (mu12 - rho mu21) E[z].
    Estimate ez_r;
    double mu12 = 0.0;
    double mu21 = 0.0;
    double ez = 0.0;
    double residual_term = 0.0;
};

/// E[z r (1 - rho eps (rho eps - r))] with r = r(rho eps*) at the given params.
RhoReport check_rho_orthogonality(const OrthoSample& sample, const OrthoParams& params, bool demean_z);

struct HomoskewnessReport
{
    int bins = 0;
    std::vector<Estimate> mu21_by_bin;
    std::vector<Estimate> mu12_by_bin;
    Estimate mu21;
    Estimate mu12;
    // Largest |bin - pooled| / |pooled| over both moments.
    double max_relative_deviation = 0.0;
    // Largest |bin - pooled| in units of the bin's MC standard error.
    double max_deviation_se = 0.0;
    Verdict verdict = Verdict::Inconclusive;
};

/// Conditional third-order cross-moments of (eps*, r*) within quantile bins of z.
HomoskewnessReport homoskewness_probe(const OrthoSample& sample, const OrthoParams& params, int bins = 4);

/// Per-observation eps* = y - pi_y z - beta0 - (x - pi_x z) beta - z delta.
VectorXd eps_star(const OrthoSample& sample, const OrthoParams& params);

std::string to_text(const OrthoReport& r);
std::string to_text(const RhoReport& r);

} // namespace sfa
