#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <sfa/error.hpp>
#include <sfa/normal.hpp>
#include <sfa/ortho.hpp>

namespace sfa {

const char* to_string(MomentId id)
{
    switch (id) {
        case MomentId::A: return "A";
        case MomentId::Aprime: return "A'";
        case MomentId::Adoubleprime: return "A''";
        case MomentId::Astar_cols: return "A*-COLS";
        case MomentId::Astar_mle: return "A*-MLE";
        case MomentId::Bstar: return "B*";
        case MomentId::Cstar: return "C*";
    }
    return "?";
}

const char* to_string(Nuisance n)
{
    switch (n) {
        case Nuisance::Delta: return "delta";
        case Nuisance::PiX: return "pi_x";
        case Nuisance::PiY: return "pi_y";
    }
    return "?";
}

const char* to_string(Verdict v)
{
    switch (v) {
        case Verdict::Orthogonal: return "orthogonal";
        case Verdict::NotOrthogonal: return "not-orthogonal";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

MomentSpec moment_spec(MomentId id)
{
    using N = Nuisance;
    switch (id) {
        case MomentId::A:
        case MomentId::Aprime: return {id, {N::Delta}, false};
        case MomentId::Adoubleprime: return {id, {N::Delta, N::PiX}, false};
        case MomentId::Astar_cols:
        case MomentId::Astar_mle:
        case MomentId::Bstar: return {id, {N::Delta, N::PiX, N::PiY}, false};
        case MomentId::Cstar: return {id, {N::Delta, N::PiX, N::PiY}, true};
    }
    throw Error(ErrorCode::InvalidParams, "unknown moment id");
}

OrthoParams OrthoTruth::params(MomentId id) const
{
    OrthoParams p;
    p.beta = design.beta;
    p.pi_x = pi_x;
    p.pi_y = pi_y;
    p.rho = rho;
    switch (id) {
        case MomentId::A:
        case MomentId::Aprime:
        case MomentId::Adoubleprime:
            // Least-squares moments use the mean-zero error, hence the shifted intercept.
            p.beta0 = design.beta0 - mean_u;
            p.delta = design.delta;
            break;
        case MomentId::Astar_cols:
            p.beta0 = design.beta0 - mean_u;
            p.delta = delta_star;
            break;
        case MomentId::Astar_mle:
        case MomentId::Bstar:
        case MomentId::Cstar:
            p.beta0 = design.beta0;
            p.delta = delta_star;
            break;
    }
    return p;
}

OrthoTruth ortho_truth(const OrthoDesign& d)
{
    if (!(std::abs(d.exz) < 1.0)) throw Error(ErrorCode::InvalidParams, "exz must lie in (-1, 1)");
    if (!(d.sigma_u > 0.0 && d.sigma_v > 0.0)) throw Error(ErrorCode::InvalidParams, "sigma_u and sigma_v must be positive");
    OrthoTruth t;
    t.design = d;
    const double ez2 = 1.0 + d.z_mean * d.z_mean;
    t.mean_u = d.sigma_u * std::sqrt(2.0 / std::numbers::pi);
    t.pi_x = d.exz / ez2;
    // E[y z] with x mean zero, E[x z] = exz, and eps independent of z (hetero = 0).
    const double eyz = d.beta0 * d.z_mean + d.beta * d.exz + d.delta * ez2 - t.mean_u * d.z_mean;
    t.pi_y = eyz / ez2;
    t.delta_star = d.beta * t.pi_x + d.delta - t.pi_y;
    const double sigma = std::hypot(d.sigma_u, d.sigma_v);
    t.rho = (d.sigma_u / d.sigma_v) / sigma;
    return t;
}

OrthoSample make_ortho_sample(Index n, std::uint64_t seed, const OrthoDesign& d)
{
    OrthoSample s;
    s.truth = ortho_truth(d);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const double sx = std::sqrt(1.0 - d.exz * d.exz);
    s.x.resize(n);
    s.z.resize(n);
    s.y.resize(n);
    s.eps.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double zc = nd(rng);
        const double xi = nd(rng);
        const double v = d.sigma_v * nd(rng);
        const double u = d.sigma_u * std::abs(nd(rng));
        s.z(i) = d.z_mean + zc;
        s.x(i) = d.exz * zc + sx * xi;
        s.eps(i) = (v - u) * std::exp(0.5 * d.hetero * s.z(i));
        s.y(i) = d.beta0 + d.beta * s.x(i) + d.delta * s.z(i) + s.eps(i);
    }
    return s;
}

namespace {

// Neumaier summation over fixed-size chunks; the result does not depend on how chunks are scheduled.
class CompensatedSum
{
public:
    void add(double x)
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

constexpr Index kChunk = 1 << 16;

double compensated_total(const Eigen::ArrayXd& g)
{
    CompensatedSum total;
    for (Index start = 0; start < g.size(); start += kChunk) {
        CompensatedSum part;
        const Index end = std::min(g.size(), start + kChunk);
        for (Index i = start; i < end; ++i) part.add(g(i));
        total.add(part.value());
    }
    return total.value();
}

Estimate mean_se(const Eigen::ArrayXd& g)
{
    const auto n = static_cast<double>(g.size());
    if (g.size() < 2) throw Error(ErrorCode::EmptyData, "need at least two observations");
    const double m = compensated_total(g) / n;
    const double ss = compensated_total((g - m).square());
    return {m, std::sqrt(ss / (n - 1.0) / n)};
}

Eigen::ArrayXd mills(const Eigen::ArrayXd& t)
{
    return t.unaryExpr([](double v) { return inverse_mills(v); });
}

Eigen::ArrayXd moment_terms(MomentId id, const OrthoParams& p, const OrthoSample& s)
{
    const auto x = s.x.array();
    const auto z = s.z.array();
    const auto y = s.y.array();
    switch (id) {
        case MomentId::A:
        case MomentId::Aprime: return x * (y - p.beta0 - x * p.beta - z * p.delta);
        case MomentId::Adoubleprime: return (x - p.pi_x * z) * (y - p.beta0 - x * p.beta - z * p.delta);
        default: break;
    }
    const Eigen::ArrayXd xp = x - p.pi_x * z;
    const Eigen::ArrayXd e = (y - p.pi_y * z) - p.beta0 - xp * p.beta - z * p.delta;
    if (id == MomentId::Astar_cols) return xp * e;
    const Eigen::ArrayXd r = mills(p.rho * e);
    switch (id) {
        case MomentId::Astar_mle: return xp * (e + p.rho * r);
        case MomentId::Bstar: return z * (e + p.rho * r);
        case MomentId::Cstar: return e * r;
        default: break;
    }
    throw Error(ErrorCode::InvalidParams, "unknown moment id");
}

OrthoParams shifted(OrthoParams p, Nuisance n, double h)
{
    switch (n) {
        case Nuisance::Delta: p.delta += h; break;
        case Nuisance::PiX: p.pi_x += h; break;
        case Nuisance::PiY: p.pi_y += h; break;
    }
    return p;
}

} // namespace

Verdict classify(const Estimate& e)
{
    const double a = std::abs(e.value);
    if (a < 3.0 * e.se) return Verdict::Orthogonal;
    if (a > 5.0 * e.se) return Verdict::NotOrthogonal;
    return Verdict::Inconclusive;
}

VectorXd eps_star(const OrthoSample& s, const OrthoParams& p)
{
    const auto z = s.z.array();
    return ((s.y.array() - p.pi_y * z) - p.beta0 - (s.x.array() - p.pi_x * z) * p.beta - z * p.delta).matrix();
}

Estimate eval_moment(const MomentSpec& spec, const OrthoParams& params, const OrthoSample& sample)
{
    return mean_se(moment_terms(spec.id, params, sample));
}

DerivativeEntry derivative_check(const MomentSpec& spec, const OrthoParams& params, const OrthoSample& sample,
                                 Nuisance nuisance, double h)
{
    if (!(h >= 1e-6 && h <= 1e-2)) throw Error(ErrorCode::InvalidParams, "step must lie in [1e-6, 1e-2]");
    const Eigen::ArrayXd up = moment_terms(spec.id, shifted(params, nuisance, h), sample);
    const Eigen::ArrayXd down = moment_terms(spec.id, shifted(params, nuisance, -h), sample);
    DerivativeEntry out;
    out.nuisance = nuisance;
    out.derivative = mean_se((up - down) / (2.0 * h));
    out.verdict = classify(out.derivative);
    return out;
}

OrthoReport ortho_report(const MomentSpec& spec, const OrthoParams& params, const OrthoSample& sample, double h)
{
    OrthoReport r;
    r.id = spec.id;
    r.moment_value = eval_moment(spec, params, sample);
    for (Nuisance n : spec.nuisances) r.derivatives.push_back(derivative_check(spec, params, sample, n, h));
    return r;
}

RhoReport check_rho_orthogonality(const OrthoSample& sample, const OrthoParams& params, bool demean_z)
{
    Eigen::ArrayXd z = sample.z.array();
    if (demean_z) z -= compensated_total(z) / static_cast<double>(z.size());
    const Eigen::ArrayXd e = eps_star(sample, params).array();
    const double rho = params.rho;
    const Eigen::ArrayXd r = mills(rho * e);

    RhoReport out;
    out.value = mean_se(z * r * (1.0 - rho * e * (rho * e - r)));
    out.verdict = classify(out.value);
    out.ez_r = mean_se(z * r);
    const auto n = static_cast<double>(z.size());
    out.mu12 = compensated_total(e * r.square()) / n;
    out.mu21 = compensated_total(e.square() * r) / n;
    out.ez = compensated_total(z) / n;
    out.residual_term = rho * (out.mu12 - rho * out.mu21) * out.ez;
    return out;
}

HomoskewnessReport homoskewness_probe(const OrthoSample& sample, const OrthoParams& params, int bins)
{
    if (bins < 1) throw Error(ErrorCode::InvalidParams, "need at least one bin");
    const Index n = sample.z.size();
    if (n / bins < 100) throw Error(ErrorCode::TooFewBins, "fewer than 100 observations in a bin");

    const Eigen::ArrayXd e = eps_star(sample, params).array();
    const Eigen::ArrayXd r = mills(params.rho * e);
    const Eigen::ArrayXd m21 = e.square() * r;
    const Eigen::ArrayXd m12 = e * r.square();

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return sample.z(a) < sample.z(b); });

    HomoskewnessReport out;
    out.bins = bins;
    out.mu21 = mean_se(m21);
    out.mu12 = mean_se(m12);
    for (int b = 0; b < bins; ++b) {
        const Index lo = n * b / bins;
        const Index hi = n * (b + 1) / bins;
        Eigen::ArrayXd a21(hi - lo), a12(hi - lo);
        for (Index i = lo; i < hi; ++i) {
            a21(i - lo) = m21(order[static_cast<std::size_t>(i)]);
            a12(i - lo) = m12(order[static_cast<std::size_t>(i)]);
        }
        out.mu21_by_bin.push_back(mean_se(a21));
        out.mu12_by_bin.push_back(mean_se(a12));
    }
    if (bins > 1) {
        auto track = [&](const std::vector<Estimate>& by_bin, const Estimate& pooled) {
            for (const auto& est : by_bin) {
                const double dev = std::abs(est.value - pooled.value);
                out.max_relative_deviation = std::max(out.max_relative_deviation, dev / std::abs(pooled.value));
                out.max_deviation_se = std::max(out.max_deviation_se, dev / est.se);
            }
        };
        track(out.mu21_by_bin, out.mu21);
        track(out.mu12_by_bin, out.mu12);
    }
    out.verdict = classify({out.max_deviation_se, 1.0});
    return out;
}

std::string to_text(const OrthoReport& r)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "moment %s value %.6g se %.3g\n", to_string(r.id), r.moment_value.value,
                  r.moment_value.se);
    std::string out = buf;
    for (const auto& d : r.derivatives) {
        std::snprintf(buf, sizeof buf, "moment %s d/d%s %.6g se %.3g %s\n", to_string(r.id), to_string(d.nuisance),
                      d.derivative.value, d.derivative.se, to_string(d.verdict));
        out += buf;
    }
    return out;
}

std::string to_text(const RhoReport& r)
{
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "rho-condition value %.6g se %.3g %s\nrho-condition E[z r] %.6g se %.3g\n"
                  "rho-condition mu12 %.6g mu21 %.6g E[z] %.6g residual %.6g\n",
                  r.value.value, r.value.se, to_string(r.verdict), r.ez_r.value, r.ez_r.se, r.mu12, r.mu21, r.ez,
                  r.residual_term);
    return buf;
}

} // namespace sfa
