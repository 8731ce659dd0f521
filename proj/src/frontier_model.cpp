#include <algorithm>
#include <cmath>
#include <set>
#include <sfa/error.hpp>
#include <sfa/frontier_model.hpp>

namespace sfa {

void Dataset::validate() const
{
    if (X.rows() != n() || (Z.cols() > 0 && Z.rows() != n())) {
        throw Error(ErrorCode::DimensionMismatch, "y, X and Z must share the row count");
    }
    std::set<std::string> seen;
    for (const auto& nm : X.column_names) {
        if (!seen.insert(nm).second) throw Error(ErrorCode::DimensionMismatch, "duplicate column name '" + nm + "'");
    }
    for (const auto& nm : Z.column_names) {
        if (!seen.insert(nm).second) throw Error(ErrorCode::DimensionMismatch, "duplicate column name '" + nm + "'");
    }
}

MatrixXd Dataset::design(const Support& support) const
{
    MatrixXd out(n(), X.cols() + static_cast<Index>(support.size()));
    out.leftCols(X.cols()) = X.values;
    for (std::size_t j = 0; j < support.size(); ++j) {
        out.col(X.cols() + static_cast<Index>(j)) = Z.values.col(support[j]);
    }
    return out;
}

std::vector<std::string> Dataset::design_names(const Support& support) const
{
    auto names = X.column_names;
    for (auto j : support) names.push_back(Z.column_names[j]);
    return names;
}

Dataset Dataset::subset_rows(const std::vector<Index>& rows) const
{
    Dataset out;
    out.y = select_rows<double>(y, rows);
    out.X = Design(select_rows<double>(X.values, rows), X.column_names, X.has_intercept);
    out.Z = Design(Z.cols() > 0 ? select_rows<double>(Z.values, rows) : MatrixXd(static_cast<Index>(rows.size()), 0),
                   Z.column_names, false);
    out.input_terms = input_terms;
    return out;
}

Dataset make_dataset(VectorXd y, MatrixXd Xr, MatrixXd Z, std::vector<std::string> x_names,
                     std::vector<std::string> z_names)
{
    const Index n = y.size();
    if (Xr.rows() != n && Xr.cols() > 0) throw Error(ErrorCode::DimensionMismatch, "X rows differ from y");
    if (Z.rows() != n && Z.cols() > 0) throw Error(ErrorCode::DimensionMismatch, "Z rows differ from y");
    if (x_names.empty()) {
        for (Index j = 0; j < Xr.cols(); ++j) x_names.push_back("x" + std::to_string(j + 1));
    }
    if (z_names.empty()) {
        for (Index j = 0; j < Z.cols(); ++j) z_names.push_back("z" + std::to_string(j + 1));
    }
    MatrixXd X(n, Xr.cols() + 1);
    X.col(0).setOnes();
    if (Xr.cols() > 0) X.rightCols(Xr.cols()) = Xr;
    std::vector<std::string> names{"(Intercept)"};
    names.insert(names.end(), x_names.begin(), x_names.end());

    Dataset out;
    out.y = std::move(y);
    out.input_terms = x_names;
    out.X = Design(std::move(X), std::move(names), true);
    if (Z.rows() != n) Z.resize(n, 0);
    out.Z = Design(std::move(Z), std::move(z_names), false);
    return out;
}

const RawColumn* RawDataset::find(const std::string& name) const
{
    for (const auto& c : columns) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

double CompositeErrorParams::sigma_u() const { return std::sqrt(sigma_u_sq); }
double CompositeErrorParams::sigma_v() const { return std::sqrt(sigma_v_sq); }
double CompositeErrorParams::lambda() const { return std::sqrt(sigma_u_sq / sigma_v_sq); }

CompositeErrorParams CompositeErrorParams::from_sd(double sigma_u, double sigma_v)
{
    CompositeErrorParams p{sigma_u * sigma_u, sigma_v * sigma_v};
    p.validate();
    return p;
}

CompositeErrorParams CompositeErrorParams::from_gamma(double sigma_sq, double gamma)
{
    if (!(sigma_sq > 0.0) || !(gamma >= 0.0 && gamma < 1.0)) {
        throw Error(ErrorCode::InvalidParams, "need sigma^2 > 0 and gamma in [0,1)");
    }
    return CompositeErrorParams{gamma * sigma_sq, (1.0 - gamma) * sigma_sq};
}

void CompositeErrorParams::validate() const
{
    if (!(sigma_u_sq >= 0.0) || !(sigma_v_sq > 0.0) || !std::isfinite(sigma_u_sq) || !std::isfinite(sigma_v_sq)) {
        throw Error(ErrorCode::InvalidParams, "need sigma_u^2 >= 0 and sigma_v^2 > 0");
    }
}

std::optional<Index> FrontierFit::index_of(const std::string& name) const
{
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<Index>(it - names.begin());
}

Index technology_terms(FunctionalForm form, Index p)
{
    return form == FunctionalForm::CobbDouglas ? p : p + p * (p + 1) / 2;
}

namespace {

const RawColumn& require(const RawDataset& raw, const std::string& name)
{
    const RawColumn* c = raw.find(name);
    if (!c) throw Error(ErrorCode::UnknownColumn, "column '" + name + "' not found");
    return *c;
}

VectorXd log_column(const RawColumn& c)
{
    for (Index i = 0; i < c.values.size(); ++i) {
        if (!(c.values(i) > 0.0)) {
            throw Error(ErrorCode::NonPositiveValue,
                        "column '" + c.name + "' row " + std::to_string(i + 1) + " is not positive");
        }
    }
    return c.values.array().log().matrix();
}

} // namespace

Dataset expand_spec(const RawDataset& raw, const FrontierSpec& spec)
{
    const Index n = raw.n();
    for (const auto& m : spec.mandatory) {
        if (std::find(spec.selectable.begin(), spec.selectable.end(), m) != spec.selectable.end()) {
            throw Error(ErrorCode::InvalidConfig, "'" + m + "' is both mandatory and selectable");
        }
    }

    const auto log_input = [&](const std::string& name) {
        VectorXd v = log_column(require(raw, name));
        if (spec.mean_deviate_logs) v.array() -= v.mean();
        return v;
    };

    Dataset out;
    out.y = log_column(require(raw, spec.output));

    // Intercept, mandatory first-order, mandatory second-order, then Z.
    std::vector<VectorXd> xcols{VectorXd::Ones(n)};
    std::vector<std::string> xnames{"(Intercept)"};
    std::vector<VectorXd> first;
    for (const auto& m : spec.mandatory) {
        first.push_back(log_input(m));
        xcols.push_back(first.back());
        xnames.push_back(m);
        out.input_terms.push_back(m);
    }

    std::vector<VectorXd> second;
    std::vector<std::string> second_names;
    if (spec.form == FunctionalForm::Translog) {
        const std::size_t p = first.size();
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = a; b < p; ++b) {
                second.push_back(first[a].cwiseProduct(first[b]));
                second_names.push_back(a == b ? spec.mandatory[a] + "^2" : spec.mandatory[a] + "*" + spec.mandatory[b]);
            }
        }
    }
    if (!spec.second_order_optional) {
        for (std::size_t j = 0; j < second.size(); ++j) {
            xcols.push_back(second[j]);
            xnames.push_back(second_names[j]);
        }
    }

    std::vector<VectorXd> zcols;
    std::vector<std::string> znames;
    for (const auto& s : spec.selectable) {
        const RawColumn& c = require(raw, s);
        switch (c.role) {
            case ColumnRole::Input:
                zcols.push_back(log_input(s));
                out.input_terms.push_back(s);
                break;
            case ColumnRole::Output:
                throw Error(ErrorCode::InvalidConfig, "output column '" + s + "' cannot be selectable");
            default:
                zcols.push_back(c.values);
        }
        znames.push_back(s);
    }
    if (spec.second_order_optional) {
        for (std::size_t j = 0; j < second.size(); ++j) {
            zcols.push_back(second[j]);
            znames.push_back(second_names[j]);
        }
    }

    MatrixXd X(n, static_cast<Index>(xcols.size()));
    for (std::size_t j = 0; j < xcols.size(); ++j) X.col(static_cast<Index>(j)) = xcols[j];
    MatrixXd Z(n, static_cast<Index>(zcols.size()));
    for (std::size_t j = 0; j < zcols.size(); ++j) Z.col(static_cast<Index>(j)) = zcols[j];
    out.X = Design(std::move(X), std::move(xnames), true);
    out.Z = Design(std::move(Z), std::move(znames), false);
    out.validate();
    return out;
}

double returns_to_scale(const FrontierFit& fit, const std::vector<std::string>& mandatory_inputs,
                        const std::vector<std::string>& optional_inputs)
{
    double rts = 0.0;
    for (const auto& m : mandatory_inputs) {
        const auto j = fit.index_of(m);
        if (!j) throw Error(ErrorCode::MissingCoefficient, "no coefficient for input '" + m + "'");
        rts += fit.coefficients(*j);
    }
    for (const auto& m : optional_inputs) {
        if (const auto j = fit.index_of(m)) rts += fit.coefficients(*j);
    }
    return rts;
}

double returns_to_scale(const FrontierFit& fit, const FrontierSpec& spec)
{
    std::vector<std::string> optional;
    for (const auto& t : fit.input_terms) {
        if (std::find(spec.mandatory.begin(), spec.mandatory.end(), t) == spec.mandatory.end()) optional.push_back(t);
    }
    return returns_to_scale(fit, spec.mandatory, optional);
}

} // namespace sfa
