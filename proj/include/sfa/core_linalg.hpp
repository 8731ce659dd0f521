#pragma once
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>
#include <Eigen/Dense>
#include <sfa/error.hpp>
#include <sfa/types.hpp>

namespace sfa {

/**
 * Dense regressor matrix with column names.
 * When has_intercept is set, column 0 is the constant column.
 */
template <class Scalar>
struct DesignMatrix
{
    using value_t = Scalar;
    using mat_t = mat_type<Scalar>;

    mat_t values;
    std::vector<std::string> column_names;
    bool has_intercept = false;

    DesignMatrix() = default;

    explicit DesignMatrix(mat_t v, std::vector<std::string> names = {}, bool intercept = false)
        : values(std::move(v)), column_names(std::move(names)), has_intercept(intercept)
    {
        if (column_names.empty()) {
            column_names.reserve(values.cols());
            for (Index j = 0; j < values.cols(); ++j) {
                column_names.push_back("c" + std::to_string(j));
            }
        }
        if (static_cast<Index>(column_names.size()) != values.cols()) {
            throw Error(ErrorCode::DimensionMismatch, "column name count does not match matrix width");
        }
    }

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }

    bool is_intercept_column(Index j) const { return has_intercept && j == 0; }

    // Checks finiteness and that no non-intercept column is constant.
    void validate() const
    {
        if (!values.allFinite()) {
            throw Error(ErrorCode::InvalidParams, "design matrix has non-finite entries");
        }
        for (Index j = 0; j < cols(); ++j) {
            if (is_intercept_column(j)) continue;
            const auto col = values.col(j);
            if (rows() > 1 && (col.array() == col(0)).all()) {
                throw Error(ErrorCode::ZeroVariance, "column '" + column_names[j] + "' is constant");
            }
        }
    }
};

template <class Scalar>
struct OlsFit
{
    vec_type<Scalar> coefficients;
    vec_type<Scalar> residuals;
    vec_type<Scalar> fitted;
    std::optional<mat_type<Scalar>> xtx_inverse;
};

namespace detail {

// Reciprocal condition bound below which X'X is treated as singular:
// cond(X'X) = cond(R)^2 > 1e12.
template <class Scalar>
constexpr Scalar rank_tolerance() { return Scalar(1e-6); }

template <class QR>
void check_rank(const QR& qr, Index k, const char* ctx)
{
    using Scalar = typename QR::MatrixType::Scalar;
    if (k == 0) return;
    const auto diag = qr.matrixQR().diagonal().head(k).cwiseAbs();
    const Scalar dmax = diag.maxCoeff();
    const Scalar dmin = diag.minCoeff();
    if (!(dmax > Scalar(0)) || dmin < rank_tolerance<Scalar>() * dmax) {
        throw Error(ErrorCode::RankDeficient, std::string(ctx) + ": design is numerically rank deficient");
    }
}

} // namespace detail

/**
 * Least squares via Householder QR. Throws RankDeficient when the
 * design is numerically singular; never falls back to a pseudo-inverse.
 */
template <class Scalar, class YType>
OlsFit<Scalar> ols_solve(const mat_type<Scalar>& X,
                         const Eigen::MatrixBase<YType>& y,
                         bool want_xtx_inverse = true)
{
    const Index n = X.rows();
    const Index k = X.cols();
    if (y.size() != n) {
        throw Error(ErrorCode::DimensionMismatch, "response length differs from design rows");
    }
    if (k >= n) {
        throw Error(ErrorCode::RankDeficient, "ols_solve: need n > k");
    }
    OlsFit<Scalar> out;
    if (k == 0) {
        out.coefficients.resize(0);
        out.fitted = vec_type<Scalar>::Zero(n);
        out.residuals = y;
        if (want_xtx_inverse) out.xtx_inverse = mat_type<Scalar>(0, 0);
        return out;
    }
    Eigen::HouseholderQR<mat_type<Scalar>> qr(X);
    detail::check_rank(qr, k, "ols_solve");
    out.coefficients = qr.solve(y);
    out.fitted = X * out.coefficients;
    out.residuals = y - out.fitted;
    if (want_xtx_inverse) {
        const auto R = qr.matrixQR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
        mat_type<Scalar> rinv = R.solve(mat_type<Scalar>::Identity(k, k));
        out.xtx_inverse = rinv * rinv.transpose();
    }
    return out;
}

template <class Scalar, class YType>
OlsFit<Scalar> ols_solve(const DesignMatrix<Scalar>& X,
                         const Eigen::MatrixBase<YType>& y,
                         bool want_xtx_inverse = true)
{
    return ols_solve<Scalar>(X.values, y, want_xtx_inverse);
}

/**
 * Residual of target after projection on the column span of Z.
 * target may hold several columns; each is projected independently.
 */
template <class Scalar, class TType>
mat_type<Scalar> partial_out(const Eigen::MatrixBase<TType>& target, const mat_type<Scalar>& Z)
{
    if (target.rows() != Z.rows() && Z.cols() > 0) {
        throw Error(ErrorCode::DimensionMismatch, "partial_out: row count mismatch");
    }
    if (Z.cols() == 0) return target;
    if (Z.cols() >= Z.rows()) {
        throw Error(ErrorCode::RankDeficient, "partial_out: need more rows than columns");
    }
    Eigen::HouseholderQR<mat_type<Scalar>> qr(Z);
    detail::check_rank(qr, Z.cols(), "partial_out");
    return target - Z * qr.solve(target);
}

template <class Scalar, class TType>
mat_type<Scalar> partial_out(const Eigen::MatrixBase<TType>& target, const DesignMatrix<Scalar>& Z)
{
    return partial_out<Scalar>(target, Z.values);
}

template <class Scalar>
struct Standardized
{
    DesignMatrix<Scalar> design;
    vec_type<Scalar> means;
    vec_type<Scalar> scales;
};

// Sample standard deviation with the n-1 denominator.
template <class Derived>
typename Derived::Scalar sample_sd(const Eigen::MatrixBase<Derived>& v)
{
    using Scalar = typename Derived::Scalar;
    const Index n = v.size();
    if (n < 2) return Scalar(0);
    const Scalar m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / Scalar(n - 1));
}

/// Centers and scales every non-intercept column to mean 0, sd 1.
template <class Scalar>
Standardized<Scalar> standardize_columns(const DesignMatrix<Scalar>& X)
{
    Standardized<Scalar> out{X, vec_type<Scalar>::Zero(X.cols()), vec_type<Scalar>::Ones(X.cols())};
    for (Index j = 0; j < X.cols(); ++j) {
        if (X.is_intercept_column(j)) continue;
        const auto col = X.values.col(j);
        const Scalar m = col.mean();
        const Scalar s = sample_sd(col);
        if (!(s > Scalar(0))) {
            throw Error(ErrorCode::ZeroVariance, "column '" + X.column_names[j] + "' has zero variance");
        }
        out.means(j) = m;
        out.scales(j) = s;
        out.design.values.col(j) = (col.array() - m) / s;
    }
    return out;
}

template <class Scalar>
DesignMatrix<Scalar> unstandardize_columns(const Standardized<Scalar>& s)
{
    DesignMatrix<Scalar> out = s.design;
    for (Index j = 0; j < out.cols(); ++j) {
        if (out.is_intercept_column(j)) continue;
        out.values.col(j) = out.values.col(j).array() * s.scales(j) + s.means(j);
    }
    return out;
}

/// Horizontal concatenation [A, B].
template <class Scalar>
mat_type<Scalar> hcat(const mat_type<Scalar>& A, const mat_type<Scalar>& B)
{
    if (A.cols() == 0) return B;
    if (B.cols() == 0) return A;
    mat_type<Scalar> out(A.rows(), A.cols() + B.cols());
    out << A, B;
    return out;
}

template <class Scalar>
mat_type<Scalar> select_columns(const mat_type<Scalar>& A, const std::vector<Index>& cols)
{
    return A(Eigen::all, cols);
}

template <class Scalar>
mat_type<Scalar> select_rows(const mat_type<Scalar>& A, const std::vector<Index>& rows)
{
    return A(rows, Eigen::all);
}

template <class Scalar>
vec_type<Scalar> select_rows(const vec_type<Scalar>& v, const std::vector<Index>& rows)
{
    return v(rows);
}

} // namespace sfa
