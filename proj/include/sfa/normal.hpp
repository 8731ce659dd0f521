#pragma once
#include <cmath>
#include <limits>
#include <numbers>

namespace sfa {

template <class Scalar>
Scalar norm_log_pdf(Scalar x)
{
    constexpr Scalar half_log_2pi = Scalar(0.91893853320467274178032973640562);
    return -Scalar(0.5) * x * x - half_log_2pi;
}

template <class Scalar>
Scalar norm_pdf(Scalar x)
{
    using std::exp;
    return exp(norm_log_pdf(x));
}

template <class Scalar>
Scalar norm_cdf(Scalar x)
{
    using std::erfc;
    return Scalar(0.5) * erfc(-x / std::numbers::sqrt2_v<Scalar>);
}

namespace detail {

// Mills ratio (1 - Phi(t)) / phi(t) by the Laplace continued fraction
// 1/(t+ 1/(t+ 2/(t+ 3/(t+ ...)))), evaluated with modified Lentz.
// Converges quickly for t >= 8.
template <class Scalar>
Scalar mills_ratio_cf(Scalar t)
{
    using std::abs;
    constexpr Scalar tiny = Scalar(1e-300);
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    Scalar f = t;
    Scalar C = t;
    Scalar D = Scalar(0);
    for (int k = 1; k < 500; ++k) {
        const Scalar a = Scalar(k);
        D = t + a * D;
        if (abs(D) < tiny) D = tiny;
        C = t + a / C;
        if (abs(C) < tiny) C = tiny;
        D = Scalar(1) / D;
        const Scalar delta = C * D;
        f *= delta;
        if (abs(delta - Scalar(1)) < eps) break;
    }
    return Scalar(1) / f;
}

} // namespace detail

/**
 * log of the inverse Mills ratio, log(phi(t) / (1 - Phi(t))).
 * Direct erfc evaluation below t = 8, continued fraction above;
 * finite for every finite t.
 */
template <class Scalar>
Scalar log_mills(Scalar t)
{
    using std::erfc;
    using std::log;
    if (t < Scalar(8)) {
        const Scalar tail = Scalar(0.5) * erfc(t / std::numbers::sqrt2_v<Scalar>);
        return norm_log_pdf(t) - log(tail);
    }
    return -log(detail::mills_ratio_cf(t));
}

/// phi(t) / (1 - Phi(t)).
template <class Scalar>
Scalar inverse_mills(Scalar t)
{
    using std::exp;
    return exp(log_mills(t));
}

/// log Phi(x), accurate in both tails.
template <class Scalar>
Scalar log_ndtr(Scalar x)
{
    using std::erfc;
    using std::log1p;
    if (x > Scalar(-1)) {
        return log1p(-Scalar(0.5) * erfc(x / std::numbers::sqrt2_v<Scalar>));
    }
    return norm_log_pdf(x) - log_mills(-x);
}

/**
 * Standard Normal quantile. Rational approximation (Acklam) followed by
 * one Halley refinement against erfc, giving near full double precision.
 */
template <class Scalar>
Scalar norm_quantile(Scalar p)
{
    using std::exp;
    using std::log;
    using std::sqrt;
    if (!(p > Scalar(0))) return -std::numeric_limits<Scalar>::infinity();
    if (!(p < Scalar(1))) return std::numeric_limits<Scalar>::infinity();

    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01, -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr Scalar p_low = Scalar(0.02425);

    Scalar x;
    if (p < p_low) {
        const Scalar q = sqrt(-2 * log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= 1 - p_low) {
        const Scalar q = p - Scalar(0.5);
        const Scalar r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const Scalar q = sqrt(-2 * log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }

    // Halley step; work in the tail nearest to p to avoid cancellation.
    for (int it = 0; it < 2; ++it) {
        Scalar e;
        if (p < Scalar(0.5)) {
            e = norm_cdf(x) - p;
        } else {
            e = (Scalar(1) - p) - norm_cdf(-x);
        }
        const Scalar u = e * sqrt(2 * std::numbers::pi_v<Scalar>) * exp(x * x / 2);
        x = x - u / (1 + x * u / 2);
    }
    return x;
}

} // namespace sfa
