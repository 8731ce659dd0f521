#pragma once
#include <cmath>
#include <limits>
#include <Eigen/Dense>
#include <sfa/types.hpp>

namespace sfa {

struct BfgsOptions
{
    int max_iterations = 500;
    // Convergence when max |grad| falls below this.
    double gradient_tolerance = 1e-6;
    int max_backtracks = 60;
};

template <class Scalar>
struct BfgsResult
{
    vec_type<Scalar> x;
    Scalar value = 0;
    vec_type<Scalar> grad;
    int iterations = 0;
    bool converged = false;
};

/**
 * Minimizes f with BFGS on the inverse Hessian and Armijo backtracking.
 * f(x, grad) returns the objective and writes the gradient into grad.
 * Non-finite objective values are treated as +infinity by the line search.
 */
template <class Scalar, class F>
BfgsResult<Scalar> bfgs_minimize(F&& f, vec_type<Scalar> x, const BfgsOptions& opts = {})
{
    using vec_t = vec_type<Scalar>;
    using mat_t = mat_type<Scalar>;
    const Index k = x.size();
    BfgsResult<Scalar> res;
    vec_t g(k);
    Scalar fx = f(x, g);
    if (!std::isfinite(fx) || !g.allFinite()) {
        res.x = x;
        res.value = fx;
        res.grad = g;
        return res;
    }
    mat_t Hinv = mat_t::Identity(k, k);
    bool scaled = false;
    vec_t g_new(k);

    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        if (g.template lpNorm<Eigen::Infinity>() < opts.gradient_tolerance) {
            res.converged = true;
            break;
        }
        vec_t dir = -Hinv * g;
        Scalar slope = g.dot(dir);
        if (!(slope < 0)) {
            Hinv.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        Scalar alpha = 1;
        Scalar f_new = 0;
        vec_t x_new(k);
        bool accepted = false;
        for (int b = 0; b < opts.max_backtracks; ++b) {
            x_new = x + alpha * dir;
            f_new = f(x_new, g_new);
            if (std::isfinite(f_new) && g_new.allFinite() && f_new <= fx + Scalar(1e-4) * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= Scalar(0.5);
        }
        if (!accepted) break;

        const vec_t s = x_new - x;
        const vec_t y = g_new - g;
        const Scalar sy = s.dot(y);
        if (sy > Scalar(1e-12) * s.norm() * y.norm()) {
            if (!scaled) {
                Hinv *= sy / y.squaredNorm();
                scaled = true;
            }
            const Scalar rho = Scalar(1) / sy;
            const vec_t Hy = Hinv * y;
            Hinv += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    if (!res.converged && g.template lpNorm<Eigen::Infinity>() < opts.gradient_tolerance) res.converged = true;
    res.x = std::move(x);
    res.value = fx;
    res.grad = std::move(g);
    res.iterations = it;
    return res;
}

/// Hessian by central differences of an analytic gradient, symmetrized.
template <class Scalar, class G>
mat_type<Scalar> fd_hessian(G&& grad, const vec_type<Scalar>& x, Scalar rel_step = Scalar(1e-5))
{
    const Index k = x.size();
    mat_type<Scalar> H(k, k);
    vec_type<Scalar> gp(k), gm(k);
    for (Index j = 0; j < k; ++j) {
        const Scalar h = rel_step * std::max(Scalar(1), std::abs(x(j)));
        vec_type<Scalar> xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        grad(xp, gp);
        grad(xm, gm);
        H.col(j) = (gp - gm) / (2 * h);
    }
    return Scalar(0.5) * (H + H.transpose());
}

} // namespace sfa
