#pragma once

// Small deterministic numerical kernels: adaptive Simpson quadrature,
// Nelder-Mead simplex minimization and golden-section search.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

namespace crowdwise::numeric {

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                    int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
template <class F>
[[nodiscard]] double integrate(const F& f, double a, double b, double tol = 1e-9, int max_depth = 48) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

template <std::size_t Dim>
struct SimplexResult {
    std::array<double, Dim> x{};
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Nelder-Mead minimization started from an axis-aligned simplex around x0.
/// Stops once every vertex lies within xtol (max-norm) of the best one.
template <std::size_t Dim, class F>
[[nodiscard]] SimplexResult<Dim> nelder_mead(const F& f, std::array<double, Dim> x0, double step, double xtol,
                                             std::size_t max_iter = 10000) {
    using Point = std::array<double, Dim>;
    std::array<Point, Dim + 1> simplex{};
    std::array<double, Dim + 1> fx{};
    simplex[0] = x0;
    for (std::size_t i = 0; i < Dim; ++i) {
        simplex[i + 1] = x0;
        simplex[i + 1][i] += step;
    }
    for (std::size_t i = 0; i <= Dim; ++i) fx[i] = f(simplex[i]);

    auto combine = [](const Point& a, const Point& b, double t) {
        Point out{};
        for (std::size_t k = 0; k < Dim; ++k) out[k] = a[k] + t * (b[k] - a[k]);
        return out;
    };

    SimplexResult<Dim> result;
    std::array<std::size_t, Dim + 1> order{};
    for (std::size_t it = 0; it < max_iter; ++it) {
        for (std::size_t i = 0; i <= Dim; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
        std::array<Point, Dim + 1> s2{};
        std::array<double, Dim + 1> f2{};
        for (std::size_t i = 0; i <= Dim; ++i) {
            s2[i] = simplex[order[i]];
            f2[i] = fx[order[i]];
        }
        simplex = s2;
        fx = f2;
        result.iterations = it;

        double spread = 0.0;
        for (std::size_t i = 1; i <= Dim; ++i)
            for (std::size_t k = 0; k < Dim; ++k) spread = std::max(spread, std::abs(simplex[i][k] - simplex[0][k]));
        if (spread <= xtol) {
            result.converged = true;
            break;
        }

        Point centroid{};
        for (std::size_t i = 0; i < Dim; ++i)
            for (std::size_t k = 0; k < Dim; ++k) centroid[k] += simplex[i][k] / static_cast<double>(Dim);

        const Point reflected = combine(centroid, simplex[Dim], -1.0);
        const double fr = f(reflected);
        if (fr < fx[0]) {
            const Point expanded = combine(centroid, simplex[Dim], -2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                simplex[Dim] = expanded;
                fx[Dim] = fe;
            } else {
                simplex[Dim] = reflected;
                fx[Dim] = fr;
            }
            continue;
        }
        if (fr < fx[Dim - 1]) {
            simplex[Dim] = reflected;
            fx[Dim] = fr;
            continue;
        }
        const bool outside = fr < fx[Dim];
        const Point contracted = outside ? combine(centroid, reflected, 0.5) : combine(centroid, simplex[Dim], 0.5);
        const double fc = f(contracted);
        if (fc < (outside ? fr : fx[Dim])) {
            simplex[Dim] = contracted;
            fx[Dim] = fc;
            continue;
        }
        for (std::size_t i = 1; i <= Dim; ++i) {
            simplex[i] = combine(simplex[0], simplex[i], 0.5);
            fx[i] = f(simplex[i]);
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= Dim; ++i)
        if (fx[i] < fx[best]) best = i;
    result.x = simplex[best];
    result.value = fx[best];
    return result;
}

/// Golden-section minimization of a unimodal f on [lo, hi].
template <class F>
[[nodiscard]] double golden_section(const F& f, double lo, double hi, double xtol) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > xtol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace crowdwise::numeric
