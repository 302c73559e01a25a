#pragma once

// Histograms of normalized estimates and least-squares density fits.
//
// Two mean-1 shapes are supported. The two-piece normal joins a left
// half-normal of width sigma1 and a right half-normal of width sigma2 at
//
//   mu = 1 - (sigma2 - sigma1) * sqrt(2/pi),   A = 1 / (sqrt(2 pi) (sigma1 + sigma2) / 2)
//
// which fixes its mean at 1. The Gaussian has mean 1 and free variance.
// Fits minimize the squared distance between bin densities and the model
// evaluated at bin centers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdwise/error.hpp"
#include "crowdwise/numeric.hpp"

namespace crowdwise {

struct Histogram {
    std::vector<double> edges;
    std::vector<double> densities;
    std::vector<std::size_t> counts;

    [[nodiscard]] std::size_t size() const noexcept { return counts.size(); }
    [[nodiscard]] double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
    [[nodiscard]] double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }

    [[nodiscard]] std::vector<double> centers() const {
        std::vector<double> out(size());
        for (std::size_t i = 0; i < size(); ++i) out[i] = center(i);
        return out;
    }

    friend bool operator==(const Histogram&, const Histogram&) = default;
};

namespace detail {

// Linear interpolation between order statistics (the common "type 7" rule).
inline double quantile_sorted(std::span<const double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

inline constexpr std::size_t min_auto_bins = 5;
inline constexpr std::size_t max_auto_bins = 100;

/// Freedman-Diaconis bin count, clamped to [5, 100].
[[nodiscard]] inline std::size_t freedman_diaconis_bins(std::span<const double> values) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = detail::quantile_sorted(sorted, 0.75) - detail::quantile_sorted(sorted, 0.25);
    const double h = 2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
    if (!(h > 0.0)) return max_auto_bins;
    const double k = std::ceil((sorted.back() - sorted.front()) / h);
    return static_cast<std::size_t>(std::clamp(k, double(min_auto_bins), double(max_auto_bins)));
}

/// Equal-width histogram over [min, max + 1e-9]; densities integrate to 1.
/// With no explicit bin count the Freedman-Diaconis rule is used.
[[nodiscard]] inline Histogram build_histogram(std::span<const double> values, std::optional<std::size_t> bins = {}) {
    if (values.empty()) fail(ErrorKind::input, "histogram of an empty sequence");
    if (bins && *bins < 2) fail(ErrorKind::input, "histogram needs at least 2 bins");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) fail(ErrorKind::degenerate, "histogram of data with zero range");

    const std::size_t k = bins ? *bins : freedman_diaconis_bins(values);
    const double top = hi + 1e-9;
    const double w = (top - lo) / static_cast<double>(k);

    Histogram h;
    h.edges.resize(k + 1);
    for (std::size_t i = 0; i < k; ++i) h.edges[i] = lo + static_cast<double>(i) * w;
    h.edges[k] = top;
    h.counts.assign(k, 0);
    for (double x : values) {
        auto idx = static_cast<std::size_t>(std::floor((x - lo) / w));
        h.counts[std::min(idx, k - 1)]++;
    }
    const auto n = static_cast<double>(values.size());
    h.densities.resize(k);
    for (std::size_t i = 0; i < k; ++i) h.densities[i] = static_cast<double>(h.counts[i]) / (n * h.width(i));
    return h;
}

// ---------------------------------------------------------------------------
// Shapes

[[nodiscard]] inline double two_piece_mu(double sigma1, double sigma2) {
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) fail(ErrorKind::input, "two-piece widths must be positive");
    return 1.0 - (sigma2 - sigma1) * std::sqrt(2.0 / std::numbers::pi);
}

/// Mean-1 two-piece normal. The junction and amplitude are derived from the widths.
class TwoPieceNormal {
public:
    TwoPieceNormal(double sigma1, double sigma2)
        : sigma1_(sigma1),
          sigma2_(sigma2),
          mu_(two_piece_mu(sigma1, sigma2)),
          amplitude_(1.0 / (std::sqrt(2.0 * std::numbers::pi) * (sigma1 + sigma2) / 2.0)) {}

    [[nodiscard]] double sigma1() const noexcept { return sigma1_; }
    [[nodiscard]] double sigma2() const noexcept { return sigma2_; }
    [[nodiscard]] double mu() const noexcept { return mu_; }
    [[nodiscard]] double amplitude() const noexcept { return amplitude_; }

    /// Probability of falling left of the junction.
    [[nodiscard]] double left_mass() const noexcept { return sigma1_ / (sigma1_ + sigma2_); }

    [[nodiscard]] double pdf(double x) const noexcept {
        const double d = x - mu_;
        const double s = x < mu_ ? sigma1_ : sigma2_;
        return amplitude_ * std::exp(-d * d / (2.0 * s * s));
    }

    friend bool operator==(const TwoPieceNormal&, const TwoPieceNormal&) = default;

private:
    double sigma1_;
    double sigma2_;
    double mu_;
    double amplitude_;
};

[[nodiscard]] inline double two_piece_pdf(const TwoPieceNormal& params, double x) noexcept { return params.pdf(x); }

/// Mean-1 Gaussian.
class GaussianShape {
public:
    explicit GaussianShape(double variance) : variance_(variance) {
        if (!(variance > 0.0) || !std::isfinite(variance)) fail(ErrorKind::input, "gaussian variance must be positive");
    }

    [[nodiscard]] double variance() const noexcept { return variance_; }
    [[nodiscard]] double sigma() const noexcept { return std::sqrt(variance_); }

    [[nodiscard]] double pdf(double x) const noexcept {
        return std::exp(-(x - 1.0) * (x - 1.0) / (2.0 * variance_)) / std::sqrt(2.0 * std::numbers::pi * variance_);
    }

    friend bool operator==(const GaussianShape&, const GaussianShape&) = default;

private:
    double variance_;
};

/// Integral of f(x) * pdf(x) over [mu - 12 sigma1, mu + 12 sigma2], split at the junction.
template <class F>
[[nodiscard]] double two_piece_expectation(const TwoPieceNormal& p, const F& f, double tol = 1e-9) {
    auto g = [&](double x) { return f(x) * p.pdf(x); };
    return numeric::integrate(g, p.mu() - 12.0 * p.sigma1(), p.mu(), tol) +
           numeric::integrate(g, p.mu(), p.mu() + 12.0 * p.sigma2(), tol);
}

[[nodiscard]] inline double two_piece_mass(const TwoPieceNormal& p) {
    return two_piece_expectation(p, [](double) { return 1.0; });
}

[[nodiscard]] inline double two_piece_mean(const TwoPieceNormal& p) {
    return two_piece_expectation(p, [](double x) { return x; });
}

[[nodiscard]] inline double two_piece_variance(const TwoPieceNormal& p) {
    const double m = two_piece_mean(p);
    return two_piece_expectation(p, [m](double x) { return (x - m) * (x - m); });
}

// ---------------------------------------------------------------------------
// Fits

template <class Params>
struct FitReport {
    Params params;
    double r_squared = 0.0;
    bool boundary_warning = false;  ///< optimum sits on the edge of the search region
};

/// 1 - SS_res / SS_tot over bin densities. A flat histogram (SS_tot = 0) scores
/// 1 when matched exactly and 0 otherwise.
template <class Model>
[[nodiscard]] double r_squared(const Histogram& hist, const Model& model) {
    double mean_density = 0.0;
    for (double d : hist.densities) mean_density += d;
    mean_density /= static_cast<double>(hist.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const double r = hist.densities[i] - model.pdf(hist.center(i));
        ss_res += r * r;
        ss_tot += (hist.densities[i] - mean_density) * (hist.densities[i] - mean_density);
    }
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

template <class Model>
[[nodiscard]] double squared_residual(const Histogram& hist, const Model& model) {
    double ss = 0.0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const double r = hist.densities[i] - model.pdf(hist.center(i));
        ss += r * r;
    }
    return ss;
}

inline constexpr double two_piece_grid_lo = 0.01;
inline constexpr double two_piece_grid_hi = 2.0;
inline constexpr std::size_t two_piece_grid_points = 200;  // step 0.01
inline constexpr double fit_xtol = 1e-5;

/// Grid search over (sigma1, sigma2) in [0.01, 2]^2 at step 0.01, then
/// Nelder-Mead refinement from the first grid minimum in row-major order.
[[nodiscard]] inline FitReport<TwoPieceNormal> fit_two_piece(const Histogram& hist) {
    if (hist.size() < 3) fail(ErrorKind::input, "two-piece fit needs at least 3 bins");
    auto grid_value = [](std::size_t i) { return two_piece_grid_lo + 0.01 * static_cast<double>(i); };

    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < two_piece_grid_points; ++i) {
        for (std::size_t j = 0; j < two_piece_grid_points; ++j) {
            const double ss = squared_residual(hist, TwoPieceNormal(grid_value(i), grid_value(j)));
            if (ss < best) {
                best = ss;
                bi = i;
                bj = j;
            }
        }
    }

    auto objective = [&](const std::array<double, 2>& s) {
        if (!(s[0] > 0.0) || !(s[1] > 0.0)) return std::numeric_limits<double>::infinity();
        return squared_residual(hist, TwoPieceNormal(s[0], s[1]));
    };
    const auto refined = numeric::nelder_mead<2>(objective, {grid_value(bi), grid_value(bj)}, 0.005, fit_xtol);
    std::array<double, 2> sigma = refined.x;
    if (!(refined.value <= best)) sigma = {grid_value(bi), grid_value(bj)};

    FitReport<TwoPieceNormal> report{TwoPieceNormal(sigma[0], sigma[1]), 0.0, false};
    report.r_squared = r_squared(hist, report.params);
    const std::size_t last = two_piece_grid_points - 1;
    report.boundary_warning = bi == 0 || bj == 0 || bi == last || bj == last;
    for (double s : sigma)
        if (s < two_piece_grid_lo || s > two_piece_grid_hi) report.boundary_warning = true;
    return report;
}

inline constexpr double gaussian_grid_lo = 1e-4;
inline constexpr double gaussian_grid_hi = 4.0;
inline constexpr std::size_t gaussian_grid_points = 400;

/// Logarithmic grid over variance in [1e-4, 4], then golden-section refinement
/// between the grid neighbours of the minimum.
[[nodiscard]] inline FitReport<GaussianShape> fit_gaussian(const Histogram& hist) {
    if (hist.size() < 3) fail(ErrorKind::input, "gaussian fit needs at least 3 bins");
    const double ratio = std::log(gaussian_grid_hi / gaussian_grid_lo) / double(gaussian_grid_points - 1);
    auto grid_value = [&](std::size_t i) {
        if (i == gaussian_grid_points - 1) return gaussian_grid_hi;
        return gaussian_grid_lo * std::exp(ratio * static_cast<double>(i));
    };
    auto objective = [&](double v) { return squared_residual(hist, GaussianShape(v)); };

    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    for (std::size_t i = 0; i < gaussian_grid_points; ++i) {
        const double ss = objective(grid_value(i));
        if (ss < best) {
            best = ss;
            bi = i;
        }
    }
    const double lo = grid_value(bi == 0 ? 0 : bi - 1);
    const double hi = grid_value(std::min(bi + 1, gaussian_grid_points - 1));
    double v = numeric::golden_section(objective, lo, hi, fit_xtol * lo);
    if (!(objective(v) <= best)) v = grid_value(bi);

    FitReport<GaussianShape> report{GaussianShape(v), 0.0, bi == 0 || bi == gaussian_grid_points - 1};
    report.r_squared = r_squared(hist, report.params);
    return report;
}

// ---------------------------------------------------------------------------
// Exponential tail alpha * exp(-beta N^2)

struct CurvePoint {
    std::size_t n = 0;
    double p = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct ExpDecayFit {
    double alpha = 0.0;
    double beta = 0.0;
    std::size_t n_min = 1;

    [[nodiscard]] double operator()(double n) const noexcept { return alpha * std::exp(-beta * n * n); }

    friend bool operator==(const ExpDecayFit&, const ExpDecayFit&) = default;
};

/// Linear regression of ln p on N^2 over the points with N >= n_min. A rising
/// trend is clamped to beta = 0, in which case alpha is the geometric mean of p.
[[nodiscard]] inline ExpDecayFit fit_exp_decay(std::span<const CurvePoint> points, std::size_t n_min) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& pt : points) {
        if (pt.n < n_min) continue;
        if (!(pt.p > 0.0))
            fail(ErrorKind::input, "exponential fit needs positive probabilities (N=" + std::to_string(pt.n) + ")");
        xs.push_back(static_cast<double>(pt.n) * static_cast<double>(pt.n));
        ys.push_back(std::log(pt.p));
    }
    if (xs.size() < 2) fail(ErrorKind::input, "exponential fit needs at least 2 points with N >= n_min");

    const auto m = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) fail(ErrorKind::degenerate, "exponential fit needs at least 2 distinct N");
    const double slope = sxy / sxx;
    if (slope >= 0.0) return {std::exp(my), 0.0, n_min};
    return {std::exp(my - slope * mx), -slope, n_min};
}

}  // namespace crowdwise
