#pragma once

// Estimate data model and the diversity prediction decomposition.
//
// For estimates g_1..g_N of a quantity with true value G and collective
// estimate <g> (arithmetic mean):
//
//   gamma   = (<g> - G)^2                  quadratic collective error
//   epsilon = sum (g_i - G)^2 / N          mean quadratic individual error
//   delta   = sum (g_i - <g>)^2 / N        prediction diversity
//
// and gamma = epsilon - delta holds identically.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "crowdwise/error.hpp"

namespace crowdwise {

/// A crowd's raw estimates plus the ground-truth value.
class EstimateSample {
public:
    EstimateSample(std::vector<double> values, double truth) : values_(std::move(values)), truth_(truth) {
        if (values_.empty()) fail(ErrorKind::input, "estimate sample is empty");
        if (!(truth_ > 0.0) || !std::isfinite(truth_)) fail(ErrorKind::input, "truth must be a positive finite number");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(values_[i] > 0.0) || !std::isfinite(values_[i]))
                fail(ErrorKind::input, "estimate " + std::to_string(i) + " is not a positive finite number");
        }
    }

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double truth() const noexcept { return truth_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    friend bool operator==(const EstimateSample&, const EstimateSample&) = default;

private:
    std::vector<double> values_;
    double truth_;
};

enum class Aggregation { mean, median };

[[nodiscard]] inline std::string to_string(Aggregation method) { return method == Aggregation::mean ? "mean" : "median"; }

struct DptDecomposition {
    double collective = 0.0;  ///< <g>
    double gamma = 0.0;
    double epsilon = 0.0;
    double delta = 0.0;

    friend bool operator==(const DptDecomposition&, const DptDecomposition&) = default;
};

/// Dimensionless forms: sqrt(gamma)/G, sqrt(delta)/<g>, sqrt(epsilon)/G.
struct RelativeMetrics {
    double rel_error = 0.0;
    double rel_diversity = 0.0;
    double rel_individual = 0.0;

    friend bool operator==(const RelativeMetrics&, const RelativeMetrics&) = default;
};

[[nodiscard]] inline double mean(std::span<const double> values) {
    if (values.empty()) fail(ErrorKind::input, "mean of empty sequence");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

[[nodiscard]] inline double median(std::span<const double> values) {
    if (values.empty()) fail(ErrorKind::input, "median of empty sequence");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    if (n % 2 == 1) return sorted[n / 2];
    return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

[[nodiscard]] inline double collective_estimate(std::span<const double> values, Aggregation method) {
    return method == Aggregation::mean ? mean(values) : median(values);
}

[[nodiscard]] inline double collective_estimate(const EstimateSample& sample, Aggregation method = Aggregation::mean) {
    return collective_estimate(sample.values(), method);
}

/// Decomposition over raw values. Callers guarantee positivity; used on
/// subsamples that were drawn from an already validated sample.
[[nodiscard]] inline DptDecomposition dpt_decompose(std::span<const double> values, double truth) {
    const double m = mean(values);
    double eps = 0.0;
    double del = 0.0;
    for (double g : values) {
        eps += (g - truth) * (g - truth);
        del += (g - m) * (g - m);
    }
    const auto n = static_cast<double>(values.size());
    return {m, (m - truth) * (m - truth), eps / n, del / n};
}

[[nodiscard]] inline DptDecomposition dpt_decompose(const EstimateSample& sample) {
    return dpt_decompose(sample.values(), sample.truth());
}

/// The identity only holds for the arithmetic mean, so the median is refused.
[[nodiscard]] inline DptDecomposition dpt_decompose(const EstimateSample& sample, Aggregation method) {
    if (method != Aggregation::mean)
        fail(ErrorKind::input, "the diversity decomposition is defined for the arithmetic mean only");
    return dpt_decompose(sample);
}

[[nodiscard]] inline RelativeMetrics relative_metrics(const DptDecomposition& d, double truth) {
    if (!(d.collective > 0.0)) fail(ErrorKind::input, "collective estimate must be positive");
    if (!(truth > 0.0)) fail(ErrorKind::input, "truth must be positive");
    return {std::sqrt(d.gamma) / truth, std::sqrt(d.delta) / d.collective, std::sqrt(d.epsilon) / truth};
}

[[nodiscard]] inline double percent_error(double collective, double truth) {
    if (!(truth > 0.0)) fail(ErrorKind::input, "truth must be positive");
    return std::abs(collective - truth) / truth;
}

/// Fraction of individuals strictly farther from the truth than the collective.
[[nodiscard]] inline double outperformed_fraction(const EstimateSample& sample, Aggregation method = Aggregation::mean) {
    const double G = sample.truth();
    const double collective_miss = std::abs(collective_estimate(sample, method) - G);
    std::size_t beaten = 0;
    for (double g : sample.values())
        if (std::abs(g - G) > collective_miss) ++beaten;
    return static_cast<double>(beaten) / static_cast<double>(sample.size());
}

/// x_i = g_i / <g>.
[[nodiscard]] inline std::vector<double> normalize(std::span<const double> values) {
    const double m = mean(values);
    if (!(m > 0.0)) fail(ErrorKind::input, "cannot normalize by a nonpositive mean");
    std::vector<double> out;
    out.reserve(values.size());
    for (double g : values) out.push_back(g / m);
    return out;
}

[[nodiscard]] inline std::vector<double> normalize(const EstimateSample& sample) { return normalize(sample.values()); }

/// Population moment coefficient of skewness m3 / m2^(3/2), 1/N weights.
[[nodiscard]] inline double skewness(std::span<const double> values) {
    if (values.size() < 3) fail(ErrorKind::input, "skewness needs at least 3 values");
    const double m = mean(values);
    double m2 = 0.0;
    double m3 = 0.0;
    for (double v : values) {
        const double d = v - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    const auto n = static_cast<double>(values.size());
    m2 /= n;
    m3 /= n;
    // Relative check so that float noise around a constant sample counts as zero.
    if (!(m2 > 0.0) || std::sqrt(m2) <= 1e-14 * std::abs(m))
        fail(ErrorKind::degenerate, "skewness of a zero-variance sample");
    return m3 / std::pow(m2, 1.5);
}

}  // namespace crowdwise
