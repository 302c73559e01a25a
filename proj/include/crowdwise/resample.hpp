#pragma once

// Virtual experiments: repeated subsampling without replacement from an
// observed crowd.
//
// Experiment e at size index s draws from Stream::keyed(seed, s, e) alone, so
// the output is independent of how experiments are spread over threads. Each
// experiment picks N indices by a partial Fisher-Yates shuffle and evaluates
// the subset in ascending index order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "crowdwise/distfit.hpp"
#include "crowdwise/error.hpp"
#include "crowdwise/estimates.hpp"
#include "crowdwise/rng.hpp"

namespace crowdwise {

struct VirtualExperimentConfig {
    std::vector<std::size_t> sizes;   ///< strictly increasing subsample sizes
    std::size_t experiments = 10000;  ///< M per size
    double threshold = 0.05;          ///< accuracy cutoff on percent error
    std::uint64_t seed = 0;
    unsigned threads = 0;  ///< 0 picks std::thread::hardware_concurrency()
};

struct ExperimentPoint {
    std::size_t n = 0;
    double rel_diversity = 0.0;
    double rel_error = 0.0;

    friend bool operator==(const ExperimentPoint&, const ExperimentPoint&) = default;
};

struct CorrelationResult {
    std::size_t n = 0;
    std::optional<double> r;  ///< empty when either coordinate is constant
    std::size_t m = 0;

    friend bool operator==(const CorrelationResult&, const CorrelationResult&) = default;
};

enum class CurveMode { monte_carlo, exhaustive };

[[nodiscard]] inline std::string to_string(CurveMode mode) {
    return mode == CurveMode::monte_carlo ? "monte-carlo" : "exhaustive";
}

struct AccuracyCurve {
    std::vector<CurvePoint> points;
    CurveMode mode = CurveMode::monte_carlo;

    friend bool operator==(const AccuracyCurve&, const AccuracyCurve&) = default;
};

struct CenterOfMass {
    double mean_rel_diversity = 0.0;
    double mean_rel_error = 0.0;

    friend bool operator==(const CenterOfMass&, const CenterOfMass&) = default;
};

inline void validate(const VirtualExperimentConfig& config, std::size_t population) {
    if (config.sizes.empty()) fail(ErrorKind::input, "no subsample sizes given");
    if (config.experiments < 1) fail(ErrorKind::input, "experiments per size must be at least 1");
    if (!(config.threshold > 0.0)) fail(ErrorKind::input, "threshold must be positive");
    for (std::size_t i = 0; i < config.sizes.size(); ++i) {
        const std::size_t n = config.sizes[i];
        if (n < 1) fail(ErrorKind::input, "subsample size must be at least 1");
        if (n > population)
            fail(ErrorKind::input,
                 "subsample size " + std::to_string(n) + " exceeds population " + std::to_string(population));
        if (i > 0 && n <= config.sizes[i - 1]) fail(ErrorKind::input, "subsample sizes must be strictly increasing");
    }
}

namespace detail {

inline unsigned worker_count(unsigned requested, std::size_t tasks) {
    unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(tasks, 1)));
}

/// Calls body(begin, end) on contiguous chunks of [0, count), one per worker.
template <class Body>
void parallel_chunks(std::size_t count, unsigned threads, const Body& body) {
    const unsigned workers = worker_count(threads, count);
    if (workers <= 1) {
        body(std::size_t{0}, count);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = count * w / workers;
        const std::size_t end = count * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

/// Reusable buffers for drawing one subset at a time.
class SubsetDrawer {
public:
    explicit SubsetDrawer(std::span<const double> population) : population_(population), order_(population.size()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    std::span<const double> draw(std::size_t n, Stream& rng) {
        const std::size_t pop = order_.size();
        swaps_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(pop - i));
            std::swap(order_[i], order_[j]);
            swaps_[i] = j;
        }
        chosen_.assign(order_.begin(), order_.begin() + static_cast<std::ptrdiff_t>(n));
        // Undo the swaps so order_ is the identity again for the next draw.
        for (std::size_t i = n; i-- > 0;) std::swap(order_[i], order_[swaps_[i]]);
        std::sort(chosen_.begin(), chosen_.end());
        subset_.resize(n);
        for (std::size_t i = 0; i < n; ++i) subset_[i] = population_[chosen_[i]];
        return subset_;
    }

private:
    std::span<const double> population_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> swaps_;
    std::vector<std::size_t> chosen_;
    std::vector<double> subset_;
};

template <class PerExperiment>
void for_each_experiment(const EstimateSample& sample, const VirtualExperimentConfig& config,
                         const PerExperiment& visit) {
    validate(config, sample.size());
    const std::size_t m = config.experiments;
    const std::size_t total = config.sizes.size() * m;
    parallel_chunks(total, config.threads, [&](std::size_t begin, std::size_t end) {
        SubsetDrawer drawer(sample.values());
        for (std::size_t t = begin; t < end; ++t) {
            const std::size_t s = t / m;
            Stream rng = Stream::keyed(config.seed, s, t % m);
            visit(t, config.sizes[s], drawer.draw(config.sizes[s], rng));
        }
    });
}

}  // namespace detail

[[nodiscard]] inline ExperimentPoint experiment_point(std::span<const double> subset, double truth) {
    const RelativeMetrics rel = relative_metrics(dpt_decompose(subset, truth), truth);
    return {subset.size(), rel.rel_diversity, rel.rel_error};
}

/// M points per size, ordered by size then experiment index.
[[nodiscard]] inline std::vector<ExperimentPoint> run_virtual_experiments(const EstimateSample& sample,
                                                                           const VirtualExperimentConfig& config) {
    std::vector<ExperimentPoint> points(config.sizes.size() * config.experiments);
    detail::for_each_experiment(sample, config, [&](std::size_t t, std::size_t, std::span<const double> subset) {
        points[t] = experiment_point(subset, sample.truth());
    });
    return points;
}

/// Product-moment correlation.
[[nodiscard]] inline double pearson(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) fail(ErrorKind::input, "pearson needs at least 2 points");
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [x, y] : points) {
        mx += x;
        my += y;
    }
    const auto n = static_cast<double>(points.size());
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    // Relative test: a constant coordinate leaves only rounding residue.
    const auto flat = [n](double ss, double mean_value) {
        return !(ss > 0.0) || std::sqrt(ss / n) <= 1e-13 * std::abs(mean_value);
    };
    if (flat(sxx, mx) || flat(syy, my)) fail(ErrorKind::degenerate, "pearson of a constant coordinate");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Correlation between relative diversity and relative error, one per size.
[[nodiscard]] inline std::vector<CorrelationResult> correlations(std::span<const ExperimentPoint> points) {
    std::vector<CorrelationResult> out;
    std::size_t i = 0;
    while (i < points.size()) {
        std::size_t j = i;
        std::vector<std::pair<double, double>> xy;
        while (j < points.size() && points[j].n == points[i].n) {
            xy.emplace_back(points[j].rel_diversity, points[j].rel_error);
            ++j;
        }
        CorrelationResult result{points[i].n, std::nullopt, xy.size()};
        try {
            result.r = pearson(xy);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::degenerate && e.kind() != ErrorKind::input) throw;
        }
        out.push_back(result);
        i = j;
    }
    return out;
}

[[nodiscard]] inline CenterOfMass center_of_mass(std::span<const ExperimentPoint> points) {
    if (points.empty()) fail(ErrorKind::input, "center of mass of no points");
    CenterOfMass c;
    for (const auto& p : points) {
        c.mean_rel_diversity += p.rel_diversity;
        c.mean_rel_error += p.rel_error;
    }
    c.mean_rel_diversity /= static_cast<double>(points.size());
    c.mean_rel_error /= static_cast<double>(points.size());
    return c;
}

/// Fraction of virtual experiments whose percent error is strictly below the
/// threshold. Uses the same subsets as run_virtual_experiments.
[[nodiscard]] inline AccuracyCurve accuracy_curve(const EstimateSample& sample, const VirtualExperimentConfig& config) {
    std::vector<unsigned char> hit(config.sizes.size() * config.experiments, 0);
    detail::for_each_experiment(sample, config, [&](std::size_t t, std::size_t, std::span<const double> subset) {
        hit[t] = percent_error(mean(subset), sample.truth()) < config.threshold ? 1 : 0;
    });
    AccuracyCurve curve;
    for (std::size_t s = 0; s < config.sizes.size(); ++s) {
        const auto first = hit.begin() + static_cast<std::ptrdiff_t>(s * config.experiments);
        const auto hits = std::count(first, first + static_cast<std::ptrdiff_t>(config.experiments), 1);
        curve.points.push_back({config.sizes[s], static_cast<double>(hits) / static_cast<double>(config.experiments)});
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration

inline constexpr double max_enumerated_subsets = 1e6;

/// C(n, k) in floating point; saturates to infinity.
[[nodiscard]] inline double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(c);
}

/// Visits every k-subset of {0..n-1} as an ascending index list, in
/// lexicographic order.
template <class Visit>
void for_each_combination(std::size_t n, std::size_t k, const Visit& visit) {
    if (k > n) return;
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    while (true) {
        visit(std::span<const std::size_t>(idx));
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

/// Exact fraction of all n-subsets whose percent error is below threshold.
[[nodiscard]] inline double exhaustive_accuracy(const EstimateSample& sample, std::size_t n, double threshold) {
    if (n < 1 || n > sample.size())
        fail(ErrorKind::input, "subset size " + std::to_string(n) + " outside [1, " + std::to_string(sample.size()) + "]");
    const double total = binomial(sample.size(), n);
    if (total > max_enumerated_subsets)
        fail(ErrorKind::capacity, "C(" + std::to_string(sample.size()) + ", " + std::to_string(n) +
                                      ") subsets exceed the enumeration limit of 1e6");
    const auto values = sample.values();
    std::vector<double> subset(n);
    std::size_t hits = 0;
    std::size_t seen = 0;
    for_each_combination(sample.size(), n, [&](std::span<const std::size_t> idx) {
        for (std::size_t i = 0; i < n; ++i) subset[i] = values[idx[i]];
        if (percent_error(mean(subset), sample.truth()) < threshold) ++hits;
        ++seen;
    });
    return static_cast<double>(hits) / static_cast<double>(seen);
}

[[nodiscard]] inline AccuracyCurve exhaustive_curve(const EstimateSample& sample, std::span<const std::size_t> sizes,
                                                    double threshold) {
    AccuracyCurve curve{{}, CurveMode::exhaustive};
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (i > 0 && sizes[i] <= sizes[i - 1]) fail(ErrorKind::input, "subsample sizes must be strictly increasing");
        curve.points.push_back({sizes[i], exhaustive_accuracy(sample, sizes[i], threshold)});
    }
    return curve;
}

}  // namespace crowdwise
