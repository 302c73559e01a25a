#pragma once

// Seeded synthetic crowds drawn from mean-1 shapes and rescaled to a target
// collective estimate.

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "crowdwise/distfit.hpp"
#include "crowdwise/error.hpp"
#include "crowdwise/estimates.hpp"
#include "crowdwise/rng.hpp"

namespace crowdwise {

/// Side selection with probability sigma1 / (sigma1 + sigma2), then a
/// half-normal magnitude on that side. Exact for the two-piece density.
[[nodiscard]] inline double sample_two_piece(const TwoPieceNormal& params, Stream& rng) {
    const bool left = rng.uniform() < params.left_mass();
    const double z = std::abs(rng.normal());
    return left ? params.mu() - z * params.sigma1() : params.mu() + z * params.sigma2();
}

[[nodiscard]] inline double sample_gaussian(const GaussianShape& params, Stream& rng) {
    return 1.0 + params.sigma() * rng.normal();
}

using Shape = std::variant<TwoPieceNormal, GaussianShape>;

[[nodiscard]] inline double sample_shape(const Shape& shape, Stream& rng) {
    return std::visit(
        [&](const auto& s) {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, TwoPieceNormal>)
                return sample_two_piece(s, rng);
            else
                return sample_gaussian(s, rng);
        },
        shape);
}

struct GeneratorSpec {
    Shape shape = GaussianShape(0.01);
    double scale = 1.0;  ///< target mean of the generated estimates
    double truth = 1.0;
    std::size_t count = 1;
    std::uint64_t seed = 0;
    bool truncate = true;  ///< redraw nonpositive values instead of failing
};

struct GeneratedCrowd {
    EstimateSample sample;
    std::size_t redraws = 0;
};

[[nodiscard]] inline GeneratedCrowd generate_crowd(const GeneratorSpec& spec) {
    if (!(spec.scale > 0.0) || !std::isfinite(spec.scale)) fail(ErrorKind::input, "scale must be positive");
    if (!(spec.truth > 0.0) || !std::isfinite(spec.truth)) fail(ErrorKind::input, "truth must be positive");
    if (spec.count < 1) fail(ErrorKind::input, "count must be at least 1");

    Stream rng(spec.seed);
    std::vector<double> values;
    values.reserve(spec.count);
    std::size_t redraws = 0;
    while (values.size() < spec.count) {
        const double x = sample_shape(spec.shape, rng);
        const double g = spec.scale * x;
        if (x > 0.0 && g > 0.0) {
            values.push_back(g);
            continue;
        }
        if (!spec.truncate)
            fail(ErrorKind::generation, "nonpositive draw " + std::to_string(x) + " with truncation disabled");
        ++redraws;
    }
    return {EstimateSample(std::move(values), spec.truth), redraws};
}

}  // namespace crowdwise
