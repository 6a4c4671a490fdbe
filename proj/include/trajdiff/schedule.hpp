#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "trajdiff/io.hpp"

namespace trajdiff {

/// Noise levels sigma_1 > ... > sigma_L > 0.
struct NoiseSchedule {
    std::vector<double> sigmas;

    std::size_t size() const { return sigmas.size(); }
    double max() const { return sigmas.front(); }
    double min() const { return sigmas.back(); }

    /// Throws std::invalid_argument unless strictly decreasing and positive.
    void validate() const;
};

json to_json(const NoiseSchedule& s);
NoiseSchedule schedule_from_json(const json& j);

/// Geometric ladder from sigma_max down to sigma_min with both ends exact.
NoiseSchedule geometric_schedule(double sigma_max, double sigma_min, std::size_t levels);

/// sigma_1 = largest pairwise Euclidean distance among at most 2000 images drawn
/// without replacement under `seed`; sigma_L = sigma_min; geometric in between.
/// `images` holds `count` rows of `dim` values each. Throws std::invalid_argument
/// if all sampled images coincide or levels < 2.
NoiseSchedule make_schedule(std::span<const float> images, std::size_t dim, std::size_t levels,
                            double sigma_min = 0.01, std::uint64_t seed = 0);

}  // namespace trajdiff
