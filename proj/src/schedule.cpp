#include "trajdiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "trajdiff/rng.hpp"

namespace trajdiff {

void NoiseSchedule::validate() const
{
    if (sigmas.size() < 2) throw std::invalid_argument("a schedule needs at least two levels");
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (!(sigmas[i] > 0.0) || !std::isfinite(sigmas[i])) throw std::invalid_argument("sigmas must be positive");
        if (i > 0 && !(sigmas[i] < sigmas[i - 1])) throw std::invalid_argument("sigmas must strictly decrease");
    }
}

json to_json(const NoiseSchedule& s) { return {{"sigmas", s.sigmas}}; }

NoiseSchedule schedule_from_json(const json& j)
{
    NoiseSchedule s{j.at("sigmas").get<std::vector<double>>()};
    s.validate();
    return s;
}

NoiseSchedule geometric_schedule(double sigma_max, double sigma_min, std::size_t levels)
{
    if (levels < 2) throw std::invalid_argument("a schedule needs at least two levels");
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min)) throw std::invalid_argument("need sigma_max > sigma_min > 0");
    NoiseSchedule s;
    s.sigmas.resize(levels);
    const double log_ratio = std::log(sigma_min / sigma_max);
    for (std::size_t i = 0; i < levels; ++i)
        s.sigmas[i] = sigma_max * std::exp(log_ratio * static_cast<double>(i) / static_cast<double>(levels - 1));
    s.sigmas.front() = sigma_max;
    s.sigmas.back() = sigma_min;
    return s;
}

NoiseSchedule make_schedule(std::span<const float> images, std::size_t dim, std::size_t levels, double sigma_min,
                            std::uint64_t seed)
{
    if (dim == 0 || images.empty() || images.size() % dim != 0) throw std::invalid_argument("empty or ragged image set");
    const std::size_t count = images.size() / dim;
    std::vector<std::size_t> pick(count);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    if (count > 2000) {
        std::mt19937_64 rng(derive_seed(seed, stream::kSchedule, 0));
        std::shuffle(pick.begin(), pick.end(), rng);
        pick.resize(2000);
        std::sort(pick.begin(), pick.end());
    }
    double best = 0.0;
    for (std::size_t a = 0; a < pick.size(); ++a) {
        const float* xa = images.data() + pick[a] * dim;
        for (std::size_t b = a + 1; b < pick.size(); ++b) {
            const float* xb = images.data() + pick[b] * dim;
            double d2 = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double d = static_cast<double>(xa[k]) - static_cast<double>(xb[k]);
                d2 += d * d;
            }
            best = std::max(best, d2);
        }
    }
    if (!(best > 0.0)) throw std::invalid_argument("degenerate data: all sampled images are identical");
    return geometric_schedule(std::sqrt(best), sigma_min, levels);
}

}  // namespace trajdiff
