#pragma once

#include <string_view>

#include "trajdiff/vec2.hpp"

namespace trajdiff {

/// Days since 2000-01-01 12:00 TT (J2000).
struct Epoch {
    double mjd2000 = 0.0;

    friend constexpr auto operator<=>(const Epoch&, const Epoch&) = default;
};

enum class Body { Earth, Mars };

/// Parses "earth" / "mars" (case-insensitive). Throws std::invalid_argument otherwise.
Body body_from_name(std::string_view name);
std::string_view body_name(Body body);

/// Heliocentric planar state of a planet from low-precision mean Keplerian elements
/// (valid 1800-2050), projected onto the ecliptic plane by dropping z.
///
/// The elements carry linear secular rates; Kepler's equation is solved by Newton
/// iteration to 1e-12 rad. Pure and deterministic.
PlanarState planet_state(Body body, Epoch epoch);

}  // namespace trajdiff
