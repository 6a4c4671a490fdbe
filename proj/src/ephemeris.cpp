#include "trajdiff/ephemeris.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include "trajdiff/constants.hpp"

namespace trajdiff {

namespace {

// Elements at J2000 and rates per Julian century, ecliptic and equinox of J2000.
// a [AU], e, I [deg], L [deg], longitude of perihelion [deg], longitude of node [deg].
struct MeanElements {
    double a, e, incl, mean_long, long_peri, long_node;
    double a_dot, e_dot, incl_dot, mean_long_dot, long_peri_dot, long_node_dot;
};

constexpr MeanElements kEarthMoonBary{
    1.00000261, 0.01671123, -0.00001531, 100.46457166, 102.93768193, 0.0,
    0.00000562, -0.00004392, -0.01294668, 35999.37244981, 0.32327364, 0.0};

constexpr MeanElements kMars{
    1.52371034, 0.09339410, 1.84969142, -4.55343205, -23.94362959, 49.55953891,
    0.00001847, 0.00007882, -0.00813131, 19140.30268499, 0.44441088, -0.29257343};

const MeanElements& elements_of(Body body)
{
    switch (body) {
        case Body::Earth: return kEarthMoonBary;
        case Body::Mars: return kMars;
    }
    throw std::invalid_argument("unknown body identifier " +
                                std::to_string(static_cast<int>(body)));
}

double solve_kepler(double mean_anomaly, double e)
{
    double ecc_anomaly = e < 0.8 ? mean_anomaly : kPi;
    for (int i = 0; i < 50; ++i) {
        const double f = ecc_anomaly - e * std::sin(ecc_anomaly) - mean_anomaly;
        const double step = f / (1.0 - e * std::cos(ecc_anomaly));
        ecc_anomaly -= step;
        if (std::abs(step) < 1e-12) break;
    }
    return ecc_anomaly;
}

}  // namespace

Body body_from_name(std::string_view name)
{
    std::string lower(name);
    std::ranges::transform(lower, lower.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "earth") return Body::Earth;
    if (lower == "mars") return Body::Mars;
    throw std::invalid_argument("unknown body identifier '" + std::string(name) + "'");
}

std::string_view body_name(Body body)
{
    switch (body) {
        case Body::Earth: return "earth";
        case Body::Mars: return "mars";
    }
    throw std::invalid_argument("unknown body identifier");
}

PlanarState planet_state(Body body, Epoch epoch)
{
    if (!std::isfinite(epoch.mjd2000)) throw std::invalid_argument("planet_state: non-finite epoch");
    const MeanElements& el = elements_of(body);
    const double centuries = epoch.mjd2000 / kJulianCentury;

    const double a = (el.a + el.a_dot * centuries) * kAu;
    const double e = el.e + el.e_dot * centuries;
    const double incl = (el.incl + el.incl_dot * centuries) * kDegToRad;
    const double mean_long = el.mean_long + el.mean_long_dot * centuries;
    const double long_peri = el.long_peri + el.long_peri_dot * centuries;
    const double long_node = (el.long_node + el.long_node_dot * centuries) * kDegToRad;
    const double arg_peri = long_peri * kDegToRad - long_node;
    const double mean_anomaly = std::remainder((mean_long - long_peri) * kDegToRad, 2.0 * kPi);

    const double ecc_anomaly = solve_kepler(mean_anomaly, e);
    const double cos_e = std::cos(ecc_anomaly);
    const double sin_e = std::sin(ecc_anomaly);
    const double b_over_a = std::sqrt(1.0 - e * e);

    // Perifocal frame.
    const double xp = a * (cos_e - e);
    const double yp = a * b_over_a * sin_e;
    const double rate = std::sqrt(kMuSun / a) / (a * (1.0 - e * cos_e));  // dE/dt
    const double vxp = -a * sin_e * rate;
    const double vyp = a * b_over_a * cos_e * rate;

    // Rotate perifocal -> ecliptic: Rz(node) Rx(incl) Rz(arg_peri), keep x and y rows.
    const double co = std::cos(arg_peri), so = std::sin(arg_peri);
    const double cn = std::cos(long_node), sn = std::sin(long_node);
    const double ci = std::cos(incl);
    const double r11 = cn * co - sn * so * ci;
    const double r12 = -cn * so - sn * co * ci;
    const double r21 = sn * co + cn * so * ci;
    const double r22 = -sn * so + cn * co * ci;

    return PlanarState{{r11 * xp + r12 * yp, r21 * xp + r22 * yp},
                       {r11 * vxp + r12 * vyp, r21 * vxp + r22 * vyp}};
}

}  // namespace trajdiff
