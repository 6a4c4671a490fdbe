#pragma once

#include <cmath>

namespace trajdiff {

/// Planar vector in the heliocentric ecliptic plane.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double k) { x *= k; y *= k; return *this; }

    friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
    friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
    friend constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double k) { return a *= k; }
    friend constexpr Vec2 operator*(double k, Vec2 a) { return a *= k; }
    friend constexpr Vec2 operator/(const Vec2& a, double k) { return {a.x / k, a.y / k}; }
    friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

/// z-component of the 3-D cross product.
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

inline bool isfinite(const Vec2& a) { return std::isfinite(a.x) && std::isfinite(a.y); }

/// Position and velocity, SI units (m, m/s).
struct PlanarState {
    Vec2 r;
    Vec2 v;

    friend constexpr bool operator==(const PlanarState&, const PlanarState&) = default;
};

inline bool isfinite(const PlanarState& s) { return isfinite(s.r) && isfinite(s.v); }

}  // namespace trajdiff
