#pragma once

#include <array>

namespace topopt::quadrature {

/// Point in barycentric coordinates with weight relative to the triangle area.
struct TrianglePoint {
    std::array<double, 3> bary;
    double weight;
};

/// Edge-midpoint rule, exact for quadratics.
inline constexpr std::array<TrianglePoint, 3> midpoint{{
    {{0.5, 0.5, 0.0}, 1.0 / 3.0},
    {{0.0, 0.5, 0.5}, 1.0 / 3.0},
    {{0.5, 0.0, 0.5}, 1.0 / 3.0},
}};

/// Symmetric 6-point rule, exact for polynomials of degree 4.
inline constexpr double kA = 0.445948490915965;
inline constexpr double kB = 0.091576213509771;
inline constexpr double kWA = 0.223381589678011;
inline constexpr double kWB = 0.109951743655322;
inline constexpr std::array<TrianglePoint, 6> degree4{{
    {{kA, kA, 1.0 - 2.0 * kA}, kWA},
    {{kA, 1.0 - 2.0 * kA, kA}, kWA},
    {{1.0 - 2.0 * kA, kA, kA}, kWA},
    {{kB, kB, 1.0 - 2.0 * kB}, kWB},
    {{kB, 1.0 - 2.0 * kB, kB}, kWB},
    {{1.0 - 2.0 * kB, kB, kB}, kWB},
}};

/// Three-point Gauss-Legendre rule on [0, 1].
struct LinePoint {
    double s;
    double weight;
};
inline constexpr double kGaussOffset = 0.3872983346207417;  // sqrt(3/5) / 2
inline constexpr std::array<LinePoint, 3> gauss3{{
    {0.5 - kGaussOffset, 5.0 / 18.0},
    {0.5, 8.0 / 18.0},
    {0.5 + kGaussOffset, 5.0 / 18.0},
}};

}  // namespace topopt::quadrature
