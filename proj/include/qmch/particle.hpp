//---------------------------------------------------------------------------//
//! \file qmch/particle.hpp
//! Phase-space primitives: points, directions, and the MC particle state.
//---------------------------------------------------------------------------//
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

namespace qmch
{
//---------------------------------------------------------------------------//
//! Spatial coordinate: slab coordinate in 1D, (x, y) in 2D.
using Point = std::array<double, 2>;

//! Sentinel for "no time limit" (steady state).
inline constexpr double unbounded_time = std::numeric_limits<double>::infinity();

//---------------------------------------------------------------------------//
/*!
 * Unit direction of flight on the sphere.
 *
 * Directions are always full 3D vectors. Slab problems move along the z
 * component; planar problems move along (x, y) and treat z as an infinitely
 * extended, translation-invariant axis.
 */
struct Vec3
{
    double x{0};
    double y{0};
    double z{0};
};

inline double dot(Vec3 const& a, Vec3 const& b)
{
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline double norm(Vec3 const& a)
{
    return std::sqrt(dot(a, a));
}

//! Components of the direction that move a particle through the mesh
inline Point transport_direction(Vec3 const& omega, int dimension)
{
    if (dimension == 1)
    {
        return {omega.z, 0.0};
    }
    return {omega.x, omega.y};
}

//---------------------------------------------------------------------------//
/*!
 * A weighted computer particle.
 *
 * The scatter counter counts material scatterings since birth (or since the
 * last relabel at the start of a step).
 */
struct Particle
{
    Point pos{0, 0};
    Vec3 dir{0, 0, 1};
    double t{0};
    double w{0};
    int n{0};
    std::size_t cell{0};
};

//---------------------------------------------------------------------------//
}  // namespace qmch
