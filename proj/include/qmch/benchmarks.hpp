//---------------------------------------------------------------------------//
//! \file qmch/benchmarks.hpp
//! Built-in benchmark problems: Reed's slab and a planar dogleg duct.
//---------------------------------------------------------------------------//
#pragma once

#include <cstddef>
#include <iterator>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace qmch
{
//---------------------------------------------------------------------------//
/*!
 * Reed's five-material slab, mirrored about x = 0 onto [-8, 8] with vacuum
 * boundaries in place of the reflecting plane.
 *
 * Coefficients are the published benchmark values (Reed, 1971) for the half
 * slab [0, 8]:
 *
 *   [0, 2]  sigma_a = 50,  sigma_s = 0,   Q = 50
 *   [2, 3]  sigma_a = 5,   sigma_s = 0,   Q = 0
 *   [3, 5]  vacuum
 *   [5, 6]  sigma_a = 0.1, sigma_s = 0.9, Q = 1
 *   [6, 8]  sigma_a = 0.1, sigma_s = 0.9, Q = 0
 *
 * The cell count must be a multiple of 16 so that every material interface
 * is a mesh edge.
 */
inline ProblemSpec reed_problem(std::size_t cells = 80)
{
    if (cells == 0 || cells % 16 != 0)
    {
        throw ConfigError("Reed problem needs a cell count that is a multiple "
                          "of 16, got "
                          + std::to_string(cells));
    }
    struct Slab
    {
        double lo;
        double hi;
        Material mat;
        char const* name;
    };
    Slab const half[] = {
        {0, 2, {50, 0, 50}, "source"},
        {2, 3, {5, 0, 0}, "absorber"},
        {3, 5, {0, 0, 0}, "void"},
        {5, 6, {0.1, 0.9, 1}, "scatterer_source"},
        {6, 8, {0.1, 0.9, 0}, "scatterer"},
    };
    std::vector<RegionSpec> regions;
    for (auto it = std::rbegin(half); it != std::rend(half); ++it)
    {
        regions.push_back({std::string("left_") + it->name,
                           {-it->hi, -it->lo, 0, 1},
                           it->mat});
    }
    for (auto const& s : half)
    {
        regions.push_back(
            {std::string("right_") + s.name, {s.lo, s.hi, 0, 1}, s.mat});
    }
    return ProblemSpec("reed", Mesh::uniform(-8.0, 8.0, cells), std::move(regions));
}

//---------------------------------------------------------------------------//
/*!
 * Fixed geometry of the planar dogleg duct, in cm.
 *
 * The 30 x 50 cm shield holds a 5 cm square source block in the lower left
 * corner. A 5 cm wide near-void duct runs up from the source (leg 1), jogs
 * right (leg 2), and runs up again to the top boundary (leg 3).
 */
namespace dogleg
{
inline constexpr double width = 30;
inline constexpr double height = 50;
inline constexpr Box source{0, 5, 0, 5};
inline constexpr Box leg1{0, 5, 5, 25};
inline constexpr Box leg2{5, 20, 20, 25};
inline constexpr Box leg3{15, 20, 25, 50};

// Kobayashi benchmark, 50% scattering case
inline constexpr Material shield{0.05, 0.05, 0};
inline constexpr Material duct{5e-5, 5e-5, 0};
inline constexpr Material source_material{0.05, 0.05, 1};
}  // namespace dogleg

/*!
 * Planar adaptation of the Kobayashi dogleg benchmark with the duct and
 * source extended infinitely along z. Vacuum boundaries everywhere.
 *
 * nx and ny must place a mesh edge on every 5 cm duct boundary.
 */
inline ProblemSpec dogleg_problem(std::size_t nx = 30, std::size_t ny = 50)
{
    if (nx == 0 || ny == 0 || nx % 6 != 0 || ny % 10 != 0)
    {
        throw ConfigError("dogleg mesh must align with the 5 cm duct grid "
                          "(nx multiple of 6, ny multiple of 10)");
    }
    Box const domain{0, dogleg::width, 0, dogleg::height};
    std::vector<RegionSpec> fg{
        {"source", dogleg::source, dogleg::source_material},
        {"duct_leg1", dogleg::leg1, dogleg::duct},
        {"duct_leg2", dogleg::leg2, dogleg::duct},
        {"duct_leg3", dogleg::leg3, dogleg::duct},
    };
    auto regions = fill_background(domain, std::move(fg), dogleg::shield, "shield");
    return ProblemSpec("dogleg", Mesh::uniform(domain, nx, ny), std::move(regions));
}

//---------------------------------------------------------------------------//
//! Build a preset by name with its default mesh refined by an integer factor
inline ProblemSpec make_benchmark(std::string const& name, std::size_t refine = 1)
{
    if (name == "reed")
        return reed_problem(80 * refine);
    if (name == "dogleg")
        return dogleg_problem(30 * refine, 50 * refine);
    throw ConfigError("unknown problem preset '" + name + "'");
}

//---------------------------------------------------------------------------//
}  // namespace qmch
