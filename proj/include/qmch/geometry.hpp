//---------------------------------------------------------------------------//
//! \file qmch/geometry.hpp
//! Structured 1D/2D meshes, material regions, and ray-to-face distances.
//---------------------------------------------------------------------------//
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "particle.hpp"

namespace qmch
{
//---------------------------------------------------------------------------//
/*!
 * Piecewise-constant material coefficients.
 *
 * Units: cross sections in 1/cm; q is the angle-integrated isotropic volume
 * source in particles / (cm^3 s).
 */
struct Material
{
    double sigma_a{0};
    double sigma_s{0};
    double q{0};

    double sigma_t() const { return sigma_a + sigma_s; }
};

//---------------------------------------------------------------------------//
//! Axis-aligned interval (1D) or rectangle (2D). 1D boxes span y in [0, 1].
struct Box
{
    double x_lo{0};
    double x_hi{0};
    double y_lo{0};
    double y_hi{1};

    double lo(int axis) const { return axis == 0 ? x_lo : y_lo; }
    double hi(int axis) const { return axis == 0 ? x_hi : y_hi; }
    double volume() const { return (x_hi - x_lo) * (y_hi - y_lo); }

    bool contains(Point const& p) const
    {
        return p[0] >= x_lo && p[0] <= x_hi && p[1] >= y_lo && p[1] <= y_hi;
    }
};

//---------------------------------------------------------------------------//
struct RegionSpec
{
    std::string name;
    Box extent;
    Material material;
};

//---------------------------------------------------------------------------//
//! Domain faces, used to key boundary data.
enum class Face
{
    x_lo = 0,
    x_hi,
    y_lo,
    y_hi
};

inline constexpr std::array<Face, 4> all_faces{
    Face::x_lo, Face::x_hi, Face::y_lo, Face::y_hi};

inline char const* to_cstring(Face f)
{
    switch (f)
    {
        case Face::x_lo:
            return "x_lo";
        case Face::x_hi:
            return "x_hi";
        case Face::y_lo:
            return "y_lo";
        case Face::y_hi:
            return "y_hi";
    }
    return "?";
}

//---------------------------------------------------------------------------//
enum class ExitKind
{
    interior_face,
    domain_boundary
};

//! Result of a distance-to-face query
struct CellExit
{
    double distance{std::numeric_limits<double>::infinity()};
    int axis{0};  //!< Axis normal to the exit face
    int side{1};  //!< +1 for the high face, -1 for the low face
    ExitKind kind{ExitKind::domain_boundary};
};

//---------------------------------------------------------------------------//
/*!
 * Tensor-product structured mesh in one or two dimensions.
 *
 * Cells are numbered x-fastest: cell = ix + nx * iy. A 1D mesh has a single
 * unit-height row so that cell volumes are lengths (per unit area).
 */
class Mesh
{
  public:
    Mesh() = default;

    explicit Mesh(std::vector<double> x_edges)
        : Mesh(1, std::move(x_edges), {0.0, 1.0})
    {
    }

    Mesh(std::vector<double> x_edges, std::vector<double> y_edges)
        : Mesh(2, std::move(x_edges), std::move(y_edges))
    {
    }

    static Mesh uniform(double lo, double hi, std::size_t n)
    {
        return Mesh(linspace(lo, hi, n));
    }

    static Mesh uniform(Box const& box, std::size_t nx, std::size_t ny)
    {
        return Mesh(linspace(box.x_lo, box.x_hi, nx),
                    linspace(box.y_lo, box.y_hi, ny));
    }

    //! Split every cell into k equal parts per axis; original edges are kept
    Mesh refined(std::size_t k) const
    {
        if (k == 0)
            throw ConfigError("mesh refinement factor must be positive");
        auto split = [k](std::span<double const> e) {
            std::vector<double> r;
            for (std::size_t i = 0; i + 1 < e.size(); ++i)
            {
                for (std::size_t j = 0; j < k; ++j)
                    r.push_back(e[i] + (e[i + 1] - e[i]) * j / k);
            }
            r.push_back(e.back());
            return r;
        };
        if (dim_ == 1)
            return Mesh(split(edges_[0]));
        return Mesh(split(edges_[0]), split(edges_[1]));
    }

    int dimension() const { return dim_; }
    std::size_t nx() const { return edges_[0].size() - 1; }
    std::size_t ny() const { return edges_[1].size() - 1; }
    std::size_t num_cells() const { return nx() * ny(); }

    std::span<double const> edges(int axis) const { return edges_[axis]; }

    std::size_t cell_index(std::size_t ix, std::size_t iy) const
    {
        return ix + nx() * iy;
    }

    std::array<std::size_t, 2> cell_coords(std::size_t cell) const
    {
        return {cell % nx(), cell / nx()};
    }

    Box cell_box(std::size_t cell) const
    {
        auto [ix, iy] = this->cell_coords(cell);
        return {edges_[0][ix], edges_[0][ix + 1], edges_[1][iy],
                edges_[1][iy + 1]};
    }

    double volume(std::size_t cell) const { return cell_box(cell).volume(); }

    Point center(std::size_t cell) const
    {
        Box b = cell_box(cell);
        return {0.5 * (b.x_lo + b.x_hi), 0.5 * (b.y_lo + b.y_hi)};
    }

    Box domain() const
    {
        return {edges_[0].front(), edges_[0].back(), edges_[1].front(),
                edges_[1].back()};
    }

    //! Largest domain extent, used to scale geometric tolerances
    double length_scale() const
    {
        Box d = this->domain();
        double s = d.x_hi - d.x_lo;
        if (dim_ == 2)
            s = std::max(s, d.y_hi - d.y_lo);
        return s;
    }

    //! Find the cell containing a point; interior ties go to the higher cell.
    std::size_t locate(Point const& p) const
    {
        std::array<std::size_t, 2> idx{0, 0};
        for (int axis = 0; axis < dim_; ++axis)
        {
            auto const& e = edges_[axis];
            if (!(p[axis] >= e.front() && p[axis] <= e.back()))
            {
                std::ostringstream os;
                os << "position (" << p[0];
                if (dim_ == 2)
                    os << ", " << p[1];
                os << ") is outside the domain";
                throw OutOfDomainError(os.str());
            }
            auto it = std::upper_bound(e.begin(), e.end(), p[axis]);
            std::size_t i = static_cast<std::size_t>(it - e.begin());
            idx[axis] = std::min(i, e.size() - 1) - 1;
        }
        return cell_index(idx[0], idx[1]);
    }

    /*!
     * Distance along the direction to the first face of the given cell.
     *
     * A zero direction component never reaches the faces normal to it. When
     * two faces are hit simultaneously the lower axis is reported; the
     * subsequent query returns a zero distance for the other one.
     */
    CellExit
    distance_to_cell_exit(Point const& p, Point const& dir, std::size_t cell) const
    {
        auto ij = this->cell_coords(cell);
        CellExit result;
        for (int axis = 0; axis < dim_; ++axis)
        {
            double d = dir[axis];
            if (d == 0.0)
                continue;
            auto const& e = edges_[axis];
            double face = d > 0 ? e[ij[axis] + 1] : e[ij[axis]];
            double dist = std::max((face - p[axis]) / d, 0.0);
            if (dist < result.distance)
            {
                result.distance = dist;
                result.axis = axis;
                result.side = d > 0 ? 1 : -1;
            }
        }
        if (std::isfinite(result.distance))
        {
            std::size_t i = ij[result.axis];
            std::size_t n = edges_[result.axis].size() - 1;
            bool at_boundary = result.side > 0 ? i + 1 == n : i == 0;
            result.kind = at_boundary ? ExitKind::domain_boundary
                                      : ExitKind::interior_face;
        }
        return result;
    }

    //! Cell across a face; caller guarantees the face is interior
    std::size_t neighbor(std::size_t cell, int axis, int side) const
    {
        auto ij = this->cell_coords(cell);
        ij[axis] = side > 0 ? ij[axis] + 1 : ij[axis] - 1;
        return cell_index(ij[0], ij[1]);
    }

    //! Coordinate of a face of a cell
    double face_coord(std::size_t cell, int axis, int side) const
    {
        auto ij = this->cell_coords(cell);
        return side > 0 ? edges_[axis][ij[axis] + 1] : edges_[axis][ij[axis]];
    }

    //! Snap to the nearest mesh edge within tolerance, or NaN if none
    double snap_to_edge(int axis, double coord, double tol) const
    {
        auto const& e = edges_[axis];
        auto it = std::lower_bound(e.begin(), e.end(), coord - tol);
        if (it != e.end() && std::abs(*it - coord) <= tol)
            return *it;
        return std::numeric_limits<double>::quiet_NaN();
    }

    static std::vector<double> linspace(double lo, double hi, std::size_t n)
    {
        if (n == 0)
            throw ConfigError("mesh must have at least one cell per axis");
        std::vector<double> e(n + 1);
        for (std::size_t i = 0; i <= n; ++i)
            e[i] = lo + (hi - lo) * static_cast<double>(i) / n;
        e.back() = hi;
        return e;
    }

  private:
    int dim_{1};
    std::array<std::vector<double>, 2> edges_{std::vector<double>{0, 1},
                                              std::vector<double>{0, 1}};

    Mesh(int dim, std::vector<double> x, std::vector<double> y) : dim_{dim}
    {
        edges_[0] = std::move(x);
        edges_[1] = std::move(y);
        for (int axis = 0; axis < 2; ++axis)
        {
            auto const& e = edges_[axis];
            if (e.size() < 2)
                throw ConfigError("mesh axis needs at least two edges");
            for (std::size_t i = 1; i < e.size(); ++i)
            {
                if (!(e[i] > e[i - 1]) || !std::isfinite(e[i]))
                {
                    std::ostringstream os;
                    os << "mesh edges along axis " << axis
                       << " must be strictly increasing (edge " << i << ")";
                    throw ConfigError(os.str());
                }
            }
        }
    }
};

//---------------------------------------------------------------------------//
/*!
 * Incoming boundary intensity G, constant per face.
 *
 * Values are isotropic angular intensities (per steradian) applied to
 * inward-pointing directions only.
 */
struct BoundarySource
{
    std::array<double, 4> intensity{0, 0, 0, 0};

    double operator[](Face f) const
    {
        return intensity[static_cast<std::size_t>(f)];
    }
    double& operator[](Face f)
    {
        return intensity[static_cast<std::size_t>(f)];
    }

    bool empty() const
    {
        return std::all_of(intensity.begin(), intensity.end(),
                           [](double g) { return g == 0.0; });
    }
};

//---------------------------------------------------------------------------//
/*!
 * A complete transport problem: mesh, materials, boundary and initial data.
 *
 * Region edges must coincide with mesh edges and regions must tile the
 * domain; the constructor validates both and snaps region edges onto the
 * mesh. Immutable after construction.
 */
class ProblemSpec
{
  public:
    ProblemSpec() = default;

    ProblemSpec(std::string name,
                Mesh mesh,
                std::vector<RegionSpec> regions,
                BoundarySource boundary = {},
                std::vector<Particle> initial = {})
        : name_{std::move(name)}
        , mesh_{std::move(mesh)}
        , regions_{std::move(regions)}
        , boundary_{boundary}
        , initial_{std::move(initial)}
    {
        this->validate();
    }

    std::string const& name() const { return name_; }
    Mesh const& mesh() const { return mesh_; }
    int dimension() const { return mesh_.dimension(); }
    std::span<RegionSpec const> regions() const { return regions_; }
    BoundarySource const& boundary() const { return boundary_; }
    std::span<Particle const> initial() const { return initial_; }

    Material const& material_at(std::size_t cell) const
    {
        return regions_[cell_region_[cell]].material;
    }

    std::size_t region_of(std::size_t cell) const
    {
        return cell_region_[cell];
    }

    std::size_t locate(Point const& p) const { return mesh_.locate(p); }

    //! Angle-integrated volume source over the domain, particles/s
    double total_source() const
    {
        double total = 0;
        for (auto const& r : regions_)
            total += r.material.q * r.extent.volume();
        return total;
    }

    //! Length (1D) or length of the face (2D) of a domain face
    double face_area(Face f) const
    {
        Box d = mesh_.domain();
        if (mesh_.dimension() == 1)
            return (f == Face::x_lo || f == Face::x_hi) ? 1.0 : 0.0;
        return (f == Face::x_lo || f == Face::x_hi) ? d.y_hi - d.y_lo
                                                    : d.x_hi - d.x_lo;
    }

    //! Scattering cross sections per cell
    std::vector<double> sigma_s_field() const
    {
        std::vector<double> s(mesh_.num_cells());
        for (std::size_t c = 0; c < s.size(); ++c)
            s[c] = this->material_at(c).sigma_s;
        return s;
    }

    //! Copy with every volume source scaled
    ProblemSpec with_source_scaled(double factor) const
    {
        auto regions = regions_;
        for (auto& r : regions)
            r.material.q *= factor;
        BoundarySource b = boundary_;
        for (auto& g : b.intensity)
            g *= factor;
        auto initial = initial_;
        for (auto& p : initial)
            p.w *= factor;
        return ProblemSpec(name_, mesh_, std::move(regions), b,
                           std::move(initial));
    }

    //! Copy on a mesh refined k times per axis
    ProblemSpec refined(std::size_t k) const
    {
        return ProblemSpec(name_, mesh_.refined(k), regions_, boundary_, initial_);
    }

    //! Copy with replaced initial census
    ProblemSpec with_initial(std::vector<Particle> initial) const
    {
        return ProblemSpec(name_, mesh_, regions_, boundary_,
                           std::move(initial));
    }

  private:
    std::string name_;
    Mesh mesh_;
    std::vector<RegionSpec> regions_;
    BoundarySource boundary_;
    std::vector<Particle> initial_;
    std::vector<std::size_t> cell_region_;

    void validate()
    {
        if (regions_.empty())
            throw ConfigError("problem has no regions");

        int const dim = mesh_.dimension();
        double const tol = 1e-12 * mesh_.length_scale();
        for (auto& r : regions_)
        {
            auto const& m = r.material;
            if (!(m.sigma_a >= 0 && m.sigma_s >= 0 && m.q >= 0)
                || !std::isfinite(m.sigma_a + m.sigma_s + m.q))
            {
                throw ConfigError("region '" + r.name
                                  + "' has a negative or non-finite "
                                    "coefficient");
            }
            if (dim == 1)
            {
                r.extent.y_lo = 0;
                r.extent.y_hi = 1;
            }
            for (int axis = 0; axis < dim; ++axis)
            {
                double* ends[2] = {axis == 0 ? &r.extent.x_lo : &r.extent.y_lo,
                                   axis == 0 ? &r.extent.x_hi : &r.extent.y_hi};
                for (double* end : ends)
                {
                    double snapped = mesh_.snap_to_edge(axis, *end, tol);
                    if (std::isnan(snapped))
                    {
                        std::ostringstream os;
                        os << "region '" << r.name << "' edge "
                           << (axis == 0 ? "x" : "y") << "=" << *end
                           << " does not coincide with a mesh edge";
                        throw ConfigError(os.str());
                    }
                    *end = snapped;
                }
                if (!(r.extent.hi(axis) > r.extent.lo(axis)))
                {
                    throw ConfigError("region '" + r.name
                                      + "' has an empty extent");
                }
            }
        }

        cell_region_.assign(mesh_.num_cells(), 0);
        for (std::size_t c = 0; c < mesh_.num_cells(); ++c)
        {
            Point ctr = mesh_.center(c);
            int hits = 0;
            for (std::size_t r = 0; r < regions_.size(); ++r)
            {
                if (regions_[r].extent.contains(ctr))
                {
                    cell_region_[c] = r;
                    ++hits;
                }
            }
            if (hits != 1)
            {
                std::ostringstream os;
                os << "cell " << c << " at (" << ctr[0];
                if (dim == 2)
                    os << ", " << ctr[1];
                os << ") is covered by " << hits
                   << " regions; regions must tile the domain";
                throw ConfigError(os.str());
            }
        }

        for (auto const& p : initial_)
        {
            if (!(p.w >= 0) || std::abs(norm(p.dir) - 1) > 1e-10)
                throw ConfigError("initial census particle is malformed");
        }
        for (Face f : all_faces)
        {
            if (!(boundary_[f] >= 0) || !std::isfinite(boundary_[f]))
                throw ConfigError("boundary intensity must be nonnegative");
            if (dim == 1 && (f == Face::y_lo || f == Face::y_hi)
                && boundary_[f] != 0)
            {
                throw ConfigError("1D problems have no y faces");
            }
        }
    }
};

//---------------------------------------------------------------------------//
/*!
 * Cover the parts of a 2D domain not occupied by foreground rectangles.
 *
 * Foreground rectangles must not overlap. The remainder is split along the
 * grid of all rectangle edges and merged into row-wise runs.
 */
inline std::vector<RegionSpec> fill_background(Box const& domain,
                                               std::vector<RegionSpec> fg,
                                               Material const& background,
                                               std::string const& name)
{
    std::vector<double> xs{domain.x_lo, domain.x_hi};
    std::vector<double> ys{domain.y_lo, domain.y_hi};
    for (auto const& r : fg)
    {
        xs.push_back(r.extent.x_lo);
        xs.push_back(r.extent.x_hi);
        ys.push_back(r.extent.y_lo);
        ys.push_back(r.extent.y_hi);
    }
    for (auto* v : {&xs, &ys})
    {
        std::sort(v->begin(), v->end());
        v->erase(std::unique(v->begin(), v->end()), v->end());
    }

    std::vector<RegionSpec> result = std::move(fg);
    std::size_t const n_fg = result.size();
    int counter = 0;
    for (std::size_t j = 0; j + 1 < ys.size(); ++j)
    {
        std::size_t i = 0;
        while (i + 1 < xs.size())
        {
            auto covered = [&](std::size_t ii) {
                Point mid{0.5 * (xs[ii] + xs[ii + 1]),
                          0.5 * (ys[j] + ys[j + 1])};
                for (std::size_t r = 0; r < n_fg; ++r)
                {
                    if (result[r].extent.contains(mid))
                        return true;
                }
                return false;
            };
            if (covered(i))
            {
                ++i;
                continue;
            }
            std::size_t start = i;
            while (i + 1 < xs.size() && !covered(i))
                ++i;
            result.push_back({name + "_" + std::to_string(counter++),
                              {xs[start], xs[i], ys[j], ys[j + 1]},
                              background});
        }
    }
    return result;
}

//---------------------------------------------------------------------------//
}  // namespace qmch
