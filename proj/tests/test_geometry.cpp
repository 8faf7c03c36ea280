#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qmch/benchmarks.hpp"
#include "qmch/geometry.hpp"

using namespace qmch;

namespace
{
ProblemSpec slab(std::vector<double> edges, std::vector<RegionSpec> regions)
{
    return ProblemSpec("slab", Mesh(std::move(edges)), std::move(regions));
}
}  // namespace

//---------------------------------------------------------------------------//
TEST(Locate, InteriorPoint1D)
{
    Mesh m({0, 1, 2});
    EXPECT_EQ(m.locate({0.5, 0.5}), 0u);
}

TEST(Locate, TieGoesToPositiveSide)
{
    Mesh m({0, 1, 2});
    EXPECT_EQ(m.locate({1.0, 0.5}), 1u);
    // The upper domain edge belongs to the last cell
    EXPECT_EQ(m.locate({2.0, 0.5}), 1u);
    EXPECT_EQ(m.locate({0.0, 0.5}), 0u);
}

TEST(Locate, InteriorPoint2D)
{
    Mesh m = Mesh::uniform(Box{0, 2, 0, 2}, 2, 2);
    EXPECT_EQ(m.locate({1.5, 0.5}), m.cell_index(1, 0));
    EXPECT_EQ(m.cell_index(1, 0), 1u);
}

TEST(Locate, OutsideDomainThrows)
{
    Mesh m({0, 1, 2});
    EXPECT_THROW(m.locate({-0.1, 0.5}), OutOfDomainError);
    EXPECT_THROW(m.locate({2.5, 0.5}), OutOfDomainError);
    EXPECT_THROW(m.locate({std::nan(""), 0.5}), OutOfDomainError);
}

//---------------------------------------------------------------------------//
TEST(CellExit, Forward1D)
{
    Mesh m({0, 1, 2});
    auto e = m.distance_to_cell_exit({0.5, 0.5}, {1, 0}, 0);
    EXPECT_DOUBLE_EQ(e.distance, 0.5);
    EXPECT_EQ(e.kind, ExitKind::interior_face);
    EXPECT_EQ(e.side, 1);
}

TEST(CellExit, Backward1DHitsDomainBoundary)
{
    Mesh m({0, 1, 2});
    auto e = m.distance_to_cell_exit({0.5, 0.5}, {-1, 0}, 0);
    EXPECT_DOUBLE_EQ(e.distance, 0.5);
    EXPECT_EQ(e.kind, ExitKind::domain_boundary);
    EXPECT_EQ(e.side, -1);
}

TEST(CellExit, DiagonalCorner2D)
{
    Mesh m = Mesh::uniform(Box{0, 1, 0, 1}, 1, 1);
    double const s = 1 / std::sqrt(2.0);
    auto e = m.distance_to_cell_exit({0.2, 0.2}, {s, s}, 0);
    EXPECT_NEAR(e.distance, 0.8 * std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(e.distance, 1.1314, 1e-4);
    EXPECT_EQ(e.kind, ExitKind::domain_boundary);
}

TEST(CellExit, ZeroComponentNeverHitsNormalFaces)
{
    Mesh m = Mesh::uniform(Box{0, 1, 0, 1}, 2, 2);
    auto e = m.distance_to_cell_exit({0.2, 0.3}, {0, 1}, 0);
    EXPECT_EQ(e.axis, 1);
    EXPECT_NEAR(e.distance, 0.2, 1e-15);

    Mesh slab({0, 1});
    auto none = slab.distance_to_cell_exit({0.5, 0.5}, {0, 0}, 0);
    EXPECT_TRUE(std::isinf(none.distance));
}

TEST(CellExit, StreamingLandsOnFace)
{
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> u(0, 1);
    Mesh m(Mesh::linspace(-3, 7, 11), Mesh::linspace(0, 4, 9));
    double const tol = 1e-12 * m.length_scale();
    for (int trial = 0; trial < 2000; ++trial)
    {
        std::size_t cell = static_cast<std::size_t>(u(rng) * m.num_cells());
        Box b = m.cell_box(cell);
        Point p{b.x_lo + u(rng) * (b.x_hi - b.x_lo), b.y_lo + u(rng) * (b.y_hi - b.y_lo)};
        double phi = 2 * std::numbers::pi * u(rng);
        Point dir{std::cos(phi), std::sin(phi)};
        auto e = m.distance_to_cell_exit(p, dir, cell);
        ASSERT_TRUE(std::isfinite(e.distance));
        Point q{p[0] + e.distance * dir[0], p[1] + e.distance * dir[1]};
        double face = m.face_coord(cell, e.axis, e.side);
        EXPECT_NEAR(q[e.axis], face, tol);
        // The other coordinate stays within the cell
        int other = 1 - e.axis;
        EXPECT_GE(q[other], b.lo(other) - tol);
        EXPECT_LE(q[other], b.hi(other) + tol);
        if (e.kind == ExitKind::interior_face)
        {
            std::size_t next = m.neighbor(cell, e.axis, e.side);
            Point nudged = q;
            nudged[e.axis] = face + e.side * 1e-9;
            EXPECT_EQ(m.locate(nudged), next);
        }
    }
}

//---------------------------------------------------------------------------//
TEST(Mesh, VolumesSumToDomain)
{
    Mesh m({-1, 0, 0.25, 2, 5}, {0, 1, 3});
    double total = 0;
    for (std::size_t c = 0; c < m.num_cells(); ++c)
    {
        EXPECT_GT(m.volume(c), 0);
        total += m.volume(c);
    }
    EXPECT_NEAR(total, m.domain().volume(), 1e-12);
}

TEST(Mesh, RefinedKeepsEdges)
{
    Mesh m({0, 1, 3});
    Mesh r = m.refined(4);
    EXPECT_EQ(r.num_cells(), 8u);
    auto e = r.edges(0);
    EXPECT_DOUBLE_EQ(e[0], 0);
    EXPECT_DOUBLE_EQ(e[4], 1);
    EXPECT_DOUBLE_EQ(e[8], 3);
    EXPECT_THROW(m.refined(0), ConfigError);
}

TEST(Mesh, RejectsBadEdges)
{
    EXPECT_THROW(Mesh({0, 0}), ConfigError);
    EXPECT_THROW(Mesh({1, 0.5, 2}), ConfigError);
    EXPECT_THROW(Mesh(std::vector<double>{0}), ConfigError);
}

//---------------------------------------------------------------------------//
TEST(Problem, MaterialLookup)
{
    auto reed = reed_problem();
    auto cell = reed.locate({5.5, 0.5});
    auto const& m = reed.material_at(cell);
    EXPECT_DOUBLE_EQ(m.sigma_a, 0.1);
    EXPECT_DOUBLE_EQ(m.sigma_s, 0.9);
    EXPECT_DOUBLE_EQ(m.q, 1.0);

    auto const& v = reed.material_at(reed.locate({4.0, 0.5}));
    EXPECT_EQ(v.sigma_a, 0);
    EXPECT_EQ(v.sigma_s, 0);
    EXPECT_EQ(v.q, 0);

    auto dog = dogleg_problem();
    EXPECT_DOUBLE_EQ(dog.material_at(dog.locate({2.5, 15})).sigma_t(), 1e-4);
}

TEST(Problem, MisalignedRegionNamesEdge)
{
    try
    {
        slab({0, 0.5, 1}, {{"a", {0, 0.3, 0, 1}, {1, 0, 0}}, {"b", {0.3, 1, 0, 1}, {1, 0, 0}}});
        FAIL() << "expected a configuration error";
    }
    catch (ConfigError const& e)
    {
        std::string msg = e.what();
        EXPECT_NE(msg.find("'a'"), std::string::npos) << msg;
        EXPECT_NE(msg.find("0.3"), std::string::npos) << msg;
    }
}

TEST(Problem, RegionsMustTileTheDomain)
{
    EXPECT_THROW(slab({0, 0.5, 1}, {{"a", {0, 0.5, 0, 1}, {1, 0, 0}}}), ConfigError);
    EXPECT_THROW(slab({0, 0.5, 1},
                      {{"a", {0, 1, 0, 1}, {1, 0, 0}}, {"b", {0.5, 1, 0, 1}, {1, 0, 0}}}),
                 ConfigError);
}

TEST(Problem, NegativeCoefficientsRejected)
{
    EXPECT_THROW(slab({0, 1}, {{"a", {0, 1, 0, 1}, {-1, 0, 0}}}), ConfigError);
    EXPECT_THROW(slab({0, 1}, {{"a", {0, 1, 0, 1}, {1, -0.5, 0}}}), ConfigError);
    EXPECT_THROW(slab({0, 1}, {{"a", {0, 1, 0, 1}, {1, 0, -2}}}), ConfigError);
}

TEST(Problem, FillBackgroundCoversDomain)
{
    Box domain{0, 4, 0, 4};
    auto regions = fill_background(domain, {{"hole", {1, 2, 1, 3}, {0, 0, 1}}},
                                   Material{1, 1, 0}, "bg");
    ProblemSpec p("bg", Mesh::uniform(domain, 4, 4), regions);
    double area = 0;
    for (auto const& r : p.regions())
        area += r.extent.volume();
    EXPECT_NEAR(area, 16, 1e-12);
    EXPECT_DOUBLE_EQ(p.total_source(), 2);
}

TEST(Problem, RefinedKeepsMaterials)
{
    auto reed = reed_problem();
    auto fine = reed.refined(4);
    EXPECT_EQ(fine.mesh().num_cells(), 320u);
    for (std::size_t c = 0; c < fine.mesh().num_cells(); ++c)
    {
        auto const& a = fine.material_at(c);
        auto const& b = reed.material_at(reed.locate(fine.mesh().center(c)));
        EXPECT_EQ(a.sigma_a, b.sigma_a);
        EXPECT_EQ(a.sigma_s, b.sigma_s);
        EXPECT_EQ(a.q, b.q);
    }
}
