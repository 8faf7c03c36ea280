//---------------------------------------------------------------------------//
//! \file qmch/sn_solver.hpp
//! Discrete ordinates for the collided equation: angular quadratures,
//! upwind step-scheme sweeps, and source iteration.
//---------------------------------------------------------------------------//
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "particle.hpp"

namespace qmch
{
inline constexpr double four_pi = 4 * std::numbers::pi;

//---------------------------------------------------------------------------//
// QUADRATURE
//---------------------------------------------------------------------------//
//! Nodes and weights on [-1, 1], ascending nodes, weights summing to 2
struct GaussLegendreRule
{
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail
{
//! Legendre values (P_n(x), P_{n-1}(x)) by the three-term recurrence
inline std::pair<double, double> legendre_pair(int n, double x)
{
    double p0 = 1;
    double p1 = x;
    for (int k = 2; k <= n; ++k)
    {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    return {p1, p0};
}
}  // namespace detail

//! n-point Gauss-Legendre rule by Newton iteration on P_n
inline GaussLegendreRule gauss_legendre_rule(int n)
{
    if (n < 1)
        throw ConfigError("Gauss-Legendre order must be positive");
    GaussLegendreRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i)
    {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int iter = 0; iter < 100; ++iter)
        {
            auto [pn, pm] = detail::legendre_pair(n, x);
            double dp = n * (x * pn - pm) / (x * x - 1);
            double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        auto [pn, pm] = detail::legendre_pair(n, x);
        double const dp = n * (x * pn - pm) / (x * x - 1);
        double const w = 2 / ((1 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1)
        rule.nodes[n / 2] = 0;
    return rule;
}

//---------------------------------------------------------------------------//
/*!
 * Discrete directions with weights summing to 4 pi, so that the scalar flux
 * is sum_m w_m psi_m.
 */
struct QuadratureSet
{
    std::vector<Vec3> directions;
    std::vector<double> weights;

    std::size_t size() const { return directions.size(); }
};

//! Slab quadrature: Gauss-Legendre in the polar cosine, azimuth integrated
inline QuadratureSet gauss_legendre_quadrature(int order)
{
    if (order < 2 || order % 2 != 0)
        throw ConfigError("S_N order must be even and at least 2");
    auto rule = gauss_legendre_rule(order);
    QuadratureSet q;
    for (int i = 0; i < order; ++i)
    {
        double mu = rule.nodes[i];
        q.directions.push_back({std::sqrt(1 - mu * mu), 0.0, mu});
        q.weights.push_back(2 * std::numbers::pi * rule.weights[i]);
    }
    return q;
}

/*!
 * Planar product quadrature: Gauss-Legendre in the polar cosine (z axis)
 * times equally weighted azimuths offset by half a spacing.
 */
inline QuadratureSet product_quadrature_2d(int polar_order, int azimuths)
{
    if (polar_order < 2 || polar_order % 2 != 0)
        throw ConfigError("polar order must be even and at least 2");
    if (azimuths < 4 || azimuths % 4 != 0)
        throw ConfigError("azimuthal count must be a positive multiple of 4");
    auto rule = gauss_legendre_rule(polar_order);
    QuadratureSet q;
    double const dphi = 2 * std::numbers::pi / azimuths;
    for (int i = 0; i < polar_order; ++i)
    {
        double const mu = rule.nodes[i];
        double const s = std::sqrt(1 - mu * mu);
        for (int j = 0; j < azimuths; ++j)
        {
            double const phi = (j + 0.5) * dphi;
            q.directions.push_back({s * std::cos(phi), s * std::sin(phi), mu});
            q.weights.push_back(rule.weights[i] * dphi);
        }
    }
    return q;
}

//! Default "S_N" set for a problem's dimension (2N azimuths in 2D)
inline QuadratureSet default_quadrature(int dimension, int order, int azimuths = 0)
{
    if (dimension == 1)
        return gauss_legendre_quadrature(order);
    return product_quadrature_2d(order, azimuths > 0 ? azimuths : 2 * order);
}

//---------------------------------------------------------------------------//
// SWEEP
//---------------------------------------------------------------------------//
/*!
 * Transport sweep of one ordinate with the upwind step scheme.
 *
 * Each cell balances outflow through its downwind faces, removal, and the
 * isotropic source density (per steradian) against inflow from the upwind
 * neighbours; the domain inflow is zero. Returns the angular leakage rate
 * (outgoing current through the domain boundary per steradian).
 */
inline double sweep(ProblemSpec const& problem,
                    Vec3 const& omega,
                    std::span<double const> source,
                    std::span<double> psi,
                    double extra_removal = 0)
{
    Mesh const& mesh = problem.mesh();
    double leakage = 0;
    if (mesh.dimension() == 1)
    {
        std::size_t const n = mesh.nx();
        double const amu = std::abs(omega.z);
        auto e = mesh.edges(0);
        double psi_in = 0;
        for (std::size_t k = 0; k < n; ++k)
        {
            std::size_t const c = omega.z > 0 ? k : n - 1 - k;
            double const h = e[c + 1] - e[c];
            double const sig = problem.material_at(c).sigma_t() + extra_removal;
            double const val = (source[c] * h + amu * psi_in) / (amu + sig * h);
            psi[c] = val;
            psi_in = val;
        }
        return amu * psi_in;
    }

    std::size_t const nx = mesh.nx();
    std::size_t const ny = mesh.ny();
    auto ex = mesh.edges(0);
    auto ey = mesh.edges(1);
    double const aox = std::abs(omega.x);
    double const aoy = std::abs(omega.y);
    bool const fwd_x = omega.x > 0;
    bool const fwd_y = omega.y > 0;
    for (std::size_t kj = 0; kj < ny; ++kj)
    {
        std::size_t const j = fwd_y ? kj : ny - 1 - kj;
        double const dy = ey[j + 1] - ey[j];
        for (std::size_t ki = 0; ki < nx; ++ki)
        {
            std::size_t const i = fwd_x ? ki : nx - 1 - ki;
            double const dx = ex[i + 1] - ex[i];
            std::size_t const c = mesh.cell_index(i, j);
            double in_x = 0;
            double in_y = 0;
            if (ki > 0)
                in_x = psi[mesh.cell_index(fwd_x ? i - 1 : i + 1, j)];
            if (kj > 0)
                in_y = psi[mesh.cell_index(i, fwd_y ? j - 1 : j + 1)];
            double const ax = aox / dx;
            double const ay = aoy / dy;
            double const sig = problem.material_at(c).sigma_t() + extra_removal;
            double const val = (source[c] + ax * in_x + ay * in_y) / (ax + ay + sig);
            psi[c] = val;
            if (ki + 1 == nx)
                leakage += aox * val * dy;
            if (kj + 1 == ny)
                leakage += aoy * val * dx;
        }
    }
    return leakage;
}

//---------------------------------------------------------------------------//
// SOURCE ITERATION
//---------------------------------------------------------------------------//
struct SnOptions
{
    double tol{1e-6};
    int max_iter{10000};
    //! Additional removal rate, e.g. 1/(c dt) for an implicit time step
    double extra_removal{0};
    /*!
     * Flux added to the iterate when forming the convergence scale. The
     * hybrid passes the MC flux so that the collided correction converges
     * relative to the whole solution.
     */
    std::span<double const> scale_flux{};
};

struct SnSolution
{
    std::vector<std::vector<double>> psi;  //!< [ordinate][cell]
    std::vector<double> phi;
    int iterations{0};
    double leakage{0};
    //! Relative particle-balance violation of the final sweep
    double balance_residual{0};
};

class SnConvergenceError : public std::runtime_error
{
  public:
    SnConvergenceError(std::string const& what, SnSolution last)
        : std::runtime_error(what), last_{std::move(last)}
    {
    }
    SnSolution const& last_iterate() const { return last_; }

  private:
    SnSolution last_;
};

/*!
 * Solve  Omega.grad psi + sigma_t psi = f + sigma_s phi / (4 pi)  with zero
 * inflow by source iteration.
 *
 * The fixed source f is an isotropic density per steradian. Iteration k
 * sweeps all ordinates with the scattering source lagged from iterate k-1.
 * The iteration stops once the next sweep's scattering source would change
 * by less than tol times the largest scattering source of the solution
 * (the iterate plus opts.scale_flux). A zero fixed source returns a zero
 * solution after no iterations.
 */
inline SnSolution source_iteration(ProblemSpec const& problem,
                                   std::span<double const> fixed_source,
                                   QuadratureSet const& quad,
                                   SnOptions const& opts = {})
{
    Mesh const& mesh = problem.mesh();
    std::size_t const cells = mesh.num_cells();
    if (fixed_source.size() != cells)
        throw InvariantError("fixed source does not match the mesh");
    if (!opts.scale_flux.empty() && opts.scale_flux.size() != cells)
        throw InvariantError("scale flux does not match the mesh");
    if (!(opts.tol > 0))
        throw ConfigError("S_N tolerance must be positive");

    SnSolution sol;
    sol.psi.assign(quad.size(), std::vector<double>(cells, 0.0));
    sol.phi.assign(cells, 0.0);
    bool const empty = std::all_of(fixed_source.begin(), fixed_source.end(),
                                   [](double f) { return f == 0.0; });
    if (empty)
        return sol;

    std::vector<double> sigma_s(cells);
    std::vector<double> sigma_a(cells);
    std::vector<double> volume(cells);
    double fixed_total = 0;
    for (std::size_t c = 0; c < cells; ++c)
    {
        sigma_s[c] = problem.material_at(c).sigma_s;
        sigma_a[c] = problem.material_at(c).sigma_a;
        volume[c] = mesh.volume(c);
        fixed_total += four_pi * fixed_source[c] * volume[c];
    }

    std::vector<double> source(cells);
    std::vector<double> phi_new(cells);
    for (int it = 1; it <= opts.max_iter; ++it)
    {
        for (std::size_t c = 0; c < cells; ++c)
            source[c] = fixed_source[c] + sigma_s[c] * sol.phi[c] / four_pi;
        std::fill(phi_new.begin(), phi_new.end(), 0.0);
        double leakage = 0;
        for (std::size_t m = 0; m < quad.size(); ++m)
        {
            double const w = quad.weights[m];
            leakage += w * sweep(problem, quad.directions[m], source,
                                 sol.psi[m], opts.extra_removal);
            auto const& psi = sol.psi[m];
            for (std::size_t c = 0; c < cells; ++c)
                phi_new[c] += w * psi[c];
        }

        double change = 0;
        double scale = 0;
        double absorbed = 0;
        double scatter_net = 0;
        for (std::size_t c = 0; c < cells; ++c)
        {
            double const ref
                = phi_new[c] + (opts.scale_flux.empty() ? 0.0 : opts.scale_flux[c]);
            change = std::max(change, sigma_s[c] * std::abs(phi_new[c] - sol.phi[c]));
            scale = std::max(scale, sigma_s[c] * ref);
            absorbed += (sigma_a[c] + opts.extra_removal) * phi_new[c] * volume[c];
            scatter_net += sigma_s[c] * (sol.phi[c] - phi_new[c]) * volume[c];
        }
        sol.phi.swap(phi_new);
        sol.iterations = it;
        sol.leakage = leakage;
        double const gain = fixed_total + scatter_net;
        sol.balance_residual
            = std::abs(absorbed + leakage - gain) / std::max(fixed_total, 1e-300);

        if (change <= opts.tol * scale)
            return sol;
    }
    throw SnConvergenceError("source iteration did not converge in "
                                 + std::to_string(opts.max_iter) + " iterations",
                             std::move(sol));
}

//---------------------------------------------------------------------------//
}  // namespace qmch
