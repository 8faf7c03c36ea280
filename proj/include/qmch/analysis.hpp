//---------------------------------------------------------------------------//
//! \file qmch/analysis.hpp
//! Error norms, rate fits, Erlang tail formulas, reference solutions and
//! convergence sweeps.
//---------------------------------------------------------------------------//
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "hybrid_driver.hpp"
#include "mc_transport.hpp"
#include "sampling.hpp"
#include "sn_solver.hpp"

namespace qmch
{
//---------------------------------------------------------------------------//
// ERROR NORMS AND RATE FITS
//---------------------------------------------------------------------------//
//! Volume-weighted discrete L2 distance between two cell fields
inline double l2_error(std::span<double const> field,
                       std::span<double const> reference,
                       Mesh const& mesh)
{
    if (field.size() != mesh.num_cells() || reference.size() != mesh.num_cells())
    {
        throw ConfigError("field sizes (" + std::to_string(field.size()) + ", "
                          + std::to_string(reference.size())
                          + ") do not match the mesh with "
                          + std::to_string(mesh.num_cells()) + " cells");
    }
    double sum = 0;
    for (std::size_t c = 0; c < field.size(); ++c)
    {
        double const d = field[c] - reference[c];
        sum += mesh.volume(c) * d * d;
    }
    return std::sqrt(sum);
}

struct ConvergencePoint
{
    std::string problem;
    SamplerKind sampler{SamplerKind::halton};
    int scatter_cap{0};
    std::size_t particles{1};
    int replica{0};
    double l2_error{0};
    double runtime_seconds{0};
    int sn_iterations{0};
};

//! Power law error ~ c * N_p^alpha
struct RateFit
{
    double alpha{0};
    double c{0};
};

//! Least-squares line through (log N_p, log error); replicas may share N_p
inline RateFit fit_convergence_rate(std::span<ConvergencePoint const> points)
{
    if (points.size() < 3)
        throw ConfigError("rate fit needs at least 3 points");
    std::set<std::size_t> distinct;
    double sx = 0, sy = 0;
    for (auto const& p : points)
    {
        if (p.particles < 1)
            throw ConfigError("rate fit needs positive particle counts");
        if (!(p.l2_error > 0) || !std::isfinite(p.l2_error))
        {
            throw ConfigError("rate fit needs positive finite errors, got "
                              + std::to_string(p.l2_error));
        }
        distinct.insert(p.particles);
        sx += std::log(static_cast<double>(p.particles));
        sy += std::log(p.l2_error);
    }
    if (distinct.size() < 2)
        throw ConfigError("rate fit needs at least 2 distinct particle counts");
    double const n = static_cast<double>(points.size());
    double const mx = sx / n;
    double const my = sy / n;
    double sxx = 0, sxy = 0;
    for (auto const& p : points)
    {
        double const dx = std::log(static_cast<double>(p.particles)) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(p.l2_error) - my);
    }
    RateFit fit;
    fit.alpha = sxy / sxx;
    fit.c = std::exp(my - fit.alpha * mx);
    return fit;
}

inline RateFit fit_convergence_rate(std::span<std::size_t const> particles,
                                    std::span<double const> errors)
{
    if (particles.size() != errors.size())
        throw ConfigError("rate fit inputs differ in length");
    std::vector<ConvergencePoint> pts(particles.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        pts[i].particles = particles[i];
        pts[i].l2_error = errors[i];
    }
    return fit_convergence_rate(pts);
}

//---------------------------------------------------------------------------//
// ERLANG TAILS
//---------------------------------------------------------------------------//
/*!
 * Probability that fewer than N_s + 1 scatters occur within dt at rate
 * sigma_s (speed 1): e^-x sum_{j<=N_s} x^j / j!, x = sigma_s dt.
 *
 * Each term is formed in log space so large x and N_s neither overflow nor
 * lose the e^-x factor.
 */
inline double erlang_tail(int scatter_cap, double sigma_s, double dt)
{
    if (scatter_cap < 0)
        throw ConfigError("invalid scatter cap");
    if (!(sigma_s > 0) || !(dt >= 0))
        throw ConfigError("Erlang tail needs sigma_s > 0 and dt >= 0");
    double const x = sigma_s * dt;
    if (x == 0)
        return 1.0;
    double const lx = std::log(x);
    auto term = [&](double j) { return std::exp(j * lx - x - std::lgamma(j + 1.0)); };
    if (x < scatter_cap + 1.0)
    {
        // Sum the (smaller) complement so the result stays monotone near 1
        double rest = 0;
        for (double j = scatter_cap + 1.0;; j += 1)
        {
            double const t = term(j);
            rest += t;
            if (t <= 1e-18 * rest || t == 0)
                break;
        }
        return std::max(0.0, 1.0 - rest);
    }
    double sum = 0;
    for (int j = 0; j <= scatter_cap; ++j)
        sum += term(j);
    return std::min(sum, 1.0);
}

struct TailBounds
{
    double lower{0};
    double upper{0};
};

/*!
 * Bounds on the survival probability in a medium with sigma_s in
 * [sigma_min, sigma_max], for any 0 < mu < sigma_min.
 */
inline TailBounds erlang_sandwich_bounds(
    int scatter_cap, double sigma_min, double sigma_max, double mu, double dt)
{
    if (scatter_cap < 0)
        throw ConfigError("invalid scatter cap");
    if (!(sigma_min > 0) || !(sigma_max >= sigma_min))
        throw ConfigError("sandwich bounds need 0 < sigma_min <= sigma_max");
    if (!(mu > 0) || !(mu < sigma_min))
    {
        throw ConfigError("mu = " + std::to_string(mu)
                          + " must lie in (0, sigma_min)");
    }
    if (!(dt >= 0))
        throw ConfigError("sandwich bounds need dt >= 0");
    TailBounds b;
    b.lower = std::exp(-sigma_max * dt);
    b.upper = std::exp(-mu * dt - (scatter_cap + 1.0) * std::log1p(-mu / sigma_min));
    return b;
}

//---------------------------------------------------------------------------//
// REFERENCE SOLUTIONS
//---------------------------------------------------------------------------//
enum class ReferenceKind
{
    //! Converged fine-mesh, high-order S_N solve of the full problem
    high_resolution,
    //! Expected value of the hybrid estimator for a given scatter cap
    estimator_limit
};

inline char const* to_cstring(ReferenceKind k)
{
    return k == ReferenceKind::high_resolution ? "high_resolution"
                                               : "estimator_limit";
}

//! Volume average of a field on a refined mesh onto a coarser mesh
inline std::vector<double> project_to_mesh(Mesh const& fine,
                                           std::span<double const> phi,
                                           Mesh const& coarse)
{
    std::vector<double> out(coarse.num_cells(), 0.0);
    std::vector<double> vol(coarse.num_cells(), 0.0);
    for (std::size_t c = 0; c < fine.num_cells(); ++c)
    {
        std::size_t const k = coarse.locate(fine.center(c));
        out[k] += phi[c] * fine.volume(c);
        vol[k] += fine.volume(c);
    }
    for (std::size_t k = 0; k < out.size(); ++k)
    {
        if (!(vol[k] > 0))
            throw InvariantError("projection left a coarse cell uncovered");
        out[k] /= vol[k];
    }
    return out;
}

namespace detail
{
inline void require_volume_sources(ProblemSpec const& problem)
{
    if (!problem.boundary().empty() || !problem.initial().empty())
    {
        throw ConfigError("reference solutions support volume sources only");
    }
}

inline std::vector<double> volume_source_per_sr(ProblemSpec const& problem)
{
    std::vector<double> s(problem.mesh().num_cells());
    for (std::size_t c = 0; c < s.size(); ++c)
        s[c] = problem.material_at(c).q / four_pi;
    return s;
}

//! (1 - e^-t) / t and (1 - (1 - e^-t)/t) / t, accurate for small t
inline std::pair<double, double> characteristic_factors(double t)
{
    if (t < 1e-4)
        return {1 - t / 2 + t * t / 6, 0.5 - t / 6 + t * t / 24};
    double const f1 = -std::expm1(-t) / t;
    return {f1, (1 - f1) / t};
}

//! Polar-symmetric Gauss-Legendre set on each half of [-1, 1]
inline QuadratureSet double_gauss_legendre(int half_order)
{
    auto rule = gauss_legendre_rule(half_order);
    QuadratureSet q;
    for (int sign : {-1, 1})
    {
        for (int i = 0; i < half_order; ++i)
        {
            double const mu = sign * 0.5 * (rule.nodes[i] + 1);
            q.directions.push_back({std::sqrt(1 - mu * mu), 0, mu});
            q.weights.push_back(2 * std::numbers::pi * 0.5 * rule.weights[i]);
        }
    }
    return q;
}

/*!
 * Scalar flux of a slab with a cell-wise flat isotropic source, integrated
 * exactly along each ordinate (step characteristics).
 */
inline std::vector<double> characteristic_scalar_flux_1d(
    ProblemSpec const& problem, std::span<double const> source_per_sr,
    QuadratureSet const& quad)
{
    Mesh const& mesh = problem.mesh();
    std::size_t const n = mesh.num_cells();
    auto edges = mesh.edges(0);
    std::vector<double> phi(n, 0.0);
    for (std::size_t m = 0; m < quad.size(); ++m)
    {
        double const mu = quad.directions[m].z;
        double const amu = std::abs(mu);
        double psi_in = 0;
        for (std::size_t k = 0; k < n; ++k)
        {
            std::size_t const c = mu > 0 ? k : n - 1 - k;
            double const path = (edges[c + 1] - edges[c]) / amu;
            double const t = problem.material_at(c).sigma_t() * path;
            auto [f1, f2] = characteristic_factors(t);
            double const s = source_per_sr[c] * path;
            phi[c] += quad.weights[m] * (psi_in * f1 + s * f2);
            psi_in = psi_in * (1 - t * f1) + s * f1;
        }
    }
    return phi;
}

//! Collision-order fluxes on a fine problem, either exact-per-ordinate or S_N
struct CollisionSeries
{
    ProblemSpec const* problem;
    QuadratureSet quad;
    bool characteristic;

    std::vector<double> flux(std::span<double const> source_per_sr) const
    {
        if (characteristic)
            return characteristic_scalar_flux_1d(*problem, source_per_sr, quad);
        std::size_t const n = problem->mesh().num_cells();
        std::vector<double> phi(n, 0.0), psi(n);
        for (std::size_t m = 0; m < quad.size(); ++m)
        {
            sweep(*problem, quad.directions[m], source_per_sr, psi);
            for (std::size_t c = 0; c < n; ++c)
                phi[c] += quad.weights[m] * psi[c];
        }
        return phi;
    }

    std::vector<double> next_source(std::span<double const> phi) const
    {
        std::vector<double> s(phi.size());
        for (std::size_t c = 0; c < s.size(); ++c)
            s[c] = problem->material_at(c).sigma_s * phi[c] / four_pi;
        return s;
    }
};
}  // namespace detail

struct ReferenceOptions
{
    //! 1D fine solve: mesh refinement and quadrature order
    std::size_t refine_1d{4};
    int order_1d{16};
    //! 2D fine solve: mesh refinement, polar order and azimuths
    std::size_t refine_2d{2};
    int polar_2d{8};
    int azimuths_2d{16};
    double tol{1e-10};
    //! Estimator-limit reference: 1D refinement and per-hemisphere order
    std::size_t limit_refine_1d{16};
    int limit_half_order_1d{64};
    int max_iter{200000};
};

/*!
 * Deterministic high-resolution solution projected onto the problem mesh.
 *
 * 1D problems use S_16 on a 4x refined mesh; 2D problems use an S_8
 * product set (8 polar x 16 azimuthal) on a 2x refined mesh.
 */
inline std::vector<double>
high_resolution_reference(ProblemSpec const& problem, ReferenceOptions const& opts = {})
{
    detail::require_volume_sources(problem);
    bool const one_d = problem.dimension() == 1;
    ProblemSpec const fine = problem.refined(one_d ? opts.refine_1d : opts.refine_2d);
    auto const quad = one_d ? gauss_legendre_quadrature(opts.order_1d)
                            : product_quadrature_2d(opts.polar_2d, opts.azimuths_2d);
    SnOptions sn;
    sn.tol = opts.tol;
    sn.max_iter = opts.max_iter;
    auto sol = source_iteration(fine, detail::volume_source_per_sr(fine), quad, sn);
    return project_to_mesh(fine.mesh(), sol.phi, problem.mesh());
}

/*!
 * Limit of the hybrid flux estimate as N_p grows, for a given scatter cap.
 *
 * The MC part converges to the exact cell averages of psi_0..psi_{N_s}; the
 * collided part to the run's own S_N solve driven by sigma_s <psi_{N_s}>.
 * Measuring errors against this limit isolates the sampling error from the
 * discretization bias of the S_N leg. In 1D the collision orders are
 * integrated exactly along each ordinate on a fine mesh with a dense
 * double Gauss-Legendre set; in 2D they come from the high-resolution S_N
 * sweep.
 */
inline std::vector<double> estimator_limit_reference(ProblemSpec const& problem,
                                                     int scatter_cap,
                                                     QuadratureSet const& run_quad,
                                                     ReferenceOptions const& opts = {})
{
    detail::require_volume_sources(problem);
    if (scatter_cap < 0)
        throw ConfigError("invalid scatter cap");
    bool const one_d = problem.dimension() == 1;
    ProblemSpec const fine
        = problem.refined(one_d ? opts.limit_refine_1d : opts.refine_2d);
    detail::CollisionSeries series{
        &fine,
        one_d ? detail::double_gauss_legendre(opts.limit_half_order_1d)
              : product_quadrature_2d(opts.polar_2d, opts.azimuths_2d),
        one_d};

    std::size_t const nf = fine.mesh().num_cells();
    std::vector<double> source = detail::volume_source_per_sr(fine);
    std::vector<double> total(nf, 0.0);
    std::vector<double> last;
    double const src_norm = fine.total_source();
    for (int n = 0;; ++n)
    {
        last = series.flux(source);
        double added = 0;
        for (std::size_t c = 0; c < nf; ++c)
        {
            total[c] += last[c];
            added += fine.material_at(c).sigma_t() * last[c] * fine.mesh().volume(c);
        }
        if (n == scatter_cap)
            break;
        // Unlimited cap: stop once the next order carries no measurable weight
        if (scatter_cap == unlimited_scatters && added <= opts.tol * src_norm)
            break;
        if (n >= opts.max_iter)
            throw InvariantError("collision series did not converge");
        source = series.next_source(last);
    }
    auto result = project_to_mesh(fine.mesh(), total, problem.mesh());
    if (scatter_cap == unlimited_scatters)
        return result;

    auto const post = project_to_mesh(fine.mesh(), last, problem.mesh());
    std::vector<double> fixed(post.size());
    for (std::size_t c = 0; c < fixed.size(); ++c)
        fixed[c] = problem.material_at(c).sigma_s * post[c] / four_pi;
    SnOptions sn;
    sn.tol = opts.tol;
    sn.max_iter = opts.max_iter;
    auto const collided = source_iteration(problem, fixed, run_quad, sn);
    for (std::size_t c = 0; c < result.size(); ++c)
        result[c] += collided.phi[c];
    return result;
}

//---------------------------------------------------------------------------//
// SWEEPS
//---------------------------------------------------------------------------//
struct SweepSpec
{
    std::vector<int> scatter_caps{0};
    std::vector<std::size_t> particles{1024};
    std::vector<SamplerKind> samplers{SamplerKind::halton};
    int replicas{1};
    ReferenceKind reference{ReferenceKind::high_resolution};
};

struct RateSummary
{
    SamplerKind sampler{SamplerKind::halton};
    int scatter_cap{0};
    std::optional<RateFit> fit;  //!< Absent with too few distinct N_p
    double mean_iterations{0};
    std::size_t points{0};
};

struct SweepResult
{
    std::vector<ConvergencePoint> points;
    std::vector<RateSummary> rates;
};

/*!
 * Halton start offset of a replica.
 *
 * Replicas use disjoint index ranges separated by an odd prime stride so
 * their leading digits differ in every prime base.
 */
inline std::uint64_t replica_start_index(std::uint64_t base,
                                         int replica,
                                         std::size_t max_particles)
{
    std::uint64_t stride = std::max<std::uint64_t>(1000003, max_particles + 1);
    auto is_prime = [](std::uint64_t v) {
        if (v < 2)
            return false;
        for (std::uint64_t d = 2; d * d <= v; ++d)
        {
            if (v % d == 0)
                return false;
        }
        return true;
    };
    while (!is_prime(stride))
        ++stride;
    return base + static_cast<std::uint64_t>(replica) * stride;
}

//! PRNG seed of a replica; hashed so replica sets of nearby seeds do not overlap
inline std::uint64_t replica_seed(std::uint64_t base, int replica)
{
    if (replica == 0)
        return base;
    return mix64(base ^ mix64(0xa0761d6478bd642full * static_cast<std::uint64_t>(replica)));
}

inline std::vector<RateSummary> summarize_rates(std::span<ConvergencePoint const> points)
{
    std::vector<RateSummary> out;
    for (auto const& p : points)
    {
        bool seen = false;
        for (auto const& r : out)
            seen = seen || (r.sampler == p.sampler && r.scatter_cap == p.scatter_cap);
        if (seen)
            continue;
        RateSummary r;
        r.sampler = p.sampler;
        r.scatter_cap = p.scatter_cap;
        std::vector<ConvergencePoint> group;
        std::set<std::size_t> distinct;
        double iters = 0;
        for (auto const& q : points)
        {
            if (q.sampler == p.sampler && q.scatter_cap == p.scatter_cap)
            {
                group.push_back(q);
                distinct.insert(q.particles);
                iters += q.sn_iterations;
            }
        }
        r.points = group.size();
        r.mean_iterations = iters / static_cast<double>(group.size());
        if (group.size() >= 3 && distinct.size() >= 2)
            r.fit = fit_convergence_rate(group);
        out.push_back(r);
    }
    return out;
}

/*!
 * Steady-state hybrid solves over samplers x caps x N_p x replicas.
 *
 * Rows are produced in that nesting order and passed to on_row as soon as
 * they complete, so a caller can persist partial results before an error
 * propagates.
 */
inline SweepResult run_sweep(ProblemSpec const& problem,
                             HybridConfig const& base,
                             SweepSpec const& spec,
                             std::function<void(ConvergencePoint const&)> const& on_row = {})
{
    if (spec.replicas < 1)
        throw ConfigError("sweep needs at least one replica");
    if (spec.scatter_caps.empty() || spec.particles.empty() || spec.samplers.empty())
        throw ConfigError("sweep axes must be nonempty");
    std::size_t const max_np
        = *std::max_element(spec.particles.begin(), spec.particles.end());

    auto const quad = default_quadrature(problem.dimension(), base.sn.order,
                                         base.sn.azimuths);
    std::vector<double> high_res;
    if (spec.reference == ReferenceKind::high_resolution)
        high_res = high_resolution_reference(problem);

    SweepResult result;
    for (SamplerKind kind : spec.samplers)
    {
        for (int cap : spec.scatter_caps)
        {
            std::vector<double> const ref
                = spec.reference == ReferenceKind::high_resolution
                      ? high_res
                      : estimator_limit_reference(problem, cap, quad);
            for (std::size_t np : spec.particles)
            {
                for (int r = 0; r < spec.replicas; ++r)
                {
                    HybridConfig cfg = base;
                    cfg.scatter_cap = cap;
                    cfg.particles = np;
                    cfg.sampler.kind = kind;
                    cfg.sampler.seed = replica_seed(base.sampler.seed, r);
                    cfg.sampler.start_index
                        = replica_start_index(base.sampler.start_index, r, max_np);
                    auto const out = steady_state_solve(cfg, problem);

                    ConvergencePoint pt;
                    pt.problem = problem.name();
                    pt.sampler = kind;
                    pt.scatter_cap = cap;
                    pt.particles = np;
                    pt.replica = r;
                    pt.l2_error = l2_error(out.flux, ref, problem.mesh());
                    pt.runtime_seconds = out.timings.total();
                    pt.sn_iterations = out.sn_iterations;
                    result.points.push_back(pt);
                    if (on_row)
                        on_row(pt);
                }
            }
        }
    }
    result.rates = summarize_rates(result.points);
    return result;
}

//---------------------------------------------------------------------------//
// CSV
//---------------------------------------------------------------------------//
inline constexpr char const sweep_csv_header[]
    = "problem,sampler,N_s,N_p,replica,l2_error,runtime_s,sn_iterations";

inline std::string format_scatter_cap(int cap)
{
    return cap == unlimited_scatters ? "inf" : std::to_string(cap);
}

inline int parse_scatter_cap(std::string const& s)
{
    if (s == "inf")
        return unlimited_scatters;
    std::size_t pos = 0;
    int v = 0;
    try
    {
        v = std::stoi(s, &pos);
    }
    catch (std::exception const&)
    {
        pos = 0;
    }
    if (pos != s.size() || s.empty() || v < 0)
        throw ConfigError("invalid scatter cap '" + s + "'");
    return v;
}

inline SamplerKind parse_sampler(std::string const& s)
{
    if (s == "mc")
        return SamplerKind::pseudorandom;
    if (s == "qmc")
        return SamplerKind::halton;
    throw ConfigError("unknown sampler '" + s + "' (expected mc or qmc)");
}

//! Shortest decimal text that reads back to the same double
inline std::string format_double(double v)
{
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec)
    {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    return buf;
}

inline void write_csv_row(std::ostream& os, ConvergencePoint const& p)
{
    os << p.problem << ',' << to_cstring(p.sampler) << ','
       << format_scatter_cap(p.scatter_cap) << ',' << p.particles << ','
       << p.replica << ',' << format_double(p.l2_error) << ','
       << format_double(p.runtime_seconds) << ',' << p.sn_iterations << '\n';
}

//! Marker appended when a sweep aborts; readers treat it as a comment
inline void write_csv_failure(std::ostream& os, std::string const& message)
{
    std::string flat = message;
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    os << "# FAILED: " << flat << '\n';
}

struct SweepTable
{
    std::vector<ConvergencePoint> points;
    std::optional<std::string> failure;
};

inline SweepTable read_sweep_csv(std::istream& is)
{
    SweepTable table;
    std::string line;
    if (!std::getline(is, line) || line != sweep_csv_header)
        throw ConfigError("sweep CSV is missing the expected header");
    std::size_t lineno = 1;
    while (std::getline(is, line))
    {
        ++lineno;
        if (line.empty())
            continue;
        if (line.front() == '#')
        {
            std::string const tag = "# FAILED: ";
            if (line.compare(0, tag.size(), tag) == 0)
                table.failure = line.substr(tag.size());
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() != 8)
        {
            throw ConfigError("sweep CSV line " + std::to_string(lineno) + " has "
                              + std::to_string(f.size()) + " fields, expected 8");
        }
        try
        {
            ConvergencePoint p;
            p.problem = f[0];
            p.sampler = parse_sampler(f[1]);
            p.scatter_cap = parse_scatter_cap(f[2]);
            p.particles = std::stoull(f[3]);
            p.replica = std::stoi(f[4]);
            p.l2_error = std::stod(f[5]);
            p.runtime_seconds = std::stod(f[6]);
            p.sn_iterations = std::stoi(f[7]);
            table.points.push_back(p);
        }
        catch (std::exception const& e)
        {
            throw ConfigError("sweep CSV line " + std::to_string(lineno) + ": "
                              + e.what());
        }
    }
    return table;
}

//---------------------------------------------------------------------------//
}  // namespace qmch
