//---------------------------------------------------------------------------//
//! \file qmch/hybrid_driver.hpp
//! The four-stage hybrid step: scatter-limited MC, collided S_N solve,
//! zero-scatter relabel, and census hand-off.
//---------------------------------------------------------------------------//
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "execution.hpp"
#include "geometry.hpp"
#include "mc_transport.hpp"
#include "sampling.hpp"
#include "sn_solver.hpp"

namespace qmch
{
//---------------------------------------------------------------------------//
// CONFIGURATION
//---------------------------------------------------------------------------//
enum class RemapVariant
{
    remap,   //!< Relabel the full solution into fresh particles
    legacy,  //!< Transport only the collided remainder and sum
    none
};

inline char const* to_cstring(RemapVariant v)
{
    switch (v)
    {
        case RemapVariant::remap:
            return "remap";
        case RemapVariant::legacy:
            return "legacy";
        case RemapVariant::none:
            return "none";
    }
    return "?";
}

struct SamplerSettings
{
    SamplerKind kind{SamplerKind::halton};
    std::uint64_t seed{1};
    std::uint64_t start_index{0};
    //! Halton dimensions per history; zero selects the cap-based default
    unsigned dimension_budget{0};
};

struct SnSettings
{
    int order{4};
    int azimuths{0};  //!< 2D only; zero means 2 * order
    double tol{1e-6};
    int max_iter{10000};
};

struct TimeStepping
{
    bool steady{true};
    double dt{1.0};
    int steps{1};
};

/*!
 * Run parameters of the hybrid.
 *
 * An unlimited scatter cap makes the MC leg a pure MC solve: the collided
 * source is empty and no relabel is needed.
 */
struct HybridConfig
{
    int scatter_cap{0};
    std::size_t particles{1024};
    SamplerSettings sampler{};
    SnSettings sn{};
    TimeStepping time{};
    RemapVariant remap{RemapVariant::remap};
    ExecutionPolicy execution{};
    double w_min_factor{1e-8};

    void validate() const
    {
        if (scatter_cap < 0)
            throw ConfigError("invalid scatter cap");
        if (particles == 0)
            throw ConfigError("particle count must be positive");
        if (!(sn.tol > 0))
            throw ConfigError("S_N tolerance must be positive");
        if (sn.max_iter < 1)
            throw ConfigError("S_N iteration limit must be positive");
        if (!time.steady && (!(time.dt > 0) || !std::isfinite(time.dt)))
            throw ConfigError("time step must be positive and finite");
        if (!time.steady && time.steps < 1)
            throw ConfigError("number of time steps must be positive");
        if (!(w_min_factor >= 0))
            throw ConfigError("weight cutoff factor must be nonnegative");
    }

    //! Remap variant actually used (none for an unlimited cap)
    RemapVariant effective_remap() const
    {
        return scatter_cap == unlimited_scatters ? RemapVariant::none : remap;
    }

    unsigned effective_budget() const
    {
        return sampler.dimension_budget > 0
                   ? sampler.dimension_budget
                   : default_dimension_budget(scatter_cap);
    }

    //! Sample stream for a given step; steps draw disjoint Halton points
    SampleStream stream_for_step(std::size_t step) const
    {
        if (sampler.kind == SamplerKind::halton)
        {
            return SampleStream::halton(sampler.start_index + step * particles,
                                        effective_budget(), sampler.seed)
                .substream(0x5eed0000 + step);
        }
        return SampleStream::pseudorandom(sampler.seed, effective_budget())
            .substream(0x5eed0000 + step);
    }
};

//---------------------------------------------------------------------------//
// STEP STATE
//---------------------------------------------------------------------------//
struct StageTimings
{
    double mc{0};
    double sn{0};
    double remap{0};

    double total() const { return mc + sn + remap; }
};

//! State carried between steps: the census representing Psi[t_n]
struct StepState
{
    std::vector<Particle> census;
    double time{0};
    std::size_t step{0};
};

/*!
 * Observables of one hybrid step.
 *
 * flux = pre + post + sn is the step's scalar-flux estimate. state_flux is
 * the scalar flux of the relabelled representation (remap tally, or
 * pre + post + collided tally for the legacy variant).
 */
struct StepOutput
{
    std::vector<double> flux;
    std::vector<double> pre;
    std::vector<double> post;
    std::vector<double> sn;
    std::vector<double> state_flux;
    int sn_iterations{0};
    double sn_balance_residual{0};
    double weight_balance_residual{0};
    std::size_t mc_histories{0};
    std::size_t remap_histories{0};
    std::size_t computer_particles{0};
    std::size_t census_size{0};
    StageTimings timings{};
    double t_start{0};
    double t_end{0};
};

namespace detail
{
inline double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

inline std::vector<double> sum_fields(std::span<double const> a,
                                      std::span<double const> b,
                                      std::span<double const> c = {})
{
    std::vector<double> r(a.begin(), a.end());
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] += b[i] + (c.empty() ? 0.0 : c[i]);
    return r;
}
}  // namespace detail

//---------------------------------------------------------------------------//
// OPERATIONS
//---------------------------------------------------------------------------//
/*!
 * Propagate the state over one step (or the single infinite step of a
 * steady problem).
 *
 * 1. Scatter-limited MC with cap N_s from the census, Q and G.
 * 2. S_N solve of the collided equation with fixed source
 *    sigma_s <psi_post> / 4 pi and zero initial and boundary data.
 * 3. Relabel (remap or legacy variant) into unscattered particles.
 * 4. Replace the census with the relabelled particles.
 */
inline StepOutput hybrid_step(StepState& state,
                              HybridConfig const& config,
                              ProblemSpec const& problem)
{
    config.validate();
    using clock = std::chrono::steady_clock;

    StepOutput out;
    TimeWindow window;
    if (config.time.steady)
        window = {0, unbounded_time};
    else
        window = {state.time, config.time.dt};
    out.t_start = window.start;
    out.t_end = window.end();

    LegOptions opts;
    opts.window = window;
    opts.execution = config.execution;
    opts.w_min_factor = config.w_min_factor;
    SampleStream const stream = config.stream_for_step(state.step);

    // 1. Scatter-limited MC
    auto t0 = clock::now();
    LegResult leg = run_mc_leg(problem, config.scatter_cap, config.particles,
                               stream, opts, state.census);
    out.timings.mc = detail::seconds_since(t0);
    out.mc_histories = leg.histories;
    out.computer_particles = leg.histories;
    out.weight_balance_residual = leg.census.balance_residual();
    if (leg.census.failed_histories > 0)
    {
        throw InvariantError(std::to_string(leg.census.failed_histories)
                             + " histories hit a non-finite or negative weight");
    }

    // 2. Collided S_N solve
    t0 = clock::now();
    std::size_t const cells = problem.mesh().num_cells();
    std::vector<double> fixed(cells);
    for (std::size_t c = 0; c < cells; ++c)
        fixed[c] = problem.material_at(c).sigma_s * leg.tally.post[c] / four_pi;
    auto const mc_total = leg.tally.total();
    SnOptions sn_opts;
    sn_opts.tol = config.sn.tol;
    sn_opts.max_iter = config.sn.max_iter;
    sn_opts.extra_removal = window.steady() ? 0.0 : 1.0 / window.dt;
    sn_opts.scale_flux = mc_total;
    auto const quad = default_quadrature(problem.dimension(), config.sn.order,
                                         config.sn.azimuths);
    SnSolution sn = source_iteration(problem, fixed, quad, sn_opts);
    out.timings.sn = detail::seconds_since(t0);
    out.sn_iterations = sn.iterations;
    out.sn_balance_residual = sn.balance_residual;

    out.pre = std::move(leg.tally.pre);
    out.post = std::move(leg.tally.post);
    out.sn = std::move(sn.phi);
    out.flux = detail::sum_fields(out.pre, out.post, out.sn);

    // 3-4. Relabel and hand off the census
    t0 = clock::now();
    switch (config.effective_remap())
    {
        case RemapVariant::none:
            state.census = std::move(leg.census.particles);
            out.state_flux = out.flux;
            break;
        case RemapVariant::remap: {
            RemapResult r = run_remap(problem, out.pre, out.post, out.sn,
                                      stream, config.particles, opts,
                                      state.census);
            out.weight_balance_residual = std::max(
                out.weight_balance_residual, r.census.balance_residual());
            out.remap_histories = r.histories;
            out.computer_particles = std::max(leg.histories, r.histories);
            state.census = std::move(r.census.particles);
            out.state_flux = std::move(r.flux);
            break;
        }
        case RemapVariant::legacy: {
            RemapResult r = run_legacy_remap(problem, out.post, out.sn, stream,
                                             config.particles, opts);
            out.weight_balance_residual = std::max(
                out.weight_balance_residual, r.census.balance_residual());
            out.remap_histories = r.histories;
            out.computer_particles = leg.histories + r.histories;
            state.census = std::move(leg.census.particles);
            state.census.insert(state.census.end(), r.census.particles.begin(),
                                r.census.particles.end());
            out.state_flux = detail::sum_fields(out.pre, out.post, r.flux);
            break;
        }
    }
    out.timings.remap = detail::seconds_since(t0);
    out.census_size = state.census.size();

    state.time = out.t_end;
    ++state.step;
    return out;
}

//! Relabel variants run over the single infinite step of a steady problem
inline StepOutput steady_hybrid_step(HybridConfig config, ProblemSpec const& problem)
{
    config.time.steady = true;
    StepState state;
    return hybrid_step(state, config, problem);
}

/*!
 * Equilibrium solve: one MC leg with no time limit, one S_N solve, and no
 * relabel. The flux is pre + post + S_N.
 */
inline StepOutput steady_state_solve(HybridConfig config, ProblemSpec const& problem)
{
    config.time.steady = true;
    config.remap = RemapVariant::none;
    StepState state;
    return hybrid_step(state, config, problem);
}

//! March the configured number of steps from the problem's initial census
inline std::vector<StepOutput>
run_time_dependent(HybridConfig const& config, ProblemSpec const& problem)
{
    if (config.time.steady)
        throw ConfigError("time-dependent run requested for a steady config");
    StepState state;
    state.census.assign(problem.initial().begin(), problem.initial().end());
    std::vector<StepOutput> steps;
    for (int s = 0; s < config.time.steps; ++s)
        steps.push_back(hybrid_step(state, config, problem));
    return steps;
}

//---------------------------------------------------------------------------//
/*!
 * Deterministic n-collision fluxes <psi_n> for n = 0..n_max.
 *
 * Each order is one S_N sweep with removal sigma_t and source Q / 4 pi
 * (n = 0) or sigma_s <psi_{n-1}> / 4 pi. Their partial sums are the Neumann
 * series of the full S_N solution.
 */
inline std::vector<std::vector<double>>
n_collision_reference(ProblemSpec const& problem, int n_max, QuadratureSet const& quad)
{
    std::size_t const cells = problem.mesh().num_cells();
    std::vector<std::vector<double>> result;
    std::vector<double> source(cells);
    for (std::size_t c = 0; c < cells; ++c)
        source[c] = problem.material_at(c).q / four_pi;
    std::vector<double> psi(cells);
    for (int n = 0; n <= n_max; ++n)
    {
        std::vector<double> phi(cells, 0.0);
        for (std::size_t m = 0; m < quad.size(); ++m)
        {
            sweep(problem, quad.directions[m], source, psi);
            for (std::size_t c = 0; c < cells; ++c)
                phi[c] += quad.weights[m] * psi[c];
        }
        for (std::size_t c = 0; c < cells; ++c)
            source[c] = problem.material_at(c).sigma_s * phi[c] / four_pi;
        result.push_back(std::move(phi));
    }
    return result;
}

//---------------------------------------------------------------------------//
}  // namespace qmch
