//---------------------------------------------------------------------------//
//! \file qmch/mc_transport.hpp
//! Scatter-limited Monte Carlo transport with implicit capture, split
//! pre-/post-limit track-length tallies, and the zero-scatter remap legs.
//---------------------------------------------------------------------------//
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "errors.hpp"
#include "execution.hpp"
#include "geometry.hpp"
#include "particle.hpp"
#include "sampling.hpp"

namespace qmch
{
//---------------------------------------------------------------------------//
//! Scatter cap meaning "never stop scattering in MC"
inline constexpr int unlimited_scatters = std::numeric_limits<int>::max();

//---------------------------------------------------------------------------//
/*!
 * Cell-binned scalar-flux estimates for the two MC legs.
 *
 * pre holds segments travelled with fewer than N_s scatters, post those
 * travelled after the N_s-th scatter. After normalization both are scalar
 * fluxes (angle integral of the angular flux).
 */
struct TallyField
{
    std::vector<double> pre;
    std::vector<double> post;

    TallyField() = default;
    explicit TallyField(std::size_t cells) : pre(cells, 0.0), post(cells, 0.0)
    {
    }

    std::vector<double> total() const
    {
        std::vector<double> t(pre.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = pre[i] + post[i];
        return t;
    }
};

//---------------------------------------------------------------------------//
/*!
 * Particles alive at the end of a leg plus the weight ledger of the leg.
 *
 * Removed weight is split into implicit capture (sigma_a), post-limit
 * scattering removal handed to the collided solve, and weight lost to the
 * cutoff. birth = census + exited + absorbed + transferred + cutoff.
 */
struct Census
{
    std::vector<Particle> particles;
    double birth_weight{0};
    double exited_weight{0};
    double absorbed_weight{0};
    double transferred_weight{0};
    double cutoff_weight{0};
    std::size_t failed_histories{0};

    double census_weight() const
    {
        double w = 0;
        for (auto const& p : particles)
            w += p.w;
        return w;
    }

    //! All weight removed inside the domain
    double removed_weight() const
    {
        return absorbed_weight + transferred_weight + cutoff_weight;
    }

    //! Relative violation of the weight ledger
    double balance_residual() const
    {
        if (birth_weight == 0)
            return 0;
        double out = census_weight() + exited_weight + removed_weight();
        return std::abs(birth_weight - out) / birth_weight;
    }

    void merge(Census&& other)
    {
        particles.insert(particles.end(), other.particles.begin(),
                         other.particles.end());
        birth_weight += other.birth_weight;
        exited_weight += other.exited_weight;
        absorbed_weight += other.absorbed_weight;
        transferred_weight += other.transferred_weight;
        cutoff_weight += other.cutoff_weight;
        failed_histories += other.failed_histories;
    }
};

//---------------------------------------------------------------------------//
// SEGMENT SCORING
//---------------------------------------------------------------------------//
struct SegmentScore
{
    double score{0};
    double weight_out{0};
};

/*!
 * Exact attenuated track length of a weight-w particle over a segment:
 * score = w (1 - exp(-sigma l)) / sigma, reducing to w l in vacuum.
 */
inline SegmentScore attenuated_track(double w, double sigma, double length)
{
    if (w == 0)
        return {0, 0};
    double const tau = sigma * length;
    if (tau == 0)
        return {w * length, w};
    if (std::isinf(length))
        return {w / sigma, 0};
    return {w * (-std::expm1(-tau)) / sigma, w * std::exp(-tau)};
}

//! Add the attenuated track length to a tally bin; returns the exit weight
inline double
score_segment(double& bin, double w, double sigma, double length)
{
    SegmentScore s = attenuated_track(w, sigma, length);
    bin += s.score;
    return s.weight_out;
}

//---------------------------------------------------------------------------//
// HISTORIES
//---------------------------------------------------------------------------//
enum class Termination
{
    exited,
    census,
    weight_cutoff,
    absorbed,  //!< Attenuated to zero along an unbounded track
    lost,  //!< Never leaves a non-interacting cell (measure-zero direction)
    failed
};

struct HistoryResult
{
    Termination termination{Termination::exited};
    int collisions{0};
};

//! Per-worker accumulator for one transport leg
struct LegAccumulator
{
    std::vector<double> pre;
    std::vector<double> post;
    Census census;
    std::size_t histories{0};
    std::size_t collisions{0};

    explicit LegAccumulator(std::size_t cells) : pre(cells, 0.0), post(cells, 0.0)
    {
    }

    void merge(LegAccumulator&& other)
    {
        for (std::size_t i = 0; i < pre.size(); ++i)
        {
            pre[i] += other.pre[i];
            post[i] += other.post[i];
        }
        census.merge(std::move(other.census));
        histories += other.histories;
        collisions += other.collisions;
    }
};

//! Fixed parameters shared by every history of a leg
struct TransportContext
{
    ProblemSpec const* problem{nullptr};
    int scatter_cap{0};
    double t_end{unbounded_time};
    double w_min{0};
};

/*!
 * Advance one particle until it exits, reaches the end of the step, or drops
 * below the weight cutoff.
 *
 * While n < N_s the particle scatters at rate sigma_s and loses weight only
 * to absorption; segments score into the pre tally. Once n == N_s it stops
 * scattering, loses weight at sigma_t, and scores into the post tally.
 * Collision sites are found by tracking optical depth in units of sigma_s
 * across cell faces, so the k-th scatter of the history always draws from
 * the same three stream dimensions.
 */
inline HistoryResult advance_history(Particle& p,
                                     std::uint64_t index,
                                     SampleStream const& stream,
                                     TransportContext const& ctx,
                                     LegAccumulator& acc)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    ProblemSpec const& problem = *ctx.problem;
    Mesh const& mesh = problem.mesh();
    int const dim = mesh.dimension();
    Census& census = acc.census;

    Point dir = transport_direction(p.dir, dim);
    int k = 0;
    auto next_optical_depth = [&] {
        return -std::log1p(
            -stream.draw(index, dims::first_collision + dims::per_collision * k));
    };
    double depth = p.n < ctx.scatter_cap ? next_optical_depth() : inf;

    enum class Event
    {
        face,
        collision,
        step_end
    };

    for (;;)
    {
        if (!(p.w >= 0) || !std::isfinite(p.w))
        {
            ++census.failed_histories;
            return {Termination::failed, k};
        }
        Material const& mat = problem.material_at(p.cell);
        CellExit const exit = mesh.distance_to_cell_exit(p.pos, dir, p.cell);
        double const to_step_end = ctx.t_end - p.t;
        bool const pre_limit = p.n < ctx.scatter_cap;

        Event event = Event::face;
        double d = exit.distance;
        if (pre_limit && mat.sigma_s > 0)
        {
            double d_coll = depth / mat.sigma_s;
            if (d_coll < d)
            {
                d = d_coll;
                event = Event::collision;
            }
        }
        if (std::isfinite(to_step_end) && to_step_end <= d)
        {
            d = to_step_end;
            event = Event::step_end;
        }

        double const sigma = pre_limit ? mat.sigma_a : mat.sigma_t();
        if (!std::isfinite(d) && sigma == 0)
        {
            census.cutoff_weight += p.w;
            p.w = 0;
            return {Termination::lost, k};
        }

        double const w_in = p.w;
        SegmentScore const seg = attenuated_track(w_in, sigma, d);
        (pre_limit ? acc.pre : acc.post)[p.cell] += seg.score;
        p.w = seg.weight_out;
        double const loss = w_in - p.w;
        if (pre_limit)
        {
            census.absorbed_weight += loss;
        }
        else if (loss > 0)
        {
            double const frac_a = mat.sigma_a / mat.sigma_t();
            census.absorbed_weight += loss * frac_a;
            census.transferred_weight += loss * (1 - frac_a);
        }

        if (!std::isfinite(d))
        {
            p.w = 0;
            return {Termination::absorbed, k};
        }
        for (int axis = 0; axis < dim; ++axis)
            p.pos[axis] += d * dir[axis];
        p.t += d;
        if (pre_limit)
            depth = std::max(0.0, depth - mat.sigma_s * d);

        switch (event)
        {
            case Event::collision: {
                unsigned const base
                    = dims::first_collision + dims::per_collision * k;
                p.dir = sample_isotropic_direction(stream.draw(index, base + 1),
                                                   stream.draw(index, base + 2));
                dir = transport_direction(p.dir, dim);
                ++p.n;
                ++k;
                depth = p.n < ctx.scatter_cap ? next_optical_depth() : inf;
                break;
            }
            case Event::step_end:
                p.t = ctx.t_end;
                census.particles.push_back(p);
                return {Termination::census, k};
            case Event::face:
                p.pos[exit.axis] = mesh.face_coord(p.cell, exit.axis, exit.side);
                if (exit.kind == ExitKind::domain_boundary)
                {
                    census.exited_weight += p.w;
                    return {Termination::exited, k};
                }
                p.cell = mesh.neighbor(p.cell, exit.axis, exit.side);
                break;
        }

        if (p.w < ctx.w_min)
        {
            census.cutoff_weight += p.w;
            p.w = 0;
            return {Termination::weight_cutoff, k};
        }
    }
}

//---------------------------------------------------------------------------//
// LEGS
//---------------------------------------------------------------------------//
/*!
 * A group of particles sharing one birth process and one substream.
 *
 * birth(i) must be a pure function of the local index.
 */
struct Population
{
    std::size_t count{0};
    double total_weight{0};
    SampleStream stream{SampleStream::pseudorandom(0)};
    std::function<Particle(std::uint64_t)> birth;
};

struct LegOptions
{
    TimeWindow window{};
    ExecutionPolicy execution{};
    //! Weight cutoff relative to the mean birth weight
    double w_min_factor{1e-8};
};

struct LegResult
{
    TallyField tally;
    Census census;
    std::size_t histories{0};
    std::size_t collisions{0};
};

/*!
 * Transport every particle of every population with the given scatter cap
 * and normalize the tallies to scalar fluxes per cell (per unit time in
 * steady state, step-averaged otherwise).
 */
inline LegResult transport_populations(ProblemSpec const& problem,
                                       int scatter_cap,
                                       std::span<Population const> populations,
                                       LegOptions const& opts)
{
    std::size_t const cells = problem.mesh().num_cells();
    std::size_t total_count = 0;
    double total_weight = 0;
    std::vector<std::size_t> offsets;
    for (auto const& pop : populations)
    {
        offsets.push_back(total_count);
        total_count += pop.count;
        total_weight += pop.total_weight;
    }

    TransportContext ctx;
    ctx.problem = &problem;
    ctx.scatter_cap = scatter_cap;
    ctx.t_end = opts.window.end();
    ctx.w_min = total_count > 0
                    ? opts.w_min_factor * total_weight / total_count
                    : 0.0;

    auto acc = for_each_history<LegAccumulator>(
        total_count,
        opts.execution,
        [cells] { return LegAccumulator(cells); },
        [&](std::size_t global, LegAccumulator& a) {
            std::size_t g = populations.size() - 1;
            while (offsets[g] > global)
                --g;
            Population const& pop = populations[g];
            std::uint64_t const local = global - offsets[g];
            Particle p = pop.birth(local);
            a.census.birth_weight += p.w;
            ++a.histories;
            auto result = advance_history(p, local, pop.stream, ctx, a);
            a.collisions += static_cast<std::size_t>(result.collisions);
        });

    LegResult result;
    result.tally.pre = std::move(acc.pre);
    result.tally.post = std::move(acc.post);
    double const time_norm = opts.window.steady() ? 1.0 : opts.window.dt;
    for (std::size_t c = 0; c < cells; ++c)
    {
        double const norm = 1.0 / (problem.mesh().volume(c) * time_norm);
        result.tally.pre[c] *= norm;
        result.tally.post[c] *= norm;
    }
    result.census = std::move(acc.census);
    result.histories = acc.histories;
    result.collisions = acc.collisions;
    return result;
}

//---------------------------------------------------------------------------//
//! Number of particles allotted to the volume and boundary sources
struct ParticleSplit
{
    std::size_t volume{0};
    std::size_t boundary{0};
};

inline ParticleSplit
split_particles(double volume_weight, double boundary_weight, std::size_t n)
{
    ParticleSplit s;
    double const total = volume_weight + boundary_weight;
    if (!(total > 0))
        return s;
    if (boundary_weight <= 0)
        return {n, 0};
    if (volume_weight <= 0)
        return {0, n};
    auto nv = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * volume_weight / total));
    nv = std::clamp<std::size_t>(nv, 1, n > 1 ? n - 1 : 1);
    s.volume = nv;
    s.boundary = n > nv ? n - nv : 0;
    return s;
}

namespace detail
{
inline Population volume_population(ProblemSpec const& problem,
                                    VolumeSource const& source,
                                    std::size_t count,
                                    SampleStream const& stream,
                                    TimeWindow const& window)
{
    Population pop;
    pop.count = count;
    pop.total_weight = source.total() * (window.steady() ? 1.0 : window.dt);
    pop.stream = stream.substream(substreams::volume);
    (void)problem;
    pop.birth = [&source, count, s = pop.stream, window](std::uint64_t i) {
        return source.birth(s, i, count, window);
    };
    return pop;
}

inline Population boundary_population(BoundaryEmitter const& emitter,
                                      std::size_t count,
                                      SampleStream const& stream,
                                      TimeWindow const& window)
{
    Population pop;
    pop.count = count;
    pop.total_weight = emitter.total() * (window.steady() ? 1.0 : window.dt);
    pop.stream = stream.substream(substreams::boundary);
    pop.birth = [&emitter, count, s = pop.stream, window](std::uint64_t i) {
        return emitter.birth(s, i, count, window);
    };
    return pop;
}

//! Resumed census particles, relabelled as unscattered
inline Population census_population(std::span<Particle const> particles,
                                    SampleStream const& stream)
{
    Population pop;
    pop.count = particles.size();
    for (auto const& p : particles)
        pop.total_weight += p.w;
    pop.stream = stream.substream(substreams::census);
    pop.birth = [particles](std::uint64_t i) {
        Particle p = particles[i];
        p.n = 0;
        return p;
    };
    return pop;
}

inline void check_field(std::span<double const> field,
                        std::size_t cells,
                        char const* name)
{
    if (field.size() != cells)
    {
        std::ostringstream os;
        os << name << " field has " << field.size() << " entries, expected "
           << cells;
        throw InvariantError(os.str());
    }
    for (double v : field)
    {
        if (!(v >= 0) || !std::isfinite(v))
            throw InvariantError(std::string(name)
                                 + " field is negative or non-finite");
    }
}
}  // namespace detail

//---------------------------------------------------------------------------//
/*!
 * Step 1 of the hybrid: scatter-limited MC from the volume source, the
 * boundary source, and resumed census particles.
 *
 * Volume and boundary births share n_particles in proportion to their
 * emission rates; resumed particles are transported in addition.
 */
inline LegResult run_mc_leg(ProblemSpec const& problem,
                            int scatter_cap,
                            std::size_t n_particles,
                            SampleStream const& stream,
                            LegOptions const& opts = {},
                            std::span<Particle const> resumed = {})
{
    if (scatter_cap < 0)
        throw ConfigError("invalid scatter cap");

    VolumeSource const volume(problem);
    BoundaryEmitter const boundary(problem);
    if (n_particles == 0 && !(volume.empty() && boundary.empty()))
        throw ConfigError("zero particles requested for a nonzero source");

    ParticleSplit const split
        = split_particles(volume.total(), boundary.total(), n_particles);
    std::vector<Population> pops;
    if (split.volume > 0)
    {
        pops.push_back(detail::volume_population(problem, volume, split.volume,
                                                 stream, opts.window));
    }
    if (split.boundary > 0)
    {
        pops.push_back(detail::boundary_population(boundary, split.boundary,
                                                   stream, opts.window));
    }
    if (!resumed.empty())
        pops.push_back(detail::census_population(resumed, stream));

    return transport_populations(problem, scatter_cap, pops, opts);
}

//---------------------------------------------------------------------------//
//! Output of a zero-scatter relabel leg
struct RemapResult
{
    std::vector<double> flux;  //!< Scalar flux of the relabelled solution
    Census census;
    std::size_t histories{0};
    std::size_t new_particles{0};  //!< Particles sampled from reemission
};

//! Isotropic reemission rate sigma_s * phi * V per cell
inline std::vector<double> reemission_weights(ProblemSpec const& problem,
                                              std::span<double const> phi)
{
    Mesh const& mesh = problem.mesh();
    std::vector<double> w(mesh.num_cells());
    for (std::size_t c = 0; c < w.size(); ++c)
        w[c] = problem.material_at(c).sigma_s * phi[c] * mesh.volume(c);
    return w;
}

namespace detail
{
/*!
 * Per-cell particle counts for reemission.
 *
 * Every emitting cell receives at least one particle and the rest of the
 * budget is shared in proportion to emission, so low-emission cells are
 * never left empty. Returns an empty vector when the budget is smaller than
 * the number of emitting cells.
 */
inline std::vector<std::size_t>
stratified_counts(std::span<double const> emission, std::size_t count)
{
    double total = 0;
    std::size_t active = 0;
    for (double e : emission)
    {
        if (e > 0)
        {
            total += e;
            ++active;
        }
    }
    if (active == 0 || count < active)
        return {};
    // Largest-remainder rounding so the counts sum to the budget
    double const spare = static_cast<double>(count - active);
    std::vector<std::size_t> n(emission.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainder;
    std::size_t used = active;
    for (std::size_t c = 0; c < n.size(); ++c)
    {
        if (!(emission[c] > 0))
            continue;
        double const share = spare * emission[c] / total;
        double const whole = std::floor(share);
        n[c] = 1 + static_cast<std::size_t>(whole);
        used += static_cast<std::size_t>(whole);
        remainder.emplace_back(share - whole, c);
    }
    std::sort(remainder.begin(), remainder.end(),
              [](auto const& a, auto const& b) { return a.first > b.first; });
    for (std::size_t k = 0; used < count && k < remainder.size(); ++k, ++used)
        ++n[remainder[k].second];
    return n;
}

inline Population reemission_population(ProblemSpec const& problem,
                                        BoxSampler const& sampler,
                                        std::span<double const> emission,
                                        std::size_t count,
                                        SampleStream const& stream,
                                        TimeWindow const& window)
{
    Population pop;
    pop.total_weight = sampler.total() * (window.steady() ? 1.0 : window.dt);
    pop.stream = stream;
    double const scale = window.steady() ? 1.0 : window.dt;

    auto const counts = stratified_counts(emission, count);
    if (counts.empty())
    {
        pop.count = count;
        double const weight = pop.total_weight / static_cast<double>(count);
        pop.birth = [&problem, &sampler, s = pop.stream, weight, window](std::uint64_t i) {
            return sample_volume_birth(sampler, problem, s, i, weight, window);
        };
        return pop;
    }

    // offsets[k] is the first particle index of the k-th emitting cell
    std::vector<std::uint64_t> offsets;
    std::vector<std::size_t> cell_of;
    std::vector<double> weight_of;
    std::uint64_t next = 0;
    for (std::size_t c = 0; c < counts.size(); ++c)
    {
        if (counts[c] == 0)
            continue;
        offsets.push_back(next);
        cell_of.push_back(c);
        weight_of.push_back(emission[c] * scale / static_cast<double>(counts[c]));
        next += counts[c];
    }
    pop.count = next;
    Mesh const& mesh = problem.mesh();
    pop.birth = [&problem, &mesh, s = pop.stream, window, offsets = std::move(offsets),
                 cell_of = std::move(cell_of),
                 weight_of = std::move(weight_of)](std::uint64_t i) {
        auto const k = static_cast<std::size_t>(
            std::upper_bound(offsets.begin(), offsets.end(), i) - offsets.begin() - 1);
        Box const b = mesh.cell_box(cell_of[k]);
        double const u0 = s.draw(i, dims::position_0);
        double const u1 = problem.dimension() == 2 ? s.draw(i, dims::position_1) : 0.5;
        Particle p;
        p.pos = {std::min(b.x_lo + u0 * (b.x_hi - b.x_lo), std::nextafter(b.x_hi, b.x_lo)),
                 std::min(b.y_lo + u1 * (b.y_hi - b.y_lo), std::nextafter(b.y_hi, b.y_lo))};
        p.dir = sample_isotropic_direction(s.draw(i, dims::direction_0),
                                           s.draw(i, dims::direction_1));
        p.t = window.steady() ? window.start
                              : window.start + window.dt * s.draw(i, dims::time);
        p.w = weight_of[k];
        p.n = 0;
        p.cell = cell_of[k];
        return p;
    };
    return pop;
}

inline BoxSampler cell_sampler(Mesh const& mesh, std::span<double const> weights)
{
    std::vector<Box> boxes(mesh.num_cells());
    for (std::size_t c = 0; c < boxes.size(); ++c)
        boxes[c] = mesh.cell_box(c);
    return BoxSampler(std::move(boxes), weights);
}
}  // namespace detail

/*!
 * Step 3 of the hybrid: relabel the whole solution as unscattered particles.
 *
 * Solves the non-scattering problem with attenuation sigma_t and source
 * Q + sigma_s (pre + post + sn) emitted isotropically, plus the initial
 * census and boundary data of the step. Volume-source particles reuse the
 * step-1 birth samples (same stream indices); the remaining volume budget is
 * spent on newly sampled reemission particles. Boundary and initial-census
 * particles are the step-1 particles, re-streamed without scattering.
 */
inline RemapResult run_remap(ProblemSpec const& problem,
                             std::span<double const> pre,
                             std::span<double const> post,
                             std::span<double const> sn_phi,
                             SampleStream const& stream,
                             std::size_t n_particles,
                             LegOptions const& opts = {},
                             std::span<Particle const> initial = {})
{
    Mesh const& mesh = problem.mesh();
    std::size_t const cells = mesh.num_cells();
    detail::check_field(pre, cells, "pre-limit");
    detail::check_field(post, cells, "post-limit");
    detail::check_field(sn_phi, cells, "discrete-ordinates");

    std::vector<double> phi(cells);
    for (std::size_t c = 0; c < cells; ++c)
        phi[c] = pre[c] + post[c] + sn_phi[c];
    auto const emission = reemission_weights(problem, phi);
    BoxSampler const reemit = detail::cell_sampler(mesh, emission);

    VolumeSource const volume(problem);
    BoundaryEmitter const boundary(problem);
    ParticleSplit const step1
        = split_particles(volume.total(), boundary.total(), n_particles);

    // Volume budget shared by reused births and new reemission particles
    std::size_t const budget = step1.volume > 0 ? step1.volume : n_particles;
    ParticleSplit const vol
        = split_particles(volume.total(), reemit.total(), budget);
    std::size_t const n_births = vol.volume;
    std::size_t const n_reemit = vol.boundary;

    std::vector<Population> pops;
    if (n_births > 0)
    {
        pops.push_back(detail::volume_population(problem, volume, n_births,
                                                 stream, opts.window));
    }
    if (n_reemit > 0)
    {
        pops.push_back(detail::reemission_population(
            problem, reemit, emission, n_reemit,
            stream.substream(substreams::reemission), opts.window));
    }
    if (step1.boundary > 0)
    {
        pops.push_back(detail::boundary_population(boundary, step1.boundary,
                                                   stream, opts.window));
    }
    if (!initial.empty())
        pops.push_back(detail::census_population(initial, stream));

    LegResult leg = transport_populations(problem, 0, pops, opts);
    RemapResult result;
    result.flux = std::move(leg.tally.post);
    result.census = std::move(leg.census);
    result.histories = leg.histories;
    result.new_particles = n_reemit > 0 ? pops[n_births > 0 ? 1 : 0].count : 0;
    return result;
}

/*!
 * Step 3' of the earlier hybrids: transport only the collided remainder.
 *
 * Newly sampled particles carry the reemission sigma_s (post + sn) with zero
 * initial and boundary data; the caller adds the step-1 solution.
 */
inline RemapResult run_legacy_remap(ProblemSpec const& problem,
                                    std::span<double const> post,
                                    std::span<double const> sn_phi,
                                    SampleStream const& stream,
                                    std::size_t n_particles,
                                    LegOptions const& opts = {})
{
    Mesh const& mesh = problem.mesh();
    std::size_t const cells = mesh.num_cells();
    detail::check_field(post, cells, "post-limit");
    detail::check_field(sn_phi, cells, "discrete-ordinates");

    std::vector<double> phi(cells);
    for (std::size_t c = 0; c < cells; ++c)
        phi[c] = post[c] + sn_phi[c];
    auto const emission = reemission_weights(problem, phi);
    BoxSampler const reemit = detail::cell_sampler(mesh, emission);

    RemapResult result;
    result.flux.assign(cells, 0.0);
    if (reemit.empty() || n_particles == 0)
        return result;

    std::vector<Population> pops{detail::reemission_population(
        problem, reemit, emission, n_particles, stream.substream(substreams::legacy),
        opts.window)};
    LegResult leg = transport_populations(problem, 0, pops, opts);
    result.flux = std::move(leg.tally.post);
    result.census = std::move(leg.census);
    result.histories = leg.histories;
    result.new_particles = pops.front().count;
    return result;
}

//---------------------------------------------------------------------------//
}  // namespace qmch
