//---------------------------------------------------------------------------//
//! \file qmch/sampling.hpp
//! Indexed uniform sample streams (counter-based PRNG or Halton) and the
//! transforms that turn unit-cube points into particle births.
//---------------------------------------------------------------------------//
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "particle.hpp"

namespace qmch
{
//---------------------------------------------------------------------------//
// PRIMES AND RADICAL INVERSES
//---------------------------------------------------------------------------//
namespace detail
{
inline std::vector<unsigned> const& prime_table()
{
    static std::vector<unsigned> const primes = [] {
        constexpr unsigned limit = 8192;
        std::vector<bool> composite(limit, false);
        std::vector<unsigned> result;
        for (unsigned i = 2; i < limit; ++i)
        {
            if (composite[i])
                continue;
            result.push_back(i);
            for (unsigned j = i * i; j < limit; j += i)
                composite[j] = true;
        }
        return result;
    }();
    return primes;
}
}  // namespace detail

//! The n-th prime, zero-based (nth_prime(0) == 2)
inline unsigned nth_prime(std::size_t n)
{
    auto const& primes = detail::prime_table();
    if (n >= primes.size())
        throw ConfigError("Halton dimension exceeds the prime table");
    return primes[n];
}

//! Largest double strictly below one
inline constexpr double one_minus_epsilon = 0x1.fffffffffffffp-1;

/*!
 * Base-b radical inverse: mirror the base-b digits of index about the
 * radix point. radical_inverse(5, 3) == 0.21_3 == 7/9.
 */
inline double radical_inverse(std::uint64_t index, unsigned base)
{
    double const inv_base = 1.0 / base;
    double scale = inv_base;
    double result = 0;
    while (index > 0)
    {
        std::uint64_t next = index / base;
        result += static_cast<double>(index - next * base) * scale;
        scale *= inv_base;
        index = next;
    }
    return std::min(result, one_minus_epsilon);
}

//---------------------------------------------------------------------------//
// COUNTER-BASED GENERATOR
//---------------------------------------------------------------------------//
//! SplitMix64 output function
inline constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

//! Uniform [0,1) that is a pure function of (key, counter, dim)
inline double counter_uniform(std::uint64_t key,
                              std::uint64_t counter,
                              std::uint64_t dim)
{
    std::uint64_t h = mix64(mix64(mix64(key) ^ counter) ^ (dim * 0xd1b54a32d192ed03ull));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

//---------------------------------------------------------------------------//
// DIMENSION LAYOUT
//---------------------------------------------------------------------------//
/*!
 * Fixed assignment of unit-cube dimensions within one particle history.
 *
 * Birth uses dims 0-4; the k-th scatter of a history uses the three
 * dimensions starting at first_collision + 3k (optical distance, then two
 * direction coordinates).
 */
namespace dims
{
inline constexpr unsigned position_0 = 0;
inline constexpr unsigned position_1 = 1;
inline constexpr unsigned direction_0 = 2;
inline constexpr unsigned direction_1 = 3;
inline constexpr unsigned time = 4;
inline constexpr unsigned first_collision = 5;
inline constexpr unsigned per_collision = 3;
}  // namespace dims

//! Halton dimensions used per history for a given scatter cap
inline unsigned default_dimension_budget(int scatter_cap)
{
    int const k = std::clamp(scatter_cap, 0, 8);
    return dims::first_collision + dims::per_collision * static_cast<unsigned>(k);
}

//---------------------------------------------------------------------------//
// SAMPLE STREAM
//---------------------------------------------------------------------------//
enum class SamplerKind
{
    pseudorandom,
    halton
};

inline char const* to_cstring(SamplerKind k)
{
    return k == SamplerKind::halton ? "qmc" : "mc";
}

/*!
 * Stateless source of uniform samples indexed by (particle, dimension).
 *
 * The Halton kind returns the radical inverse of (start_index + particle) in
 * the (dim+1)-th prime for dimensions inside the budget and falls back to the
 * counter-based generator outside it. Substreams separate independent
 * particle populations (volume births, boundary births, remap emission)
 * without changing the Halton points themselves.
 */
class SampleStream
{
  public:
    static SampleStream pseudorandom(std::uint64_t seed, unsigned budget = 29)
    {
        return SampleStream(SamplerKind::pseudorandom, seed, 0, budget);
    }

    static SampleStream
    halton(std::uint64_t start_index, unsigned budget = 29, std::uint64_t seed = 0)
    {
        return SampleStream(SamplerKind::halton, seed, start_index, budget);
    }

    SamplerKind kind() const { return kind_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t start_index() const { return start_; }
    unsigned dimension_budget() const { return budget_; }

    double draw(std::uint64_t particle, unsigned dim) const
    {
        if (kind_ == SamplerKind::halton)
        {
            std::uint64_t index = start_ + particle;
            if (dim < budget_)
                return radical_inverse(index, nth_prime(dim));
            return counter_uniform(key_, index, dim);
        }
        return counter_uniform(key_, particle, dim);
    }

    //! Independent pseudorandom key for a separate particle population
    SampleStream substream(std::uint64_t id) const
    {
        SampleStream s = *this;
        s.key_ = mix64(key_ ^ mix64(id + 0x632be59bd9b4e019ull));
        return s;
    }

  private:
    SamplerKind kind_;
    std::uint64_t seed_;
    std::uint64_t start_;
    unsigned budget_;
    std::uint64_t key_;

    SampleStream(SamplerKind kind, std::uint64_t seed, std::uint64_t start, unsigned budget)
        : kind_{kind}, seed_{seed}, start_{start}, budget_{budget}, key_{mix64(seed)}
    {
    }
};

//! Substream identifiers for the particle populations of one step
namespace substreams
{
inline constexpr std::uint64_t volume = 0;
inline constexpr std::uint64_t boundary = 1;
inline constexpr std::uint64_t census = 2;
inline constexpr std::uint64_t reemission = 3;
inline constexpr std::uint64_t legacy = 4;
}  // namespace substreams

//---------------------------------------------------------------------------//
// PHYSICAL TRANSFORMS
//---------------------------------------------------------------------------//
//! Uniform direction on the sphere from two unit samples
inline Vec3 sample_isotropic_direction(double u1, double u2)
{
    double const mu = 2 * u1 - 1;
    double const phi = 2 * std::numbers::pi * u2;
    double const s = std::sqrt(std::max(0.0, 1 - mu * mu));
    return {s * std::cos(phi), s * std::sin(phi), mu};
}

//! Free-flight distance at rate sigma; infinite in a non-interacting medium
inline double sample_exponential_distance(double u, double sigma)
{
    if (sigma <= 0)
        return std::numeric_limits<double>::infinity();
    return -std::log1p(-u) / sigma;
}

//---------------------------------------------------------------------------//
/*!
 * Piecewise-uniform density over a list of boxes.
 *
 * The first unit sample selects a box by inverse CDF and its residual places
 * the point along x inside that box, so a single dimension covers both the
 * discrete and the continuous part of the map.
 */
class BoxSampler
{
  public:
    BoxSampler() = default;

    BoxSampler(std::vector<Box> boxes, std::span<double const> weights)
        : boxes_{std::move(boxes)}
    {
        cdf_.reserve(boxes_.size());
        for (double w : weights)
        {
            total_ += std::max(w, 0.0);
            cdf_.push_back(total_);
        }
    }

    double total() const { return total_; }
    bool empty() const { return !(total_ > 0); }

    Point sample(double u0, double u1) const
    {
        double const target = u0 * total_;
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
        std::size_t j = std::min(static_cast<std::size_t>(it - cdf_.begin()),
                                 cdf_.size() - 1);
        // Skip trailing zero-weight boxes picked up by rounding
        while (j > 0 && cdf_[j] == cdf_[j - 1])
            --j;
        double const lo = j > 0 ? cdf_[j - 1] : 0.0;
        double const width = cdf_[j] - lo;
        double r = width > 0 ? (target - lo) / width : 0.5;
        r = std::clamp(r, 0.0, one_minus_epsilon);

        Box const& b = boxes_[j];
        Point p{b.x_lo + r * (b.x_hi - b.x_lo), b.y_lo + u1 * (b.y_hi - b.y_lo)};
        // Keep the point strictly inside the selected box's upper faces
        if (p[0] >= b.x_hi)
            p[0] = std::nextafter(b.x_hi, b.x_lo);
        if (p[1] >= b.y_hi)
            p[1] = std::nextafter(b.y_hi, b.y_lo);
        return p;
    }

  private:
    std::vector<Box> boxes_;
    std::vector<double> cdf_;
    double total_{0};
};

//---------------------------------------------------------------------------//
//! Time window of a transport leg; infinite dt means steady state
struct TimeWindow
{
    double start{0};
    double dt{unbounded_time};

    bool steady() const { return !std::isfinite(dt); }
    double end() const { return start + dt; }
};

//! Particle born uniformly-in-box with isotropic direction
inline Particle sample_volume_birth(BoxSampler const& sampler,
                                    ProblemSpec const& problem,
                                    SampleStream const& stream,
                                    std::uint64_t index,
                                    double weight,
                                    TimeWindow const& window)
{
    Particle p;
    p.pos = sampler.sample(stream.draw(index, dims::position_0),
                           problem.dimension() == 2
                               ? stream.draw(index, dims::position_1)
                               : 0.5);
    p.dir = sample_isotropic_direction(stream.draw(index, dims::direction_0),
                                       stream.draw(index, dims::direction_1));
    p.t = window.steady()
              ? window.start
              : window.start + window.dt * stream.draw(index, dims::time);
    p.w = weight;
    p.n = 0;
    p.cell = problem.locate(p.pos);
    return p;
}

//---------------------------------------------------------------------------//
/*!
 * Births from the volume source Q: region chosen by inverse CDF of the
 * region-wise source, uniform position inside it, isotropic direction.
 */
class VolumeSource
{
  public:
    explicit VolumeSource(ProblemSpec const& problem) : problem_{&problem}
    {
        std::vector<Box> boxes;
        std::vector<double> weights;
        for (auto const& r : problem.regions())
        {
            boxes.push_back(r.extent);
            weights.push_back(r.material.q * r.extent.volume());
        }
        sampler_ = BoxSampler(std::move(boxes), weights);
    }

    //! Total emission rate, particles/s
    double total() const { return sampler_.total(); }
    bool empty() const { return sampler_.empty(); }

    //! Birth of particle `index` out of `count` equally weighted particles
    Particle birth(SampleStream const& stream,
                   std::uint64_t index,
                   std::size_t count,
                   TimeWindow const& window) const
    {
        if (this->empty())
            throw ConfigError("volume source is empty");
        double weight = this->total() / static_cast<double>(count);
        if (!window.steady())
            weight *= window.dt;
        return sample_volume_birth(sampler_, *problem_, stream, index, weight,
                                   window);
    }

  private:
    ProblemSpec const* problem_;
    BoxSampler sampler_;
};

//! Convenience wrapper: one volume-source birth
inline Particle sample_source_birth(SampleStream const& stream,
                                    std::uint64_t index,
                                    ProblemSpec const& problem,
                                    std::size_t count,
                                    TimeWindow const& window = {})
{
    return VolumeSource(problem).birth(stream, index, count, window);
}

//---------------------------------------------------------------------------//
/*!
 * Births entering through the domain boundary from a constant isotropic
 * incoming intensity G.
 *
 * The entering current through a face is pi * G * area; directions follow
 * the cosine law about the inward normal.
 */
class BoundaryEmitter
{
  public:
    explicit BoundaryEmitter(ProblemSpec const& problem) : problem_{&problem}
    {
        Box const d = problem.mesh().domain();
        std::vector<Box> boxes;
        std::vector<double> weights;
        for (Face f : all_faces)
        {
            Box b = d;
            switch (f)
            {
                case Face::x_lo:
                    b.x_hi = b.x_lo;
                    break;
                case Face::x_hi:
                    b.x_lo = b.x_hi;
                    break;
                case Face::y_lo:
                    b.y_hi = b.y_lo;
                    break;
                case Face::y_hi:
                    b.y_lo = b.y_hi;
                    break;
            }
            boxes.push_back(b);
            weights.push_back(std::numbers::pi * problem.boundary()[f]
                              * problem.face_area(f));
        }
        faces_ = boxes;
        for (std::size_t i = 0; i < weights.size(); ++i)
        {
            total_ += weights[i];
            cdf_.push_back(total_);
        }
    }

    double total() const { return total_; }
    bool empty() const { return !(total_ > 0); }

    Particle birth(SampleStream const& stream,
                   std::uint64_t index,
                   std::size_t count,
                   TimeWindow const& window) const
    {
        if (this->empty())
            throw ConfigError("boundary source is empty");
        int const dim = problem_->dimension();
        double const target = stream.draw(index, dims::position_0) * total_;
        std::size_t f = static_cast<std::size_t>(
            std::upper_bound(cdf_.begin(), cdf_.end(), target) - cdf_.begin());
        f = std::min<std::size_t>(f, 3);
        while (f > 0 && cdf_[f] == cdf_[f - 1])
            --f;
        double const lo = f > 0 ? cdf_[f - 1] : 0.0;
        double r = std::clamp((target - lo) / (cdf_[f] - lo), 0.0, one_minus_epsilon);

        Box const& b = faces_[f];
        Particle p;
        // Along-face coordinate from the residual (2D only)
        p.pos = {b.x_lo + r * (b.x_hi - b.x_lo), b.y_lo + r * (b.y_hi - b.y_lo)};
        if (dim == 1)
            p.pos[1] = 0.5;

        double const cos_n = std::sqrt(1 - stream.draw(index, dims::direction_0));
        double const sin_n = std::sqrt(std::max(0.0, 1 - cos_n * cos_n));
        double const phi = 2 * std::numbers::pi * stream.draw(index, dims::direction_1);
        double const a = sin_n * std::cos(phi);
        double const c = sin_n * std::sin(phi);
        double const sign = (f == 0 || f == 2) ? 1.0 : -1.0;
        if (dim == 1)
            p.dir = {a, c, sign * cos_n};
        else if (f < 2)
            p.dir = {sign * cos_n, a, c};
        else
            p.dir = {c, sign * cos_n, a};

        p.t = window.steady()
                  ? window.start
                  : window.start + window.dt * stream.draw(index, dims::time);
        p.w = total_ / static_cast<double>(count);
        if (!window.steady())
            p.w *= window.dt;
        p.n = 0;
        p.cell = problem_->locate(p.pos);
        return p;
    }

  private:
    ProblemSpec const* problem_;
    std::vector<Box> faces_;
    std::vector<double> cdf_;
    double total_{0};
};

//---------------------------------------------------------------------------//
}  // namespace qmch
