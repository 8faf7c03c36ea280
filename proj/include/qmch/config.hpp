//---------------------------------------------------------------------------//
//! \file qmch/config.hpp
//! JSON run configuration: parsing, validation and normalized output.
//---------------------------------------------------------------------------//
#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "benchmarks.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "hybrid_driver.hpp"

namespace qmch
{
//---------------------------------------------------------------------------//
/*!
 * Fully resolved run description.
 *
 * `problem_json` keeps the problem entry as given (preset name or custom
 * object) so the normalized config can be printed back.
 */
struct RunConfig
{
    ProblemSpec problem;
    nlohmann::json problem_json;
    HybridConfig hybrid;
    std::optional<SweepSpec> sweep;
    std::vector<std::string> warnings;
};

namespace detail
{
using json = nlohmann::json;

//! JSON-pointer style location used in diagnostics
inline std::string join_path(std::string const& base, std::string const& key)
{
    return base + "/" + key;
}

[[noreturn]] inline void config_fail(std::string const& where, std::string const& what)
{
    throw ConfigError((where.empty() ? std::string("/") : where) + ": " + what);
}

inline void warn_unknown(json const& obj,
                         std::string const& where,
                         std::set<std::string> const& known,
                         std::vector<std::string>& warnings)
{
    for (auto it = obj.begin(); it != obj.end(); ++it)
    {
        if (!known.count(it.key()))
            warnings.push_back(join_path(where, it.key()) + ": unknown key ignored");
    }
}

inline double get_number(json const& j, std::string const& where)
{
    if (!j.is_number())
        config_fail(where, "expected a number, got " + j.dump());
    return j.get<double>();
}

inline long long get_integer(json const& j, std::string const& where)
{
    if (!j.is_number_integer())
        config_fail(where, "expected an integer, got " + j.dump());
    return j.get<long long>();
}

inline std::string get_string(json const& j, std::string const& where)
{
    if (!j.is_string())
        config_fail(where, "expected a string, got " + j.dump());
    return j.get<std::string>();
}

inline int parse_cap(json const& j, std::string const& where)
{
    if (j.is_string())
    {
        if (j.get<std::string>() == "inf")
            return unlimited_scatters;
        config_fail(where, "invalid scatter cap " + j.dump());
    }
    long long v = get_integer(j, where);
    if (v < 0 || v >= unlimited_scatters)
        config_fail(where, "invalid scatter cap " + j.dump());
    return static_cast<int>(v);
}

inline json cap_to_json(int cap)
{
    return cap == unlimited_scatters ? json("inf") : json(cap);
}

inline std::size_t parse_count(json const& j, std::string const& where, char const* what)
{
    long long v = get_integer(j, where);
    if (v < 1)
        config_fail(where, std::string(what) + " must be positive");
    return static_cast<std::size_t>(v);
}

inline SamplerKind parse_sampler_json(json const& j, std::string const& where)
{
    auto s = get_string(j, where);
    if (s == "mc")
        return SamplerKind::pseudorandom;
    if (s == "qmc")
        return SamplerKind::halton;
    config_fail(where, "unknown sampler '" + s + "' (expected \"mc\" or \"qmc\")");
}

inline Material parse_material(json const& j, std::string const& where)
{
    Material m;
    m.sigma_a = j.contains("sigma_a") ? get_number(j["sigma_a"], join_path(where, "sigma_a")) : 0.0;
    m.sigma_s = j.contains("sigma_s") ? get_number(j["sigma_s"], join_path(where, "sigma_s")) : 0.0;
    m.q = j.contains("q") ? get_number(j["q"], join_path(where, "q")) : 0.0;
    return m;
}

inline std::vector<double> parse_axis(json const& j, std::string const& where)
{
    if (j.is_array())
    {
        std::vector<double> edges;
        for (std::size_t i = 0; i < j.size(); ++i)
            edges.push_back(get_number(j[i], join_path(where, std::to_string(i))));
        return edges;
    }
    if (!j.is_object())
        config_fail(where, "expected an edge list or {lo, hi, cells}");
    for (char const* k : {"lo", "hi", "cells"})
    {
        if (!j.contains(k))
            config_fail(where, std::string("missing key '") + k + "'");
    }
    double lo = get_number(j["lo"], join_path(where, "lo"));
    double hi = get_number(j["hi"], join_path(where, "hi"));
    auto n = parse_count(j["cells"], join_path(where, "cells"), "cell count");
    if (!(hi > lo))
        config_fail(where, "hi must exceed lo");
    return Mesh::linspace(lo, hi, n);
}

/*!
 * Custom problem object:
 *
 *   { "name": ..., "mesh": {"x": ..., "y": ...},
 *     "regions": [{"name", "x": [lo, hi], "y": [lo, hi], "sigma_a",
 *                  "sigma_s", "q"}, ...],
 *     "background": {"sigma_a", "sigma_s", "q"},
 *     "boundary": {"x_lo": G, "x_hi": G, "y_lo": G, "y_hi": G} }
 *
 * An axis is either an explicit edge list or {lo, hi, cells}. Omitting
 * "y" gives a slab. With "background", regions may leave gaps that are
 * filled with that material.
 */
inline ProblemSpec parse_custom_problem(json const& j,
                                        std::string const& where,
                                        std::vector<std::string>& warnings)
{
    warn_unknown(j, where, {"name", "mesh", "regions", "background", "boundary"}, warnings);
    std::string name = j.contains("name") ? get_string(j["name"], join_path(where, "name"))
                                          : std::string("custom");
    if (!j.contains("mesh") || !j["mesh"].is_object())
        config_fail(join_path(where, "mesh"), "missing mesh object");
    auto const& jm = j["mesh"];
    std::string const mwhere = join_path(where, "mesh");
    warn_unknown(jm, mwhere, {"x", "y"}, warnings);
    if (!jm.contains("x"))
        config_fail(mwhere, "missing key 'x'");
    Mesh mesh;
    try
    {
        auto xe = parse_axis(jm["x"], join_path(mwhere, "x"));
        mesh = jm.contains("y") ? Mesh(xe, parse_axis(jm["y"], join_path(mwhere, "y")))
                                : Mesh(xe);
    }
    catch (ConfigError const& e)
    {
        std::string msg = e.what();
        if (!msg.empty() && msg.front() == '/')
            throw;
        config_fail(mwhere, msg);
    }
    Box const domain = mesh.domain();

    std::string const rwhere = join_path(where, "regions");
    if (!j.contains("regions") || !j["regions"].is_array() || j["regions"].empty())
        config_fail(rwhere, "expected a nonempty list of regions");
    std::vector<RegionSpec> regions;
    for (std::size_t i = 0; i < j["regions"].size(); ++i)
    {
        auto const& jr = j["regions"][i];
        std::string const w = join_path(rwhere, std::to_string(i));
        if (!jr.is_object())
            config_fail(w, "expected a region object");
        warn_unknown(jr, w, {"name", "x", "y", "sigma_a", "sigma_s", "q"}, warnings);
        RegionSpec r;
        r.name = jr.contains("name") ? get_string(jr["name"], join_path(w, "name"))
                                     : "region" + std::to_string(i);
        auto range = [&](char const* key, double lo, double hi) {
            if (!jr.contains(key))
                return std::pair<double, double>{lo, hi};
            auto const& a = jr[key];
            std::string const aw = join_path(w, key);
            if (!a.is_array() || a.size() != 2)
                config_fail(aw, "expected [lo, hi]");
            return std::pair<double, double>{get_number(a[0], aw + "/0"),
                                             get_number(a[1], aw + "/1")};
        };
        auto [xl, xh] = range("x", domain.x_lo, domain.x_hi);
        auto [yl, yh] = range("y", domain.y_lo, domain.y_hi);
        r.extent = {xl, xh, yl, yh};
        r.material = parse_material(jr, w);
        regions.push_back(std::move(r));
    }
    if (j.contains("background"))
    {
        std::string const bw = join_path(where, "background");
        warn_unknown(j["background"], bw, {"sigma_a", "sigma_s", "q"}, warnings);
        regions = fill_background(domain, std::move(regions),
                                  parse_material(j["background"], bw), "background");
    }

    BoundarySource boundary;
    if (j.contains("boundary"))
    {
        std::string const bw = join_path(where, "boundary");
        auto const& jb = j["boundary"];
        if (!jb.is_object())
            config_fail(bw, "expected an object of face intensities");
        warn_unknown(jb, bw, {"x_lo", "x_hi", "y_lo", "y_hi"}, warnings);
        for (Face f : all_faces)
        {
            if (jb.contains(to_cstring(f)))
            {
                boundary.intensity[static_cast<int>(f)]
                    = get_number(jb[to_cstring(f)], join_path(bw, to_cstring(f)));
            }
        }
    }
    try
    {
        return ProblemSpec(name, std::move(mesh), std::move(regions), boundary);
    }
    catch (ConfigError const& e)
    {
        config_fail(where, e.what());
    }
}

inline ProblemSpec parse_problem(json const& root,
                                 std::vector<std::string>& warnings)
{
    if (!root.contains("problem"))
        config_fail("/problem", "missing key");
    auto const& jp = root["problem"];
    if (jp.is_object())
    {
        if (root.contains("problem_options"))
            warnings.push_back("/problem_options: ignored for custom problems");
        return parse_custom_problem(jp, "/problem", warnings);
    }
    auto preset = get_string(jp, "/problem");
    json opts = root.value("problem_options", json::object());
    std::string const ow = "/problem_options";
    if (!opts.is_object())
        config_fail(ow, "expected an object");
    try
    {
        if (preset == "reed")
        {
            warn_unknown(opts, ow, {"cells"}, warnings);
            std::size_t cells = opts.contains("cells")
                                    ? parse_count(opts["cells"], ow + "/cells", "cell count")
                                    : 80;
            return reed_problem(cells);
        }
        if (preset == "dogleg")
        {
            warn_unknown(opts, ow, {"nx", "ny"}, warnings);
            std::size_t nx = opts.contains("nx")
                                 ? parse_count(opts["nx"], ow + "/nx", "cell count")
                                 : 30;
            std::size_t ny = opts.contains("ny")
                                 ? parse_count(opts["ny"], ow + "/ny", "cell count")
                                 : 50;
            return dogleg_problem(nx, ny);
        }
    }
    catch (ConfigError const& e)
    {
        std::string msg = e.what();
        if (!msg.empty() && msg.front() == '/')
            throw;
        config_fail(ow, msg);
    }
    config_fail("/problem", "unknown preset '" + preset + "' (expected \"reed\", "
                            "\"dogleg\" or a problem object)");
}

inline RemapVariant parse_remap(json const& j, std::string const& where)
{
    auto s = get_string(j, where);
    if (s == "remap")
        return RemapVariant::remap;
    if (s == "legacy")
        return RemapVariant::legacy;
    if (s == "none")
        return RemapVariant::none;
    config_fail(where, "unknown remap variant '" + s + "'");
}

inline SweepSpec parse_sweep(json const& j,
                             std::string const& where,
                             HybridConfig const& base,
                             std::vector<std::string>& warnings)
{
    if (!j.is_object())
        config_fail(where, "expected an object");
    warn_unknown(j, where, {"scatter_caps", "particles", "samplers", "replicas", "reference"},
                 warnings);
    SweepSpec s;
    s.scatter_caps = {base.scatter_cap};
    s.particles = {base.particles};
    s.samplers = {base.sampler.kind};
    auto list = [&](char const* key, auto parse, auto& out) {
        if (!j.contains(key))
            return;
        std::string const w = join_path(where, key);
        if (!j[key].is_array() || j[key].empty())
            config_fail(w, "expected a nonempty list");
        out.clear();
        for (std::size_t i = 0; i < j[key].size(); ++i)
            out.push_back(parse(j[key][i], join_path(w, std::to_string(i))));
    };
    list("scatter_caps", parse_cap, s.scatter_caps);
    list("particles",
         [](json const& v, std::string const& w) {
             return parse_count(v, w, "particle count");
         },
         s.particles);
    list("samplers", parse_sampler_json, s.samplers);
    if (j.contains("replicas"))
    {
        s.replicas = static_cast<int>(
            parse_count(j["replicas"], join_path(where, "replicas"), "replica count"));
    }
    if (j.contains("reference"))
    {
        auto r = get_string(j["reference"], join_path(where, "reference"));
        if (r == "high_resolution")
            s.reference = ReferenceKind::high_resolution;
        else if (r == "estimator_limit")
            s.reference = ReferenceKind::estimator_limit;
        else
            config_fail(join_path(where, "reference"), "unknown reference '" + r + "'");
    }
    return s;
}
}  // namespace detail

//---------------------------------------------------------------------------//
/*!
 * Build a run configuration from parsed JSON.
 *
 * Errors carry the JSON-pointer location of the offending entry; unknown
 * keys are collected as warnings.
 */
inline RunConfig parse_config(nlohmann::json const& root)
{
    using detail::config_fail;
    using detail::json;
    if (!root.is_object())
        config_fail("", "configuration must be a JSON object");

    RunConfig rc;
    // Block-ordered reduction is opt-in for runs; single-threaded runs are
    // reproducible either way
    rc.hybrid.execution.deterministic = false;
    detail::warn_unknown(root, "",
                         {"problem", "problem_options", "scatter_cap", "particles",
                          "sampler", "seed", "halton_start_index", "dimension_budget",
                          "sn_order", "sn_azimuths", "sn_tol", "sn_max_iter", "mode",
                          "remap", "weight_cutoff", "threads", "deterministic", "sweep"},
                         rc.warnings);
    rc.problem = detail::parse_problem(root, rc.warnings);
    rc.problem_json = root["problem"];
    if (root.contains("problem_options") && !root["problem"].is_object())
        rc.problem_json = json{{"preset", root["problem"]}, {"options", root["problem_options"]}};

    HybridConfig& h = rc.hybrid;
    if (root.contains("scatter_cap"))
        h.scatter_cap = detail::parse_cap(root["scatter_cap"], "/scatter_cap");
    if (root.contains("particles"))
        h.particles = detail::parse_count(root["particles"], "/particles", "particle count");
    if (root.contains("sampler"))
        h.sampler.kind = detail::parse_sampler_json(root["sampler"], "/sampler");
    if (root.contains("seed"))
    {
        auto v = detail::get_integer(root["seed"], "/seed");
        if (v < 0)
            config_fail("/seed", "seed must be nonnegative");
        h.sampler.seed = static_cast<std::uint64_t>(v);
    }
    if (root.contains("halton_start_index"))
    {
        auto v = detail::get_integer(root["halton_start_index"], "/halton_start_index");
        if (v < 0)
            config_fail("/halton_start_index", "start index must be nonnegative");
        h.sampler.start_index = static_cast<std::uint64_t>(v);
    }
    if (root.contains("dimension_budget"))
    {
        auto v = detail::get_integer(root["dimension_budget"], "/dimension_budget");
        if (v < 0 || v > 1000)
            config_fail("/dimension_budget", "budget must lie in [0, 1000]");
        h.sampler.dimension_budget = static_cast<unsigned>(v);
    }
    if (root.contains("sn_order"))
    {
        auto v = detail::get_integer(root["sn_order"], "/sn_order");
        if (v < 2 || v % 2 != 0)
            config_fail("/sn_order", "S_N order must be even and at least 2");
        h.sn.order = static_cast<int>(v);
    }
    if (root.contains("sn_azimuths"))
    {
        auto v = detail::get_integer(root["sn_azimuths"], "/sn_azimuths");
        if (v != 0 && (v < 4 || v % 4 != 0))
            config_fail("/sn_azimuths", "azimuth count must be 0 or a multiple of 4");
        h.sn.azimuths = static_cast<int>(v);
    }
    if (root.contains("sn_tol"))
    {
        h.sn.tol = detail::get_number(root["sn_tol"], "/sn_tol");
        if (!(h.sn.tol > 0))
            config_fail("/sn_tol", "tolerance must be positive");
    }
    if (root.contains("sn_max_iter"))
        h.sn.max_iter = static_cast<int>(
            detail::parse_count(root["sn_max_iter"], "/sn_max_iter", "iteration limit"));
    if (root.contains("weight_cutoff"))
    {
        h.w_min_factor = detail::get_number(root["weight_cutoff"], "/weight_cutoff");
        if (!(h.w_min_factor >= 0))
            config_fail("/weight_cutoff", "cutoff must be nonnegative");
    }
    if (root.contains("threads"))
        h.execution.threads = detail::parse_count(root["threads"], "/threads", "thread count");
    if (root.contains("deterministic"))
    {
        if (!root["deterministic"].is_boolean())
            config_fail("/deterministic", "expected true or false");
        h.execution.deterministic = root["deterministic"].get<bool>();
    }
    if (root.contains("mode"))
    {
        auto const& jm = root["mode"];
        if (jm.is_string())
        {
            if (jm.get<std::string>() != "steady")
                config_fail("/mode", "expected \"steady\" or a time-dependent object");
            h.time.steady = true;
        }
        else if (jm.is_object())
        {
            detail::warn_unknown(jm, "/mode", {"type", "dt", "steps"}, rc.warnings);
            std::string type = jm.contains("type") ? detail::get_string(jm["type"], "/mode/type")
                                                   : std::string("time_dependent");
            if (type == "steady")
            {
                h.time.steady = true;
            }
            else if (type == "time_dependent")
            {
                h.time.steady = false;
                if (!jm.contains("dt"))
                    config_fail("/mode/dt", "missing time step");
                h.time.dt = detail::get_number(jm["dt"], "/mode/dt");
                if (!(h.time.dt > 0) || !std::isfinite(h.time.dt))
                    config_fail("/mode/dt", "time step must be positive and finite");
                h.time.steps = jm.contains("steps")
                                   ? static_cast<int>(detail::parse_count(
                                       jm["steps"], "/mode/steps", "step count"))
                                   : 1;
            }
            else
            {
                config_fail("/mode/type", "unknown mode '" + type + "'");
            }
        }
        else
        {
            config_fail("/mode", "expected \"steady\" or a time-dependent object");
        }
    }
    if (root.contains("remap"))
        h.remap = detail::parse_remap(root["remap"], "/remap");
    if (h.scatter_cap == unlimited_scatters)
        h.remap = RemapVariant::none;
    else if (h.remap == RemapVariant::none && !h.time.steady)
        config_fail("/remap", "a finite scatter cap needs a relabel variant in time-dependent mode");

    if (root.contains("sweep"))
        rc.sweep = detail::parse_sweep(root["sweep"], "/sweep", h, rc.warnings);

    try
    {
        h.validate();
    }
    catch (ConfigError const& e)
    {
        config_fail("", e.what());
    }
    return rc;
}

inline RunConfig load_config(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json root;
    try
    {
        root = nlohmann::json::parse(in, nullptr, true, /* ignore_comments = */ true);
    }
    catch (nlohmann::json::parse_error const& e)
    {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(root);
}

//! Effective configuration with every default filled in
inline nlohmann::json normalized_config(RunConfig const& rc)
{
    using detail::json;
    HybridConfig const& h = rc.hybrid;
    json j;
    j["problem"] = rc.problem_json;
    j["mesh"] = {{"dimension", rc.problem.dimension()},
                 {"nx", rc.problem.mesh().nx()},
                 {"ny", rc.problem.dimension() == 2 ? rc.problem.mesh().ny() : 1}};
    j["scatter_cap"] = detail::cap_to_json(h.scatter_cap);
    j["particles"] = h.particles;
    j["sampler"] = to_cstring(h.sampler.kind);
    j["seed"] = h.sampler.seed;
    j["halton_start_index"] = h.sampler.start_index;
    j["dimension_budget"] = h.effective_budget();
    j["sn_order"] = h.sn.order;
    j["sn_azimuths"] = rc.problem.dimension() == 2
                           ? (h.sn.azimuths > 0 ? h.sn.azimuths : 2 * h.sn.order)
                           : 0;
    j["sn_tol"] = h.sn.tol;
    j["sn_max_iter"] = h.sn.max_iter;
    if (h.time.steady)
        j["mode"] = "steady";
    else
        j["mode"] = {{"type", "time_dependent"}, {"dt", h.time.dt}, {"steps", h.time.steps}};
    j["remap"] = to_cstring(h.effective_remap());
    j["weight_cutoff"] = h.w_min_factor;
    j["threads"] = h.execution.threads;
    j["deterministic"] = h.execution.deterministic;
    if (rc.sweep)
    {
        json caps = json::array(), samplers = json::array();
        for (int c : rc.sweep->scatter_caps)
            caps.push_back(detail::cap_to_json(c));
        for (auto k : rc.sweep->samplers)
            samplers.push_back(to_cstring(k));
        j["sweep"] = {{"scatter_caps", caps},
                      {"particles", rc.sweep->particles},
                      {"samplers", samplers},
                      {"replicas", rc.sweep->replicas},
                      {"reference", to_cstring(rc.sweep->reference)}};
    }
    return j;
}

//---------------------------------------------------------------------------//
}  // namespace qmch
