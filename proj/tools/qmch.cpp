//---------------------------------------------------------------------------//
//! \file tools/qmch.cpp
//! Command-line front end: run, sweep and validate JSON configurations.
//---------------------------------------------------------------------------//
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qmch/analysis.hpp"
#include "qmch/config.hpp"
#include "qmch/hybrid_driver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qmch;

namespace
{
//---------------------------------------------------------------------------//
constexpr double max_weight_balance = 1e-8;

enum ExitCode
{
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2
};

struct Options
{
    std::string config;
    std::string out_dir{"."};
    bool out_dir_set{false};
    bool deterministic{false};
    std::size_t threads{0};
};

//! Flags override the config file; environment overrides apply in between
void apply_overrides(RunConfig& rc, Options const& opts)
{
    if (char const* seed = std::getenv("QMCH_SEED"))
    {
        try
        {
            std::size_t pos = 0;
            auto v = std::stoull(seed, &pos);
            if (pos != std::string(seed).size())
                throw std::invalid_argument(seed);
            rc.hybrid.sampler.seed = v;
        }
        catch (std::exception const&)
        {
            throw ConfigError(std::string("QMCH_SEED is not an integer: '") + seed + "'");
        }
    }
    if (opts.deterministic)
        rc.hybrid.execution.deterministic = true;
    if (opts.threads > 0)
        rc.hybrid.execution.threads = opts.threads;
}

fs::path output_dir(Options const& opts)
{
    fs::path dir = opts.out_dir;
    if (!opts.out_dir_set)
    {
        if (char const* env = std::getenv("QMCH_OUT_DIR"))
            dir = env;
    }
    fs::create_directories(dir);
    return dir;
}

void write_json(fs::path const& path, json const& j)
{
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out)
        throw std::runtime_error("cannot write '" + path.string() + "'");
}

//! Machine-readable error record, printed and (when possible) saved
int report_error(Options const& opts, char const* kind, std::string const& message, int code)
{
    json err{{"status", "error"}, {"kind", kind}, {"message", message}};
    std::cerr << err.dump() << '\n';
    try
    {
        write_json(output_dir(opts) / "error.json", err);
    }
    catch (std::exception const&)
    {
    }
    return code;
}

template<class F>
int guarded(Options const& opts, F&& f)
{
    try
    {
        return f();
    }
    catch (ConfigError const& e)
    {
        return report_error(opts, "config", e.what(), exit_config);
    }
    catch (SnConvergenceError const& e)
    {
        return report_error(opts, "sn_convergence", e.what(), exit_failure);
    }
    catch (InvariantError const& e)
    {
        return report_error(opts, "invariant", e.what(), exit_failure);
    }
    catch (std::exception const& e)
    {
        return report_error(opts, "runtime", e.what(), exit_failure);
    }
}

RunConfig load(Options const& opts)
{
    RunConfig rc = load_config(opts.config);
    for (auto const& w : rc.warnings)
        std::cerr << "warning: " << w << '\n';
    apply_overrides(rc, opts);
    return rc;
}

//---------------------------------------------------------------------------//
void write_flux_header(std::ostream& os, int dim, bool with_step)
{
    if (with_step)
        os << "step,t_start,t_end,";
    os << (dim == 1 ? "cell,x,flux\n" : "cell,x,y,flux\n");
}

void write_flux_rows(std::ostream& os,
                     Mesh const& mesh,
                     std::span<double const> flux,
                     std::string const& prefix)
{
    for (std::size_t c = 0; c < mesh.num_cells(); ++c)
    {
        auto const x = mesh.center(c);
        os << prefix << c << ',' << format_double(x[0]);
        if (mesh.dimension() == 2)
            os << ',' << format_double(x[1]);
        os << ',' << format_double(flux[c]) << '\n';
    }
}

json timings_json(StageTimings const& t)
{
    return {{"mc_s", t.mc}, {"sn_s", t.sn}, {"remap_s", t.remap}, {"total_s", t.total()}};
}

json step_json(StepOutput const& o)
{
    return {{"t_start", o.t_start},
            {"t_end", std::isfinite(o.t_end) ? json(o.t_end) : json("inf")},
            {"iterations", o.sn_iterations},
            {"sn_balance_residual", o.sn_balance_residual},
            {"weight_balance_residual", o.weight_balance_residual},
            {"mc_histories", o.mc_histories},
            {"remap_histories", o.remap_histories},
            {"census_size", o.census_size},
            {"timings", timings_json(o.timings)}};
}

int cmd_run(Options const& opts)
{
    RunConfig rc = load(opts);
    fs::path const dir = output_dir(opts);
    HybridConfig const& h = rc.hybrid;
    Mesh const& mesh = rc.problem.mesh();

    std::vector<StepOutput> steps;
    if (h.time.steady)
        steps.push_back(steady_state_solve(h, rc.problem));
    else
        steps = run_time_dependent(h, rc.problem);

    {
        std::ofstream csv(dir / "flux.csv");
        write_flux_header(csv, mesh.dimension(), !h.time.steady);
        for (std::size_t s = 0; s < steps.size(); ++s)
        {
            std::string prefix;
            if (!h.time.steady)
            {
                prefix = std::to_string(s + 1) + ',' + format_double(steps[s].t_start)
                         + ',' + format_double(steps[s].t_end) + ',';
            }
            write_flux_rows(csv, mesh, steps[s].flux, prefix);
        }
        if (!csv)
            throw std::runtime_error("cannot write flux.csv");
    }

    double weight_residual = 0, sn_residual = 0;
    int iterations = 0;
    StageTimings total;
    json per_step = json::array();
    for (auto const& o : steps)
    {
        weight_residual = std::max(weight_residual, o.weight_balance_residual);
        sn_residual = std::max(sn_residual, o.sn_balance_residual);
        iterations += o.sn_iterations;
        total.mc += o.timings.mc;
        total.sn += o.timings.sn;
        total.remap += o.timings.remap;
        per_step.push_back(step_json(o));
    }
    bool const balanced = weight_residual <= max_weight_balance;
    json summary{
        {"status", balanced ? "ok" : "weight_balance_exceeded"},
        {"problem", rc.problem.name()},
        {"N_s", detail::cap_to_json(h.scatter_cap)},
        {"N_p", h.particles},
        {"sampler", to_cstring(h.sampler.kind)},
        {"seed", h.sampler.seed},
        {"halton_start_index", h.sampler.start_index},
        {"mode", h.time.steady ? "steady" : "time_dependent"},
        {"remap", to_cstring(h.time.steady ? RemapVariant::none : h.effective_remap())},
        {"iterations", iterations},
        {"sn_balance_residual", sn_residual},
        {"weight_balance_residual", weight_residual},
        {"timings", timings_json(total)},
        {"steps", per_step}};
    write_json(dir / "summary.json", summary);
    if (!balanced)
    {
        std::cerr << "weight-balance residual " << weight_residual << " exceeds "
                  << max_weight_balance << '\n';
        return exit_failure;
    }
    return exit_ok;
}

//---------------------------------------------------------------------------//
int cmd_sweep(Options const& opts)
{
    RunConfig rc = load(opts);
    if (!rc.sweep)
        throw ConfigError("/sweep: missing sweep section");
    fs::path const dir = output_dir(opts);
    std::ofstream csv(dir / "sweep.csv");
    csv << sweep_csv_header << '\n' << std::flush;

    SweepResult result;
    try
    {
        result = run_sweep(rc.problem, rc.hybrid, *rc.sweep,
                           [&](ConvergencePoint const& p) {
                               write_csv_row(csv, p);
                               csv.flush();
                           });
    }
    catch (std::exception const& e)
    {
        write_csv_failure(csv, e.what());
        csv.flush();
        throw;
    }

    json rates = json::array();
    for (auto const& r : result.rates)
    {
        json row{{"sampler", to_cstring(r.sampler)},
                 {"N_s", detail::cap_to_json(r.scatter_cap)},
                 {"points", r.points},
                 {"mean_sn_iterations", r.mean_iterations}};
        row["alpha"] = r.fit ? json(r.fit->alpha) : json(nullptr);
        row["c"] = r.fit ? json(r.fit->c) : json(nullptr);
        rates.push_back(row);
    }
    write_json(dir / "sweep.json",
               {{"problem", rc.problem.name()},
                {"reference", to_cstring(rc.sweep->reference)},
                {"replicas", rc.sweep->replicas},
                {"rates", rates}});
    return exit_ok;
}

//---------------------------------------------------------------------------//
int cmd_validate(Options const& opts)
{
    RunConfig rc = load(opts);
    std::cout << normalized_config(rc).dump(2) << '\n';
    return exit_ok;
}

//---------------------------------------------------------------------------//
}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hybrid scatter-limited (Q)MC / discrete-ordinates transport"};
    app.require_subcommand(1);

    Options opts;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", opts.config, "JSON configuration file")->required();
        sub->add_option_function<std::string>(
            "--out-dir",
            [&](std::string const& d) {
                opts.out_dir = d;
                opts.out_dir_set = true;
            },
            "Output directory (default: $QMCH_OUT_DIR or .)");
        sub->add_flag("--deterministic", opts.deterministic,
                      "Force block-ordered, thread-count independent reductions");
        sub->add_option("--threads", opts.threads, "Worker threads")
            ->check(CLI::PositiveNumber);
    };
    auto* run = app.add_subcommand("run", "Run one steady or time-dependent solve");
    auto* sweep = app.add_subcommand("sweep", "Run a convergence sweep");
    auto* validate = app.add_subcommand("validate", "Check a configuration and print it normalized");
    for (auto* sub : {run, sweep, validate})
        add_common(sub);

    CLI11_PARSE(app, argc, argv);

    if (run->parsed())
        return guarded(opts, [&] { return cmd_run(opts); });
    if (sweep->parsed())
        return guarded(opts, [&] { return cmd_sweep(opts); });
    return guarded(opts, [&] { return cmd_validate(opts); });
}
