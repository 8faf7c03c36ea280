//---------------------------------------------------------------------------//
//! \file tests/acceptance.cpp
//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! (plus INFO lines) and exits nonzero if any criterion fails.
//---------------------------------------------------------------------------//
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qmch/analysis.hpp"
#include "qmch/benchmarks.hpp"
#include "qmch/hybrid_driver.hpp"

namespace fs = std::filesystem;
using namespace qmch;

namespace
{
//---------------------------------------------------------------------------//
// Pinned tolerances
constexpr double qmc_alpha_lo = -0.80, qmc_alpha_hi = -0.58;
constexpr double mc_alpha_lo = -0.60, mc_alpha_hi = -0.42;
constexpr double mc_inf_alpha_lo = -0.56, mc_inf_alpha_hi = -0.36;
constexpr double iteration_window = 0.40;
constexpr double reed_iterations_ref[] = {31, 26, 21.4, 12.2};
constexpr int dogleg_max_iterations_at_10 = 2;
constexpr double split_z = 4.0;
constexpr double split_cell_fraction = 0.99;
constexpr double neumann_ratio_tol = 0.05;
constexpr double tail_sigmas = 3.0;
constexpr double remap_z = 4.0;
constexpr double max_balance = 1e-8;
constexpr double runtime_spread = 0.25;

//! Source-iteration tolerance for the iteration-count criterion
constexpr double iteration_tol = 1e-5;

std::vector<std::size_t> const sweep_particles{1 << 10, 1 << 11, 1 << 12, 1 << 13,
                                               1 << 14, 1 << 15, 1 << 16, 1 << 17};
std::vector<int> const sweep_caps{0, 5, 10, 20, unlimited_scatters};

int failures = 0;
double worst_weight_balance = 0;
double worst_sn_balance = 0;

void report(bool ok, std::string const& name, std::string const& detail)
{
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok)
        ++failures;
}

void info(std::string const& detail)
{
    std::printf("INFO %s\n", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(char const* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

void track(StepOutput const& o)
{
    worst_weight_balance = std::max(worst_weight_balance, o.weight_balance_residual);
    worst_sn_balance = std::max(worst_sn_balance, o.sn_balance_residual);
}

ExecutionPolicy execution()
{
    ExecutionPolicy e;
    e.threads = std::max(1u, std::thread::hardware_concurrency());
    e.deterministic = true;
    return e;
}

HybridConfig base_config(SamplerKind kind, int cap, std::size_t np)
{
    HybridConfig c;
    c.sampler.kind = kind;
    c.sampler.seed = 1;
    c.scatter_cap = cap;
    c.particles = np;
    c.execution = execution();
    return c;
}

RateSummary const* find_rate(SweepResult const& r, SamplerKind kind, int cap)
{
    for (auto const& s : r.rates)
    {
        if (s.sampler == kind && s.scatter_cap == cap)
            return &s;
    }
    return nullptr;
}

//---------------------------------------------------------------------------//
// 1, 2, 7: convergence rates
//---------------------------------------------------------------------------//
void convergence_rates()
{
    auto const reed = reed_problem();
    SweepSpec spec;
    spec.scatter_caps = sweep_caps;
    spec.particles = sweep_particles;
    spec.samplers = {SamplerKind::pseudorandom, SamplerKind::halton};
    spec.replicas = 5;
    spec.reference = ReferenceKind::estimator_limit;
    HybridConfig base = base_config(SamplerKind::halton, 0, 1024);

    auto t0 = std::chrono::steady_clock::now();
    auto const result = run_sweep(reed, base, spec);
    info("Reed sweep: " + std::to_string(result.points.size()) + " solves in "
         + fmt("%.1f s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()));

    std::map<std::pair<SamplerKind, int>, double> alpha;
    for (auto const& r : result.rates)
    {
        double a = r.fit ? r.fit->alpha : std::nan("");
        alpha[{r.sampler, r.scatter_cap}] = a;
        info(std::string("alpha ") + to_cstring(r.sampler) + " N_s="
             + format_scatter_cap(r.scatter_cap) + " = " + fmt("%.3f", a)
             + ", mean S_N iterations " + fmt("%.2f", r.mean_iterations));
    }

    double const q0 = alpha[{SamplerKind::halton, 0}];
    report(q0 >= qmc_alpha_lo && q0 <= qmc_alpha_hi, "criterion 1 (QMC rate, Reed N_s=0)",
           "alpha = " + fmt("%.3f", q0) + " in [" + fmt("%.2f", qmc_alpha_lo) + ", "
               + fmt("%.2f", qmc_alpha_hi) + "]");

    double const m0 = alpha[{SamplerKind::pseudorandom, 0}];
    bool ordered = true;
    std::string detail = "MC alpha(N_s=0) = " + fmt("%.3f", m0) + " in ["
                         + fmt("%.2f", mc_alpha_lo) + ", " + fmt("%.2f", mc_alpha_hi) + "]";
    for (int cap : {0, 5, 10, 20})
    {
        double q = alpha[{SamplerKind::halton, cap}];
        double m = alpha[{SamplerKind::pseudorandom, cap}];
        ordered = ordered && q < m;
        detail += "; N_s=" + std::to_string(cap) + " QMC " + fmt("%.3f", q) + " < MC "
                  + fmt("%.3f", m);
    }
    report(m0 >= mc_alpha_lo && m0 <= mc_alpha_hi && ordered,
           "criterion 2 (MC rate and QMC advantage)", detail);

    double const minf = alpha[{SamplerKind::pseudorandom, unlimited_scatters}];
    report(minf >= mc_inf_alpha_lo && minf <= mc_inf_alpha_hi,
           "criterion 7 (non-hybrid MC rate)",
           "alpha(N_s=inf) = " + fmt("%.3f", minf) + " in [" + fmt("%.2f", mc_inf_alpha_lo)
               + ", " + fmt("%.2f", mc_inf_alpha_hi) + "]");
}

//---------------------------------------------------------------------------//
// 3: iteration counts
//---------------------------------------------------------------------------//
std::vector<double> mean_iterations(ProblemSpec const& problem, double tol)
{
    std::vector<double> means;
    for (int cap : sweep_caps)
    {
        double sum = 0;
        for (std::size_t np : sweep_particles)
        {
            HybridConfig c = base_config(SamplerKind::halton, cap, np);
            c.sn.tol = tol;
            auto out = steady_state_solve(c, problem);
            track(out);
            sum += out.sn_iterations;
        }
        means.push_back(sum / static_cast<double>(sweep_particles.size()));
    }
    return means;
}

std::string list(std::vector<double> const& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + fmt("%.2f", v[i]);
    return s;
}

void iteration_counts()
{
    auto const reed = mean_iterations(reed_problem(), iteration_tol);
    bool strictly = true, within = true;
    for (std::size_t i = 0; i < 4; ++i)
    {
        if (i > 0)
            strictly = strictly && reed[i] < reed[i - 1];
        within = within
                 && std::abs(reed[i] - reed_iterations_ref[i])
                        <= iteration_window * reed_iterations_ref[i];
    }
    bool const zero_inf = reed[4] == 0;

    auto const dog = mean_iterations(dogleg_problem(), iteration_tol);
    bool nonincreasing = true;
    for (std::size_t i = 1; i < dog.size(); ++i)
        nonincreasing = nonincreasing && dog[i] <= dog[i - 1];
    bool const dog_small = dog[2] <= dogleg_max_iterations_at_10;

    report(strictly && within && zero_inf && nonincreasing && dog_small,
           "criterion 3 (S_N iteration counts)",
           "tol " + fmt("%g", iteration_tol) + "; Reed N_s=0,5,10,20,inf: " + list(reed)
               + " (targets 31, 26, 21.4, 12.2, 0 +/-40%); Dogleg: " + list(dog)
               + " (nonincreasing, <= 2 at N_s=10)");

    info("iteration counts at tol 1e-6: Reed " + list(mean_iterations(reed_problem(), 1e-6))
         + "; Dogleg " + list(mean_iterations(dogleg_problem(), 1e-6)));
}

//---------------------------------------------------------------------------//
// 4: splitting exactness
//---------------------------------------------------------------------------//
struct ReplicaStats
{
    std::vector<double> mean;
    std::vector<double> var_of_mean;
};

ReplicaStats replica_stats(std::vector<std::vector<double>> const& samples)
{
    std::size_t const n = samples.size(), cells = samples.front().size();
    ReplicaStats s{std::vector<double>(cells, 0.0), std::vector<double>(cells, 0.0)};
    for (auto const& x : samples)
        for (std::size_t c = 0; c < cells; ++c)
            s.mean[c] += x[c] / n;
    for (auto const& x : samples)
        for (std::size_t c = 0; c < cells; ++c)
            s.var_of_mean[c] += (x[c] - s.mean[c]) * (x[c] - s.mean[c]) / ((n - 1.0) * n);
    return s;
}

struct ZSummary
{
    std::size_t within{0};
    std::size_t cells{0};
    double worst{0};
};

ZSummary z_test(ReplicaStats const& a, ReplicaStats const& b, double limit)
{
    ZSummary z;
    z.cells = a.mean.size();
    for (std::size_t c = 0; c < z.cells; ++c)
    {
        double const se = std::sqrt(a.var_of_mean[c] + b.var_of_mean[c]);
        double const d = std::abs(a.mean[c] - b.mean[c]);
        double const zc = se > 0 ? d / se : (d == 0 ? 0.0 : INFINITY);
        z.worst = std::max(z.worst, zc);
        z.within += zc <= limit;
    }
    return z;
}

ZSummary split_comparison(ProblemSpec const& problem)
{
    std::vector<ReplicaStats> stats;
    for (int cap : {0, 20})
    {
        std::vector<std::vector<double>> samples;
        for (int r = 0; r < 30; ++r)
        {
            HybridConfig c = base_config(SamplerKind::pseudorandom, cap, 1 << 14);
            c.sampler.seed = replica_seed(1000 + cap, r);
            auto out = steady_state_solve(c, problem);
            track(out);
            samples.push_back(out.flux);
        }
        stats.push_back(replica_stats(samples));
    }
    return z_test(stats[0], stats[1], split_z);
}

void splitting_exactness()
{
    auto const fine = split_comparison(reed_problem(640));
    bool const stat_ok = fine.within >= split_cell_fraction * fine.cells;

    // Neumann series of the collision orders on a homogeneous slab
    double const c = 0.8;
    ProblemSpec slab("slab", Mesh::uniform(0, 100, 100), {{"m", {0, 100, 0, 1}, {1 - c, c, 1}}});
    auto quad = gauss_legendre_quadrature(8);
    auto series = n_collision_reference(slab, 45, quad);
    std::vector<double> f(100, 1.0 / four_pi);
    SnOptions opts;
    opts.tol = 1e-14;
    auto full = source_iteration(slab, f, quad, opts);
    std::vector<double> partial(100, 0.0), err;
    for (auto const& phi : series)
    {
        for (std::size_t i = 0; i < 100; ++i)
            partial[i] += phi[i];
        err.push_back(l2_error(partial, full.phi, slab.mesh()));
    }
    double const ratio = err[40] / err[39];
    bool const neumann_ok = std::abs(ratio - c) <= neumann_ratio_tol;

    report(stat_ok && neumann_ok, "criterion 4 (splitting exactness)",
           "Reed 640 cells, N_p=2^14, 30 replicas, N_s=0 vs 20: "
               + std::to_string(fine.within) + "/" + std::to_string(fine.cells)
               + " cells within 4 SE (worst " + fmt("%.2f", fine.worst)
               + " SE); Neumann ratio " + fmt("%.4f", ratio) + " vs c = " + fmt("%.2f", c));

    auto const coarse = split_comparison(reed_problem(80));
    info("same comparison on the 80-cell mesh: " + std::to_string(coarse.within) + "/"
         + std::to_string(coarse.cells) + " cells within 4 SE (worst " + fmt("%.2f", coarse.worst)
         + " SE); the excess is the step-scheme bias of the S_N leg in the thick absorber cells");
}

//---------------------------------------------------------------------------//
// 5: Erlang tails
//---------------------------------------------------------------------------//
void erlang_tails()
{
    double const sigma = 2, dt = 1;
    int const n = 100000;
    bool ok = true;
    std::string detail;
    auto stream = SampleStream::pseudorandom(2718);
    for (int cap : {0, 1, 3})
    {
        // Analog: time of the (N_s+1)-th scatter as a sum of exponentials
        int survived = 0;
        for (int i = 0; i < n; ++i)
        {
            double t = 0;
            for (int k = 0; k <= cap; ++k)
                t += sample_exponential_distance(stream.substream(cap).draw(i, k), sigma);
            survived += t > dt;
        }
        double const p = erlang_tail(cap, sigma, dt);
        double const emp = static_cast<double>(survived) / n;
        double const se = std::sqrt(p * (1 - p) / n);
        bool const close = std::abs(emp - p) <= tail_sigmas * se;

        // Transport: weight still in the pre-limit or post-limit leg at the end
        // of a unit step in a non-absorbing medium is exactly this survival
        ProblemSpec medium("medium", Mesh::uniform(-100, 100, 4),
                           {{"m", {-100, 100, 0, 1}, {0, sigma, 0}}});
        Particle birth;
        birth.pos = {0, 0.5};
        birth.w = 1;
        birth.cell = medium.locate(birth.pos);
        std::vector<Particle> initial(n, birth);
        auto problem = medium.with_initial(initial);
        LegOptions opts;
        opts.window = {0, dt};
        opts.execution = execution();
        opts.w_min_factor = 0;
        auto leg = run_mc_leg(problem, cap, 0, SampleStream::pseudorandom(31 + cap), opts,
                              problem.initial());
        double s1 = 0, s2 = 0;
        for (auto const& q : leg.census.particles)
        {
            s1 += q.w;
            s2 += q.w * q.w;
        }
        double const mean = s1 / n;
        double const tse = std::sqrt(std::max(s2 / n - mean * mean, 0.0) / (n - 1));
        // N_s = 0 census weight is deterministic, so compare to rounding only
        bool const tclose = tse > 0 ? std::abs(mean - p) <= tail_sigmas * tse
                                    : std::abs(mean - p) <= 1e-12;

        bool sandwich = true;
        for (double mu : {0.5, 1.0, 1.5})
        {
            auto b = erlang_sandwich_bounds(cap, sigma, sigma, mu, dt);
            sandwich = sandwich && b.lower <= emp && emp <= b.upper;
        }
        ok = ok && close && tclose && sandwich;
        detail += "N_s=" + std::to_string(cap) + ": tail " + fmt("%.5f", p) + ", analog "
                  + fmt("%.5f", emp) + " (" + fmt("%.2f", (emp - p) / se) + " sigma), transport "
                  + fmt("%.5f", mean)
                  + (tse > 0 ? " (" + fmt("%.2f", (mean - p) / tse) + " sigma)" : " (exact)")
                  + (sandwich ? ", inside bounds" : ", OUTSIDE bounds") + "; ";
    }
    report(ok, "criterion 5 (scatter-time tails)", detail);
}

//---------------------------------------------------------------------------//
// 6: remap vs legacy
//---------------------------------------------------------------------------//
void remap_equivalence()
{
    auto const reed = reed_problem();
    int const steps = 2;
    std::vector<std::vector<double>> samples[2];
    bool more_particles = true;
    std::size_t remap_particles = 0, legacy_particles = 0;
    for (int r = 0; r < 30; ++r)
    {
        std::vector<std::vector<StepOutput>> runs;
        for (auto variant : {RemapVariant::remap, RemapVariant::legacy})
        {
            HybridConfig c = base_config(SamplerKind::pseudorandom, 0, 1 << 14);
            c.sampler.seed = replica_seed(variant == RemapVariant::remap ? 77 : 78, r);
            c.time = {false, 1.0, steps};
            c.remap = variant;
            runs.push_back(run_time_dependent(c, reed));
            for (auto const& o : runs.back())
                track(o);
        }
        for (int s = 0; s < steps; ++s)
        {
            auto const& a = runs[0][s];
            auto const& b = runs[1][s];
            more_particles = more_particles && b.computer_particles > a.computer_particles;
            remap_particles += a.computer_particles;
            legacy_particles += b.computer_particles;
        }
        for (int v = 0; v < 2; ++v)
        {
            std::vector<double> x;
            for (auto const& o : runs[v])
            {
                x.insert(x.end(), o.state_flux.begin(), o.state_flux.end());
                x.insert(x.end(), o.flux.begin(), o.flux.end());
            }
            samples[v].push_back(std::move(x));
        }
    }
    auto const z = z_test(replica_stats(samples[0]), replica_stats(samples[1]), remap_z);
    report(z.within == z.cells && more_particles, "criterion 6 (remap vs legacy relabel)",
           "Reed N_s=0, N_p=2^14, 30 replicas, 2 steps: worst |z| = " + fmt("%.2f", z.worst)
               + " over " + std::to_string(z.cells) + " cell values; computer particles remap "
               + std::to_string(remap_particles) + " < legacy " + std::to_string(legacy_particles));
}

//---------------------------------------------------------------------------//
// 8: conservation
//---------------------------------------------------------------------------//
void conservation()
{
    BoundarySource g;
    g[Face::x_hi] = 0.25;
    auto const reed = reed_problem();
    ProblemSpec with_boundary("reed_boundary", reed.mesh(),
                              {reed.regions().begin(), reed.regions().end()}, g);
    for (auto const& problem : {reed, dogleg_problem(), with_boundary})
    {
        for (int cap : sweep_caps)
        {
            for (auto kind : {SamplerKind::pseudorandom, SamplerKind::halton})
            {
                HybridConfig c = base_config(kind, cap, 1 << 13);
                track(steady_state_solve(c, problem));
                track(steady_hybrid_step(c, problem));
                if (cap == unlimited_scatters)
                    continue;
                for (auto variant : {RemapVariant::remap, RemapVariant::legacy})
                {
                    c.time = {false, 0.5, 3};
                    c.remap = variant;
                    for (auto const& o : run_time_dependent(c, problem))
                        track(o);
                }
            }
        }
    }
    report(worst_weight_balance < max_balance && worst_sn_balance < max_balance,
           "criterion 8 (conservation)",
           "worst weight-balance residual " + fmt("%.2e", worst_weight_balance)
               + ", worst S_N balance residual " + fmt("%.2e", worst_sn_balance) + " (< 1e-8)");
}

//---------------------------------------------------------------------------//
// 9: reproducibility through the CLI
//---------------------------------------------------------------------------//
std::string slurp(fs::path const& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void reproducibility()
{
    fs::path dir = fs::temp_directory_path() / "qmch_acceptance_repro";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<std::pair<std::string, std::string>> configs{
        {"steady.json",
         R"({"problem": "reed", "scatter_cap": 5, "particles": 16384, "sampler": "mc",
             "seed": 123, "threads": 4})"},
        {"transient.json",
         R"({"problem": "reed", "scatter_cap": 2, "particles": 8192, "sampler": "qmc",
             "seed": 5, "threads": 3, "mode": {"type": "time_dependent", "dt": 0.5, "steps": 3}})"}};
    bool ok = true;
    std::string detail;
    for (auto const& [name, text] : configs)
    {
        fs::path cfg = dir / name;
        std::ofstream(cfg) << text;
        std::string outputs[2];
        for (int run = 0; run < 2; ++run)
        {
            fs::path out = dir / (name + std::to_string(run));
            std::string cmd = std::string(QMCH_CLI_PATH) + " run " + cfg.string()
                              + " --deterministic --out-dir " + out.string() + " 2>/dev/null";
            ok = ok && std::system(cmd.c_str()) == 0;
            outputs[run] = slurp(out / "flux.csv");
        }
        bool same = !outputs[0].empty() && outputs[0] == outputs[1];
        ok = ok && same;
        detail += name + (same ? " identical" : " DIFFERS") + " ("
                  + std::to_string(outputs[0].size()) + " bytes); ";
    }
    fs::remove_all(dir);
    report(ok, "criterion 9 (bit-identical CSV with --deterministic)", detail);
}

//---------------------------------------------------------------------------//
// Relative runtime ordering
//---------------------------------------------------------------------------//
double seconds(auto&& f)
{
    auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void runtimes()
{
    std::size_t const np = 1 << 18;
    std::vector<int> const caps{0, 5, 10, 20};
    bool ok = true;
    std::string detail;
    for (auto const& problem : {reed_problem(), dogleg_problem()})
    {
        auto cfg = [&](int cap) {
            HybridConfig c = base_config(SamplerKind::halton, cap, np);
            c.execution.threads = 1;
            return c;
        };
        // Round-robin repeats so machine load drifts hit every case alike
        double mc = INFINITY;
        std::vector<double> per_cap(caps.size(), INFINITY);
        for (int rep = 0; rep < 5; ++rep)
        {
            mc = std::min(mc, seconds([&] { steady_state_solve(cfg(unlimited_scatters), problem); }));
            for (std::size_t i = 0; i < caps.size(); ++i)
            {
                per_cap[i] = std::min(
                    per_cap[i], seconds([&] { steady_hybrid_step(cfg(caps[i]), problem); }));
            }
        }
        double const hybrid = per_cap[1];
        double const lo = *std::min_element(per_cap.begin(), per_cap.end());
        double const hi = *std::max_element(per_cap.begin(), per_cap.end());
        double const spread = (hi - lo) / lo;
        ok = ok && hybrid >= mc && spread < runtime_spread;
        detail += problem.name() + ": hybrid N_s=5 " + fmt("%.3f s", hybrid) + " vs MC "
                  + fmt("%.3f s", mc) + ", N_s spread " + fmt("%.1f%%", 100 * spread) + "; ";
    }
    report(ok, "runtime ordering (hybrid cost >= non-hybrid, N_s spread < 25%)", detail);
}

//---------------------------------------------------------------------------//
}  // namespace

int main()
{
    try
    {
        erlang_tails();
        reproducibility();
        remap_equivalence();
        splitting_exactness();
        iteration_counts();
        convergence_rates();
        conservation();
        runtimes();
    }
    catch (std::exception const& e)
    {
        report(false, "acceptance harness", std::string("aborted: ") + e.what());
    }
    std::printf("%s: %d criterion line(s) failed\n", failures ? "FAILED" : "PASSED", failures);
    return failures ? 1 : 0;
}
