#include "rdsg/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>

#include "rdsg/adaptive.hpp"
#include "rdsg/config.hpp"
#include "rdsg/error.hpp"
#include "rdsg/io.hpp"
#include "rdsg/parallel.hpp"
#include "rdsg/validate.hpp"

namespace rdsg {

namespace {

namespace fs = std::filesystem;

struct Common {
    std::string config;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    long long seed = -1;
    bool verbose = false;
};

void add_common(CLI::App* sub, Common& c, bool with_out = true)
{
    sub->add_option("-c,--config", c.config, "configuration file (key = value lines)");
    if (with_out) sub->add_option("-o,--out", c.out_dir, "output directory (created if absent)");
    sub->add_option("--set", c.overrides, "override one key, key=value (repeatable)");
    sub->add_option("--seed", c.seed, "master seed override");
    sub->add_flag("-v,--verbose", c.verbose, "progress output on stderr");
}

RunConfig resolve(const Common& c)
{
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set: expected key=value, got '" + kv + "'");
        try {
            apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("--set: ") + e.what());
        }
    }
    if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
    cfg.validate();
    if (cfg.workers > 0) set_workers(cfg.workers);
    return cfg;
}

fs::path prepare_out(const Common& c, const RunConfig& cfg)
{
    const fs::path dir(c.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + c.out_dir + "': " + ec.message());
    std::ofstream echo(dir / "config.cfg");
    if (!echo) throw ConfigError("cannot write to output directory '" + c.out_dir + "'");
    write_config(echo, cfg);
    return dir;
}

std::ofstream open_out(const fs::path& p)
{
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot write '" + p.string() + "'");
    return f;
}

std::string g(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

int cmd_run(const Common& c, bool study, std::ostream& out, std::ostream& err)
{
    const RunConfig cfg = resolve(c);
    const fs::path dir = prepare_out(c, cfg);
    IterationCallback progress;
    if (c.verbose)
        progress = [&err](const IterationRecord& r) {
            err << "iter " << r.iter << "  dofs " << r.dofs << "  tt_dofs " << r.tt_dofs << "  eta " << g(r.report.eta)
                << "  zeta " << g(r.report.zeta) << "  iota " << g(r.report.iota) << "  theta " << g(r.report.theta)
                << "  -> " << to_string(r.refined) << "  [ranks";
            for (int x : r.ranks) err << " " << x;
            err << "; dims";
            for (int x : r.dims) err << " " << x;
            err << "; sweeps " << r.als_sweeps << "; holdout " << g(r.holdout) << "; s " << g(r.seconds_reconstruct)
                << "/" << g(r.seconds_solve) << "/" << g(r.seconds_estimate) << "]\n";
        };
    const LoopState st = run_adaptive(cfg, progress);
    {
        auto f = open_out(dir / "iterations.csv");
        write_iterations_csv(f, st.history);
    }
    const IterationRecord& last = st.history.back();
    {
        auto f = open_out(dir / "mean.field");
        write_field(f, *st.mesh, last.moments.mean);
    }
    {
        auto f = open_out(dir / "variance.field");
        write_field(f, *st.mesh, last.moments.variance);
    }
    {
        auto f = open_out(dir / "solution.tt");
        write_tt(f, st.W);
    }
    for (const auto& w : st.warnings) err << "warning: " << w << "\n";
    out << "iterations " << st.history.size() << "\n"
        << "dofs " << last.dofs << "\n"
        << "theta " << g(st.history.front().report.theta) << " -> " << g(last.report.theta) << "\n";
    if (study) {
        const ConvergenceStudy cs = convergence_study(st, cfg);
        auto f = open_out(dir / "convergence.csv");
        write_convergence_csv(f, cs.rows);
        out << "alpha_E " << g(cs.alpha_E) << "\nalpha_V " << g(cs.alpha_V) << "\nalpha_theta " << g(cs.alpha_theta)
            << "\ne_E " << g(cs.rows.back().e_E) << " (MC se " << g(cs.mean_se_rel) << ")\n"
            << "e_V " << g(cs.rows.back().e_V) << " (MC se " << g(cs.variance_se_rel) << ")\n";
    }
    return 0;
}

int cmd_reference(const Common& c, int level, std::ostream& out)
{
    const RunConfig cfg = resolve(c);
    const fs::path dir = prepare_out(c, cfg);
    const KLExpansion kl = build_kl(cfg);
    auto mesh = std::make_shared<const TriMesh>(make_reference_domain(cfg.domain, level));
    const FeSpaceP1 space(mesh);
    const MomentFields m = reference_moments(kl.on_mesh(mesh), space, cfg.mc_samples, cfg.mc_rule, cfg.mc_seed);
    {
        auto f = open_out(dir / "mean.field");
        write_field(f, *mesh, m.mean);
    }
    {
        auto f = open_out(dir / "variance.field");
        write_field(f, *mesh, m.variance);
    }
    out << "samples " << m.samples << "\nvertices " << mesh->num_vertices() << "\nmean_se " << g(m.mean_se)
        << "\nvariance_se " << g(m.variance_se) << "\n";
    return 0;
}

int cmd_kl(const Common& c, std::ostream& out)
{
    const RunConfig cfg = resolve(c);
    const fs::path dir = prepare_out(c, cfg);
    const KLExpansion kl = build_kl(cfg);
    {
        auto f = open_out(dir / "kl.txt");
        write_kl(f, kl);
    }
    out << "M " << kl.num_modes() << "\ngamma";
    for (double x : kl.gamma()) out << " " << g(x);
    out << "\n";
    return 0;
}

int cmd_validate(std::ostream& out)
{
    const ValidationReport rep = run_oracle_suite();
    for (const auto& ch : rep.checks)
        out << (ch.pass() ? "PASS " : "FAIL ") << ch.name << "  rel.err " << g(ch.error) << " (tol " << g(ch.tol)
            << ")\n";
    out << "time " << g(rep.seconds) << " s\n";
    return rep.all_pass() ? 0 : 1;
}

int cmd_rates(const std::string& path, std::ostream& out)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    const CsvTable t = read_csv(in, path);
    const std::vector<double> dofs = t.column("dofs");
    int n = 0;
    for (const char* name : {"e_E", "e_V", "theta"}) {
        if (!t.has(name)) continue;
        out << "alpha_" << name << " " << g(fit_rate(dofs, t.column(name))) << "\n";
        ++n;
    }
    if (n == 0) throw ConfigError(path + ": no error column (e_E, e_V or theta)");
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"rdsg: adaptive stochastic Galerkin for random domains in tensor-train format"};
    app.require_subcommand(1);

    Common run_c, ref_c, kl_c;
    bool study = false;
    int ref_level = 4;
    std::string csv;

    auto* run = app.add_subcommand("run", "adaptive loop; writes iterations.csv, mean.field, variance.field");
    add_common(run, run_c);
    run->add_flag("--study", study, "also compute the sampling reference and convergence.csv");
    auto* ref = app.add_subcommand("reference", "sampling reference moments on a uniform mesh");
    add_common(ref, ref_c);
    ref->add_option("--level", ref_level, "uniform refinement level of the reference mesh");
    auto* kl = app.add_subcommand("kl", "KL expansion: mode count and gamma list");
    add_common(kl, kl_c);
    auto* val = app.add_subcommand("validate", "dense brute-force oracle suite on tiny instances");
    auto* rates = app.add_subcommand("rates", "fit convergence rates from a CSV with a dofs column");
    rates->add_option("csv", csv, "CSV file")->required();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(run_c, study, out, err);
        if (*ref) return cmd_reference(ref_c, ref_level, out);
        if (*kl) return cmd_kl(kl_c, out);
        if (*val) return cmd_validate(out);
        if (*rates) return cmd_rates(csv, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace rdsg
