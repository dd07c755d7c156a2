#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rdsg/cli.hpp"
#include "rdsg/config.hpp"
#include "rdsg/error.hpp"
#include "rdsg/io.hpp"

using namespace rdsg;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out, err;
};

CliResult cli(const std::vector<std::string>& args)
{
    std::ostringstream o, e;
    const int code = run_cli(args, o, e);
    return {code, o.str(), e.str()};
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("rdsg_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

const std::vector<std::string> kSmall = {"--set", "kl_level=1",   "--set", "max_dofs=80",   "--set",
                                         "max_iter=5", "--set", "n_samples=200", "--set", "recon_rank=3",
                                         "--set", "recon_sweeps=3"};

std::vector<std::string> with_small(std::vector<std::string> a)
{
    a.insert(a.end(), kSmall.begin(), kSmall.end());
    return a;
}

}  // namespace

TEST_CASE("config parsing: defaults, comments, overrides")
{
    std::istringstream in("# circle run\ndomain = lshape\n\ntheta_eta = 0.5  # bulk\nrefinement = uniform\n");
    const RunConfig c = parse_config(in);
    CHECK(c.domain == "lshape");
    CHECK(c.theta_eta == 0.5);
    CHECK(c.refinement == MeshRefinement::uniform);
    CHECK(c.kl_tol == 0.5);
    RunConfig d;
    apply_setting(d, "mc_rule", "qmc");
    CHECK(d.mc_rule == SampleRule::qmc);
    CHECK_THROWS_AS(apply_setting(d, "nope", "1"), ConfigError);
}

TEST_CASE("config errors name the offending line")
{
    auto fails_with = [](const std::string& text, const std::string& needle) {
        std::istringstream in(text);
        try {
            (void)parse_config(in, "cfg");
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            INFO(msg);
            CHECK(msg.find(needle) != std::string::npos);
            return;
        }
        FAIL("no ConfigError for: " << text);
    };
    fails_with("domain = circle\nfoo = 1\n", "cfg:2:");
    fails_with("theta_eta = abc\n", "cfg:1:");
    fails_with("max_iter = 3.5\n", "cfg:1:");
    fails_with("domain\n", "cfg:1:");
    fails_with("domain = square\n", "domain");
    fails_with("theta_eta = 1.5\n", "theta_eta");
    fails_with("zeta_norm = other\n", "cfg:1:");
}

TEST_CASE("written configuration re-parses to the same values")
{
    RunConfig c;
    c.domain = "lshape";
    c.theta_eta = 0.123456789012345;
    c.seed = 99;
    c.mc_rule = SampleRule::qmc;
    c.weights.iota = 2.5;
    std::stringstream s;
    write_config(s, c);
    const RunConfig r = parse_config(s);
    std::stringstream t;
    write_config(t, r);
    std::stringstream s2;
    write_config(s2, c);
    CHECK(t.str() == s2.str());
    CHECK(r.theta_eta == c.theta_eta);
}

TEST_CASE("CSV reading")
{
    std::istringstream in("dofs,e_E\n10,1.0\n\n100,0.5\n");
    const CsvTable t = read_csv(in);
    CHECK(t.has("e_E"));
    CHECK_FALSE(t.has("e_V"));
    CHECK(t.column("dofs") == std::vector<double>{10, 100});
    CHECK_THROWS_AS((void)t.column("theta"), ConfigError);
    std::istringstream bad("dofs,e_E\n10,x\n");
    CHECK_THROWS_AS((void)read_csv(bad).column("e_E"), ConfigError);
}

TEST_CASE("CLI usage errors exit with code 2")
{
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"run", "--bogus"}).code == 2);
    const CliResult r = cli({"kl", "--set", "theta_eta=7", "-o", scratch("bad").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("theta_eta") != std::string::npos);
    CHECK(cli({"kl", "--set", "noequals"}).code == 2);
    CHECK(cli({"run", "-c", "/nonexistent/file.cfg"}).code == 2);
    CHECK(cli({"rates", "/nonexistent.csv"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("CLI validate prints one line per check and succeeds")
{
    const CliResult r = cli({"validate"});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("PASS d=(3,2) operator") != std::string::npos);
}

TEST_CASE("CLI kl writes the expansion and reports the mode count")
{
    const fs::path dir = scratch("kl");
    const CliResult r = cli({"kl", "--set", "kl_level=1", "-o", dir.string()});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("M ", 0) == 0);
    CHECK(fs::exists(dir / "kl.txt"));
    CHECK(fs::exists(dir / "config.cfg"));
    fs::remove_all(dir);
}

TEST_CASE("CLI rates fits a slope from a CSV file")
{
    const fs::path dir = scratch("rates");
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "c.csv");
        f << "dofs,e_E\n10,1\n100,0.1\n1000,0.01\n";
    }
    const CliResult r = cli({"rates", (dir / "c.csv").string()});
    CHECK(r.code == 0);
    CHECK(r.out == "alpha_e_E 1\n");
    {
        std::ofstream f(dir / "d.csv");
        f << "dofs,other\n10,1\n";
    }
    CHECK(cli({"rates", (dir / "d.csv").string()}).code == 2);
    fs::remove_all(dir);
}

TEST_CASE("CLI run writes its outputs and is byte-for-byte reproducible")
{
    const fs::path a = scratch("run_a"), b = scratch("run_b");
    const CliResult ra = cli(with_small({"run", "-o", a.string()}));
    const CliResult rb = cli(with_small({"run", "-o", b.string()}));
    REQUIRE(ra.code == 0);
    REQUIRE(rb.code == 0);
    for (const char* f : {"iterations.csv", "mean.field", "variance.field", "solution.tt", "config.cfg"}) {
        CHECK(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const std::string csv = slurp(a / "iterations.csv");
    CHECK(csv.rfind("iter,dofs,tt_dofs,eta,zeta,iota,theta,refined\n", 0) == 0);
    CHECK(ra.out == rb.out);
    // a different seed changes the result
    const fs::path c = scratch("run_c");
    REQUIRE(cli(with_small({"run", "--seed", "5", "-o", c.string()})).code == 0);
    CHECK(slurp(c / "solution.tt") != slurp(a / "solution.tt"));
    // the echoed configuration reproduces the run
    const fs::path d = scratch("run_d");
    REQUIRE(cli({"run", "-c", (a / "config.cfg").string(), "-o", d.string()}).code == 0);
    CHECK(slurp(d / "iterations.csv") == csv);
    for (const auto& p : {a, b, c, d}) fs::remove_all(p);
}

TEST_CASE("CLI run with study and reference")
{
    const fs::path a = scratch("study");
    auto args = with_small({"run", "--study", "-o", a.string(), "--set", "mc_samples=50"});
    const CliResult r = cli(args);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("alpha_E") != std::string::npos);
    std::ifstream in(a / "convergence.csv");
    const CsvTable t = read_csv(in);
    CHECK(t.has("e_E"));
    CHECK(t.has("e_V"));
    CHECK(t.column("dofs").size() >= 3);
    const fs::path b = scratch("reference");
    const CliResult q = cli({"reference", "--level", "1", "--set", "mc_samples=20", "-o", b.string()});
    CHECK(q.code == 0);
    CHECK(q.out.find("samples 20") != std::string::npos);
    CHECK(fs::exists(b / "mean.field"));
    fs::remove_all(a);
    fs::remove_all(b);
}
