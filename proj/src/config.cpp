#include "rdsg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "rdsg/error.hpp"

namespace rdsg {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v)
{
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

long long to_int(const std::string& key, const std::string& v)
{
    long long x = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return x;
}

int to_int32(const std::string& key, const std::string& v)
{
    const long long x = to_int(key, v);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError(key + ": integer out of range");
    return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v)
{
    std::uint64_t x = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    return x;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = {
        {"domain", [](RunConfig& c, const std::string&, const std::string& v) { c.domain = v; }},
        {"kl_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.kl_tol = to_double(k, v); }},
        {"kl_level", [](RunConfig& c, const std::string& k, const std::string& v) { c.kl_level = to_int32(k, v); }},
        {"kernel_scale",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.kernel_scale = to_double(k, v); }},
        {"mesh_level", [](RunConfig& c, const std::string& k, const std::string& v) { c.mesh_level = to_int32(k, v); }},
        {"theta_eta", [](RunConfig& c, const std::string& k, const std::string& v) { c.theta_eta = to_double(k, v); }},
        {"theta_zeta",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.theta_zeta = to_double(k, v); }},
        {"epsilon", [](RunConfig& c, const std::string& k, const std::string& v) { c.epsilon = to_double(k, v); }},
        {"max_iter", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_iter = to_int32(k, v); }},
        {"max_dofs", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_dofs = to_int32(k, v); }},
        {"n_samples", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_samples = to_int32(k, v); }},
        {"init_degree",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.init_degree = to_int32(k, v); }},
        {"init_rank", [](RunConfig& c, const std::string& k, const std::string& v) { c.init_rank = to_int32(k, v); }},
        {"recon_rank", [](RunConfig& c, const std::string& k, const std::string& v) { c.recon_rank = to_int32(k, v); }},
        {"recon_sweeps",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.recon_sweeps = to_int32(k, v); }},
        {"als_sweeps",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.als.max_sweeps = to_int32(k, v); }},
        {"als_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.als.tol = to_double(k, v); }},
        {"als_reg", [](RunConfig& c, const std::string& k, const std::string& v) { c.als.reg = to_double(k, v); }},
        {"weights_eta",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.eta = to_double(k, v); }},
        {"weights_zeta",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.zeta = to_double(k, v); }},
        {"weights_iota",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.iota = to_double(k, v); }},
        {"zeta_norm",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "dual") c.zeta_norm = ZetaNorm::dual;
             else if (v == "literal") c.zeta_norm = ZetaNorm::literal;
             else throw ConfigError(k + ": expected 'dual' or 'literal', got '" + v + "'");
         }},
        {"refinement",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "adaptive") c.refinement = MeshRefinement::adaptive;
             else if (v == "uniform") c.refinement = MeshRefinement::uniform;
             else throw ConfigError(k + ": expected 'adaptive' or 'uniform', got '" + v + "'");
         }},
        {"rank_scale", [](RunConfig& c, const std::string& k, const std::string& v) { c.rank_scale = to_double(k, v); }},
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
        {"workers", [](RunConfig& c, const std::string& k, const std::string& v) { c.workers = to_int32(k, v); }},
        {"mc_samples", [](RunConfig& c, const std::string& k, const std::string& v) { c.mc_samples = to_int32(k, v); }},
        {"mc_rule",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "mc") c.mc_rule = SampleRule::mc;
             else if (v == "qmc") c.mc_rule = SampleRule::qmc;
             else throw ConfigError(k + ": expected 'mc' or 'qmc', got '" + v + "'");
         }},
        {"mc_seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.mc_seed = to_u64(k, v); }},
    };
    return table;
}

}  // namespace

void RunConfig::validate() const
{
    if (domain != "circle" && domain != "lshape") throw ConfigError("domain: unknown domain '" + domain + "'");
    if (!(kl_tol > 0.0 && kl_tol <= 1.0)) throw ConfigError("kl_tol: must lie in (0, 1]");
    if (kl_level < 0 || mesh_level < 0) throw ConfigError("kl_level/mesh_level: must be nonnegative");
    if (!(kernel_scale >= 0.0)) throw ConfigError("kernel_scale: must be nonnegative");
    if (!(theta_eta > 0.0 && theta_eta <= 1.0)) throw ConfigError("theta_eta: must lie in (0, 1]");
    if (!(theta_zeta > 0.0 && theta_zeta <= 1.0)) throw ConfigError("theta_zeta: must lie in (0, 1]");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon: must be positive");
    if (max_iter < 1) throw ConfigError("max_iter: must be >= 1");
    if (max_dofs < 1) throw ConfigError("max_dofs: must be >= 1");
    if (n_samples < 0) throw ConfigError("n_samples: must be nonnegative");
    if (init_degree < 1) throw ConfigError("init_degree: must be >= 1");
    if (init_rank < 1) throw ConfigError("init_rank: must be >= 1");
    if (recon_rank < 0 || recon_sweeps < 1) throw ConfigError("recon_rank/recon_sweeps: invalid");
    if (als.max_sweeps < 1) throw ConfigError("als_sweeps: must be >= 1");
    if (!(als.tol > 0.0)) throw ConfigError("als_tol: must be positive");
    if (als.reg < 0.0) throw ConfigError("als_reg: must be nonnegative");
    if (weights.eta < 0.0 || weights.zeta < 0.0 || weights.iota < 0.0)
        throw ConfigError("weights: must be nonnegative");
    if (!(rank_scale > 0.0)) throw ConfigError("rank_scale: must be positive");
    if (workers < 0) throw ConfigError("workers: must be nonnegative");
    if (mc_samples < 2) throw ConfigError("mc_samples: must be >= 2");
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value)
{
    const auto& t = setters();
    const auto it = t.find(key);
    if (it == t.end()) throw ConfigError("unknown key '" + key + "'");
    it->second(cfg, key, value);
}

RunConfig parse_config(std::istream& in, const std::string& source)
{
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(lineno) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError(where + "expected 'key = value'");
        try {
            apply_setting(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in, path);
}

void write_config(std::ostream& out, const RunConfig& c)
{
    std::ostringstream s;
    s << std::setprecision(17);
    s << "domain = " << c.domain << "\n"
      << "kl_tol = " << c.kl_tol << "\n"
      << "kl_level = " << c.kl_level << "\n"
      << "kernel_scale = " << c.kernel_scale << "\n"
      << "mesh_level = " << c.mesh_level << "\n"
      << "theta_eta = " << c.theta_eta << "\n"
      << "theta_zeta = " << c.theta_zeta << "\n"
      << "epsilon = " << c.epsilon << "\n"
      << "max_iter = " << c.max_iter << "\n"
      << "max_dofs = " << c.max_dofs << "\n"
      << "n_samples = " << c.n_samples << "\n"
      << "init_degree = " << c.init_degree << "\n"
      << "init_rank = " << c.init_rank << "\n"
      << "recon_rank = " << c.recon_rank << "\n"
      << "recon_sweeps = " << c.recon_sweeps << "\n"
      << "als_sweeps = " << c.als.max_sweeps << "\n"
      << "als_tol = " << c.als.tol << "\n"
      << "als_reg = " << c.als.reg << "\n"
      << "weights_eta = " << c.weights.eta << "\n"
      << "weights_zeta = " << c.weights.zeta << "\n"
      << "weights_iota = " << c.weights.iota << "\n"
      << "zeta_norm = " << (c.zeta_norm == ZetaNorm::dual ? "dual" : "literal") << "\n"
      << "refinement = " << (c.refinement == MeshRefinement::adaptive ? "adaptive" : "uniform") << "\n"
      << "rank_scale = " << c.rank_scale << "\n"
      << "seed = " << c.seed << "\n"
      << "workers = " << c.workers << "\n"
      << "mc_samples = " << c.mc_samples << "\n"
      << "mc_rule = " << (c.mc_rule == SampleRule::mc ? "mc" : "qmc") << "\n"
      << "mc_seed = " << c.mc_seed << "\n";
    out << s.str();
}

}  // namespace rdsg
