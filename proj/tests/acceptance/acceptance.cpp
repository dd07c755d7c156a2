// One PASS/FAIL line per acceptance criterion; exit code 0 iff all pass.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "rdsg/adaptive.hpp"
#include "rdsg/config.hpp"
#include "rdsg/dense_oracle.hpp"
#include "rdsg/kl_field.hpp"
#include "rdsg/moments.hpp"
#include "rdsg/reconstruct.hpp"
#include "rdsg/tensor_train.hpp"
#include "rdsg/validate.hpp"

using namespace rdsg;

namespace {

// Tolerances and limits
constexpr double kOracleTol = 1e-8;
constexpr double kOracleSeconds = 30.0;
constexpr double kZeroMeanTol = 1e-9;
constexpr double kZeroVarTol = 1e-10;
constexpr double kZeroEtaTol = 1e-12;
constexpr double kIsoExactTol = 1e-13;
constexpr double kIsoHoldoutTol = 1e-8;
constexpr int kKlSlack = 2;
constexpr double kKlSeconds = 60.0;
constexpr double kRateLo = 0.3, kRateHi = 0.6, kRateGap = 0.15;
constexpr double kLshapeRateSlack = 0.02;
constexpr double kCornerRatio = 3.0;
constexpr double kCornerRadius = 0.1;
constexpr double kRunSeconds = 30.0 * 60.0;
constexpr double kMeanErrTol = 5e-2, kVarErrTol = 1e-1, kSeFactor = 3.0;
constexpr double kMonotoneSlack = 1e-10;

// Desk-scale run sizes
constexpr int kCircleMaxDofs = 10000;
constexpr int kLshapeMaxDofs = 10000;
constexpr int kZeroMaxDofs = 2000;
constexpr int kReproMaxDofs = 1000;
constexpr int kMaxIter = 80;
constexpr int kMcSamples = 2000;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x)
{
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", x);
    return b;
}

int failures = 0;

void report(int n, const std::string& name, bool pass, const std::string& detail)
{
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << n << " " << name << ": " << detail << std::endl;
}

struct StudyRun {
    LoopState state;
    ConvergenceStudy study;
    double seconds = 0.0;
};

RunConfig base(const std::string& domain, double theta, MeshRefinement mode, int max_dofs)
{
    RunConfig c;
    c.domain = domain;
    c.kl_tol = 0.5;
    c.theta_eta = theta;
    c.refinement = mode;
    c.max_dofs = max_dofs;
    c.max_iter = kMaxIter;
    c.mc_samples = kMcSamples;
    return c;
}

StudyRun study_run(const RunConfig& cfg, const std::string& label)
{
    const auto t0 = Clock::now();
    StudyRun r;
    r.state = run_adaptive(cfg);
    r.study = convergence_study(r.state, cfg);
    r.seconds = since(t0);
    const auto& last = r.study.rows.back();
    std::cerr << label << ": " << r.state.history.size() << " iterations, " << last.dofs << " dofs, alpha_E "
              << fmt(r.study.alpha_E) << ", e_E " << fmt(last.e_E) << ", e_V " << fmt(last.e_V) << ", "
              << fmt(r.seconds) << " s" << std::endl;
    return r;
}

/// ALS monotonicity, one refinement per iteration, Theta decrease.
struct Sanity {
    int bad_iota = 0, bad_refine = 0, theta_up = 0;
};

void sanity(const LoopState& st, Sanity& s)
{
    int& bad_iota = s.bad_iota;
    int& bad_refine = s.bad_refine;
    for (std::size_t i = 0; i < st.history.size(); ++i) {
        const auto& r = st.history[i];
        for (std::size_t k = 1; k < r.iota_history.size(); ++k)
            if (r.iota_history[k] > r.iota_history[k - 1] * (1 + kMonotoneSlack)) ++bad_iota;
        if (i + 1 < st.history.size()) {
            const auto& n = st.history[i + 1];
            const int changed = int(n.dofs != r.dofs) + int(n.dims != r.dims) + int(n.ranks != r.ranks);
            const bool kind = (r.refined == Refinement::mesh && n.dofs > r.dofs) ||
                              (r.refined == Refinement::stochastic && n.dims != r.dims) ||
                              (r.refined == Refinement::rank && n.ranks != r.ranks);
            if (changed != 1 || !kind) ++bad_refine;
        }
    }
    if (!(st.history.back().report.theta < st.history.front().report.theta)) ++s.theta_up;
}

bool same_run(const LoopState& a, const LoopState& b)
{
    if (a.history.size() != b.history.size()) return false;
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        const auto& x = a.history[i];
        const auto& y = b.history[i];
        if (x.report.theta != y.report.theta || x.report.eta != y.report.eta || x.report.zeta != y.report.zeta ||
            x.report.iota != y.report.iota || x.refined != y.refined || x.moments.mean != y.moments.mean ||
            x.moments.variance != y.moments.variance || x.holdout != y.holdout)
            return false;
    }
    const Eigen::VectorXd fa = tt_to_full(a.W), fb = tt_to_full(b.W);
    return fa.size() == fb.size() && (fa - fb).cwiseAbs().maxCoeff() == 0.0;
}

void criterion_oracle()
{
    const ValidationReport rep = run_oracle_suite(1, kOracleTol);
    double worst = 0.0;
    for (const auto& c : rep.checks) worst = std::max(worst, c.error);
    report(1, "oracle equivalence", rep.all_pass() && rep.seconds < kOracleSeconds,
           std::to_string(rep.checks.size()) + " checks, max rel. error " + fmt(worst) + " (tol " + fmt(kOracleTol) +
               "), " + fmt(rep.seconds) + " s (limit " + fmt(kOracleSeconds) + ")");
}

LoopState criterion_zero()
{
    RunConfig cfg = base("circle", 0.2, MeshRefinement::adaptive, kZeroMaxDofs);
    cfg.kernel_scale = 0.0;
    const LoopState st = run_adaptive(cfg);
    const IterationRecord& last = st.history.back();
    const auto mesh = st.meshes[last.mesh_index];
    const FeSpaceP1 sp(mesh);
    Eigen::SimplicialLLT<SparseMatrix> llt(assemble_laplacian(sp));
    const Eigen::VectorXd u = sp.extend(llt.solve(assemble_load_p0(sp, std::vector<double>(mesh->num_cells(), 1.0))));
    std::vector<double> diff(u.size()), uv(u.data(), u.data() + u.size());
    for (int v = 0; v < u.size(); ++v) diff[v] = last.moments.mean[v] - u[v];
    const double e_mean = h1_seminorm(*mesh, diff) / h1_seminorm(*mesh, uv);
    double vmax = 0.0, zmax = 0.0;
    for (double v : last.moments.variance) vmax = std::max(vmax, std::abs(v));
    for (const auto& r : st.history) zmax = std::max(zmax, r.report.zeta);
    const auto se = oracle::scalar_residual_estimator(*mesh, last.moments.mean, std::vector<double>(mesh->num_cells(), 1.0));
    const double e_eta = std::abs(last.report.eta - se.eta) / se.eta;
    const bool pass = st.kl.num_modes() == 0 && e_mean <= kZeroMeanTol && vmax <= kZeroVarTol && zmax == 0.0 &&
                      e_eta <= kZeroEtaTol;
    report(2, "zero perturbation", pass,
           "M " + std::to_string(st.kl.num_modes()) + ", " + std::to_string(last.dofs) + " dofs, H1 mean error " +
               fmt(e_mean) + " (tol " + fmt(kZeroMeanTol) + "), max variance " + fmt(vmax) + " (tol " +
               fmt(kZeroVarTol) + "), max zeta " + fmt(zmax) + ", eta rel. diff " + fmt(e_eta) + " (tol " +
               fmt(kZeroEtaTol) + ")");
    return st;
}

void criterion_isotropic()
{
    const auto mesh = std::make_shared<const TriMesh>(make_reference_domain("circle", 2));
    const double a = 0.3;
    Eigen::MatrixXd mode(mesh->num_vertices(), 2);
    for (int v = 0; v < mesh->num_vertices(); ++v) mode.row(v) = a * mesh->vertex(v).transpose();
    const KLExpansion kl = kl_from_modes(mesh, {mode});
    double worst = 0.0;
    for (double y : {-1.0, -0.5, 0.0, 0.25, 1.0}) {
        const FieldEval fe = field_eval(kl, std::vector<double>{y});
        for (int c = 0; c < mesh->num_cells(); ++c) {
            worst = std::max(worst, (fe.A[c] - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff());
            worst = std::max(worst, std::abs(fe.fhat[c] - (1 + a * y) * (1 + a * y)));
        }
    }
    auto fh = [&](const std::vector<double>& y) {
        const auto f = field_eval(kl, y).fhat;
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(f.data(), Eigen::Index(f.size())));
    };
    ReconstructConfig rc;
    rc.dims = {3};
    rc.max_rank = 3;
    const int K = 20 * largest_local_unknowns(rc.dims, rc.max_rank, mesh->num_cells());
    const ReconstructResult r = reconstruct(make_samples(1, K, 11, mesh->num_cells(), fh), rc);
    const double h = holdout_error(r.tt, make_samples(1, 200, 12, mesh->num_cells(), fh));
    report(3, "isotropic mode", worst <= kIsoExactTol && h <= kIsoHoldoutTol,
           "max |A - I|, |fhat - (1+ay)^2| " + fmt(worst) + " (tol " + fmt(kIsoExactTol) + "), holdout " + fmt(h) +
               " (tol " + fmt(kIsoHoldoutTol) + ")");
}

void criterion_kl()
{
    const auto t0 = Clock::now();
    struct Case {
        const char* domain;
        double eps;
        int want;
    };
    const Case cases[] = {{"circle", 0.7, 2}, {"circle", 0.5, 5}, {"lshape", 0.7, 3}, {"lshape", 0.5, 6}};
    bool ok = true;
    std::string detail;
    for (const Case& c : cases) {
        RunConfig cfg;
        cfg.domain = c.domain;
        cfg.kl_tol = c.eps;
        const int M = build_kl(cfg).num_modes();
        ok = ok && std::abs(M - c.want) <= kKlSlack;
        detail += std::string(c.domain) + "@" + fmt(c.eps) + " M=" + std::to_string(M) + " (ref " +
                  std::to_string(c.want) + "), ";
    }
    const double s = since(t0);
    report(4, "KL truncation counts", ok && s < kKlSeconds,
           detail + "slack " + std::to_string(kKlSlack) + ", " + fmt(s) + " s (limit " + fmt(kKlSeconds) + ")");
}

}  // namespace

int main()
{
    criterion_oracle();
    const LoopState zero = criterion_zero();
    criterion_isotropic();
    criterion_kl();

    // Circle: adaptive and uniform
    const StudyRun ca = study_run(base("circle", 0.2, MeshRefinement::adaptive, kCircleMaxDofs), "circle adaptive");
    const StudyRun cu = study_run(base("circle", 0.2, MeshRefinement::uniform, kCircleMaxDofs), "circle uniform");
    {
        const double aa = ca.study.alpha_E, au = cu.study.alpha_E, s = ca.seconds + cu.seconds;
        const bool pass = aa >= kRateLo && aa <= kRateHi && au >= kRateLo && au <= kRateHi &&
                          std::abs(aa - au) <= kRateGap && s <= kRunSeconds;
        report(5, "circle convergence", pass,
               "alpha_adaptive " + fmt(aa) + ", alpha_uniform " + fmt(au) + " (range [" + fmt(kRateLo) + ", " +
                   fmt(kRateHi) + "], gap " + fmt(std::abs(aa - au)) + " <= " + fmt(kRateGap) + "), " +
                   std::to_string(ca.study.rows.back().dofs) + "/" + std::to_string(cu.study.rows.back().dofs) +
                   " dofs, " + fmt(s) + " s (limit " + fmt(kRunSeconds) + ")");
    }

    // L-shape: adaptive and uniform
    const StudyRun la = study_run(base("lshape", 0.5, MeshRefinement::adaptive, kLshapeMaxDofs), "lshape adaptive");
    const StudyRun lu = study_run(base("lshape", 0.5, MeshRefinement::uniform, kLshapeMaxDofs), "lshape uniform");
    {
        const double aa = la.study.alpha_E, au = lu.study.alpha_E, s = la.seconds + lu.seconds;
        // uniform mesh of the uniform run with the dof count closest to the adaptive final mesh
        const int target = la.state.history.back().dofs;
        const TriMesh* um = nullptr;
        int best = -1;
        for (const auto& r : lu.state.history) {
            const int d = std::abs(r.dofs - target);
            if (best < 0 || d < best) {
                best = d;
                um = lu.state.meshes[r.mesh_index].get();
            }
        }
        const Point corner(0.0, 0.0);
        const double fa = corner_fraction(*la.state.mesh, corner, kCornerRadius);
        const double fu = corner_fraction(*um, corner, kCornerRadius);
        const double ratio = fu > 0.0 ? fa / fu : (fa > 0.0 ? 1e300 : 0.0);
        const bool pass = aa >= au - kLshapeRateSlack && ratio >= kCornerRatio && s <= kRunSeconds;
        report(6, "L-shape convergence", pass,
               "alpha_adaptive " + fmt(aa) + " vs alpha_uniform " + fmt(au) + " - " + fmt(kLshapeRateSlack) +
                   ", corner density ratio " + fmt(ratio) + " (>= " + fmt(kCornerRatio) + ", r = " +
                   fmt(kCornerRadius) + ", " + std::to_string(la.state.mesh->num_cells()) + " vs " +
                   std::to_string(um->num_cells()) + " cells), " + fmt(s) + " s (limit " + fmt(kRunSeconds) + ")");
    }

    // Final accuracy
    {
        bool pass = true;
        std::ostringstream d;
        for (const auto* r : {&ca, &cu, &la, &lu}) {
            const auto& last = r->study.rows.back();
            const bool se_ok = kMeanErrTol > kSeFactor * r->study.mean_se_rel &&
                               kVarErrTol > kSeFactor * r->study.variance_se_rel;
            pass = pass && last.e_E <= kMeanErrTol && last.e_V <= kVarErrTol && se_ok;
            d << "e_E " << fmt(last.e_E) << " e_V " << fmt(last.e_V) << " (se " << fmt(r->study.mean_se_rel) << "/"
              << fmt(r->study.variance_se_rel) << "); ";
        }
        d << "tol " << fmt(kMeanErrTol) << "/" << fmt(kVarErrTol) << ", thresholds > " << fmt(kSeFactor) << " se";
        report(7, "final accuracy", pass, d.str());
    }

    // Estimator sanity across every adaptive run, plus bitwise reproducibility
    {
        Sanity s;
        int iterations = 0;
        for (const LoopState* st : {&zero, &ca.state, &cu.state, &la.state, &lu.state}) {
            sanity(*st, s);
            iterations += int(st->history.size());
        }
        const bool ok = s.bad_iota == 0 && s.bad_refine == 0 && s.theta_up == 0;
        RunConfig rc = base("lshape", 0.5, MeshRefinement::adaptive, kReproMaxDofs);
        const LoopState r1 = run_adaptive(rc);
        const LoopState r2 = run_adaptive(rc);
        const bool same = same_run(r1, r2);
        report(8, "estimator sanity", ok && same,
               "5 runs, " + std::to_string(iterations) + " iterations: iota increases " + std::to_string(s.bad_iota) +
                   ", bad refinements " + std::to_string(s.bad_refine) + ", runs without theta decrease " +
                   std::to_string(s.theta_up) + "; repeated run bitwise identical: " + (same ? "yes" : "no"));
    }
    return failures == 0 ? 0 : 1;
}
