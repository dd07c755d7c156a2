#include "rdsg/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "rdsg/als.hpp"
#include "rdsg/dense_oracle.hpp"
#include "rdsg/estimators.hpp"
#include "rdsg/galerkin.hpp"

namespace rdsg {

namespace {

double rel(double a, double b)
{
    const double s = std::max(std::abs(a), std::abs(b));
    return s > 0.0 ? std::abs(a - b) / s : 0.0;
}

double rel_vec(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0.0, s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
        s = std::max(s, std::abs(b[i]));
    }
    return s > 0.0 ? d / s : d;
}

TensorTrain perturbed(int n0, const std::vector<int>& dims, double base, std::uint64_t seed)
{
    TensorTrain t = tt_scale(tt_random(n0, dims, std::vector<int>(dims.size(), 2), seed), 0.05);
    if (base != 0.0) t = tt_add(tt_constant(Eigen::VectorXd::Constant(n0, base), dims), t);
    return t;
}

void instance(ValidationReport& rep, const std::string& tag, const std::vector<int>& lam, std::uint64_t seed,
              double tol)
{
    const auto mesh = hexagon_mesh();
    const FeSpaceP1 sp(mesh);
    const int n0 = mesh->num_cells();
    std::vector<int> xi(lam.size());
    for (std::size_t m = 0; m < lam.size(); ++m) xi[m] = 2 * (lam[m] - 1) + 1;
    const CoefficientTT A{perturbed(n0, xi, 1.0, seed + 1), perturbed(n0, xi, 0.0, seed + 2),
                          perturbed(n0, xi, 1.2, seed + 3)};
    const TensorTrain f = perturbed(n0, xi, 1.0, seed + 4);

    const DiscreteOperatorTT L = assemble_tt_operator(A, sp, lam, lam);
    const Eigen::MatrixXd Ld = oracle::galerkin_matrix(A, sp, lam, lam);
    const Eigen::MatrixXd Lt = tt_operator_to_dense(L.stacked());
    rep.checks.push_back({tag + " operator", (Ld - Lt).norm() / Ld.norm(), tol});

    const TensorTrain F = assemble_tt_rhs(f, sp, lam);
    const Eigen::VectorXd Fd = oracle::galerkin_rhs(f, sp, lam);
    rep.checks.push_back({tag + " rhs", (Fd - tt_to_full(F)).norm() / Fd.norm(), tol});

    const Eigen::VectorXd u = oracle::galerkin_solve(Ld, Fd);
    const PreconditionerH H(sp);
    const TensorTrain W0 = tt_random(sp.num_dofs(), lam, tt_max_ranks(sp.num_dofs(), lam), seed + 5);
    AlsConfig cfg;
    cfg.tol = 1e-13;
    const AlsResult sol = als_solve(L, F, W0, H, cfg);
    rep.checks.push_back({tag + " ALS solution", (tt_to_full(sol.W) - u).norm() / u.norm(), tol});

    const TensorTrain Wp = tt_add(sol.W, tt_scale(tt_random(sp.num_dofs(), lam, std::vector<int>(lam.size(), 1),
                                                            seed + 6), 0.01));
    const EstimatorReport r = estimate(Wp, f, A, sp, H, lam);
    const oracle::Estimates o = oracle::estimates(tt_to_full(Wp), f, A, sp, lam);
    rep.checks.push_back({tag + " eta", rel(r.eta, o.eta), tol});
    rep.checks.push_back({tag + " eta_T", rel_vec(r.eta_T, o.eta_T), tol});
    rep.checks.push_back({tag + " eta_S", rel_vec(r.eta_S, o.eta_S), tol});
    rep.checks.push_back({tag + " zeta", rel(r.zeta, o.zeta), tol});
    rep.checks.push_back({tag + " zeta_m", rel_vec(r.zeta_m, o.zeta_m), tol});
    rep.checks.push_back({tag + " iota", rel(r.iota, o.iota), tol});
}

}  // namespace

bool ValidationReport::all_pass() const
{
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass(); });
}

std::shared_ptr<const TriMesh> hexagon_mesh()
{
    std::vector<Point> v = {{-1.5, 0.0}, {-0.5, 1.0}, {0.5, 1.0}, {1.5, 0.0},
                            {0.5, -1.0}, {-0.5, -1.0}, {-0.5, 0.0}, {0.5, 0.0}};
    const int b0 = 0, b1 = 1, b2 = 2, b3 = 3, b4 = 4, b5 = 5, i1 = 6, i2 = 7;
    std::vector<std::array<int, 3>> c = {{i1, i2, b2}, {i1, b2, b1}, {i1, b4, i2}, {i1, b5, b4},
                                         {i1, b1, b0}, {i1, b0, b5}, {i2, b3, b2}, {i2, b4, b3}};
    return std::make_shared<const TriMesh>(std::move(v), std::move(c));
}

ValidationReport run_oracle_suite(std::uint64_t seed, double tol)
{
    const auto t0 = std::chrono::steady_clock::now();
    ValidationReport rep;
    instance(rep, "d=(3,2)", {3, 2}, seed, tol);
    instance(rep, "d=(3,3)", {3, 3}, seed + 100, tol);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace rdsg
