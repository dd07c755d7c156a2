#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "helpers.hpp"
#include "rdsg/als.hpp"
#include "rdsg/dense_oracle.hpp"
#include "rdsg/estimators.hpp"
#include "rdsg/galerkin.hpp"

using namespace rdsg;

namespace {

TensorTrain perturbed(int n0, const std::vector<int>& dims, double base, std::uint64_t seed, double amp = 0.05)
{
    TensorTrain t = tt_scale(tt_random(n0, dims, std::vector<int>(dims.size(), 2), seed), amp);
    if (base != 0.0) t = tt_add(tt_constant(Eigen::VectorXd::Constant(n0, base), dims), t);
    return t;
}

std::vector<int> xi_of(const std::vector<int>& lam)
{
    std::vector<int> xi(lam.size());
    for (std::size_t m = 0; m < lam.size(); ++m) xi[m] = 2 * (lam[m] - 1) + 1;
    return xi;
}

struct Problem {
    std::shared_ptr<const TriMesh> mesh;
    std::unique_ptr<FeSpaceP1> space;
    CoefficientTT A;
    TensorTrain f;
    std::vector<int> lam;
};

Problem make_problem(std::shared_ptr<const TriMesh> mesh, const std::vector<int>& lam, std::uint64_t seed)
{
    Problem p;
    p.mesh = mesh;
    p.space = std::make_unique<FeSpaceP1>(mesh);
    p.lam = lam;
    const int n0 = mesh->num_cells();
    const auto xi = xi_of(lam);
    p.A = {perturbed(n0, xi, 1.0, seed + 1), perturbed(n0, xi, 0.0, seed + 2), perturbed(n0, xi, 1.2, seed + 3)};
    p.f = perturbed(n0, xi, 1.0, seed + 4);
    return p;
}

CoefficientTT identity_coef(int n0, const std::vector<int>& dims)
{
    return {tt_constant(Eigen::VectorXd::Ones(n0), dims), tt_constant(Eigen::VectorXd::Zero(n0), dims),
            tt_constant(Eigen::VectorXd::Ones(n0), dims)};
}

}  // namespace

TEST_CASE("oracle suite passes on the tiny instances within the time budget")
{
    const ValidationReport rep = run_oracle_suite();
    for (const auto& c : rep.checks) {
        INFO(c.name << " error " << c.error);
        CHECK(c.pass());
    }
    CHECK(rep.all_pass());
    CHECK(rep.seconds < 30.0);
}

TEST_CASE("Galerkin operator is symmetric and matches the dense assembly")
{
    const Problem p = make_problem(testing::shared(make_reference_domain("circle", 0)), {2, 3}, 10);
    const DiscreteOperatorTT L = assemble_tt_operator(p.A, *p.space, p.lam, p.lam);
    const Eigen::MatrixXd D = tt_operator_to_dense(L.stacked());
    CHECK((D - D.transpose()).norm() < 1e-12 * D.norm());
    const Eigen::MatrixXd O = oracle::galerkin_matrix(p.A, *p.space, p.lam, p.lam);
    CHECK((D - O).norm() < 1e-12 * O.norm());
    // positive definite for a uniformly elliptic coefficient
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (D + D.transpose()));
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    // unsummed terms and the stacked operator act identically
    const TensorTrain x = tt_random(p.space->num_dofs(), p.lam, {2, 2}, 3);
    CHECK((tt_to_full(L.apply(x)) - D * tt_to_full(x)).norm() < 1e-12 * (D * tt_to_full(x)).norm());
    CHECK(L.stacked().rank0() < 4 * p.A.a11.phys.cols() + 1);
}

TEST_CASE("rectangular operator blocks agree with the dense assembly")
{
    const Problem p = make_problem(testing::shared(make_reference_domain("lshape", 0)), {2, 2}, 20);
    const std::vector<int> out = {3, 2};
    const DiscreteOperatorTT L = assemble_tt_operator(p.A, *p.space, out, p.lam);
    const Eigen::MatrixXd O = oracle::galerkin_matrix(p.A, *p.space, out, p.lam);
    CHECK((tt_operator_to_dense(L.stacked()) - O).norm() < 1e-12 * O.norm());
    CHECK_THROWS_AS((void)assemble_tt_operator(p.A, *p.space, {6, 6}, {6, 6}), std::invalid_argument);
}

TEST_CASE("identity coefficient gives the Laplacian times the identity")
{
    const auto mesh = testing::shared(make_reference_domain("circle", 1));
    const FeSpaceP1 sp(mesh);
    const std::vector<int> lam = {2, 3};
    const DiscreteOperatorTT L = assemble_tt_operator(identity_coef(mesh->num_cells(), xi_of(lam)), sp, lam, lam);
    const Eigen::MatrixXd D = tt_operator_to_dense(L.stacked());
    const Eigen::MatrixXd K = Eigen::MatrixXd(assemble_laplacian(sp));
    Eigen::MatrixXd KI = Eigen::MatrixXd::Zero(D.rows(), D.cols());
    const int s = 6;
    for (int i = 0; i < K.rows(); ++i)
        for (int j = 0; j < K.cols(); ++j)
            for (int a = 0; a < s; ++a) KI(i * s + a, j * s + a) = K(i, j);
    CHECK((D - KI).norm() < 1e-13 * KI.norm());
}

TEST_CASE("right-hand side: deterministic load in mode zero")
{
    const auto mesh = testing::shared(make_reference_domain("lshape", 1));
    const FeSpaceP1 sp(mesh);
    const std::vector<int> xi = {3, 3};
    const TensorTrain f = tt_constant(Eigen::VectorXd::Ones(mesh->num_cells()), xi);
    const TensorTrain F = assemble_tt_rhs(f, sp, {2, 2});
    CHECK(F.dims() == std::vector<int>{2, 2});
    const Eigen::VectorXd b = assemble_load_p0(sp, std::vector<double>(mesh->num_cells(), 1.0));
    CHECK((tt_eval_slice(F, {0, 0}) - b).norm() < 1e-14);
    CHECK(tt_eval_slice(F, {1, 0}).norm() < 1e-14);
    CHECK(tt_eval_slice(F, {0, 1}).norm() < 1e-14);
}

TEST_CASE("preconditioner apply, inverse and whitening")
{
    const auto mesh = testing::shared(make_reference_domain("circle", 2));
    const FeSpaceP1 sp(mesh);
    const PreconditionerH H(sp);
    const TensorTrain x = tt_random(sp.num_dofs(), {2, 2}, {2, 2}, 4);
    const TensorTrain y = apply_preconditioner_inverse(H, apply_preconditioner(H, x));
    CHECK((tt_to_full(y) - tt_to_full(x)).norm() < 1e-10 * tt_norm(x));
    const Eigen::MatrixXd X = x.phys;
    const Eigen::MatrixXd Z = H.whiten(X);
    const double lhs = Z.squaredNorm();
    const double rhs = (X.transpose() * H.solve(X)).trace();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    CHECK((Eigen::MatrixXd(H.matrix()) - Eigen::MatrixXd(assemble_laplacian(sp))).norm() < 1e-14);
}

TEST_CASE("ALS on a deterministic problem is one direct solve")
{
    const auto mesh = testing::shared(make_reference_domain("circle", 2));
    const FeSpaceP1 sp(mesh);
    const std::vector<int> lam = {1};
    const auto xi = xi_of(lam);
    const DiscreteOperatorTT L = assemble_tt_operator(identity_coef(mesh->num_cells(), xi), sp, lam, lam);
    const TensorTrain F =
        assemble_tt_rhs(tt_constant(Eigen::VectorXd::Ones(mesh->num_cells()), xi), sp, lam);
    const PreconditionerH H(sp);
    AlsConfig cfg;
    cfg.tol = 1e-12;
    const AlsResult r = als_solve(L, F, tt_random(sp.num_dofs(), lam, {1}, 2), H, cfg);
    Eigen::SimplicialLLT<SparseMatrix> llt(assemble_laplacian(sp));
    const Eigen::VectorXd u = llt.solve(assemble_load_p0(sp, std::vector<double>(mesh->num_cells(), 1.0)));
    CHECK((tt_to_full(r.W) - u).norm() < 1e-9 * u.norm());
    CHECK(r.iota_history.back() < 1e-9 * tt_norm(F));
    CHECK(r.W.orth == Orthogonality::left);
}

TEST_CASE("ALS at full rank reproduces the dense solve; iota is monotone")
{
    const Problem p = make_problem(hexagon_mesh(), {3, 2}, 30);
    const DiscreteOperatorTT L = assemble_tt_operator(p.A, *p.space, p.lam, p.lam);
    const TensorTrain F = assemble_tt_rhs(p.f, *p.space, p.lam);
    const Eigen::MatrixXd Ld = oracle::galerkin_matrix(p.A, *p.space, p.lam, p.lam);
    const Eigen::VectorXd u = oracle::galerkin_solve(Ld, oracle::galerkin_rhs(p.f, *p.space, p.lam));
    const PreconditionerH H(*p.space);
    AlsConfig cfg;
    cfg.tol = 1e-13;
    const auto ranks = tt_max_ranks(p.space->num_dofs(), p.lam);
    const AlsResult r = als_solve(L, F, tt_random(p.space->num_dofs(), p.lam, ranks, 5), H, cfg);
    CHECK((tt_to_full(r.W) - u).norm() < 1e-8 * u.norm());
    CHECK(r.monotone);
    for (std::size_t k = 1; k < r.iota_history.size(); ++k)
        CHECK(r.iota_history[k] <= r.iota_history[k - 1] * (1 + 1e-10) + 1e-15);
    CHECK(iota_value(L.stacked(), r.W, F, H) < 1e-8 * tt_norm(F));
}

TEST_CASE("ALS at restricted rank: monotone, reproducible, fixed point")
{
    const Problem p = make_problem(testing::shared(make_reference_domain("circle", 1)), {3, 3, 2}, 40);
    const DiscreteOperatorTT L = assemble_tt_operator(p.A, *p.space, p.lam, p.lam);
    const TensorTrain F = assemble_tt_rhs(p.f, *p.space, p.lam);
    const PreconditionerH H(*p.space);
    AlsConfig cfg;
    cfg.max_sweeps = 6;
    cfg.tol = 1e-10;
    const TensorTrain W0 = tt_random(p.space->num_dofs(), p.lam, {2, 2, 2}, 6);
    const AlsResult a = als_solve(L, F, W0, H, cfg);
    const AlsResult b = als_solve(L, F, W0, H, cfg);
    CHECK(a.monotone);
    CHECK(a.iota_history.back() < a.iota_history.front());
    CHECK(a.W.ranks() == std::vector<int>{2, 2, 2});
    CHECK((tt_to_full(a.W) - tt_to_full(b.W)).norm() == 0.0);
    CHECK(a.iota_history == b.iota_history);
    // restarting from the result cannot make it worse
    AlsConfig one = cfg;
    one.max_sweeps = 1;
    const AlsResult c = als_solve(L, F, a.W, H, one);
    CHECK(c.iota_history.back() <= a.iota_history.back() * (1 + 1e-8));
    CHECK(iota(L, a.W, F, H) == doctest::Approx(a.iota_history.back()).epsilon(1e-8));

    AlsConfig bad;
    bad.max_sweeps = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = AlsConfig{};
    bad.tol = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("rank increase grows every bond by one and barely moves the tensor")
{
    const TensorTrain W = tt_random(20, {3, 3, 2}, {2, 2, 1}, 7);
    const TensorTrain V = increase_rank(W, 8, 1e-3);
    CHECK(V.ranks() == std::vector<int>{3, 3, 2});
    CHECK((tt_to_full(V) - tt_to_full(W)).norm() <= 1e-3 * tt_norm(W) * (1 + 1e-12));
    // capped at the largest representable rank
    const TensorTrain full = tt_random(2, {2, 2}, tt_max_ranks(2, {2, 2}), 9);
    CHECK(increase_rank(full, 1).ranks() == tt_max_ranks(2, {2, 2}));
}

TEST_CASE("combine")
{
    CHECK(combine(0.0, 0.0, 0.0) == 0.0);
    CHECK(combine(3.0, 4.0, 0.0) == doctest::Approx(7.0));
    CHECK(combine(1.0, 1.0, 1.0) == doctest::Approx(std::sqrt(10.0)));
    const EstimatorWeights w{2.0, 0.5, 1.0};
    CHECK(combine(1.0, 2.0, 1.0, w) == doctest::Approx(std::sqrt(16.0 + 1.0)));
}

TEST_CASE("volume indicator of the unit triangle")
{
    const auto mesh = testing::shared(testing::unit_triangle());
    const TensorTrain f = tt_constant(Eigen::VectorXd::Ones(1), {3});
    const auto e = eta_volume(f, *mesh, {2});
    REQUIRE(e.size() == 1);
    CHECK(e[0] == doctest::Approx(mesh->diameter(0) * std::sqrt(0.5)).epsilon(1e-14));
    CHECK(mesh->diameter(0) == doctest::Approx(std::sqrt(2.0)));
    // the load outside Lambda does not count
    TensorTrain g = tt_constant(Eigen::VectorXd::Ones(1), {3});
    g.cores[0](0, 0, 0) = 0.0;
    g.cores[0](0, 2, 0) = 1.0;
    CHECK(eta_volume(g, *mesh, {2})[0] == 0.0);
}

TEST_CASE("zero residual cases")
{
    const auto mesh = testing::shared(make_reference_domain("circle", 1));
    const FeSpaceP1 sp(mesh);
    const std::vector<int> lam = {2, 2};
    const auto xi = xi_of(lam);
    const PreconditionerH H(sp);
    const CoefficientTT I = identity_coef(mesh->num_cells(), xi);
    const TensorTrain zf = tt_constant(Eigen::VectorXd::Zero(mesh->num_cells()), xi);
    const TensorTrain zw = tt_constant(Eigen::VectorXd::Zero(sp.num_dofs()), lam);
    const EstimatorReport r = estimate(zw, zf, I, sp, H, lam);
    CHECK(r.eta == 0.0);
    CHECK(r.zeta == 0.0);
    CHECK(r.iota == 0.0);
    CHECK(r.theta == 0.0);

    // deterministic data and a parameter independent w leave no tail residual
    const TensorTrain f = tt_constant(Eigen::VectorXd::Ones(mesh->num_cells()), xi);
    const TensorTrain w = tt_constant(Eigen::VectorXd::Constant(sp.num_dofs(), 0.1), lam);
    const TailEstimate t = zeta(w, f, I, sp, H, lam);
    CHECK(t.zeta < 1e-14);
    for (double z : t.zeta_m) CHECK(z < 1e-14);
    CHECK(t.iota > 0.0);
}

TEST_CASE("estimators are invariant under orthogonalization and match the dense estimates")
{
    const Problem p = make_problem(testing::shared(make_reference_domain("circle", 0)), {2, 2}, 50);
    const PreconditionerH H(*p.space);
    const TensorTrain w = tt_random(p.space->num_dofs(), p.lam, {2, 2}, 11);
    const EstimatorReport a = estimate(w, p.f, p.A, *p.space, H, p.lam);
    const EstimatorReport b = estimate(orthogonalize(w, Orthogonality::left), p.f, p.A, *p.space, H, p.lam);
    const EstimatorReport c = estimate(orthogonalize(w, Orthogonality::right), p.f, p.A, *p.space, H, p.lam);
    for (const EstimatorReport* r : {&b, &c}) {
        CHECK(r->eta == doctest::Approx(a.eta).epsilon(1e-12));
        CHECK(r->zeta == doctest::Approx(a.zeta).epsilon(1e-12));
        CHECK(r->iota == doctest::Approx(a.iota).epsilon(1e-12));
    }
    const oracle::Estimates o = oracle::estimates(tt_to_full(w), p.f, p.A, *p.space, p.lam);
    CHECK(a.eta == doctest::Approx(o.eta).epsilon(1e-10));
    CHECK(a.zeta == doctest::Approx(o.zeta).epsilon(1e-10));
    CHECK(a.iota == doctest::Approx(o.iota).epsilon(1e-10));
    CHECK(a.theta == doctest::Approx(combine(a.eta, a.zeta, a.iota)).epsilon(1e-14));
    double s = 0.0;
    for (double z : a.zeta_m) s += z;
    CHECK(a.zeta_sum == doctest::Approx(s).epsilon(1e-14));
    // the whole tail dominates each single layer
    for (double z : a.zeta_m) CHECK(z <= a.zeta * (1 + 1e-12));
}

TEST_CASE("restricted Gram matrix equals the explicit sum")
{
    const TensorTrain t = tt_random(3, {3, 2, 3}, {2, 2, 2}, 12);
    const Eigen::MatrixXd G = restricted_gram(t.cores, {1, 0, 1}, {3, 2, 2});
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(2, 2);
    for (int a = 1; a < 3; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 1; c < 2; ++c) {
                const Eigen::MatrixXd v = t.cores[0].slice(a) * t.cores[1].slice(b) * t.cores[2].slice(c);
                want += v * v.transpose();
            }
    CHECK((G - want).norm() < 1e-13 * want.norm());
}

TEST_CASE("deterministic estimator equals the classical residual estimator")
{
    const auto mesh = testing::shared(make_reference_domain("lshape", 1));
    const FeSpaceP1 sp(mesh);
    const std::vector<int> lam = {1};
    const auto xi = xi_of(lam);
    const PreconditionerH H(sp);
    std::vector<double> fc(mesh->num_cells());
    for (int c = 0; c < mesh->num_cells(); ++c) fc[c] = 1.0 + 0.5 * mesh->centroid(c).x();
    Eigen::VectorXd fv = Eigen::Map<Eigen::VectorXd>(fc.data(), Eigen::Index(fc.size()));
    const TensorTrain f = tt_constant(fv, xi);
    Eigen::SimplicialLLT<SparseMatrix> llt(assemble_laplacian(sp));
    const Eigen::VectorXd u = llt.solve(assemble_load_p0(sp, fc));
    const TensorTrain w = tt_constant(u, lam);
    const EstimatorReport r = estimate(w, f, identity_coef(mesh->num_cells(), xi), sp, H, lam);
    const Eigen::VectorXd uv = sp.extend(u);
    const oracle::ScalarEstimate s =
        oracle::scalar_residual_estimator(*mesh, std::vector<double>(uv.data(), uv.data() + uv.size()), fc);
    CHECK(r.eta == doctest::Approx(s.eta).epsilon(1e-12));
    for (std::size_t c = 0; c < s.eta_T.size(); ++c) CHECK(r.eta_T[c] == doctest::Approx(s.eta_T[c]).epsilon(1e-12));
    for (std::size_t e = 0; e < s.eta_S.size(); ++e)
        CHECK(std::abs(r.eta_S[e] - s.eta_S[e]) <= 1e-12 * (1 + s.eta_S[e]));
}
