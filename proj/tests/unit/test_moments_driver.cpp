#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SparseCholesky>

#include "helpers.hpp"
#include "rdsg/adaptive.hpp"
#include "rdsg/config.hpp"
#include "rdsg/dense_oracle.hpp"
#include "rdsg/moments.hpp"
#include "rdsg/reconstruct.hpp"

using namespace rdsg;

namespace {

RunConfig small_config()
{
    RunConfig c;
    c.kl_level = 1;
    c.max_dofs = 150;
    c.max_iter = 8;
    c.mc_samples = 200;
    // cheap data fits: the structural checks below do not depend on their accuracy
    c.n_samples = 300;
    c.recon_rank = 3;
    c.recon_sweeps = 4;
    return c;
}

}  // namespace

TEST_CASE("TT moments: mean from mode zero, variance from the other modes")
{
    const auto mesh = testing::shared(make_reference_domain("circle", 1));
    const FeSpaceP1 sp(mesh);
    const int n = sp.num_dofs();
    Eigen::VectorXd u0(n), u1(n);
    for (int i = 0; i < n; ++i) {
        u0[i] = 1.0 + 0.1 * i;
        u1[i] = 0.01 * (i % 5) - 0.02;
    }
    // W(y) = u0 + u1 P_1(y_1): mean u0, variance u1^2
    TensorTrain W;
    W.phys.resize(n, 2);
    W.phys.col(0) = u0;
    W.phys.col(1) = u1;
    W.cores = {Core3(2, 2, 1)};
    W.cores[0](0, 0, 0) = 1.0;
    W.cores[0](1, 1, 0) = 1.0;
    const MomentFields m = moments_tt(W, sp);
    const Eigen::VectorXd mv = sp.extend(u0), vv = sp.extend(u1.cwiseAbs2());
    for (int v = 0; v < mesh->num_vertices(); ++v) {
        CHECK(m.mean[v] == doctest::Approx(mv[v]).epsilon(1e-13));
        CHECK(std::abs(m.variance[v] - vv[v]) <= 1e-14);
    }
    CHECK(m.samples == 0);

    // parameter independent W has zero variance
    const MomentFields c = moments_tt(tt_constant(u0, {3, 2}), sp);
    for (double v : c.variance) CHECK(v <= 1e-14);
    CHECK_THROWS_AS((void)moments_tt(tt_constant(Eigen::VectorXd::Ones(n + 1), {2}), sp), std::invalid_argument);
}

TEST_CASE("rate fit")
{
    const std::vector<double> dofs = {10, 100, 1000, 10000};
    std::vector<double> e(4);
    for (int i = 0; i < 4; ++i) e[i] = 3.0 * std::pow(dofs[i], -0.5);
    CHECK(fit_rate(dofs, e) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS((void)fit_rate({1, 2}, {1, 1}), std::invalid_argument);
    CHECK_THROWS_AS((void)fit_rate({5, 5, 5}, {1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS((void)fit_rate({1, 2, 3}, {1, 0, 1}), std::invalid_argument);
}

TEST_CASE("error metrics")
{
    const TriMesh mesh = make_reference_domain("lshape", 1);
    const int NV = mesh.num_vertices();
    MomentFields a, b;
    a.mean.assign(NV, 0.0);
    a.variance.assign(NV, 0.0);
    for (int v = 0; v < NV; ++v) {
        a.mean[v] = mesh.is_boundary_vertex(v) ? 0.0 : 1.0 + mesh.vertex(v).x();
        a.variance[v] = 0.1 + mesh.vertex(v).y() * mesh.vertex(v).y();
    }
    ErrorMetrics z = error_metrics(a, a, mesh);
    CHECK(z.e_E == 0.0);
    CHECK(z.e_V == 0.0);
    b = a;
    for (auto& x : b.mean) x *= 1.1;
    for (auto& x : b.variance) x *= 0.8;
    const ErrorMetrics e = error_metrics(b, a, mesh);
    CHECK(e.e_E == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(e.e_V == doctest::Approx(0.2).epsilon(1e-12));
    b.mean.pop_back();
    CHECK_THROWS_AS((void)error_metrics(b, a, mesh), std::invalid_argument);
}

TEST_CASE("sampling reference: deterministic domain and standard error scaling")
{
    const auto mesh = testing::shared(make_reference_domain("circle", 2));
    const FeSpaceP1 sp(mesh);
    CovKernel zero = CovKernel::reference();
    zero.scale = 0.0;
    const KLExpansion det = kl_from_covariance(mesh, zero, 0.5);
    const MomentFields d = reference_moments(det, sp, 4, SampleRule::mc, 1);
    Eigen::SimplicialLLT<SparseMatrix> llt(assemble_laplacian(sp));
    const Eigen::VectorXd u = sp.extend(llt.solve(assemble_load_p0(sp, std::vector<double>(mesh->num_cells(), 1.0))));
    for (int v = 0; v < mesh->num_vertices(); ++v) {
        CHECK(d.mean[v] == doctest::Approx(u[v]).epsilon(1e-12));
        CHECK(std::abs(d.variance[v]) < 1e-15);
    }
    CHECK(d.mean_se < 1e-12);

    const KLExpansion kl = kl_from_covariance(mesh, CovKernel::reference(), 0.5);
    const MomentFields a = reference_moments(kl, sp, 100, SampleRule::mc, 3);
    const MomentFields b = reference_moments(kl, sp, 400, SampleRule::mc, 3);
    CHECK(a.samples == 100);
    const double ratio = b.mean_se / a.mean_se;
    CHECK(ratio > 0.35);
    CHECK(ratio < 0.65);
    // batch merging is deterministic
    const MomentFields a2 = reference_moments(kl, sp, 100, SampleRule::mc, 3);
    CHECK(a2.mean == a.mean);
    CHECK(a2.variance == a.variance);
    // the TT-free sample solve agrees with the reference at one point
    const std::vector<double> y0(kl.num_modes(), 0.0);
    const Eigen::VectorXd s0 = sp.extend(sample_solve(kl, sp, y0));
    for (int v = 0; v < mesh->num_vertices(); ++v) CHECK(s0[v] == doctest::Approx(u[v]).epsilon(1e-12));
    CHECK_THROWS_AS((void)reference_moments(kl, sp, 1, SampleRule::mc, 3), std::invalid_argument);
}

TEST_CASE("quasi Monte Carlo points stay in the box and are reproducible")
{
    for (std::uint64_t k = 0; k < 64; ++k) {
        const auto p = rule_point(SampleRule::qmc, 4, 2, k);
        CHECK(p == rule_point(SampleRule::qmc, 4, 2, k));
        for (double v : p) CHECK(std::abs(v) <= 1.0);
    }
    CHECK(rule_point(SampleRule::mc, 3, 5, 7) == draw_parameter(3, 5, 7));
}

TEST_CASE("prolongation along a mesh chain")
{
    // polygonal boundary: new boundary vertices are edge midpoints
    auto m0 = testing::shared(make_reference_domain("lshape", 0));
    auto m1 = testing::shared(refine(*m0, std::vector<int>{0, 5}));
    auto m2 = testing::shared(refine_uniform(*m1));
    const std::vector<std::shared_ptr<const TriMesh>> chain = {m0, m0, m1, m2};
    std::vector<double> v(m0->num_vertices());
    for (int i = 0; i < m0->num_vertices(); ++i) v[i] = 2.0 - m0->vertex(i).x() + 0.5 * m0->vertex(i).y();
    const auto p = prolong_along(chain, 0, v);
    REQUIRE(p.size() == static_cast<std::size_t>(m2->num_vertices()));
    for (int i = 0; i < m2->num_vertices(); ++i)
        CHECK(p[i] == doctest::Approx(2.0 - m2->vertex(i).x() + 0.5 * m2->vertex(i).y()).epsilon(1e-13));
    CHECK_THROWS_AS((void)prolong_along(chain, 4, v), std::invalid_argument);
}

TEST_CASE("dispatch picks the largest part, ties to mesh then stochastic")
{
    CHECK(dispatch(3, 2, 1) == Refinement::mesh);
    CHECK(dispatch(1, 3, 2) == Refinement::stochastic);
    CHECK(dispatch(1, 2, 3) == Refinement::rank);
    CHECK(dispatch(2, 2, 2) == Refinement::mesh);
    CHECK(dispatch(1, 2, 2) == Refinement::stochastic);
    CHECK(to_string(Refinement::stochastic) == "stoch");
}

TEST_CASE("jump distribution conserves the squared edge indicators")
{
    const TriMesh m = make_reference_domain("lshape", 1);
    std::vector<double> eS(m.interior_edges().size());
    for (std::size_t e = 0; e < eS.size(); ++e) eS[e] = 0.1 + 0.01 * double(e % 7);
    const auto d = jump_distribution(m, eS);
    double s = 0.0, t = 0.0;
    for (double x : d) s += x;
    for (double x : eS) t += x * x;
    CHECK(s == doctest::Approx(t).epsilon(1e-13));
    const std::vector<double> eT(m.num_cells(), 0.2);
    const auto ind = mesh_indicators(m, eT, eS);
    double q = 0.0;
    for (double x : ind) q += x * x;
    CHECK(q == doctest::Approx(t + 0.04 * m.num_cells()).epsilon(1e-13));
    CHECK_THROWS_AS((void)jump_distribution(m, std::vector<double>(3)), std::invalid_argument);
}

TEST_CASE("TT prolongation is exact for linear physical modes and pads degrees")
{
    auto m0 = testing::shared(make_reference_domain("circle", 1));
    auto m1 = testing::shared(refine(*m0, std::vector<int>{1, 2, 3}));
    const FeSpaceP1 s0(m0), s1(m1);
    const TensorTrain W = orthogonalize(tt_random(s0.num_dofs(), {2, 2}, {2, 2}, 3), Orthogonality::left);
    const TensorTrain P = prolong(W, s0, s1, {3, 2});
    CHECK(P.dims() == std::vector<int>{3, 2});
    CHECK(P.orth == Orthogonality::left);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const Eigen::VectorXd c = s0.extend(tt_eval_slice(W, {a, b}));
            const auto f = prolong_vertex_values(*m1, std::vector<double>(c.data(), c.data() + c.size()));
            const Eigen::VectorXd g = s1.extend(tt_eval_slice(P, {a, b}));
            for (int v = 0; v < m1->num_vertices(); ++v) CHECK(g[v] == doctest::Approx(f[v]).epsilon(1e-12).scale(1e-13));
        }
    CHECK(tt_eval_slice(P, {2, 1}).norm() == 0.0);
}

TEST_CASE("corner fraction")
{
    const TriMesh m = make_reference_domain("lshape", 2);
    CHECK(corner_fraction(m, {0, 0}, 10.0) == 1.0);
    CHECK(corner_fraction(m, {0, 0}, 1e-6) == 0.0);
    const double f = corner_fraction(m, {0, 0}, 0.5);
    CHECK(f > 0.0);
    CHECK(f < 1.0);
}

TEST_CASE("reconstructed data reproduces the isotropic coefficient")
{
    const auto mesh = testing::shared(make_reference_domain("circle", 1));
    Eigen::MatrixXd mode(mesh->num_vertices(), 2);
    for (int v = 0; v < mesh->num_vertices(); ++v) mode.row(v) = 0.2 * mesh->vertex(v).transpose();
    const KLExpansion kl = kl_from_modes(mesh, {mode});
    const DataTT d = reconstruct_data(kl, {3}, 100, 3, 20, 5);
    CHECK(d.samples == 100);
    CHECK(d.holdout <= 1e-8);
    for (double y : {-0.8, 0.1, 0.9}) {
        const Eigen::VectorXd a11 = tt_eval_at(d.coef.a11, {y});
        const Eigen::VectorXd a12 = tt_eval_at(d.coef.a12, {y});
        const Eigen::VectorXd fh = tt_eval_at(d.f, {y});
        CHECK((a11.array() - 1.0).abs().maxCoeff() < 1e-8);
        CHECK(a12.cwiseAbs().maxCoeff() < 1e-8);
        CHECK((fh.array() - (1 + 0.2 * y) * (1 + 0.2 * y)).abs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("zero perturbation: the loop reduces to the deterministic FEM solve")
{
    RunConfig cfg = small_config();
    cfg.kernel_scale = 0.0;
    const LoopState st = run_adaptive(cfg);
    CHECK(st.kl.num_modes() == 0);
    REQUIRE(!st.history.empty());
    const FeSpaceP1 sp(st.mesh);
    for (const auto& r : st.history) {
        CHECK(r.report.zeta == 0.0);
        CHECK(r.refined != Refinement::stochastic);
    }
    const IterationRecord& last = st.history.back();
    const auto& mesh = *st.meshes[last.mesh_index];
    const FeSpaceP1 s(st.meshes[last.mesh_index]);
    Eigen::SimplicialLLT<SparseMatrix> llt(assemble_laplacian(s));
    const Eigen::VectorXd u = s.extend(llt.solve(assemble_load_p0(s, std::vector<double>(mesh.num_cells(), 1.0))));
    std::vector<double> diff(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) diff[v] = last.moments.mean[v] - u[v];
    CHECK(h1_seminorm(mesh, diff) <= 1e-9 * h1_seminorm(mesh, std::vector<double>(u.data(), u.data() + u.size())));
    for (double v : last.moments.variance) CHECK(v <= 1e-10);
    const oracle::ScalarEstimate se =
        oracle::scalar_residual_estimator(mesh, last.moments.mean, std::vector<double>(mesh.num_cells(), 1.0));
    CHECK(std::abs(last.report.eta - se.eta) <= 1e-12 * se.eta);
}

TEST_CASE("adaptive loop: one refinement per iteration, estimator decrease, reproducibility")
{
    const RunConfig cfg = small_config();
    const LoopState a = run_adaptive(cfg);
    const LoopState b = run_adaptive(cfg);
    REQUIRE(a.history.size() >= 3);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        const auto& r = a.history[i];
        CHECK(r.als_monotone);
        for (std::size_t k = 1; k < r.iota_history.size(); ++k)
            CHECK(r.iota_history[k] <= r.iota_history[k - 1] * (1 + 1e-10));
        CHECK(r.report.theta == b.history[i].report.theta);
        CHECK(r.refined == b.history[i].refined);
    }
    CHECK((tt_to_full(a.W) - tt_to_full(b.W)).norm() == 0.0);
    for (std::size_t i = 0; i + 1 < a.history.size(); ++i) {
        const auto& r = a.history[i];
        const auto& n = a.history[i + 1];
        CHECK(r.refined != Refinement::none);
        // exactly one of mesh, degrees, ranks changed
        const int changed = int(n.dofs != r.dofs) + int(n.dims != r.dims) + int(n.ranks != r.ranks);
        CHECK(changed == 1);
        if (r.refined == Refinement::mesh) CHECK(n.dofs > r.dofs);
        if (r.refined == Refinement::stochastic) CHECK(n.dims != r.dims);
        if (r.refined == Refinement::rank) CHECK(n.ranks != r.ranks);
    }
    CHECK(a.history.back().report.theta < a.history.front().report.theta);
    CHECK(a.history.back().refined == Refinement::none);
}

TEST_CASE("uniform refinement mode refines every cell")
{
    RunConfig cfg = small_config();
    cfg.refinement = MeshRefinement::uniform;
    cfg.max_iter = 3;
    const LoopState st = run_adaptive(cfg);
    for (std::size_t i = 0; i + 1 < st.history.size(); ++i)
        if (st.history[i].refined == Refinement::mesh) {
            const auto& m0 = *st.meshes[st.history[i].mesh_index];
            const auto& m1 = *st.meshes[st.history[i + 1].mesh_index];
            CHECK(m1.num_cells() >= 2 * m0.num_cells());
        }
}

TEST_CASE("convergence study on a short run")
{
    RunConfig cfg = small_config();
    cfg.max_dofs = 60;
    const LoopState st = run_adaptive(cfg);
    const ConvergenceStudy cs = convergence_study(st, cfg);
    CHECK(cs.rows.size() == st.history.size());
    CHECK(cs.fine->num_cells() >= 4 * st.mesh->num_cells() - 1);
    CHECK(cs.reference.samples == cfg.mc_samples);
    for (const auto& r : cs.rows) {
        CHECK(r.e_E > 0.0);
        CHECK(r.e_E < 1.0);
        CHECK(r.e_V >= 0.0);
    }
    CHECK(cs.rows.back().e_E < cs.rows.front().e_E);
    CHECK(cs.mean_se_rel > 0.0);
}
