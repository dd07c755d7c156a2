#include "rdsg/adaptive.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rdsg/als.hpp"
#include "rdsg/error.hpp"
#include "rdsg/parallel.hpp"
#include "rdsg/reconstruct.hpp"

namespace rdsg {

namespace {

// Sample matrices (N_0 x K doubles) beyond this size are capped to bound memory.
constexpr double kMaxSampleEntries = 6.0e7;

enum class Purpose : std::uint64_t { init = 1, recon, holdout, als, rank };

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, int iter, Purpose p)
{
    return splitmix(splitmix(splitmix(seed) ^ static_cast<std::uint64_t>(iter)) ^ static_cast<std::uint64_t>(p));
}

std::vector<int> coef_dims(const std::vector<int>& d)
{
    std::vector<int> xi(d.size());
    for (std::size_t m = 0; m < d.size(); ++m) xi[m] = 2 * (d[m] - 1) + 1;
    return xi;
}

std::vector<int> capped_ranks(int n_phys, const std::vector<int>& dims, int r)
{
    std::vector<int> ranks = tt_max_ranks(n_phys, dims);
    for (int& x : ranks) x = std::max(1, std::min(x, r));
    return ranks;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format_double(double x)
{
    std::ostringstream s;
    s.precision(3);
    s << x;
    return s.str();
}

}  // namespace

std::string to_string(Refinement r)
{
    switch (r) {
    case Refinement::none: return "none";
    case Refinement::mesh: return "mesh";
    case Refinement::stochastic: return "stoch";
    case Refinement::rank: return "rank";
    }
    return "none";
}

Refinement dispatch(double eta, double zeta, double iota)
{
    if (eta >= zeta && eta >= iota) return Refinement::mesh;
    if (zeta >= iota) return Refinement::stochastic;
    return Refinement::rank;
}

std::vector<double> jump_distribution(const TriMesh& mesh, const std::vector<double>& eta_S)
{
    const auto& edges = mesh.interior_edges();
    if (eta_S.size() != edges.size()) throw std::invalid_argument("jump_distribution: one value per interior edge");
    std::vector<double> out(mesh.num_cells(), 0.0);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const Edge& E = mesh.edge(edges[e]);
        const double half = 0.5 * eta_S[e] * eta_S[e];
        for (int c : E.cells)
            if (c >= 0) out[c] += half;
    }
    return out;
}

std::vector<double> mesh_indicators(const TriMesh& mesh, const std::vector<double>& eta_T,
                                    const std::vector<double>& eta_S)
{
    if (eta_T.size() != static_cast<std::size_t>(mesh.num_cells()))
        throw std::invalid_argument("mesh_indicators: one volume value per cell");
    std::vector<double> out = jump_distribution(mesh, eta_S);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = std::sqrt(out[c] + eta_T[c] * eta_T[c]);
    return out;
}

TensorTrain prolong(const TensorTrain& W, const FeSpaceP1& old_space, const FeSpaceP1& new_space,
                    const std::vector<int>& new_dims)
{
    W.validate();
    if (W.phys_dim() != old_space.num_dofs()) throw std::invalid_argument("prolong: W does not live on old_space");
    TensorTrain out = W;
    if (new_space.mesh_ptr() != old_space.mesh_ptr()) {
        const TriMesh& fine = new_space.mesh();
        if (fine.vertex_parents().size() != static_cast<std::size_t>(fine.num_vertices()))
            throw std::invalid_argument("prolong: new mesh carries no parent information");
        out.phys.resize(new_space.num_dofs(), W.phys.cols());
        for (Eigen::Index k = 0; k < W.phys.cols(); ++k) {
            const Eigen::VectorXd coarse = old_space.extend(W.phys.col(k));
            const std::vector<double> v = prolong_vertex_values(fine, std::span<const double>(coarse.data(), coarse.size()));
            out.phys.col(k) = new_space.restrict(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
    }
    if (out.dims() != new_dims) {
        const Orthogonality o = out.orth;
        out = tt_resize_modes(out, new_dims);
        // zero padding keeps left-orthogonality of the stochastic cores
        if (o == Orthogonality::left) out.orth = Orthogonality::left;
    }
    return out;
}

DataTT reconstruct_data(const KLExpansion& kl, const std::vector<int>& xi_dims, int n_samples, int rank, int sweeps,
                        std::uint64_t seed)
{
    const int M = kl.num_modes();
    if (static_cast<int>(xi_dims.size()) != M) throw std::invalid_argument("reconstruct_data: one degree per mode");
    const int N0 = kl.mesh().num_cells();
    const int Kh = std::max(n_samples / 5, 50);
    const std::uint64_t hseed = splitmix(seed ^ 0x5851F42D4C957F2DULL);

    ReconstructConfig rc;
    rc.dims = xi_dims;
    rc.max_rank = rank;
    rc.max_sweeps = sweeps;
    rc.seed = seed;

    auto quantity = [&](int which) {
        return [&kl, which](const std::vector<double>& y) {
            const FieldEval fe = field_eval(kl, y);
            Eigen::VectorXd v(static_cast<Eigen::Index>(fe.A.size()));
            for (std::size_t c = 0; c < fe.A.size(); ++c) {
                switch (which) {
                case 0: v[c] = fe.A[c](0, 0); break;
                case 1: v[c] = 0.5 * (fe.A[c](0, 1) + fe.A[c](1, 0)); break;
                case 2: v[c] = fe.A[c](1, 1); break;
                default: v[c] = fe.fhat[c]; break;
                }
            }
            return v;
        };
    };

    DataTT out;
    out.samples = n_samples;
    double err2 = 0.0, norm2 = 0.0;
    TensorTrain* targets[4] = {&out.coef.a11, &out.coef.a12, &out.coef.a22, &out.f};
    for (int q = 0; q < 4; ++q) {
        TensorTrain tt;
        {
            const SampleSet train = make_samples(M, n_samples, seed, N0, quantity(q));
            tt = reconstruct(train, rc).tt;
        }
        const SampleSet hold = make_samples(M, Kh, hseed, N0, quantity(q));
        const double n2 = hold.values.squaredNorm();
        const double e = holdout_error(tt, hold);
        err2 += e * e * n2;
        norm2 += n2;
        *targets[q] = std::move(tt);
    }
    out.holdout = norm2 > 0.0 ? std::sqrt(err2 / norm2) : 0.0;
    return out;
}

KLExpansion build_kl(const RunConfig& cfg)
{
    cfg.validate();
    auto mesh = std::make_shared<const TriMesh>(make_reference_domain(cfg.domain, cfg.kl_level));
    CovKernel kernel = CovKernel::reference();
    kernel.scale *= cfg.kernel_scale;
    return kl_from_covariance(mesh, kernel, cfg.kl_tol);
}

LoopState run_adaptive(const RunConfig& cfg, const IterationCallback& progress)
{
    return run_adaptive(cfg, build_kl(cfg), progress);
}

LoopState run_adaptive(const RunConfig& cfg, const KLExpansion& kl, const IterationCallback& progress)
{
    cfg.validate();
    if (cfg.workers > 0) set_workers(cfg.workers);
    LoopState st;
    st.kl = kl;
    st.mesh = std::make_shared<const TriMesh>(make_reference_domain(cfg.domain, cfg.mesh_level));
    const int M = kl.num_modes();
    st.dims.assign(M, cfg.init_degree);
    st.tau = cfg.als.tol;
    const int recon_rank = cfg.recon_rank > 0 ? cfg.recon_rank : M + 2;

    auto space = std::make_unique<FeSpaceP1>(st.mesh);
    st.W = tt_random(space->num_dofs(), st.dims, capped_ranks(space->num_dofs(), st.dims, cfg.init_rank),
                     derive_seed(cfg.seed, 0, Purpose::init));

    DataTT data;
    const TriMesh* data_mesh = nullptr;
    std::vector<int> data_xi;
    KLExpansion local;

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        IterationRecord rec;
        rec.iter = iter;
        st.meshes.push_back(st.mesh);
        rec.mesh_index = st.meshes.size() - 1;

        // Reconstruct (reused while mesh and coefficient degrees are unchanged)
        auto t0 = std::chrono::steady_clock::now();
        const std::vector<int> xi = coef_dims(st.dims);
        if (data_mesh != st.mesh.get() || data_xi != xi) {
            if (data_mesh != st.mesh.get()) local = kl.on_mesh(st.mesh);
            int K = cfg.n_samples > 0 ? cfg.n_samples
                                      : 20 * largest_local_unknowns(xi, recon_rank, st.mesh->num_cells());
            const int cap = std::max(50, static_cast<int>(kMaxSampleEntries / st.mesh->num_cells()));
            if (K > cap) {
                st.warnings.push_back("iteration " + std::to_string(iter) + ": reconstruction samples capped at " +
                                      std::to_string(cap) + " (requested " + std::to_string(K) + ")");
                K = cap;
            }
            data = reconstruct_data(local, xi, K, recon_rank, cfg.recon_sweeps,
                                    derive_seed(cfg.seed, iter, Purpose::recon));
            data_mesh = st.mesh.get();
            data_xi = xi;
        }
        rec.seconds_reconstruct = seconds_since(t0);
        rec.holdout = data.holdout;
        rec.samples = data.samples;
        if (data.holdout > 10.0 * st.tau)
            st.warnings.push_back("iteration " + std::to_string(iter) + ": reconstruction holdout error " +
                                  format_double(data.holdout) + " exceeds 10x solver tolerance");

        // Solve
        t0 = std::chrono::steady_clock::now();
        const DiscreteOperatorTT L = assemble_tt_operator(data.coef, *space, st.dims, st.dims);
        const TensorTrain F = assemble_tt_rhs(data.f, *space, st.dims);
        const PreconditionerH H(*space);
        AlsConfig ac = cfg.als;
        ac.tol = st.tau;
        ac.seed = derive_seed(cfg.seed, iter, Purpose::als);
        AlsResult sol = als_solve(L, F, st.W, H, ac);
        st.W = std::move(sol.W);
        rec.iota_history = std::move(sol.iota_history);
        rec.als_monotone = sol.monotone;
        rec.als_sweeps = sol.sweeps;
        rec.seconds_solve = seconds_since(t0);

        // Estimate
        t0 = std::chrono::steady_clock::now();
        rec.report = estimate(st.W, data.f, data.coef, *space, H, st.dims, cfg.weights, cfg.zeta_norm);
        rec.dofs = space->num_dofs();
        rec.tt_dofs = tt_dofs(st.W);
        rec.dims = st.dims;
        rec.ranks = st.W.ranks();
        rec.tau = st.tau;
        rec.moments = moments_tt(st.W, *space);
        rec.seconds_estimate = seconds_since(t0);

        const EstimatorReport& r = rec.report;
        const Refinement choice = dispatch(r.eta, r.zeta, r.iota);
        const bool done = r.theta < cfg.epsilon || iter + 1 == cfg.max_iter ||
                          (choice == Refinement::mesh && rec.dofs >= cfg.max_dofs);
        if (done) {
            if (progress) progress(rec);
            st.history.push_back(std::move(rec));
            break;
        }

        // Refine: exactly one of mesh, Lambda, rank
        rec.refined = choice;
        if (choice == Refinement::mesh) {
            std::vector<int> marked;
            if (cfg.refinement == MeshRefinement::uniform) {
                marked.resize(st.mesh->num_cells());
                for (int c = 0; c < st.mesh->num_cells(); ++c) marked[c] = c;
            } else {
                const std::vector<double> ind = mesh_indicators(*st.mesh, r.eta_T, r.eta_S);
                marked = dorfler_mark(ind, cfg.theta_eta);
            }
            auto fine = std::make_shared<const TriMesh>(refine(*st.mesh, marked));
            auto fine_space = std::make_unique<FeSpaceP1>(fine);
            st.W = prolong(st.W, *space, *fine_space, st.dims);
            st.mesh = std::move(fine);
            space = std::move(fine_space);
        } else if (choice == Refinement::stochastic) {
            std::vector<int> marked;
            if (r.zeta_sum > 0.0) {
                marked = dorfler_mark(r.zeta_m, cfg.theta_zeta);
            } else {
                marked.resize(M);
                for (int m = 0; m < M; ++m) marked[m] = m;
            }
            for (int m : marked) ++st.dims[m];
            st.W = prolong(st.W, *space, *space, st.dims);
        } else {
            st.W = increase_rank(st.W, derive_seed(cfg.seed, iter, Purpose::rank), cfg.rank_scale);
            st.tau = std::max(0.5 * st.tau, 1e-12);
        }
        if (progress) progress(rec);
        st.history.push_back(std::move(rec));
    }
    return st;
}

double corner_fraction(const TriMesh& mesh, const Point& corner, double radius)
{
    if (mesh.num_cells() == 0) return 0.0;
    int n = 0;
    for (int c = 0; c < mesh.num_cells(); ++c)
        if ((mesh.centroid(c) - corner).norm() < radius) ++n;
    return static_cast<double>(n) / mesh.num_cells();
}

ConvergenceStudy convergence_study(const LoopState& state, const RunConfig& cfg)
{
    if (state.history.empty()) throw std::invalid_argument("convergence_study: empty history");
    ConvergenceStudy out;
    out.fine = std::make_shared<const TriMesh>(refine_uniform(*state.mesh));
    std::vector<std::shared_ptr<const TriMesh>> chain = state.meshes;
    chain.push_back(out.fine);
    const FeSpaceP1 fine_space(out.fine);
    out.reference = reference_moments(state.kl.on_mesh(out.fine), fine_space, cfg.mc_samples, cfg.mc_rule, cfg.mc_seed);

    std::vector<double> dofs, eE, eV, th;
    for (const IterationRecord& rec : state.history) {
        MomentFields m;
        m.mean = prolong_along(chain, rec.mesh_index, rec.moments.mean);
        m.variance = prolong_along(chain, rec.mesh_index, rec.moments.variance);
        const ErrorMetrics e = error_metrics(m, out.reference, *out.fine);
        ConvergenceRow row;
        row.dofs = rec.dofs;
        row.tt_dofs = rec.tt_dofs;
        row.e_E = e.e_E;
        row.e_V = e.e_V;
        row.theta = rec.report.theta;
        out.rows.push_back(row);
        dofs.push_back(rec.dofs);
        eE.push_back(std::max(e.e_E, 1e-300));
        eV.push_back(std::max(e.e_V, 1e-300));
        th.push_back(std::max(rec.report.theta, 1e-300));
    }
    const bool fit = dofs.size() >= 3 && dofs.front() != dofs.back();
    if (fit) {
        out.alpha_E = fit_rate(dofs, eE);
        out.alpha_V = fit_rate(dofs, eV);
        out.alpha_theta = fit_rate(dofs, th);
    }
    const double nm = h1_seminorm(*out.fine, out.reference.mean);
    const double nv = w11_norm(*out.fine, out.reference.variance);
    out.mean_se_rel = nm > 0.0 ? out.reference.mean_se / nm : 0.0;
    out.variance_se_rel = nv > 0.0 ? out.reference.variance_se / nv : 0.0;
    return out;
}

}  // namespace rdsg
