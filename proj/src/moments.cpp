#include "rdsg/moments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SparseCholesky>

#include "rdsg/error.hpp"
#include "rdsg/parallel.hpp"
#include "rdsg/reconstruct.hpp"

namespace rdsg {

namespace {

constexpr int kBatches = 20;

// Extensible rank-1 lattice, generator z_j = a^j mod 2^20.
constexpr std::uint64_t kLatticeBits = 20;
constexpr std::uint64_t kLatticeA = 433461;

double radical_inverse2(std::uint64_t k)
{
    double inv = 0.5, x = 0.0;
    while (k) {
        if (k & 1u) x += inv;
        inv *= 0.5;
        k >>= 1u;
    }
    return x;
}

struct Accum {
    Eigen::VectorXd s1, s2, s3, s4;
    double h1sq = 0.0;
    int n = 0;
};

}  // namespace

Eigen::VectorXd sample_solve(const KLExpansion& kl, const FeSpaceP1& space, const std::vector<double>& y,
                             const Forcing& f)
{
    const FieldEval fe = field_eval(kl, y, f);
    const SparseMatrix K = assemble_stiffness_p0(space, fe.A);
    const Eigen::VectorXd b = assemble_load_p0(space, fe.fhat);
    if (space.num_dofs() == 0) return b;
    Eigen::SimplicialLLT<SparseMatrix> llt(K);
    if (llt.info() != Eigen::Success) throw NumericalError("sample_solve: stiffness matrix is not positive definite");
    return llt.solve(b);
}

std::vector<double> rule_point(SampleRule rule, int M, std::uint64_t seed, std::uint64_t k)
{
    if (rule == SampleRule::mc) return draw_parameter(M, seed, k);
    const std::vector<double> shift = draw_parameter(M, seed ^ 0x9E3779B97F4A7C15ULL, 0);
    const double phi = radical_inverse2(k);
    std::vector<double> y(M);
    std::uint64_t z = 1;
    const std::uint64_t mask = (std::uint64_t(1) << kLatticeBits) - 1;
    for (int m = 0; m < M; ++m) {
        double x = phi * static_cast<double>(z);
        x -= std::floor(x);
        x += 0.5 * (shift[m] + 1.0);
        x -= std::floor(x);
        y[m] = 2.0 * x - 1.0;
        z = (z * kLatticeA) & mask;
    }
    return y;
}

MomentFields reference_moments(const KLExpansion& kl, const FeSpaceP1& space, int n_samples, SampleRule rule,
                               std::uint64_t seed, const Forcing& f)
{
    if (n_samples < 2) throw std::invalid_argument("reference_moments: need at least 2 samples");
    const TriMesh& mesh = space.mesh();
    if (kl.mesh().num_cells() != mesh.num_cells() || kl.mesh().num_vertices() != mesh.num_vertices())
        throw std::invalid_argument("reference_moments: expansion lives on a different mesh");
    const int M = kl.num_modes();
    const int NV = mesh.num_vertices();
    const Eigen::VectorXd base = space.extend(sample_solve(kl, space, std::vector<double>(M, 0.0), f));

    std::vector<Accum> acc(kBatches);
    parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t b, std::size_t e, int c) {
        Accum& a = acc[c];
        a.s1 = a.s2 = a.s3 = a.s4 = Eigen::VectorXd::Zero(NV);
        Eigen::SimplicialLLT<SparseMatrix> llt;
        bool analyzed = false;
        for (std::size_t k = b; k < e; ++k) {
            const auto y = rule_point(rule, M, seed, k);
            const FieldEval fe = field_eval(kl, y, f);
            const SparseMatrix K = assemble_stiffness_p0(space, fe.A);
            const Eigen::VectorXd rhs = assemble_load_p0(space, fe.fhat);
            Eigen::VectorXd u = Eigen::VectorXd::Zero(space.num_dofs());
            if (space.num_dofs() > 0) {
                if (!analyzed) {
                    llt.analyzePattern(K);
                    analyzed = true;
                }
                llt.factorize(K);
                if (llt.info() != Eigen::Success)
                    throw NumericalError("reference_moments: stiffness matrix is not positive definite");
                u = llt.solve(rhs);
            }
            const Eigen::VectorXd z = space.extend(u) - base;
            const Eigen::ArrayXd z2 = z.array().square();
            a.s1 += z;
            a.s2 += z2.matrix();
            a.s3 += (z2 * z.array()).matrix();
            a.s4 += (z2 * z2).matrix();
            const double h = h1_seminorm(mesh, std::span<const double>(z.data(), z.size()));
            a.h1sq += h * h;
            ++a.n;
        }
    }, kBatches);

    Accum t;
    t.s1 = t.s2 = t.s3 = t.s4 = Eigen::VectorXd::Zero(NV);
    for (const auto& a : acc) {
        if (a.n == 0) continue;
        t.s1 += a.s1;
        t.s2 += a.s2;
        t.s3 += a.s3;
        t.s4 += a.s4;
        t.h1sq += a.h1sq;
        t.n += a.n;
    }
    const double n = t.n;
    const Eigen::VectorXd d = t.s1 / n;
    MomentFields out;
    out.samples = t.n;
    out.mean.resize(NV);
    out.second.resize(NV);
    out.variance.resize(NV);
    std::vector<double> var_se(NV);
    for (int v = 0; v < NV; ++v) {
        const double m2 = t.s2[v] / n - d[v] * d[v];
        const double m4 = t.s4[v] / n - 4.0 * d[v] * t.s3[v] / n + 6.0 * d[v] * d[v] * t.s2[v] / n -
                          3.0 * std::pow(d[v], 4);
        double var = m2 * n / (n - 1.0);
        if (var < 0.0) {
            out.clipped = std::max(out.clipped, -var);
            var = 0.0;
        }
        out.mean[v] = base[v] + d[v];
        out.second[v] = base[v] * base[v] + 2.0 * base[v] * t.s1[v] / n + t.s2[v] / n;
        out.variance[v] = var;
        var_se[v] = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
    }
    const double dh = h1_seminorm(mesh, std::span<const double>(d.data(), d.size()));
    out.mean_se = std::sqrt(std::max(t.h1sq - n * dh * dh, 0.0) / (n * (n - 1.0)));
    out.variance_se = w11_norm(mesh, var_se);
    return out;
}

MomentFields moments_tt(const TensorTrain& W, const FeSpaceP1& space)
{
    W.validate();
    if (W.phys_dim() != space.num_dofs()) throw std::invalid_argument("moments_tt: physical dimension mismatch");
    const Eigen::VectorXd mean = tt_eval_slice(W, std::vector<int>(W.order(), 0));
    const TensorTrain U = W.orth == Orthogonality::left ? W : orthogonalize(W, Orthogonality::left);
    const Eigen::VectorXd second = U.phys.rowwise().squaredNorm();
    const Eigen::VectorXd mv = space.extend(mean);
    const Eigen::VectorXd sv = space.extend(second);
    MomentFields out;
    const int NV = space.mesh().num_vertices();
    out.mean.assign(mv.data(), mv.data() + NV);
    out.second.assign(sv.data(), sv.data() + NV);
    out.variance.resize(NV);
    for (int v = 0; v < NV; ++v) {
        double var = sv[v] - mv[v] * mv[v];
        if (var < 0.0) {
            out.clipped = std::max(out.clipped, -var);
            var = 0.0;
        }
        out.variance[v] = var;
    }
    return out;
}

ErrorMetrics error_metrics(const MomentFields& m, const MomentFields& ref, const TriMesh& mesh)
{
    const std::size_t NV = static_cast<std::size_t>(mesh.num_vertices());
    if (m.mean.size() != NV || ref.mean.size() != NV || m.variance.size() != NV || ref.variance.size() != NV)
        throw std::invalid_argument("error_metrics: fields must live on the given mesh");
    std::vector<double> dm(NV), dv(NV);
    for (std::size_t v = 0; v < NV; ++v) {
        dm[v] = ref.mean[v] - m.mean[v];
        dv[v] = ref.variance[v] - m.variance[v];
    }
    ErrorMetrics e;
    const double nm = h1_seminorm(mesh, ref.mean);
    const double nv = w11_norm(mesh, ref.variance);
    e.e_E = h1_seminorm(mesh, dm) / (nm > 0.0 ? nm : 1.0);
    e.e_V = w11_norm(mesh, dv) / (nv > 0.0 ? nv : 1.0);
    return e;
}

double fit_rate(const std::vector<double>& dofs, const std::vector<double>& errors)
{
    if (dofs.size() != errors.size()) throw std::invalid_argument("fit_rate: length mismatch");
    if (dofs.size() < 3) throw std::invalid_argument("fit_rate: at least 3 points required");
    const std::size_t n = dofs.size();
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(dofs[i] > 0.0) || !(errors[i] > 0.0)) throw std::invalid_argument("fit_rate: values must be positive");
        sx += std::log(dofs[i]);
        sy += std::log(errors[i]);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(dofs[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(errors[i]) - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_rate: all dof counts are equal");
    return -sxy / sxx;
}

std::vector<double> prolong_along(const std::vector<std::shared_ptr<const TriMesh>>& chain, std::size_t from,
                                  std::vector<double> values)
{
    if (from >= chain.size()) throw std::invalid_argument("prolong_along: index out of range");
    if (values.size() != static_cast<std::size_t>(chain[from]->num_vertices()))
        throw std::invalid_argument("prolong_along: value count mismatch");
    for (std::size_t j = from; j + 1 < chain.size(); ++j)
        if (chain[j + 1].get() != chain[j].get()) values = prolong_vertex_values(*chain[j + 1], values);
    return values;
}

}  // namespace rdsg
