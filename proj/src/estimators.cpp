#include "rdsg/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rdsg/als.hpp"
#include "rdsg/legendre.hpp"
#include "rdsg/parallel.hpp"

namespace rdsg {

namespace {

using Mat = Eigen::MatrixXd;

double frob_dot(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

/// Block-diagonal stacking of several core chains sharing mode sizes; the last core
/// sums the chains (right rank 1).
std::vector<Core3> stack_chains(const std::vector<std::vector<Core3>>& chains)
{
    const std::size_t M = chains.front().size();
    std::vector<Core3> out;
    for (std::size_t m = 0; m < M; ++m) {
        int L = 0, R = 0;
        for (const auto& c : chains) {
            L += c[m].left;
            R += c[m].right;
        }
        const bool last = m + 1 == M;
        Core3 s(L, chains.front()[m].n, last ? 1 : R);
        int lo = 0, ro = 0;
        for (const auto& c : chains) {
            const Core3& x = c[m];
            for (int a = 0; a < x.left; ++a)
                for (int mu = 0; mu < x.n; ++mu)
                    for (int b = 0; b < x.right; ++b) s(lo + a, mu, last ? 0 : ro + b) = x(a, mu, b);
            lo += x.left;
            ro += x.right;
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Cores of the product a(y) w(y) projected onto Legendre modes nu < d_out.
Core3 product_core(const Core3& a, const Core3& w, const TripleProductTable& beta)
{
    const int d_out = beta.d_out();
    const int mu_max = std::min(a.n, beta.d_coef());
    const int kap_max = std::min(w.n, beta.d_in());
    Core3 c(a.left * w.left, d_out, a.right * w.right);
    for (int nu = 0; nu < d_out; ++nu)
        for (int mu = 0; mu < mu_max; ++mu)
            for (int ka = 0; ka < kap_max; ++ka) {
                const double b = beta(nu, mu, ka);
                if (b == 0.0) continue;
                for (int i = 0; i < a.left; ++i)
                    for (int ip = 0; ip < a.right; ++ip) {
                        const double av = b * a(i, mu, ip);
                        if (av == 0.0) continue;
                        for (int j = 0; j < w.left; ++j)
                            for (int jp = 0; jp < w.right; ++jp)
                                c(i * w.left + j, nu, ip * w.right + jp) += av * w(j, ka, jp);
                    }
            }
    return c;
}

std::vector<int> tail_dims(const std::vector<int>& lambda)
{
    std::vector<int> x(lambda.size());
    for (std::size_t m = 0; m < lambda.size(); ++m) x[m] = std::max(2 * (lambda[m] - 1) + 1, lambda[m] + 1);
    return x;
}

}  // namespace

Eigen::MatrixXd restricted_gram(const std::vector<Core3>& cores, const std::vector<int>& lo, const std::vector<int>& hi)
{
    Mat phi = Mat::Ones(1, 1);
    for (int m = static_cast<int>(cores.size()) - 1; m >= 0; --m) {
        const Core3& c = cores[m];
        Mat next = Mat::Zero(c.left, c.left);
        for (int mu = std::max(lo[m], 0); mu < std::min(hi[m], c.n); ++mu) {
            const Mat s = c.slice(mu);
            next.noalias() += s * phi * s.transpose();
        }
        phi = std::move(next);
    }
    return phi;
}

std::vector<double> eta_volume(const TensorTrain& f, const TriMesh& mesh, const std::vector<int>& lambda_dims)
{
    f.validate();
    if (f.phys_dim() != mesh.num_cells()) throw std::invalid_argument("eta_volume: data must be piecewise constant");
    if (static_cast<int>(lambda_dims.size()) != f.order()) throw std::invalid_argument("eta_volume: order mismatch");
    const Mat G = restricted_gram(f.cores, std::vector<int>(lambda_dims.size(), 0), lambda_dims);
    const Mat FG = f.phys * G;
    std::vector<double> eta(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const double s = std::max(FG.row(c).dot(f.phys.row(c)), 0.0);
        eta[c] = mesh.diameter(c) * std::sqrt(mesh.area(c) * s);
    }
    return eta;
}

std::vector<double> eta_jump(const TensorTrain& w, const CoefficientTT& coef, const FeSpaceP1& space,
                             const std::vector<int>& lambda_dims)
{
    w.validate();
    const TriMesh& mesh = space.mesh();
    const int M = w.order();
    if (w.dims() != lambda_dims) throw std::invalid_argument("eta_jump: w must live on Lambda");
    const std::array<const TensorTrain*, 3> a{&coef.a11, &coef.a12, &coef.a22};
    for (const auto* t : a)
        if (t->order() != M || t->phys_dim() != mesh.num_cells())
            throw std::invalid_argument("eta_jump: coefficient shape mismatch");

    const int rw = static_cast<int>(w.phys.cols());
    std::array<Mat, 2> g;
    for (int q = 0; q < 2; ++q) g[q] = gradient_operator(space, q) * w.phys;

    // Stochastic part: one product chain per coefficient entry.
    Mat G;
    if (M == 0) {
        G = Mat::Ones(3, 3);
    } else {
        std::vector<std::vector<Core3>> chains(3);
        for (int t = 0; t < 3; ++t)
            for (int m = 0; m < M; ++m) {
                const TripleProductTable beta(lambda_dims[m], a[t]->cores[m].n, lambda_dims[m]);
                chains[t].push_back(product_core(a[t]->cores[m], w.cores[m], beta));
            }
        G = restricted_gram(stack_chains(chains), std::vector<int>(M, 0), lambda_dims);
    }

    std::array<int, 3> offs{};
    int total = 0;
    for (int t = 0; t < 3; ++t) {
        offs[t] = total;
        total += static_cast<int>(a[t]->phys.cols()) * rw;
    }
    if (G.rows() != total) throw std::logic_error("eta_jump: rank bookkeeping");

    const auto& edges = mesh.interior_edges();
    Mat J = Mat::Zero(static_cast<Eigen::Index>(edges.size()), total);
    // term t, direction (p, q): contributes n_p a_t g_q
    const std::array<std::vector<std::array<int, 2>>, 3> dirs{{{{0, 0}}, {{0, 1}, {1, 0}}, {{1, 1}}}};
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const Edge& E = mesh.edge(edges[e]);
        for (int t = 0; t < 3; ++t) {
            const Mat& A0 = a[t]->phys;
            const int ra = static_cast<int>(A0.cols());
            for (const auto& pq : dirs[t]) {
                const double n = E.normal[pq[0]];
                if (n == 0.0) continue;
                for (int side = 0; side < 2; ++side) {
                    const int c = E.cells[side];
                    const double s = side == 0 ? n : -n;
                    for (int i = 0; i < ra; ++i) {
                        const double ai = s * A0(c, i);
                        for (int b = 0; b < rw; ++b) J(static_cast<Eigen::Index>(e), offs[t] + i * rw + b) += ai * g[pq[1]](c, b);
                    }
                }
            }
        }
    }
    const Mat JG = J * G;
    std::vector<double> eta(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const double s = std::max(JG.row(static_cast<Eigen::Index>(e)).dot(J.row(static_cast<Eigen::Index>(e))), 0.0);
        eta[e] = mesh.edge(edges[e]).length * std::sqrt(s);
    }
    return eta;
}

TailEstimate zeta(const TensorTrain& w, const TensorTrain& f, const CoefficientTT& coef, const FeSpaceP1& space,
                  const PreconditionerH& H, const std::vector<int>& lambda_dims, ZetaNorm norm)
{
    const int M = static_cast<int>(lambda_dims.size());
    const std::vector<int> xdims = tail_dims(lambda_dims);
    const DiscreteOperatorTT LX = assemble_tt_operator(coef, space, xdims, lambda_dims);
    const TensorTrain FX = assemble_tt_rhs(f, space, xdims);
    const TensorTrain R = orthogonalize(tt_add(FX, tt_scale(LX.apply(w), -1.0)), Orthogonality::left);
    const Mat Rw = H.whiten(R.phys);
    const Mat Q = Rw.transpose() * Rw;

    TailEstimate out;
    const std::vector<int> zeros(M, 0);
    out.iota = std::sqrt(std::max(frob_dot(Q, restricted_gram(R.cores, zeros, lambda_dims)), 0.0));

    const TensorTrain* src = &R;
    Mat Qs = Q;
    TensorTrain fx;
    if (norm == ZetaNorm::literal) {
        fx = tt_resize_modes(f, xdims);
        Eigen::VectorXd areas(space.mesh().num_cells());
        for (int c = 0; c < space.mesh().num_cells(); ++c) areas[c] = space.mesh().area(c);
        Qs = fx.phys.transpose() * areas.asDiagonal() * fx.phys;
        src = &fx;
    }

    out.zeta_m.assign(M, 0.0);
    double z2 = 0.0;
    for (int m = 0; m < M; ++m) {
        std::vector<int> lo(M, 0), hi = lambda_dims;
        lo[m] = lambda_dims[m];
        hi[m] = lambda_dims[m] + 1;
        out.zeta_m[m] = std::sqrt(std::max(frob_dot(Qs, restricted_gram(src->cores, lo, hi)), 0.0));
        std::vector<int> tlo(M, 0), thi = xdims;
        for (int j = 0; j < m; ++j) thi[j] = lambda_dims[j];
        tlo[m] = lambda_dims[m];
        z2 += std::max(frob_dot(Qs, restricted_gram(src->cores, tlo, thi)), 0.0);
    }
    out.zeta = std::sqrt(z2);
    for (double z : out.zeta_m) out.zeta_sum += z;
    return out;
}

double iota(const DiscreteOperatorTT& L, const TensorTrain& W, const TensorTrain& F, const PreconditionerH& H)
{
    return iota_value(L.stacked(), W, F, H);
}

double combine(double eta, double zeta, double iota, const EstimatorWeights& w)
{
    if (eta < 0.0 || zeta < 0.0 || iota < 0.0) throw std::invalid_argument("combine: negative estimator");
    const double s = w.eta * eta + w.zeta * zeta + w.iota * iota;
    return std::sqrt(s * s + iota * iota);
}

EstimatorReport estimate(const TensorTrain& w, const TensorTrain& f, const CoefficientTT& coef,
                         const FeSpaceP1& space, const PreconditionerH& H, const std::vector<int>& lambda_dims,
                         const EstimatorWeights& weights, ZetaNorm norm)
{
    EstimatorReport rep;
    rep.eta_T = eta_volume(f, space.mesh(), lambda_dims);
    rep.eta_S = eta_jump(w, coef, space, lambda_dims);
    double e2 = 0.0;
    for (double v : rep.eta_T) e2 += v * v;
    for (double v : rep.eta_S) e2 += v * v;
    rep.eta = std::sqrt(e2);
    const TailEstimate t = zeta(w, f, coef, space, H, lambda_dims, norm);
    rep.zeta_m = t.zeta_m;
    rep.zeta_sum = t.zeta_sum;
    rep.zeta = t.zeta;
    rep.iota = t.iota;
    rep.weights = weights;
    rep.theta = combine(rep.eta, rep.zeta, rep.iota, weights);
    return rep;
}

}  // namespace rdsg
