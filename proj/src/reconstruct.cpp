#include "rdsg/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "rdsg/error.hpp"
#include "rdsg/legendre.hpp"
#include "rdsg/parallel.hpp"

namespace rdsg {

namespace {

constexpr int kChunks = 16;  // fixed reduction layout, independent of the worker count

// Phi = sum_mu xi_mu V(mu), r_{m-1} x r_m.
Eigen::MatrixXd contract_mode(const Core3& c, const Eigen::Ref<const Eigen::RowVectorXd>& xi)
{
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(c.left, c.right);
    for (int a = 0; a < c.left; ++a)
        for (int mu = 0; mu < c.n; ++mu) {
            const double x = xi[mu];
            for (int b = 0; b < c.right; ++b) phi(a, b) += x * c(a, mu, b);
        }
    return phi;
}

Eigen::MatrixXd solve_spd(Eigen::MatrixXd N, const Eigen::MatrixXd& rhs, double reg)
{
    const double tr = N.trace();
    N.diagonal().array() += reg * (tr > 0 ? tr : 1.0);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(N);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericalError("reconstruct: singular local least-squares system");
    return ldlt.solve(rhs);
}

}  // namespace

std::vector<double> draw_parameter(int M, std::uint64_t seed, std::uint64_t k)
{
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(k), std::uint32_t(k >> 32)};
    std::mt19937_64 gen(seq);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> y(M);
    for (auto& v : y) v = u(gen);
    return y;
}

std::vector<std::vector<double>> draw_parameters(int M, int K, std::uint64_t seed)
{
    std::vector<std::vector<double>> ys(K);
    for (int k = 0; k < K; ++k) ys[k] = draw_parameter(M, seed, std::uint64_t(k));
    return ys;
}

SampleSet make_samples(int M, int K, std::uint64_t seed, int n_cells,
                       const std::function<Eigen::VectorXd(const std::vector<double>&)>& generator)
{
    if (K < 1) throw std::invalid_argument("make_samples: need at least one sample");
    SampleSet s;
    s.seed = seed;
    s.y = draw_parameters(M, K, seed);
    s.values.resize(n_cells, K);
    parallel_for(std::size_t(K), [&](std::size_t b, std::size_t e, int) {
        for (std::size_t k = b; k < e; ++k) {
            const Eigen::VectorXd v = generator(s.y[k]);
            if (v.size() != n_cells) throw std::invalid_argument("make_samples: generator returned wrong length");
            s.values.col(Eigen::Index(k)) = v;
        }
    });
    return s;
}

int largest_local_unknowns(const std::vector<int>& dims, int max_rank, int n_phys)
{
    const auto cap = tt_max_ranks(n_phys, dims);
    const int M = static_cast<int>(dims.size());
    int best = M > 0 ? std::min(max_rank, cap[0]) : 1;
    for (int m = 0; m < M; ++m) {
        const int rl = std::min(max_rank, cap[m]);
        const int rr = m + 1 < M ? std::min(max_rank, cap[m + 1]) : 1;
        best = std::max(best, rl * dims[m] * rr);
    }
    return best;
}

Eigen::VectorXd tt_eval_at(const TensorTrain& tt, const std::vector<double>& y)
{
    if (static_cast<int>(y.size()) != tt.order()) throw std::invalid_argument("tt_eval_at: parameter length mismatch");
    Eigen::VectorXd v = Eigen::VectorXd::Ones(1);
    for (int m = tt.order() - 1; m >= 0; --m) {
        const auto& c = tt.cores[m];
        v = contract_mode(c, legendre_all(c.n, y[m]).transpose()) * v;
    }
    return tt.phys * v;
}

double holdout_error(const TensorTrain& tt, const SampleSet& samples)
{
    std::vector<double> num(kChunks, 0.0), den(kChunks, 0.0);
    const std::size_t K = samples.y.size();
    parallel_for(K, [&](std::size_t b, std::size_t e, int c) {
        for (std::size_t k = b; k < e; ++k) {
            const Eigen::VectorXd p = tt_eval_at(tt, samples.y[k]);
            const auto bk = samples.values.col(Eigen::Index(k));
            num[c] += (p - bk).squaredNorm();
            den[c] += bk.squaredNorm();
        }
    }, kChunks);
    double n = 0.0, d = 0.0;
    for (int c = 0; c < kChunks; ++c) {
        n += num[c];
        d += den[c];
    }
    if (d == 0.0) return std::sqrt(n);
    return std::sqrt(n / d);
}

ReconstructResult reconstruct(const SampleSet& samples, const ReconstructConfig& cfg)
{
    const int M = static_cast<int>(cfg.dims.size());
    const int K = samples.size();
    const int N0 = static_cast<int>(samples.values.rows());
    if (K < 1 || samples.values.cols() != K) throw std::invalid_argument("reconstruct: inconsistent sample set");
    for (const auto& y : samples.y)
        if (static_cast<int>(y.size()) != M) throw std::invalid_argument("reconstruct: parameter dimension mismatch");
    const Eigen::MatrixXd& B = samples.values;
    const double bnorm2 = B.squaredNorm();
    ReconstructResult res;

    if (M == 0) {
        res.tt.phys = B.rowwise().mean();
        res.residual_history.push_back(
            bnorm2 > 0 ? std::sqrt((B.colwise() - res.tt.phys.col(0)).squaredNorm() / bnorm2) : 0.0);
        return res;
    }

    // Legendre features per dimension: K x d_m.
    std::vector<Eigen::MatrixXd> xi(M);
    for (int m = 0; m < M; ++m) {
        xi[m].resize(K, cfg.dims[m]);
        for (int k = 0; k < K; ++k) xi[m].row(k) = legendre_all(cfg.dims[m], samples.y[k][m]).transpose();
    }

    const auto cap = tt_max_ranks(N0, cfg.dims);
    std::vector<int> ranks(M);
    for (int m = 0; m < M; ++m) ranks[m] = std::max(1, std::min(cfg.max_rank, cap[m]));
    TensorTrain tt = orthogonalize(tt_random(N0, cfg.dims, ranks, cfg.seed), Orthogonality::left);
    auto& cores = tt.cores;

    // rvec[m]: K x r_m, products Phi_{m+1} ... Phi_M (rvec[M] = 1).
    std::vector<Eigen::MatrixXd> rvec(M + 1);
    rvec[M] = Eigen::MatrixXd::Ones(K, 1);
    auto update_rvec = [&](int m) {  // rvec[m-1] from core m (1-based core index)
        const Core3& c = cores[m - 1];
        Eigen::MatrixXd out(K, c.left);
        for (int k = 0; k < K; ++k)
            out.row(k) = (contract_mode(c, xi[m - 1].row(k)) * rvec[m].row(k).transpose()).transpose();
        rvec[m - 1] = std::move(out);
    };
    for (int m = M; m >= 1; --m) update_rvec(m);

    // lprod[m]: per sample r_0 x r_{m-1} product Phi_1 ... Phi_{m-1}, stored row-major per sample.
    std::vector<std::vector<Eigen::MatrixXd>> lprod(M + 1, std::vector<Eigen::MatrixXd>(K));
    Eigen::MatrixXd C;  // W0^T B, r_0 x K

    auto solve_phys = [&]() {
        const Eigen::MatrixXd& G = rvec[0];  // K x r0
        const Eigen::MatrixXd BG = B * G;    // N0 x r0
        const Eigen::MatrixXd GG = G.transpose() * G;
        tt.phys = solve_spd(GG, BG.transpose(), cfg.reg).transpose();
        // Gauge: orthonormal physical columns, R pushed into core 1.
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(tt.phys);
        const int k = static_cast<int>(std::min(tt.phys.rows(), tt.phys.cols()));
        Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(tt.phys.rows(), k);
        Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>().toDenseMatrix();
        if (k < tt.phys.cols()) throw NumericalError("reconstruct: physical dimension below rank");
        tt.phys = Q;
        cores[0] = Core3::from_right_unfolding(R * cores[0].right_unfolding(), cores[0].n);
        C = tt.phys.transpose() * B;
    };

    auto solve_core = [&](int m) {  // 1-based
        Core3& c = cores[m - 1];
        const int rl = c.left, d = c.n, rr = c.right;
        const int dr = d * rr;
        const int n = rl * dr;
        // N = sum_k (S_k^T S_k) (x) z_k z_k^T, r = sum_k (S_k^T C_k) (x) z_k, assembled
        // block by block as Z^T diag(w) Z with one weight column per (a, a2).
        Eigen::MatrixXd Z(K, dr);
        Eigen::MatrixXd T(K, rl * rl);
        Eigen::MatrixXd U(K, rl);
        parallel_for(std::size_t(K), [&](std::size_t b, std::size_t e, int) {
            for (std::size_t kk = b; kk < e; ++kk) {
                const int k = int(kk);
                const Eigen::MatrixXd& S = lprod[m][k];  // r0 x rl
                for (int mu = 0; mu < d; ++mu)
                    for (int q = 0; q < rr; ++q) Z(k, mu * rr + q) = xi[m - 1](k, mu) * rvec[m](k, q);
                const Eigen::MatrixXd StS = S.transpose() * S;
                for (int a = 0; a < rl; ++a)
                    for (int a2 = 0; a2 < rl; ++a2) T(k, a * rl + a2) = StS(a, a2);
                U.row(k) = (S.transpose() * C.col(k)).transpose();
            }
        }, kChunks);
        Eigen::MatrixXd N = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd r(n);
        const Eigen::MatrixXd ZU = Z.transpose() * U;  // dr x rl
        for (int a = 0; a < rl; ++a) r.segment(std::int64_t(a) * dr, dr) = ZU.col(a);
        const int npairs = rl * (rl + 1) / 2;
        parallel_for(std::size_t(npairs), [&](std::size_t b, std::size_t e, int) {
            Eigen::MatrixXd WZ(K, dr);
            for (std::size_t p = b; p < e; ++p) {
                int a = 0, rem = int(p);
                while (rem >= rl - a) {
                    rem -= rl - a;
                    ++a;
                }
                const int a2 = a + rem;
                WZ = T.col(a * rl + a2).asDiagonal() * Z;
                const Eigen::MatrixXd blk = Z.transpose() * WZ;
                N.block(std::int64_t(a) * dr, std::int64_t(a2) * dr, dr, dr) = blk;
                if (a2 != a) N.block(std::int64_t(a2) * dr, std::int64_t(a) * dr, dr, dr) = blk.transpose();
            }
        }, npairs);
        const Eigen::VectorXd v = solve_spd(N, r, cfg.reg);
        c.data = v;
    };

    auto compute_lprod = [&](int m) {  // lprod[m] from lprod[m-1] and core m-1
        for (int k = 0; k < K; ++k) {
            if (m == 1)
                lprod[1][k] = Eigen::MatrixXd::Identity(tt.phys.cols(), tt.phys.cols());
            else
                lprod[m][k] = lprod[m - 1][k] * contract_mode(cores[m - 2], xi[m - 2].row(k));
        }
    };

    auto residual = [&]() {
        const Eigen::MatrixXd P = tt.phys * rvec[0].transpose();
        const double r2 = (P - B).squaredNorm();
        return bnorm2 > 0 ? std::sqrt(r2 / bnorm2) : std::sqrt(r2);
    };

    solve_phys();
    double prev = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        // forward
        for (int m = 1; m <= M; ++m) {
            compute_lprod(m);
            solve_core(m);
            if (m < M) {
                Eigen::HouseholderQR<Eigen::MatrixXd> qr(cores[m - 1].left_unfolding());
                const Eigen::MatrixXd lu = cores[m - 1].left_unfolding();
                const int k = static_cast<int>(std::min(lu.rows(), lu.cols()));
                if (k < lu.cols()) throw NumericalError("reconstruct: rank exceeds core size");
                Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(lu.rows(), k);
                Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>().toDenseMatrix();
                cores[m - 1] = Core3::from_left_unfolding(Q, cores[m - 1].n);
                cores[m] = Core3::from_right_unfolding(R * cores[m].right_unfolding(), cores[m].n);
            }
        }
        // backward
        for (int m = M; m >= 1; --m) {
            // right-orthonormalize core m, push the factor to the left neighbour
            const Eigen::MatrixXd at = cores[m - 1].right_unfolding().transpose();
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(at);
            const int k = static_cast<int>(std::min(at.rows(), at.cols()));
            if (k < at.cols()) throw NumericalError("reconstruct: rank exceeds core size");
            Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(at.rows(), k);
            Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>().toDenseMatrix();
            cores[m - 1] = Core3::from_right_unfolding(Q.transpose(), cores[m - 1].n);
            if (m > 1)
                cores[m - 2] = Core3::from_left_unfolding(cores[m - 2].left_unfolding() * R.transpose(), cores[m - 2].n);
            update_rvec(m);
            if (m > 1) {
                solve_core(m - 1);
            }
        }
        solve_phys();
        update_rvec(1);
        const double cur = residual();
        res.residual_history.push_back(cur);
        if (cur < 1e-15 || prev - cur < cfg.tol * prev) break;
        prev = cur;
    }
    tt.orth = Orthogonality::none;
    res.tt = std::move(tt);
    return res;
}

}  // namespace rdsg
