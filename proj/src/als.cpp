#include "rdsg/als.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "rdsg/error.hpp"

namespace rdsg {

void AlsConfig::validate() const
{
    if (max_sweeps < 1) throw std::invalid_argument("AlsConfig: max_sweeps must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("AlsConfig: tol must be positive");
    if (reg < 0.0) throw std::invalid_argument("AlsConfig: reg must be nonnegative");
    if (!(pcg_tol > 0.0) || pcg_max_iter < 1) throw std::invalid_argument("AlsConfig: invalid CG settings");
}

namespace {

using Mat = Eigen::MatrixXd;

void qr_thin(const Mat& a, Mat& q, Mat& r)
{
    Eigen::HouseholderQR<Mat> qr(a);
    const Eigen::Index k = std::min(a.rows(), a.cols());
    q = qr.householderQ() * Mat::Identity(a.rows(), k);
    r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

/// a = l * q with orthonormal rows of q.
void lq_thin(const Mat& a, Mat& l, Mat& q)
{
    Mat qt, rt;
    qr_thin(a.transpose(), qt, rt);
    l = rt.transpose();
    q = qt.transpose();
}

/// Z_mu[(p,a),(q,b)] = sum_nu O(p,mu,nu,q) V(a,nu,b).
Mat transfer(const OpCore& O, const Core3& V, int mu)
{
    Mat Z = Mat::Zero(std::int64_t(O.left) * V.left, std::int64_t(O.right) * V.right);
    for (int p = 0; p < O.left; ++p)
        for (int nu = 0; nu < O.in; ++nu)
            for (int q = 0; q < O.right; ++q) {
                const double w = O(p, mu, nu, q);
                if (w == 0.0) continue;
                for (int a = 0; a < V.left; ++a)
                    for (int b = 0; b < V.right; ++b)
                        Z(std::int64_t(p) * V.left + a, std::int64_t(q) * V.right + b) += w * V(a, nu, b);
            }
    return Z;
}

struct Envs {
    Mat psi, psi_f;  // left of a core
    Mat phi, phi_f;  // right of a core
};

void update_left(const OpCore& O, const Core3& V, const Core3& Fc, const Mat& psi, const Mat& psi_f, Mat& out,
                 Mat& out_f)
{
    out = Mat::Zero(std::int64_t(O.right) * V.right, std::int64_t(O.right) * V.right);
    out_f = Mat::Zero(std::int64_t(O.right) * V.right, Fc.right);
    for (int mu = 0; mu < O.out; ++mu) {
        const Mat Z = transfer(O, V, mu);
        out.noalias() += Z.transpose() * psi * Z;
        out_f.noalias() += Z.transpose() * psi_f * Fc.slice(mu);
    }
    out = 0.5 * (out + out.transpose()).eval();
}

void update_right(const OpCore& O, const Core3& V, const Core3& Fc, const Mat& phi, const Mat& phi_f, Mat& out,
                  Mat& out_f)
{
    out = Mat::Zero(std::int64_t(O.left) * V.left, std::int64_t(O.left) * V.left);
    out_f = Mat::Zero(std::int64_t(O.left) * V.left, Fc.left);
    for (int mu = 0; mu < O.out; ++mu) {
        const Mat Z = transfer(O, V, mu);
        out.noalias() += Z * phi * Z.transpose();
        out_f.noalias() += Z * phi_f * Fc.slice(mu).transpose();
    }
    out = 0.5 * (out + out.transpose()).eval();
}

Eigen::VectorXd solve_spd(Mat A, const Eigen::VectorXd& rhs, double reg, const char* where)
{
    const double tr = std::max(A.trace(), 0.0);
    const Eigen::Index n = A.rows();
    if (tr == 0.0) {
        if (rhs.isZero(0.0)) return Eigen::VectorXd::Zero(n);
        throw IndefiniteSystemError(std::string(where) + ": local system is zero");
    }
    for (double r : {reg, 1e-14, 1e-12}) {
        if (r < reg) continue;
        Mat B = A;
        if (r > 0.0) B.diagonal().array() += r * tr / static_cast<double>(n);
        Eigen::LLT<Mat> llt(B);
        if (llt.info() == Eigen::Success) return llt.solve(rhs);
    }
    throw IndefiniteSystemError(std::string(where) + ": local system is not positive definite");
}

class Solver {
public:
    Solver(const TTOperator& L, const TensorTrain& F, const PreconditionerH& H, const AlsConfig& cfg)
        : L_(L), F_(F), H_(H), cfg_(cfg), M_(L.order())
    {
        HF0_ = H.solve(F.phys);
    }

    void init(TensorTrain W)
    {
        W_ = orthogonalize(W, Orthogonality::left);
        envs_.assign(M_ + 1, Envs{});
        envs_[M_].phi = Mat::Ones(1, 1);
        envs_[M_].phi_f = Mat::Ones(1, 1);
        for (int j = M_ - 1; j >= 0; --j) refresh_right(j);
    }

    const TensorTrain& W() const { return W_; }

    void solve_phys()
    {
        const Mat& phi = envs_[0].phi;
        const Mat& phi_f = envs_[0].phi_f;
        const int r = static_cast<int>(W_.phys.cols());
        const Mat G = HF0_ * phi_f.transpose();
        Mat B = Mat::Zero(W_.phys.rows(), r);
        for (int p = 0; p < L_.rank0(); ++p) B.noalias() += L_.phys[p].transpose() * G.middleCols(std::int64_t(p) * r, r);
        W_.phys = pcg(B, W_.phys, phi);
    }

    void sweep()
    {
        if (M_ == 0) {
            solve_phys();
            return;
        }
        {
            Mat q, rr;
            qr_thin(W_.phys, q, rr);
            W_.phys = q;
            W_.cores[0] = Core3::from_right_unfolding(rr * W_.cores[0].right_unfolding(), W_.cores[0].n);
            init_left();
        }
        for (int j = 0; j < M_; ++j) {
            solve_core(j);
            if (j + 1 < M_) {
                Mat q, rr;
                qr_thin(W_.cores[j].left_unfolding(), q, rr);
                W_.cores[j] = Core3::from_left_unfolding(q, W_.cores[j].n);
                W_.cores[j + 1] = Core3::from_right_unfolding(rr * W_.cores[j + 1].right_unfolding(), W_.cores[j + 1].n);
                refresh_left(j);
            }
        }
        for (int j = M_ - 1; j >= 0; --j) {
            Mat l, q;
            lq_thin(W_.cores[j].right_unfolding(), l, q);
            W_.cores[j] = Core3::from_right_unfolding(q, W_.cores[j].n);
            if (j > 0)
                W_.cores[j - 1] = Core3::from_left_unfolding(W_.cores[j - 1].left_unfolding() * l, W_.cores[j - 1].n);
            else
                W_.phys = W_.phys * l;
            refresh_right(j);
            if (j > 0) solve_core(j - 1);
        }
        solve_phys();
    }

    TensorTrain result() const
    {
        TensorTrain out = W_;
        out.orth = Orthogonality::left;
        return out;
    }

private:
    void init_left()
    {
        const int r = static_cast<int>(W_.phys.cols());
        const int P = L_.rank0();
        Mat Y(W_.phys.rows(), std::int64_t(P) * r);
        for (int p = 0; p < P; ++p) Y.middleCols(std::int64_t(p) * r, r) = L_.phys[p] * W_.phys;
        const Mat HY = H_.solve(Y);
        Mat psi = Y.transpose() * HY;
        envs_[0].psi = 0.5 * (psi + psi.transpose());
        envs_[0].psi_f = Y.transpose() * HF0_;
    }

    // psi for core j+1 from core j
    void refresh_left(int j)
    {
        update_left(L_.cores[j], W_.cores[j], F_.cores[j], envs_[j].psi, envs_[j].psi_f, envs_[j + 1].psi,
                    envs_[j + 1].psi_f);
    }

    // phi right of bond j (cores j..M-1)
    void refresh_right(int j)
    {
        update_right(L_.cores[j], W_.cores[j], F_.cores[j], envs_[j + 1].phi, envs_[j + 1].phi_f, envs_[j].phi,
                     envs_[j].phi_f);
    }

    void solve_core(int j)
    {
        const OpCore& O = L_.cores[j];
        Core3& V = W_.cores[j];
        const Mat& psi = envs_[j].psi;
        const Mat& psi_f = envs_[j].psi_f;
        const Mat& phi = envs_[j + 1].phi;
        const Mat& phi_f = envs_[j + 1].phi_f;
        const int r = V.left, d = V.n, rp = V.right;
        const int R = O.left, Rp = O.right;
        const int blk = d * Rp;

        // G(a, a2)[(nu,q),(nu2,q2)] = sum_mu O_mu^T Psi(a,a2) O_mu
        Mat G = Mat::Zero(std::int64_t(r) * blk, std::int64_t(r) * blk);
        Mat pblk(R, R);
        for (int mu = 0; mu < O.out; ++mu) {
            Mat Om(R, blk);
            for (int p = 0; p < R; ++p)
                for (int nu = 0; nu < d; ++nu)
                    for (int q = 0; q < Rp; ++q) Om(p, nu * Rp + q) = O(p, mu, nu, q);
            if (Om.isZero(0.0)) continue;
            for (int a = 0; a < r; ++a)
                for (int a2 = 0; a2 < r; ++a2) {
                    for (int p = 0; p < R; ++p)
                        for (int p2 = 0; p2 < R; ++p2) pblk(p, p2) = psi(std::int64_t(p) * r + a, std::int64_t(p2) * r + a2);
                    G.block(std::int64_t(a) * blk, std::int64_t(a2) * blk, blk, blk).noalias() +=
                        Om.transpose() * pblk * Om;
                }
        }
        // A[(a,nu,b),(a2,nu2,b2)] = sum_{q,q2} G[(a,nu,q),(a2,nu2,q2)] Phi[(q,b),(q2,b2)]
        const std::int64_t rd = std::int64_t(r) * d;
        Mat Gm(rd * rd, std::int64_t(Rp) * Rp);
        for (int a = 0; a < r; ++a)
            for (int nu = 0; nu < d; ++nu)
                for (int a2 = 0; a2 < r; ++a2)
                    for (int nu2 = 0; nu2 < d; ++nu2) {
                        const std::int64_t row = (std::int64_t(a) * d + nu) * rd + (std::int64_t(a2) * d + nu2);
                        for (int q = 0; q < Rp; ++q)
                            for (int q2 = 0; q2 < Rp; ++q2)
                                Gm(row, std::int64_t(q) * Rp + q2) =
                                    G(std::int64_t(a) * blk + nu * Rp + q, std::int64_t(a2) * blk + nu2 * Rp + q2);
                    }
        Mat Pt(std::int64_t(Rp) * Rp, std::int64_t(rp) * rp);
        for (int q = 0; q < Rp; ++q)
            for (int q2 = 0; q2 < Rp; ++q2)
                for (int b = 0; b < rp; ++b)
                    for (int b2 = 0; b2 < rp; ++b2)
                        Pt(std::int64_t(q) * Rp + q2, std::int64_t(b) * rp + b2) =
                            phi(std::int64_t(q) * rp + b, std::int64_t(q2) * rp + b2);
        const Mat T = Gm * Pt;
        const std::int64_t n = rd * rp;
        Mat A(n, n);
        for (std::int64_t an = 0; an < rd; ++an)
            for (std::int64_t an2 = 0; an2 < rd; ++an2)
                for (int b = 0; b < rp; ++b)
                    for (int b2 = 0; b2 < rp; ++b2)
                        A(an * rp + b, an2 * rp + b2) = T(an * rd + an2, std::int64_t(b) * rp + b2);
        A = 0.5 * (A + A.transpose()).eval();

        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        const Core3& Fc = F_.cores[j];
        for (int mu = 0; mu < O.out; ++mu) {
            const Mat X = psi_f * Fc.slice(mu) * phi_f.transpose();
            for (int p = 0; p < R; ++p)
                for (int nu = 0; nu < d; ++nu)
                    for (int q = 0; q < Rp; ++q) {
                        const double w = O(p, mu, nu, q);
                        if (w == 0.0) continue;
                        for (int a = 0; a < r; ++a)
                            for (int b = 0; b < rp; ++b)
                                rhs[(std::int64_t(a) * d + nu) * rp + b] +=
                                    w * X(std::int64_t(p) * r + a, std::int64_t(q) * rp + b);
                    }
        }
        V.data = solve_spd(std::move(A), rhs, cfg_.reg, "als stochastic core");
    }

    Mat apply_phys(const Mat& V, const Mat& phi) const
    {
        const int r = static_cast<int>(V.cols());
        const int P = L_.rank0();
        Mat Y(V.rows(), std::int64_t(P) * r);
        for (int p = 0; p < P; ++p) Y.middleCols(std::int64_t(p) * r, r) = L_.phys[p] * V;
        const Mat Z = H_.solve(Y * phi);
        Mat out = Mat::Zero(V.rows(), r);
        for (int p = 0; p < P; ++p) out.noalias() += L_.phys[p].transpose() * Z.middleCols(std::int64_t(p) * r, r);
        return out;
    }

    // Preconditioned CG on the physical normal equations, warm-started from x0.
    Mat pcg(const Mat& B, const Mat& x0, const Mat& phi) const
    {
        const Mat HB = H_.solve(B);
        const double bnorm = std::sqrt(std::max((B.array() * HB.array()).sum(), 0.0));
        if (bnorm == 0.0) return Mat::Zero(B.rows(), B.cols());
        Mat x = x0;
        Mat res = B - apply_phys(x, phi);
        Mat z = H_.solve(res);
        Mat dir = z;
        double rz = (res.array() * z.array()).sum();
        for (int it = 0; it < cfg_.pcg_max_iter; ++it) {
            if (std::sqrt(std::max(rz, 0.0)) <= cfg_.pcg_tol * bnorm) break;
            const Mat q = apply_phys(dir, phi);
            const double dq = (dir.array() * q.array()).sum();
            if (!(dq > 0.0)) {
                if (dq == 0.0) break;
                throw IndefiniteSystemError("als physical core: operator is not positive definite");
            }
            const double alpha = rz / dq;
            x.noalias() += alpha * dir;
            res.noalias() -= alpha * q;
            z = H_.solve(res);
            const double rz_new = (res.array() * z.array()).sum();
            dir = z + (rz_new / rz) * dir;
            rz = rz_new;
        }
        return x;
    }

    const TTOperator& L_;
    const TensorTrain& F_;
    const PreconditionerH& H_;
    const AlsConfig& cfg_;
    const int M_;
    Mat HF0_;
    TensorTrain W_;
    std::vector<Envs> envs_;
};

}  // namespace

double iota_value(const TTOperator& L, const TensorTrain& W, const TensorTrain& F, const PreconditionerH& H)
{
    const TensorTrain R = orthogonalize(tt_add(tt_apply(L, W), tt_scale(F, -1.0)), Orthogonality::left);
    return H.whiten(R.phys).norm();
}

AlsResult als_solve(const DiscreteOperatorTT& L, const TensorTrain& F, const TensorTrain& W0,
                    const PreconditionerH& H, const AlsConfig& cfg)
{
    cfg.validate();
    W0.validate();
    F.validate();
    if (L.out_dims != L.in_dims) throw std::invalid_argument("als_solve: operator must map Lambda to Lambda");
    if (W0.dims() != L.in_dims || F.dims() != L.out_dims)
        throw std::invalid_argument("als_solve: mode dimensions of W0/F do not match the operator");
    if (W0.phys_dim() != H.matrix().rows() || F.phys_dim() != H.matrix().rows())
        throw std::invalid_argument("als_solve: physical dimension mismatch");

    const TTOperator op = L.stacked();
    TensorTrain start = W0;
    const auto maxr = tt_max_ranks(W0.phys_dim(), W0.dims());
    const auto r = W0.ranks();
    for (std::size_t m = 0; m < r.size(); ++m)
        if (r[m] > maxr[m]) {
            start = tt_round(W0, 0.0, maxr).tt;
            break;
        }

    AlsResult res;
    const double scale = std::max(H.whiten(orthogonalize(F, Orthogonality::left).phys).norm(),
                                  iota_value(op, start, F, H));
    res.iota_history.push_back(iota_value(op, start, F, H));

    Solver s(op, F, H, cfg);
    s.init(start);
    if (scale == 0.0) {
        res.W = s.result();
        res.converged = true;
        return res;
    }
    s.solve_phys();
    for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        s.sweep();
        const double prev = res.iota_history.back();
        const double cur = iota_value(op, s.W(), F, H);
        res.iota_history.push_back(cur);
        res.sweeps = sweep;
        if (cur > prev + 1e-12 * scale) res.monotone = false;
        if (cur <= 1e-14 * scale || prev - cur < cfg.tol * prev) {
            res.converged = true;
            break;
        }
    }
    res.W = s.result();
    return res;
}

TensorTrain increase_rank(const TensorTrain& W, std::uint64_t seed, double scale)
{
    W.validate();
    const auto dims = W.dims();
    TensorTrain Z = tt_random(W.phys_dim(), dims, std::vector<int>(dims.size(), 1), seed);
    const double nz = tt_norm(Z);
    const double nw = tt_norm(W);
    Z = tt_scale(Z, nz > 0.0 ? scale * nw / nz : 0.0);
    TensorTrain out = tt_add(W, Z);
    const auto maxr = tt_max_ranks(W.phys_dim(), dims);
    const auto r = out.ranks();
    for (std::size_t m = 0; m < r.size(); ++m)
        if (r[m] > maxr[m]) return tt_round(out, 0.0, maxr).tt;
    return out;
}

}  // namespace rdsg
