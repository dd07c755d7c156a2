#include "rdsg/tt_operator.hpp"

#include <stdexcept>

namespace rdsg {

std::vector<int> TTOperator::ranks() const
{
    std::vector<int> r;
    if (cores.empty()) return r;
    r.push_back(rank0());
    for (std::size_t m = 0; m + 1 < cores.size(); ++m) r.push_back(cores[m].right);
    return r;
}

void TTOperator::validate() const
{
    if (phys.empty()) throw std::invalid_argument("TTOperator: no physical component");
    for (const auto& p : phys)
        if (p.rows() != phys[0].rows() || p.cols() != phys[0].cols())
            throw std::invalid_argument("TTOperator: physical factors differ in shape");
    int r = rank0();
    for (const auto& c : cores) {
        if (c.left != r) throw std::invalid_argument("TTOperator: rank chain mismatch");
        r = c.right;
    }
    if (r != 1) throw std::invalid_argument("TTOperator: last rank must be 1");
}

TensorTrain tt_apply(const TTOperator& op, const TensorTrain& x)
{
    op.validate();
    x.validate();
    if (op.order() != x.order()) throw std::invalid_argument("tt_apply: order mismatch");
    if (op.phys[0].cols() != x.phys_dim()) throw std::invalid_argument("tt_apply: physical dimension mismatch");
    const int P = op.rank0();
    const int rx = static_cast<int>(x.phys.cols());
    TensorTrain y;
    y.phys.resize(op.phys[0].rows(), std::int64_t(P) * rx);
    for (int p = 0; p < P; ++p) y.phys.middleCols(std::int64_t(p) * rx, rx) = op.phys[p] * x.phys;
    for (int m = 0; m < op.order(); ++m) {
        const OpCore& o = op.cores[m];
        const Core3& c = x.cores[m];
        if (o.in != c.n) throw std::invalid_argument("tt_apply: mode dimension mismatch");
        Core3 out(o.left * c.left, o.out, o.right * c.right);
        for (int p = 0; p < o.left; ++p)
            for (int mu = 0; mu < o.out; ++mu)
                for (int nu = 0; nu < o.in; ++nu)
                    for (int q = 0; q < o.right; ++q) {
                        const double w = o(p, mu, nu, q);
                        if (w == 0.0) continue;
                        for (int a = 0; a < c.left; ++a)
                            for (int b = 0; b < c.right; ++b)
                                out(p * c.left + a, mu, q * c.right + b) += w * c(a, nu, b);
                    }
        y.cores.push_back(std::move(out));
    }
    return y;
}

TTOperator tt_identity_operator(int n_phys, const std::vector<int>& dims)
{
    TTOperator op;
    Eigen::SparseMatrix<double> id(n_phys, n_phys);
    id.setIdentity();
    op.phys.push_back(id);
    for (int d : dims) {
        OpCore c(1, d, d, 1);
        for (int mu = 0; mu < d; ++mu) c(0, mu, mu, 0) = 1.0;
        op.cores.push_back(std::move(c));
    }
    return op;
}

Eigen::MatrixXd tt_operator_to_dense(const TTOperator& op)
{
    op.validate();
    Eigen::MatrixXd total;
    for (int p = 0; p < op.rank0(); ++p) {
        // Kronecker product along the chain for bond path starting at p.
        std::vector<std::pair<int, Eigen::MatrixXd>> paths{{p, Eigen::MatrixXd(op.phys[p])}};
        for (const auto& c : op.cores) {
            std::vector<std::pair<int, Eigen::MatrixXd>> next;
            for (const auto& [left, mat] : paths) {
                for (int q = 0; q < c.right; ++q) {
                    Eigen::MatrixXd s(c.out, c.in);
                    for (int mu = 0; mu < c.out; ++mu)
                        for (int nu = 0; nu < c.in; ++nu) s(mu, nu) = c(left, mu, nu, q);
                    if (s.isZero(0.0)) continue;
                    Eigen::MatrixXd k(mat.rows() * c.out, mat.cols() * c.in);
                    for (Eigen::Index i = 0; i < mat.rows(); ++i)
                        for (Eigen::Index j = 0; j < mat.cols(); ++j)
                            k.block(i * c.out, j * c.in, c.out, c.in) = mat(i, j) * s;
                    bool merged = false;
                    for (auto& [nq, nm] : next)
                        if (nq == q) {
                            nm += k;
                            merged = true;
                            break;
                        }
                    if (!merged) next.emplace_back(q, std::move(k));
                }
            }
            paths = std::move(next);
        }
        for (const auto& [q, mat] : paths) {
            (void)q;
            if (total.size() == 0)
                total = mat;
            else
                total += mat;
        }
    }
    if (total.size() == 0) {
        Eigen::Index rows = op.phys[0].rows(), cols = op.phys[0].cols();
        for (const auto& c : op.cores) {
            rows *= c.out;
            cols *= c.in;
        }
        total = Eigen::MatrixXd::Zero(rows, cols);
    }
    return total;
}

}  // namespace rdsg
