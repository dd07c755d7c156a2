#include "rdsg/galerkin.hpp"

#include <algorithm>
#include <stdexcept>

#include "rdsg/error.hpp"
#include "rdsg/parallel.hpp"

namespace rdsg {

std::vector<TripleProductTable> triple_tables(const std::vector<int>& out_dims, const std::vector<int>& coef_dims,
                                              const std::vector<int>& in_dims)
{
    std::vector<TripleProductTable> t;
    t.reserve(out_dims.size());
    for (std::size_t m = 0; m < out_dims.size(); ++m) t.emplace_back(out_dims[m], coef_dims[m], in_dims[m]);
    return t;
}

namespace {

OpCore contract_core(const Core3& a, const TripleProductTable& beta)
{
    const int d_out = beta.d_out(), d_in = beta.d_in();
    const int mu_max = std::min(a.n, d_out + d_in - 1);
    OpCore o(a.left, d_out, d_in, a.right);
    for (int k = 0; k < a.left; ++k)
        for (int mu = 0; mu < mu_max; ++mu)
            for (int kp = 0; kp < a.right; ++kp) {
                const double c = a(k, mu, kp);
                if (c == 0.0) continue;
                for (int al = 0; al < d_out; ++al)
                    for (int alp = 0; alp < d_in; ++alp) {
                        const double b = beta(al, mu, alp);
                        if (b != 0.0) o(k, al, alp, kp) += c * b;
                    }
            }
    return o;
}

TTOperator assemble_term(const TensorTrain& a, const FeSpaceP1& space, int p, int q,
                         const std::vector<TripleProductTable>& tables)
{
    if (a.phys_dim() != space.mesh().num_cells())
        throw std::invalid_argument("assemble_tt_operator: coefficient physical size must equal the cell count");
    TTOperator op;
    const int r0 = static_cast<int>(a.phys.cols());
    op.phys.resize(r0);
    parallel_for(r0, [&](std::size_t b, std::size_t e, int) {
        for (std::size_t k = b; k < e; ++k) {
            const Eigen::VectorXd w = a.phys.col(static_cast<Eigen::Index>(k));
            op.phys[k] = assemble_directional_stiffness(space, std::span<const double>(w.data(), w.size()), p, q);
        }
    });
    for (int m = 0; m < a.order(); ++m) op.cores.push_back(contract_core(a.cores[m], tables[m]));
    return op;
}

bool same_cores(const TTOperator& x, const TTOperator& y)
{
    if (x.order() != y.order() || x.rank0() != y.rank0()) return false;
    for (int m = 0; m < x.order(); ++m) {
        const OpCore& a = x.cores[m];
        const OpCore& b = y.cores[m];
        if (a.left != b.left || a.out != b.out || a.in != b.in || a.right != b.right || a.data != b.data)
            return false;
    }
    return true;
}

}  // namespace

TTOperator DiscreteOperatorTT::stacked() const
{
    if (terms.empty()) throw std::invalid_argument("DiscreteOperatorTT: no terms");
    // Terms with identical stochastic cores are merged by summing physical factors.
    std::vector<TTOperator> groups;
    for (const auto& t : terms) {
        bool merged = false;
        for (auto& g : groups)
            if (same_cores(g, t)) {
                for (int k = 0; k < g.rank0(); ++k) g.phys[k] += t.phys[k];
                merged = true;
                break;
            }
        if (!merged) groups.push_back(t);
    }
    if (groups.size() == 1) return groups.front();
    const int M = groups.front().order();
    TTOperator out;
    if (M == 0) {
        out.phys.push_back(groups.front().phys.front());
        for (std::size_t g = 1; g < groups.size(); ++g) out.phys.front() += groups[g].phys.front();
        return out;
    }
    for (const auto& g : groups)
        for (const auto& m : g.phys) out.phys.push_back(m);
    for (int m = 0; m < M; ++m) {
        int L = 0, R = 0;
        for (const auto& g : groups) {
            L += g.cores[m].left;
            R += g.cores[m].right;
        }
        const bool last = m == M - 1;
        const auto& c0 = groups.front().cores[m];
        OpCore c(L, c0.out, c0.in, last ? 1 : R);
        int lo = 0, ro = 0;
        for (const auto& g : groups) {
            const OpCore& s = g.cores[m];
            for (int p = 0; p < s.left; ++p)
                for (int mu = 0; mu < s.out; ++mu)
                    for (int nu = 0; nu < s.in; ++nu)
                        for (int q = 0; q < s.right; ++q) c(lo + p, mu, nu, last ? 0 : ro + q) = s(p, mu, nu, q);
            lo += s.left;
            ro += s.right;
        }
        out.cores.push_back(std::move(c));
    }
    return out;
}

TensorTrain DiscreteOperatorTT::apply(const TensorTrain& x) const { return tt_apply(stacked(), x); }

DiscreteOperatorTT assemble_tt_operator(const CoefficientTT& coef, const FeSpaceP1& space,
                                        const std::vector<int>& out_dims, const std::vector<int>& in_dims)
{
    const std::vector<int> cdims = coef.a11.dims();
    if (coef.a12.dims() != cdims || coef.a22.dims() != cdims)
        throw std::invalid_argument("assemble_tt_operator: coefficient dims differ");
    if (cdims.size() != out_dims.size() || cdims.size() != in_dims.size())
        throw std::invalid_argument("assemble_tt_operator: order mismatch");
    for (std::size_t m = 0; m < cdims.size(); ++m)
        if (cdims[m] < 2 * (in_dims[m] - 1) + 1)
            throw std::invalid_argument("assemble_tt_operator: coefficient degree below the required 2(d-1)+1");
    const auto tables = triple_tables(out_dims, cdims, in_dims);
    DiscreteOperatorTT op;
    op.out_dims = out_dims;
    op.in_dims = in_dims;
    op.terms.push_back(assemble_term(coef.a11, space, 0, 0, tables));
    op.terms.push_back(assemble_term(coef.a12, space, 0, 1, tables));
    op.terms.push_back(assemble_term(coef.a12, space, 1, 0, tables));
    op.terms.push_back(assemble_term(coef.a22, space, 1, 1, tables));
    return op;
}

TensorTrain assemble_tt_rhs(const TensorTrain& f, const FeSpaceP1& space, const std::vector<int>& out_dims)
{
    if (f.phys_dim() != space.mesh().num_cells())
        throw std::invalid_argument("assemble_tt_rhs: physical size must equal the cell count");
    TensorTrain g = f;
    g.phys.resize(space.num_dofs(), f.phys.cols());
    for (Eigen::Index k = 0; k < f.phys.cols(); ++k) {
        const Eigen::VectorXd v = f.phys.col(k);
        g.phys.col(k) = assemble_load_p0(space, std::span<const double>(v.data(), v.size()));
    }
    g.orth = Orthogonality::none;
    return tt_resize_modes(g, out_dims);
}

PreconditionerH::PreconditionerH(const FeSpaceP1& space) : H0_(assemble_laplacian(space))
{
    if (H0_.rows() == 0) return;
    llt_.compute(H0_);
    if (llt_.info() != Eigen::Success) throw NumericalError("PreconditionerH: stiffness factorization failed");
}

Eigen::MatrixXd PreconditionerH::solve(const Eigen::MatrixXd& rhs) const
{
    if (H0_.rows() == 0) return rhs;
    Eigen::MatrixXd x(rhs.rows(), rhs.cols());
    parallel_for(rhs.cols(), [&](std::size_t b, std::size_t e, int) {
        for (std::size_t k = b; k < e; ++k) x.col(k) = llt_.solve(rhs.col(k));
    });
    return x;
}

Eigen::MatrixXd PreconditionerH::whiten(const Eigen::MatrixXd& x) const
{
    if (H0_.rows() == 0) return x;
    Eigen::MatrixXd y(x.rows(), x.cols());
    parallel_for(x.cols(), [&](std::size_t b, std::size_t e, int) {
        for (std::size_t k = b; k < e; ++k) {
            Eigen::VectorXd v = llt_.permutationP() * x.col(k);
            llt_.matrixL().solveInPlace(v);
            y.col(k) = v;
        }
    });
    return y;
}

TensorTrain apply_preconditioner(const PreconditionerH& H, const TensorTrain& tt)
{
    TensorTrain out = tt;
    out.phys = H.matrix() * tt.phys;
    if (out.orth == Orthogonality::right) out.orth = Orthogonality::none;
    return out;
}

TensorTrain apply_preconditioner_inverse(const PreconditionerH& H, const TensorTrain& tt)
{
    TensorTrain out = tt;
    out.phys = H.solve(tt.phys);
    if (out.orth == Orthogonality::right) out.orth = Orthogonality::none;
    return out;
}

}  // namespace rdsg
