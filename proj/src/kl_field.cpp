#include "rdsg/kl_field.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "rdsg/error.hpp"
#include "rdsg/fem.hpp"
#include "rdsg/parallel.hpp"

namespace rdsg {

CovKernel CovKernel::reference()
{
    CovKernel k;
    k.entry[0][0] = {5.0, 2.0, 1.0, 1.0};
    k.entry[0][1] = {1.0, 0.1, 2.0, 1.0};
    k.entry[1][0] = {1.0, 0.1, 1.0, 2.0};
    k.entry[1][1] = {5.0, 0.5, 1.0, 1.0};
    k.scale = 1.0 / 1000.0;
    return k;
}

PivotedCholesky pivoted_cholesky(const Eigen::VectorXd& diag, const std::function<Eigen::VectorXd(int)>& column,
                                 double rel_tol)
{
    if (!(rel_tol > 0.0 && rel_tol <= 1.0)) throw std::invalid_argument("pivoted_cholesky: rel_tol must lie in (0,1]");
    const int n = static_cast<int>(diag.size());
    Eigen::VectorXd d = diag;
    const double trace0 = d.sum();
    PivotedCholesky out;
    out.remaining_trace.push_back(trace0);
    if (trace0 < 0.0) throw NumericalError("pivoted_cholesky: negative trace, matrix is not SPSD");
    std::vector<Eigen::VectorXd> cols;
    double trace = trace0;
    while (trace > rel_tol * trace0 && static_cast<int>(cols.size()) < n) {
        int piv = 0;
        for (int j = 1; j < n; ++j)
            if (d[j] > d[piv]) piv = j;
        if (d[piv] <= 0.0) break;
        Eigen::VectorXd c = column(piv);
        if (c.size() != n) throw std::invalid_argument("pivoted_cholesky: column evaluator returned wrong size");
        for (std::size_t k = 0; k < cols.size(); ++k) c -= cols[k][piv] * cols[k];
        c /= std::sqrt(d[piv]);
        for (int j = 0; j < n; ++j) {
            d[j] -= c[j] * c[j];
            if (d[j] < -1e-12 * trace0)
                throw NumericalError("pivoted_cholesky: negative remaining diagonal, matrix is not SPSD");
            if (d[j] < 0.0) d[j] = 0.0;
        }
        d[piv] = 0.0;
        cols.push_back(std::move(c));
        out.pivots.push_back(piv);
        trace = d.sum();
        out.remaining_trace.push_back(trace);
    }
    out.L.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.L.col(static_cast<Eigen::Index>(k)) = cols[k];
    return out;
}

void KLExpansion::compute_derived()
{
    const TriMesh& mesh = *mesh_;
    const int nc = mesh.num_cells();
    jac_.assign(std::size_t(M_) * nc, Eigen::Matrix2d::Zero());
    gamma_.assign(M_, 0.0);
    for (int m = 0; m < M_; ++m) {
        double cmax = 0.0, vmax = 0.0;
        for (int c = 0; c < nc; ++c) {
            const auto& t = mesh.cell(c);
            const auto g = p1_gradients(mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2]));
            Eigen::Matrix2d C = Eigen::Matrix2d::Zero();
            for (int a = 0; a < 3; ++a) C += modes_[m].row(t[a]).transpose() * g[a].transpose();
            jac_[std::size_t(m) * nc + c] = C;
            Eigen::JacobiSVD<Eigen::Matrix2d> svd(C);
            cmax = std::max(cmax, svd.singularValues()[0]);
        }
        for (int v = 0; v < mesh.num_vertices(); ++v) vmax = std::max(vmax, modes_[m].row(v).norm());
        gamma_[m] = cmax + vmax;
    }
}

void KLExpansion::finish_on_mesh()
{
    const TriMesh& mesh = *mesh_;
    const int nv = mesh.num_vertices();
    const int np = static_cast<int>(pivot_points_.size());
    modes_.assign(M_, Eigen::MatrixXd::Zero(nv, 2));
    if (M_ > 0) {
        Eigen::MatrixXd K0(nv, np), K1(nv, np);
        parallel_for(nv, [&](std::size_t b, std::size_t e, int) {
            for (std::size_t v = b; v < e; ++v)
                for (int j = 0; j < np; ++j) {
                    K0(Eigen::Index(v), j) = kernel_.sym(0, pivot_comps_[j], mesh.vertex(int(v)), pivot_points_[j]);
                    K1(Eigen::Index(v), j) = kernel_.sym(1, pivot_comps_[j], mesh.vertex(int(v)), pivot_points_[j]);
                }
        });
        const Eigen::MatrixXd V0 = K0 * coef_, V1 = K1 * coef_;
        for (int m = 0; m < M_; ++m) {
            modes_[m].col(0) = V0.col(m);
            modes_[m].col(1) = V1.col(m);
        }
    }
    compute_derived();
}

Eigen::Vector2d KLExpansion::evaluate_mode(int m, const Point& x) const
{
    if (m < 0 || m >= M_) throw std::out_of_range("evaluate_mode: mode index out of range");
    if (pivot_points_.empty()) throw std::logic_error("evaluate_mode: expansion carries no kernel representation");
    Eigen::Vector2d v = Eigen::Vector2d::Zero();
    for (std::size_t j = 0; j < pivot_points_.size(); ++j) {
        v[0] += kernel_.sym(0, pivot_comps_[j], x, pivot_points_[j]) * coef_(Eigen::Index(j), m);
        v[1] += kernel_.sym(1, pivot_comps_[j], x, pivot_points_[j]) * coef_(Eigen::Index(j), m);
    }
    return v;
}

Eigen::MatrixXd KLExpansion::mode_gram() const
{
    const SparseMatrix Ms = assemble_mass_all_vertices(*mesh_);
    Eigen::MatrixXd G(M_, M_);
    for (int a = 0; a < M_; ++a)
        for (int b = 0; b < M_; ++b) {
            double s = 0.0;
            for (int c = 0; c < 2; ++c) {
                const Eigen::VectorXd va = modes_[a].col(c), vb = modes_[b].col(c);
                s += va.dot(Ms * vb);
            }
            G(a, b) = s;
        }
    return G;
}

KLExpansion KLExpansion::on_mesh(std::shared_ptr<const TriMesh> mesh) const
{
    if (M_ > 0 && pivot_points_.empty())
        throw std::logic_error("on_mesh: expansion carries no kernel representation");
    KLExpansion out = *this;
    out.mesh_ = std::move(mesh);
    out.finish_on_mesh();
    return out;
}

KLExpansion kl_from_covariance(std::shared_ptr<const TriMesh> mesh, const CovKernel& kernel, double eps)
{
    const TriMesh& m = *mesh;
    const int nv = m.num_vertices();
    const int n = 2 * nv;
    // Lumped vertex weights turn the nodal kernel matrix into a Nystrom
    // discretization of the covariance operator, so its trace is mesh independent.
    Eigen::VectorXd sw = Eigen::VectorXd::Zero(nv);
    for (int c = 0; c < m.num_cells(); ++c)
        for (int v : m.cell(c)) sw[v] += m.area(c) / 3.0;
    sw = sw.cwiseSqrt();
    Eigen::VectorXd diag(n);
    for (int v = 0; v < nv; ++v)
        for (int c = 0; c < 2; ++c) diag[2 * v + c] = sw[v] * sw[v] * kernel.sym(c, c, m.vertex(v), m.vertex(v));
    auto column = [&](int j) {
        Eigen::VectorXd col(n);
        const Point& xp = m.vertex(j / 2);
        const int cp = j % 2;
        for (int v = 0; v < nv; ++v)
            for (int c = 0; c < 2; ++c) col[2 * v + c] = sw[v] * sw[j / 2] * kernel.sym(c, cp, m.vertex(v), xp);
        return col;
    };
    KLExpansion kl;
    kl.mesh_ = mesh;
    kl.kernel_ = kernel;
    kl.eps_ = eps;
    PivotedCholesky pc;
    if (diag.sum() > 0.0) pc = pivoted_cholesky(diag, column, eps);
    const int r = static_cast<int>(pc.pivots.size());
    kl.M_ = r;
    if (r > 0) {
        // Nodal factor L = W^{-1/2} Lw; mass-orthogonalize: G = L^T (M (x) I_2) L = U diag(lambda) U^T.
        Eigen::MatrixXd L = pc.L;
        for (int v = 0; v < nv; ++v) L.middleRows(2 * v, 2) /= sw[v];
        const SparseMatrix Ms = assemble_mass_all_vertices(m);
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(r, r);
        for (int c = 0; c < 2; ++c) {
            Eigen::MatrixXd Lc(nv, r);
            for (int v = 0; v < nv; ++v) Lc.row(v) = L.row(2 * v + c);
            G += Lc.transpose() * (Ms * Lc);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()));
        Eigen::MatrixXd U(r, r);
        kl.lambda_.resize(r);
        for (int k = 0; k < r; ++k) {
            U.col(k) = es.eigenvectors().col(r - 1 - k);
            kl.lambda_[k] = std::max(0.0, es.eigenvalues()[r - 1 - k]);
        }
        // Lw = Cw(:,piv) Lw(piv,:)^{-T}, hence L = C(:,piv) diag(sw_piv) Lw(piv,:)^{-T}.
        Eigen::MatrixXd Lp(r, r);
        for (int k = 0; k < r; ++k) Lp.row(k) = pc.L.row(pc.pivots[k]);
        Eigen::MatrixXd coef = Lp.transpose().triangularView<Eigen::Upper>().solve(U);
        for (int k = 0; k < r; ++k) coef.row(k) *= sw[pc.pivots[k] / 2];
        kl.coef_ = std::sqrt(3.0) * coef;
        for (int k = 0; k < r; ++k) {
            kl.pivot_points_.push_back(m.vertex(pc.pivots[k] / 2));
            kl.pivot_comps_.push_back(pc.pivots[k] % 2);
        }
    }
    kl.finish_on_mesh();
    return kl;
}

KLExpansion kl_from_modes(std::shared_ptr<const TriMesh> mesh, const std::vector<Eigen::MatrixXd>& vertex_modes)
{
    KLExpansion kl;
    kl.mesh_ = std::move(mesh);
    kl.M_ = static_cast<int>(vertex_modes.size());
    for (const auto& vm : vertex_modes)
        if (vm.rows() != kl.mesh_->num_vertices() || vm.cols() != 2)
            throw std::invalid_argument("kl_from_modes: each mode needs N_V x 2 values");
    kl.modes_ = vertex_modes;
    kl.lambda_.assign(kl.M_, 0.0);
    kl.compute_derived();
    return kl;
}

FieldEval field_eval(const KLExpansion& kl, std::span<const double> y, const Forcing& f)
{
    const int M = kl.num_modes();
    if (static_cast<int>(y.size()) != M) throw std::invalid_argument("field_eval: parameter vector length mismatch");
    const TriMesh& mesh = kl.mesh();
    const int nc = mesh.num_cells();
    FieldEval fe;
    fe.J.resize(nc);
    fe.det.resize(nc);
    fe.A.resize(nc);
    fe.fhat.resize(nc);
    for (int c = 0; c < nc; ++c) {
        Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
        for (int m = 0; m < M; ++m) J += y[m] * kl.jacobian(m, c);
        const double det = J(0, 0) * J(1, 1) - J(0, 1) * J(1, 0);
        if (!(det > 0.0)) throw AdmissibilityError(c, det);
        const Eigen::Matrix2d JtJ = J.transpose() * J;
        Eigen::Matrix2d inv;
        const double dj = JtJ(0, 0) * JtJ(1, 1) - JtJ(0, 1) * JtJ(1, 0);
        inv << JtJ(1, 1), -JtJ(0, 1), -JtJ(1, 0), JtJ(0, 0);
        Eigen::Matrix2d A = inv * (det / dj);
        A(0, 1) = A(1, 0) = 0.5 * (A(0, 1) + A(1, 0));
        double fv = 1.0;
        if (f) {
            Point x = mesh.centroid(c);
            const auto& t = mesh.cell(c);
            for (int m = 0; m < M; ++m)
                x += y[m] * (kl.mode_value(m, t[0]) + kl.mode_value(m, t[1]) + kl.mode_value(m, t[2])) / 3.0;
            fv = f(x);
        }
        fe.J[c] = J;
        fe.det[c] = det;
        fe.A[c] = A;
        fe.fhat[c] = fv * det;
    }
    return fe;
}

UniformityEstimate estimate_uniformity(const KLExpansion& kl, int n_samples, std::uint64_t seed)
{
    if (n_samples < 1) throw std::invalid_argument("estimate_uniformity: need at least one sample");
    const int M = kl.num_modes();
    const int nc = kl.mesh().num_cells();
    std::vector<std::vector<double>> ys;
    const int mc = std::min(M, 12);
    for (int bits = 0; bits < (1 << mc); ++bits) {
        std::vector<double> y(M, 0.0);
        for (int m = 0; m < mc; ++m) y[m] = (bits >> m) & 1 ? 1.0 : -1.0;
        ys.push_back(std::move(y));
    }
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int s = 0; s < n_samples; ++s) {
        std::vector<double> y(M);
        for (auto& v : y) v = u(gen);
        ys.push_back(std::move(y));
    }
    UniformityEstimate est;
    est.min_det = est.c_lower = est.min_sv = std::numeric_limits<double>::infinity();
    est.c_upper = est.max_sv = 0.0;
    for (const auto& y : ys) {
        for (int c = 0; c < nc; ++c) {
            Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
            for (int m = 0; m < M; ++m) J += y[m] * kl.jacobian(m, c);
            const double det = J.determinant();
            if (det < est.min_det) {
                est.min_det = det;
                if (det <= 0.0) {
                    est.admissible = false;
                    est.bad_cell = c;
                }
            }
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(J.transpose() * J);
            const double s0 = std::sqrt(std::max(0.0, es.eigenvalues()[0]));
            const double s1 = std::sqrt(std::max(0.0, es.eigenvalues()[1]));
            est.min_sv = std::min(est.min_sv, s0);
            est.max_sv = std::max(est.max_sv, s1);
            if (det > 0.0) {
                // eigenvalues of det (J^T J)^{-1} are det / s^2
                est.c_lower = std::min(est.c_lower, det / (s1 * s1));
                est.c_upper = std::max(est.c_upper, det / (s0 * s0));
            }
        }
    }
    return est;
}

void write_kl(std::ostream& out, const KLExpansion& kl)
{
    const auto prec = out.precision(17);
    out << kl.num_modes() << '\n';
    for (double g : kl.gamma()) out << g << ' ';
    out << '\n';
    for (int m = 0; m < kl.num_modes(); ++m)
        for (int c = 0; c < kl.mesh().num_cells(); ++c) {
            const auto& C = kl.jacobian(m, c);
            out << C(0, 0) << ' ' << C(0, 1) << ' ' << C(1, 0) << ' ' << C(1, 1) << '\n';
        }
    out.precision(prec);
}

}  // namespace rdsg
