#include "rdsg/dense_oracle.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "rdsg/legendre.hpp"
#include "rdsg/reconstruct.hpp"

namespace rdsg::oracle {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

int box_size(const std::vector<int>& dims)
{
    int n = 1;
    for (int d : dims) n *= d;
    return n;
}

std::vector<int> unflatten(int idx, const std::vector<int>& dims)
{
    std::vector<int> mu(dims.size());
    for (int m = static_cast<int>(dims.size()) - 1; m >= 0; --m) {
        mu[m] = idx % dims[m];
        idx /= dims[m];
    }
    return mu;
}

/// Barycentric gradients and area from the raw coordinates.
struct CellGeom {
    double area;
    std::array<Eigen::Vector2d, 3> grad;
};

CellGeom geometry(const TriMesh& mesh, int c)
{
    const auto& t = mesh.cell(c);
    const Point& x0 = mesh.vertex(t[0]);
    Eigen::Matrix2d B;
    B.col(0) = mesh.vertex(t[1]) - x0;
    B.col(1) = mesh.vertex(t[2]) - x0;
    const Eigen::Matrix2d Binv = B.inverse();
    CellGeom g;
    g.area = 0.5 * std::abs(B.determinant());
    g.grad[1] = Binv.row(0).transpose();
    g.grad[2] = Binv.row(1).transpose();
    g.grad[0] = -(g.grad[1] + g.grad[2]);
    return g;
}

Mat physical_matrix(const FeSpaceP1& space, const std::array<Vec, 3>& a)
{
    const TriMesh& mesh = space.mesh();
    const int N = space.num_dofs();
    Mat K = Mat::Zero(N, N);
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const CellGeom g = geometry(mesh, c);
        Eigen::Matrix2d A;
        A << a[0][c], a[1][c], a[1][c], a[2][c];
        const auto& t = mesh.cell(c);
        for (int i = 0; i < 3; ++i) {
            const int di = space.dof(t[i]);
            if (di < 0) continue;
            for (int j = 0; j < 3; ++j) {
                const int dj = space.dof(t[j]);
                if (dj < 0) continue;
                K(di, dj) += g.area * g.grad[i].dot(A * g.grad[j]);
            }
        }
    }
    return K;
}

Vec physical_load(const FeSpaceP1& space, const Vec& f)
{
    const TriMesh& mesh = space.mesh();
    Vec b = Vec::Zero(space.num_dofs());
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const double area = geometry(mesh, c).area;
        for (int v : mesh.cell(c)) {
            const int d = space.dof(v);
            if (d >= 0) b[d] += f[c] * area / 3.0;
        }
    }
    return b;
}

std::vector<int> nodes_for(const std::vector<int>& a, const std::vector<int>& b, const std::vector<int>& c)
{
    std::vector<int> n(a.size());
    for (std::size_t m = 0; m < a.size(); ++m) n[m] = (a[m] + b[m] + c[m]) / 2 + 1;
    return n;
}

std::vector<int> xi_dims(const std::vector<int>& lambda)
{
    std::vector<int> x(lambda.size());
    for (std::size_t m = 0; m < lambda.size(); ++m) x[m] = std::max(2 * (lambda[m] - 1) + 1, lambda[m] + 1);
    return x;
}

}  // namespace

ParamRule tensor_rule(const std::vector<int>& nodes)
{
    ParamRule r;
    r.points.push_back({});
    r.weights.push_back(1.0);
    for (int n : nodes) {
        const GaussRule g = gauss_legendre(n);
        ParamRule next;
        for (std::size_t k = 0; k < r.points.size(); ++k)
            for (int j = 0; j < n; ++j) {
                auto p = r.points[k];
                p.push_back(g.nodes[j]);
                next.points.push_back(std::move(p));
                next.weights.push_back(r.weights[k] * g.weights[j]);
            }
        r = std::move(next);
    }
    return r;
}

Eigen::VectorXd legendre_tensor(const std::vector<int>& dims, const std::vector<double>& y)
{
    const int n = box_size(dims);
    Vec out(n);
    for (int k = 0; k < n; ++k) {
        const auto mu = unflatten(k, dims);
        double v = 1.0;
        for (std::size_t m = 0; m < dims.size(); ++m) v *= legendre_orthonormal(mu[m], y[m]);
        out[k] = v;
    }
    return out;
}

Eigen::MatrixXd galerkin_matrix(const CoefficientTT& coef, const FeSpaceP1& space, const std::vector<int>& out_dims,
                                const std::vector<int>& in_dims)
{
    const int N = space.num_dofs();
    const int no = box_size(out_dims), ni = box_size(in_dims);
    const ParamRule rule = tensor_rule(nodes_for(coef.a11.dims(), out_dims, in_dims));
    Mat L = Mat::Zero(std::int64_t(N) * no, std::int64_t(N) * ni);
    for (std::size_t k = 0; k < rule.points.size(); ++k) {
        const auto& y = rule.points[k];
        const std::array<Vec, 3> a{tt_eval_at(coef.a11, y), tt_eval_at(coef.a12, y), tt_eval_at(coef.a22, y)};
        const Mat K = physical_matrix(space, a);
        const Mat S = rule.weights[k] * legendre_tensor(out_dims, y) * legendre_tensor(in_dims, y).transpose();
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                if (K(i, j) != 0.0) L.block(std::int64_t(i) * no, std::int64_t(j) * ni, no, ni) += K(i, j) * S;
    }
    return L;
}

Eigen::VectorXd galerkin_rhs(const TensorTrain& f, const FeSpaceP1& space, const std::vector<int>& out_dims)
{
    const int N = space.num_dofs();
    const int no = box_size(out_dims);
    const ParamRule rule = tensor_rule(nodes_for(f.dims(), out_dims, std::vector<int>(out_dims.size(), 1)));
    Vec F = Vec::Zero(std::int64_t(N) * no);
    for (std::size_t k = 0; k < rule.points.size(); ++k) {
        const auto& y = rule.points[k];
        const Vec b = physical_load(space, tt_eval_at(f, y));
        const Vec P = rule.weights[k] * legendre_tensor(out_dims, y);
        for (int i = 0; i < N; ++i) F.segment(std::int64_t(i) * no, no) += b[i] * P;
    }
    return F;
}

Eigen::VectorXd galerkin_solve(const Eigen::MatrixXd& L, const Eigen::VectorXd& F)
{
    return L.fullPivLu().solve(F);
}

Estimates estimates(const Eigen::VectorXd& w, const TensorTrain& f, const CoefficientTT& coef,
                    const FeSpaceP1& space, const std::vector<int>& lambda_dims)
{
    const TriMesh& mesh = space.mesh();
    const int M = static_cast<int>(lambda_dims.size());
    const int N = space.num_dofs();
    const int nl = box_size(lambda_dims);
    if (w.size() != std::int64_t(N) * nl) throw std::invalid_argument("oracle::estimates: w size");
    Estimates out;

    // Volume part.
    {
        const ParamRule rule = tensor_rule(nodes_for(f.dims(), lambda_dims, std::vector<int>(M, 1)));
        Mat c = Mat::Zero(mesh.num_cells(), nl);
        for (std::size_t k = 0; k < rule.points.size(); ++k) {
            const Vec v = tt_eval_at(f, rule.points[k]);
            const Vec P = rule.weights[k] * legendre_tensor(lambda_dims, rule.points[k]);
            c += v * P.transpose();
        }
        for (int t = 0; t < mesh.num_cells(); ++t) {
            const double area = geometry(mesh, t).area;
            out.eta_T.push_back(mesh.diameter(t) * std::sqrt(area * c.row(t).squaredNorm()));
        }
    }
    // Jump part.
    {
        std::vector<int> twice(M);
        for (int m = 0; m < M; ++m) twice[m] = 2 * lambda_dims[m];
        const ParamRule rule = tensor_rule(nodes_for(coef.a11.dims(), twice, std::vector<int>(M, 1)));
        const auto& edges = mesh.interior_edges();
        Mat c = Mat::Zero(static_cast<Eigen::Index>(edges.size()), nl);
        for (std::size_t k = 0; k < rule.points.size(); ++k) {
            const auto& y = rule.points[k];
            const Vec P = legendre_tensor(lambda_dims, y);
            Vec wd = Vec::Zero(N);
            for (int i = 0; i < N; ++i) wd[i] = w.segment(std::int64_t(i) * nl, nl).dot(P);
            const Vec wv = space.extend(wd);
            const std::array<Vec, 3> a{tt_eval_at(coef.a11, y), tt_eval_at(coef.a12, y), tt_eval_at(coef.a22, y)};
            std::vector<Eigen::Vector2d> flux(mesh.num_cells());
            for (int t = 0; t < mesh.num_cells(); ++t) {
                const CellGeom g = geometry(mesh, t);
                Eigen::Vector2d grad = Eigen::Vector2d::Zero();
                for (int j = 0; j < 3; ++j) grad += wv[mesh.cell(t)[j]] * g.grad[j];
                Eigen::Matrix2d A;
                A << a[0][t], a[1][t], a[1][t], a[2][t];
                flux[t] = A * grad;
            }
            for (std::size_t e = 0; e < edges.size(); ++e) {
                const Edge& E = mesh.edge(edges[e]);
                const double jump = (flux[E.cells[0]] - flux[E.cells[1]]).dot(E.normal);
                c.row(static_cast<Eigen::Index>(e)) += rule.weights[k] * jump * P.transpose();
            }
        }
        for (std::size_t e = 0; e < edges.size(); ++e)
            out.eta_S.push_back(mesh.edge(edges[e]).length * c.row(static_cast<Eigen::Index>(e)).norm());
    }
    double e2 = 0.0;
    for (double v : out.eta_T) e2 += v * v;
    for (double v : out.eta_S) e2 += v * v;
    out.eta = std::sqrt(e2);

    // Residual on the extended set, dual norm through a dense stiffness factorization.
    const std::vector<int> xd = xi_dims(lambda_dims);
    const int nx = box_size(xd);
    const Vec R = galerkin_rhs(f, space, xd) - galerkin_matrix(coef, space, xd, lambda_dims) * w;
    std::array<Vec, 3> ident{Vec::Ones(mesh.num_cells()), Vec::Zero(mesh.num_cells()), Vec::Ones(mesh.num_cells())};
    const Eigen::LLT<Mat> H0(physical_matrix(space, ident));
    out.zeta_m.assign(M, 0.0);
    double z2 = 0.0, i2 = 0.0;
    for (int k = 0; k < nx; ++k) {
        Vec r(N);
        for (int i = 0; i < N; ++i) r[i] = R[std::int64_t(i) * nx + k];
        const double v = N > 0 ? r.dot(H0.solve(r)) : 0.0;
        const auto nu = unflatten(k, xd);
        int outside = 0, where = -1;
        for (int m = 0; m < M; ++m)
            if (nu[m] >= lambda_dims[m]) {
                ++outside;
                where = m;
            }
        if (outside == 0) {
            i2 += v;
            continue;
        }
        z2 += v;
        if (outside == 1 && nu[where] == lambda_dims[where]) out.zeta_m[where] += v;
    }
    for (double& z : out.zeta_m) z = std::sqrt(z);
    out.zeta = std::sqrt(z2);
    out.iota = std::sqrt(i2);
    return out;
}

ScalarEstimate scalar_residual_estimator(const TriMesh& mesh, const std::vector<double>& vertex_values,
                                         const std::vector<double>& f_per_cell)
{
    ScalarEstimate out;
    std::vector<Eigen::Vector2d> grad(mesh.num_cells());
    for (int t = 0; t < mesh.num_cells(); ++t) {
        const CellGeom g = geometry(mesh, t);
        grad[t].setZero();
        for (int j = 0; j < 3; ++j) grad[t] += vertex_values[mesh.cell(t)[j]] * g.grad[j];
        out.eta_T.push_back(mesh.diameter(t) * std::sqrt(g.area) * std::abs(f_per_cell[t]));
    }
    for (int e : mesh.interior_edges()) {
        const Edge& E = mesh.edge(e);
        out.eta_S.push_back(E.length * std::abs((grad[E.cells[0]] - grad[E.cells[1]]).dot(E.normal)));
    }
    double s = 0.0;
    for (double v : out.eta_T) s += v * v;
    for (double v : out.eta_S) s += v * v;
    out.eta = std::sqrt(s);
    return out;
}

}  // namespace rdsg::oracle
