#include "rdsg/tensor_train.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace rdsg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Smallest k >= 1 (and <= cap) such that the tail of s beyond k has norm <= delta.
int truncation_rank(const Eigen::VectorXd& s, double delta, int cap, double& discarded_sq)
{
    const int n = static_cast<int>(s.size());
    int k = n;
    double tail = 0.0;
    while (k > 1 && tail + s[k - 1] * s[k - 1] <= delta * delta) {
        tail += s[k - 1] * s[k - 1];
        --k;
    }
    if (cap > 0 && k > cap) {
        for (int j = cap; j < k; ++j) tail += s[j] * s[j];
        k = cap;
    }
    discarded_sq = tail;
    return std::max(k, 1);
}

void check_same_shape(const TensorTrain& a, const TensorTrain& b, const char* what)
{
    if (a.phys_dim() != b.phys_dim() || a.dims() != b.dims())
        throw std::invalid_argument(std::string(what) + ": tensor shapes differ");
}

}  // namespace

Eigen::MatrixXd Core3::slice(int mu) const
{
    Eigen::MatrixXd s(left, right);
    for (int a = 0; a < left; ++a)
        for (int b = 0; b < right; ++b) s(a, b) = (*this)(a, mu, b);
    return s;
}

Eigen::MatrixXd Core3::left_unfolding() const
{
    return Eigen::Map<const RowMat>(data.data(), std::int64_t(left) * n, right);
}

Eigen::MatrixXd Core3::right_unfolding() const
{
    return Eigen::Map<const RowMat>(data.data(), left, std::int64_t(n) * right);
}

Core3 Core3::from_left_unfolding(const Eigen::MatrixXd& m, int n)
{
    if (m.rows() % n != 0) throw std::invalid_argument("Core3: left unfolding rows not divisible by mode size");
    Core3 c(static_cast<int>(m.rows() / n), n, static_cast<int>(m.cols()));
    Eigen::Map<RowMat>(c.data.data(), m.rows(), m.cols()) = m;
    return c;
}

Core3 Core3::from_right_unfolding(const Eigen::MatrixXd& m, int n)
{
    if (m.cols() % n != 0) throw std::invalid_argument("Core3: right unfolding cols not divisible by mode size");
    Core3 c(static_cast<int>(m.rows()), n, static_cast<int>(m.cols() / n));
    Eigen::Map<RowMat>(c.data.data(), m.rows(), m.cols()) = m;
    return c;
}

std::vector<int> TensorTrain::dims() const
{
    std::vector<int> d;
    d.reserve(cores.size());
    for (const auto& c : cores) d.push_back(c.n);
    return d;
}

std::vector<int> TensorTrain::ranks() const
{
    std::vector<int> r;
    r.push_back(static_cast<int>(phys.cols()));
    for (std::size_t m = 0; m + 1 < cores.size(); ++m) r.push_back(cores[m].right);
    if (cores.empty()) r.clear();
    return r;
}

void TensorTrain::validate() const
{
    int r = static_cast<int>(phys.cols());
    for (const auto& c : cores) {
        if (c.left != r) throw std::invalid_argument("TensorTrain: rank chain mismatch");
        if (c.n < 1) throw std::invalid_argument("TensorTrain: mode size must be positive");
        if (c.data.size() != std::int64_t(c.left) * c.n * c.right)
            throw std::invalid_argument("TensorTrain: component storage size mismatch");
        r = c.right;
    }
    if (r != 1) throw std::invalid_argument("TensorTrain: last rank must be 1");
}

std::int64_t tt_dofs(const TensorTrain& tt)
{
    std::int64_t n = tt.phys.size();
    for (const auto& c : tt.cores) n += c.data.size();
    for (int r : tt.ranks()) n -= std::int64_t(r) * r;
    return n;
}

TensorTrain tt_from_full(const Eigen::VectorXd& full, int n_phys, const std::vector<int>& dims, double tol)
{
    if (tol < 0) throw std::invalid_argument("tt_from_full: tol must be nonnegative");
    std::int64_t total = n_phys;
    for (int d : dims) total *= d;
    if (full.size() != total) throw std::invalid_argument("tt_from_full: size does not match shape");
    const int M = static_cast<int>(dims.size());
    const double norm = full.norm();
    const double delta = M > 0 ? std::max(tol * norm / std::sqrt(double(M)), 1e-14 * norm) : 0.0;

    TensorTrain tt;
    tt.cores.resize(M);
    RowMat x = Eigen::Map<const RowMat>(full.data(), total / (M > 0 ? dims[M - 1] : 1), M > 0 ? dims[M - 1] : 1);
    int r = 1;
    for (int m = M - 1; m >= 0; --m) {
        const int d = dims[m];
        RowMat y = Eigen::Map<const RowMat>(x.data(), x.size() / (std::int64_t(d) * r), std::int64_t(d) * r);
        Eigen::BDCSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
        double disc = 0.0;
        const int k = truncation_rank(svd.singularValues(), delta, 0, disc);
        tt.cores[m] = Core3::from_right_unfolding(svd.matrixV().leftCols(k).transpose(), d);
        x = svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal();
        r = k;
    }
    tt.phys = x;
    tt.orth = M > 0 ? Orthogonality::left : Orthogonality::none;
    return tt;
}

Eigen::VectorXd tt_to_full(const TensorTrain& tt)
{
    Eigen::MatrixXd x = tt.phys;
    for (const auto& c : tt.cores) {
        const Eigen::MatrixXd z = x * c.right_unfolding();
        Eigen::MatrixXd xn(x.rows() * c.n, c.right);
        for (Eigen::Index row = 0; row < x.rows(); ++row)
            for (int mu = 0; mu < c.n; ++mu)
                for (int b = 0; b < c.right; ++b) xn(row * c.n + mu, b) = z(row, std::int64_t(mu) * c.right + b);
        x = std::move(xn);
    }
    return x.col(0);
}

TensorTrain orthogonalize(const TensorTrain& in, Orthogonality dir)
{
    in.validate();
    TensorTrain tt = in;
    const int M = tt.order();
    if (dir == Orthogonality::none) {
        tt.orth = Orthogonality::none;
        return tt;
    }
    if (dir == Orthogonality::left) {
        for (int m = M - 1; m >= 0; --m) {
            const Eigen::MatrixXd a = tt.cores[m].right_unfolding();
            const Eigen::MatrixXd at = a.transpose();
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(at);
            const int k = static_cast<int>(std::min(at.rows(), at.cols()));
            const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(at.rows(), k);
            const Eigen::MatrixXd rt = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>().toDenseMatrix();
            tt.cores[m] = Core3::from_right_unfolding(q.transpose(), tt.cores[m].n);
            const Eigen::MatrixXd rl = rt.transpose();  // r_{m-1} x k
            if (m > 0)
                tt.cores[m - 1] = Core3::from_left_unfolding(tt.cores[m - 1].left_unfolding() * rl, tt.cores[m - 1].n);
            else
                tt.phys = tt.phys * rl;
        }
        tt.orth = M > 0 ? Orthogonality::left : Orthogonality::none;
        return tt;
    }
    // right
    auto split = [](const Eigen::MatrixXd& a, Eigen::MatrixXd& q, Eigen::MatrixXd& r) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        const int k = static_cast<int>(std::min(a.rows(), a.cols()));
        q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), k);
        r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>().toDenseMatrix();
    };
    if (M == 0) return tt;
    Eigen::MatrixXd q, r;
    split(tt.phys, q, r);
    tt.phys = q;
    tt.cores[0] = Core3::from_right_unfolding(r * tt.cores[0].right_unfolding(), tt.cores[0].n);
    for (int m = 0; m + 1 < M; ++m) {
        split(tt.cores[m].left_unfolding(), q, r);
        tt.cores[m] = Core3::from_left_unfolding(q, tt.cores[m].n);
        tt.cores[m + 1] = Core3::from_right_unfolding(r * tt.cores[m + 1].right_unfolding(), tt.cores[m + 1].n);
    }
    tt.orth = Orthogonality::right;
    return tt;
}

RoundResult tt_round(const TensorTrain& in, double tol, const std::vector<int>& max_ranks)
{
    if (tol < 0) throw std::invalid_argument("tt_round: tol must be nonnegative");
    const int M = in.order();
    if (!max_ranks.empty() && static_cast<int>(max_ranks.size()) != M)
        throw std::invalid_argument("tt_round: max_ranks needs one entry per bond");
    if (M == 0) return {in, 0.0};
    TensorTrain tt = orthogonalize(in, Orthogonality::right);
    const double norm = tt.cores[M - 1].data.norm();
    const double delta = tol * norm / std::sqrt(double(M));
    double err_sq = 0.0;
    for (int m = M - 1; m >= 0; --m) {
        const Eigen::MatrixXd a = tt.cores[m].right_unfolding();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        double disc = 0.0;
        const int cap = max_ranks.empty() ? 0 : max_ranks[m];
        const int k = truncation_rank(svd.singularValues(), delta, cap, disc);
        err_sq += disc;
        tt.cores[m] = Core3::from_right_unfolding(svd.matrixV().leftCols(k).transpose(), tt.cores[m].n);
        const Eigen::MatrixXd us = svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal();
        if (m > 0)
            tt.cores[m - 1] = Core3::from_left_unfolding(tt.cores[m - 1].left_unfolding() * us, tt.cores[m - 1].n);
        else
            tt.phys = tt.phys * us;
    }
    tt.orth = Orthogonality::left;
    return {std::move(tt), std::sqrt(err_sq)};
}

Eigen::VectorXd tt_eval_slice(const TensorTrain& tt, const std::vector<int>& mu)
{
    if (static_cast<int>(mu.size()) != tt.order()) throw std::invalid_argument("tt_eval: multi-index length mismatch");
    Eigen::VectorXd v = Eigen::VectorXd::Ones(1);
    for (int m = tt.order() - 1; m >= 0; --m) {
        const auto& c = tt.cores[m];
        if (mu[m] < 0 || mu[m] >= c.n) throw std::out_of_range("tt_eval: multi-index out of range");
        v = c.slice(mu[m]) * v;
    }
    return tt.phys * v;
}

double tt_eval(const TensorTrain& tt, int i, const std::vector<int>& mu)
{
    if (i < 0 || i >= tt.phys_dim()) throw std::out_of_range("tt_eval: physical index out of range");
    if (static_cast<int>(mu.size()) != tt.order()) throw std::invalid_argument("tt_eval: multi-index length mismatch");
    Eigen::RowVectorXd row = tt.phys.row(i);
    for (int m = 0; m < tt.order(); ++m) {
        const auto& c = tt.cores[m];
        if (mu[m] < 0 || mu[m] >= c.n) throw std::out_of_range("tt_eval: multi-index out of range");
        row = row * c.slice(mu[m]);
    }
    return row(0);
}

double tt_dot(const TensorTrain& a, const TensorTrain& b)
{
    check_same_shape(a, b, "tt_dot");
    Eigen::MatrixXd g = a.phys.transpose() * b.phys;
    for (int m = 0; m < a.order(); ++m) {
        const auto& ca = a.cores[m];
        const auto& cb = b.cores[m];
        const Eigen::MatrixXd gb = g * cb.right_unfolding();  // ra x (mu, rb')
        Eigen::MatrixXd gn = Eigen::MatrixXd::Zero(ca.right, cb.right);
        for (int mu = 0; mu < ca.n; ++mu)
            gn.noalias() += ca.slice(mu).transpose() * gb.middleCols(std::int64_t(mu) * cb.right, cb.right);
        g = std::move(gn);
    }
    return g.sum();
}

double tt_norm(const TensorTrain& a)
{
    if (a.order() == 0) return a.phys.norm();
    return orthogonalize(a, Orthogonality::left).phys.norm();
}

TensorTrain tt_add(const TensorTrain& a, const TensorTrain& b)
{
    check_same_shape(a, b, "tt_add");
    const int M = a.order();
    TensorTrain out;
    if (M == 0) {
        out.phys = a.phys + b.phys;
        return out;
    }
    out.phys.resize(a.phys_dim(), a.phys.cols() + b.phys.cols());
    out.phys << a.phys, b.phys;
    out.cores.resize(M);
    for (int m = 0; m < M; ++m) {
        const auto& ca = a.cores[m];
        const auto& cb = b.cores[m];
        const bool last = m == M - 1;
        Core3 c(ca.left + cb.left, ca.n, last ? 1 : ca.right + cb.right);
        for (int mu = 0; mu < ca.n; ++mu) {
            for (int i = 0; i < ca.left; ++i)
                for (int j = 0; j < ca.right; ++j) c(i, mu, j) = ca(i, mu, j);
            for (int i = 0; i < cb.left; ++i)
                for (int j = 0; j < cb.right; ++j) c(ca.left + i, mu, last ? j : ca.right + j) = cb(i, mu, j);
        }
        out.cores[m] = std::move(c);
    }
    return out;
}

TensorTrain tt_scale(const TensorTrain& a, double s)
{
    TensorTrain out = a;
    out.phys *= s;
    return out;
}

TensorTrain tt_random(int n_phys, const std::vector<int>& dims, const std::vector<int>& ranks, std::uint64_t seed)
{
    const int M = static_cast<int>(dims.size());
    if (n_phys < 1) throw std::invalid_argument("tt_random: physical dimension must be positive");
    if (static_cast<int>(ranks.size()) != M) throw std::invalid_argument("tt_random: one rank per bond required");
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    TensorTrain tt;
    const int r0 = M > 0 ? ranks[0] : 1;
    tt.phys.resize(n_phys, r0);
    for (int i = 0; i < n_phys; ++i)
        for (int k = 0; k < r0; ++k) tt.phys(i, k) = nd(gen);
    for (int m = 0; m < M; ++m) {
        if (dims[m] < 1 || ranks[m] < 1) throw std::invalid_argument("tt_random: dims and ranks must be positive");
        Core3 c(ranks[m], dims[m], m + 1 < M ? ranks[m + 1] : 1);
        for (Eigen::Index j = 0; j < c.data.size(); ++j) c.data[j] = nd(gen);
        tt.cores.push_back(std::move(c));
    }
    return tt;
}

TensorTrain tt_constant(const Eigen::VectorXd& v, const std::vector<int>& dims)
{
    TensorTrain tt;
    tt.phys = v;
    for (int d : dims) {
        Core3 c(1, d, 1);
        c(0, 0, 0) = 1.0;
        tt.cores.push_back(std::move(c));
    }
    tt.orth = dims.empty() ? Orthogonality::none : Orthogonality::left;
    return tt;
}

TensorTrain tt_resize_modes(const TensorTrain& tt, const std::vector<int>& new_dims)
{
    if (static_cast<int>(new_dims.size()) != tt.order()) throw std::invalid_argument("tt_resize_modes: order mismatch");
    TensorTrain out;
    out.phys = tt.phys;
    for (int m = 0; m < tt.order(); ++m) {
        const auto& c = tt.cores[m];
        Core3 n(c.left, new_dims[m], c.right);
        const int keep = std::min(c.n, new_dims[m]);
        for (int a = 0; a < c.left; ++a)
            for (int mu = 0; mu < keep; ++mu)
                for (int b = 0; b < c.right; ++b) n(a, mu, b) = c(a, mu, b);
        out.cores.push_back(std::move(n));
    }
    return out;
}

std::vector<int> tt_max_ranks(int n_phys, const std::vector<int>& dims)
{
    const int M = static_cast<int>(dims.size());
    std::vector<int> r(M);
    constexpr double cap = std::numeric_limits<int>::max();
    double leftp = n_phys;
    for (int m = 0; m < M; ++m) {
        double rightp = 1.0;
        for (int j = m; j < M; ++j) rightp = std::min(cap, rightp * dims[j]);
        r[m] = static_cast<int>(std::min({leftp, rightp, cap}));
        leftp = std::min(cap, leftp * dims[m]);
    }
    return r;
}

void write_tt(std::ostream& out, const TensorTrain& tt)
{
    const auto prec = out.precision(17);
    out << "TT " << tt.order() << ' ' << tt.phys_dim() << '\n';
    for (int d : tt.dims()) out << d << ' ';
    out << '\n';
    for (int r : tt.ranks()) out << r << ' ';
    out << '\n';
    for (Eigen::Index i = 0; i < tt.phys.rows(); ++i) {
        for (Eigen::Index k = 0; k < tt.phys.cols(); ++k) out << tt.phys(i, k) << (k + 1 < tt.phys.cols() ? ' ' : '\n');
    }
    for (const auto& c : tt.cores) {
        for (Eigen::Index j = 0; j < c.data.size(); ++j) out << c.data[j] << (j + 1 < c.data.size() ? ' ' : '\n');
    }
    out.precision(prec);
}

TensorTrain read_tt(std::istream& in)
{
    std::string tag;
    int M = 0, n = 0;
    if (!(in >> tag >> M >> n) || tag != "TT" || M < 0 || n < 1) throw std::runtime_error("read_tt: bad header");
    std::vector<int> dims(M), ranks(M);
    for (auto& d : dims) in >> d;
    for (auto& r : ranks) in >> r;
    if (!in) throw std::runtime_error("read_tt: bad shape lines");
    TensorTrain tt;
    tt.phys.resize(n, M > 0 ? ranks[0] : 1);
    for (Eigen::Index i = 0; i < tt.phys.rows(); ++i)
        for (Eigen::Index k = 0; k < tt.phys.cols(); ++k) in >> tt.phys(i, k);
    for (int m = 0; m < M; ++m) {
        Core3 c(ranks[m], dims[m], m + 1 < M ? ranks[m + 1] : 1);
        for (Eigen::Index j = 0; j < c.data.size(); ++j) in >> c.data[j];
        tt.cores.push_back(std::move(c));
    }
    if (!in) throw std::runtime_error("read_tt: truncated component data");
    tt.validate();
    return tt;
}

}  // namespace rdsg
