#include "rdsg/legendre.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace rdsg {

double legendre_orthonormal(int n, double x)
{
    if (n < 0) throw std::invalid_argument("legendre_orthonormal: negative degree");
    double p0 = 1.0, p1 = x;
    if (n == 0) return 1.0;
    for (int k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return std::sqrt(2.0 * n + 1.0) * p1;
}

Eigen::VectorXd legendre_all(int count, double x)
{
    Eigen::VectorXd v(count);
    double p0 = 1.0, p1 = x;
    for (int n = 0; n < count; ++n) {
        double pn;
        if (n == 0) {
            pn = 1.0;
        } else if (n == 1) {
            pn = x;
        } else {
            pn = ((2.0 * (n - 1) + 1.0) * x * p1 - (n - 1) * p0) / n;
            p0 = p1;
            p1 = pn;
        }
        v[n] = std::sqrt(2.0 * n + 1.0) * pn;
    }
    return v;
}

GaussRule gauss_legendre(int n)
{
    if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
    static std::mutex mtx;
    static std::map<int, GaussRule> cache;
    {
        std::lock_guard<std::mutex> lock(mtx);
        if (auto it = cache.find(n); it != cache.end()) return it->second;
    }
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 1; k < n; ++k) {
                const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
            }
            const double pn = n == 1 ? x : p1;
            const double pm = n == 1 ? 1.0 : p0;
            dp = n * (x * pn - pm) / (x * x - 1.0);
            const double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = x;
            for (int k = 1; k < n; ++k) {
                const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
            }
            const double pn = n == 1 ? x : p1;
            const double pm = n == 1 ? 1.0 : p0;
            dp = n * (x * pn - pm) / (x * x - 1.0);
        }
        rule.nodes[i] = x;
        rule.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);  // 2/((1-x^2)P'^2), halved
    }
    std::lock_guard<std::mutex> lock(mtx);
    cache.emplace(n, rule);
    return rule;
}

double triple_product(int a, int b, int c)
{
    if (a < 0 || b < 0 || c < 0) throw std::invalid_argument("triple_product: negative degree");
    if ((a + b + c) % 2 != 0) return 0.0;
    if (a > b + c || b > a + c || c > a + b) return 0.0;
    const GaussRule g = gauss_legendre((a + b + c + 1) / 2 + 1);
    double s = 0.0;
    for (Eigen::Index q = 0; q < g.nodes.size(); ++q) {
        const double x = g.nodes[q];
        s += g.weights[q] * legendre_orthonormal(a, x) * legendre_orthonormal(b, x) * legendre_orthonormal(c, x);
    }
    return s;
}

TripleProductTable::TripleProductTable(int d_out, int d_coef, int d_in)
    : d_out_(d_out), d_coef_(d_coef), d_in_(d_in), values_(std::size_t(d_out) * d_coef * d_in, 0.0)
{
    if (d_out < 0 || d_coef < 0 || d_in < 0) throw std::invalid_argument("TripleProductTable: negative size");
    const int nmax = d_out + d_coef + d_in;
    const GaussRule g = gauss_legendre(nmax / 2 + 2);
    const int nq = static_cast<int>(g.nodes.size());
    Eigen::MatrixXd P(nq, std::max({d_out, d_coef, d_in, 1}));
    for (int q = 0; q < nq; ++q) P.row(q) = legendre_all(static_cast<int>(P.cols()), g.nodes[q]).transpose();
    for (int nu = 0; nu < d_out; ++nu)
        for (int mu = 0; mu < d_coef; ++mu)
            for (int ka = 0; ka < d_in; ++ka) {
                if ((nu + mu + ka) % 2 != 0 || nu > mu + ka || mu > nu + ka || ka > nu + mu) continue;
                double s = 0.0;
                for (int q = 0; q < nq; ++q) s += g.weights[q] * P(q, nu) * P(q, mu) * P(q, ka);
                values_[(std::size_t(nu) * d_coef + mu) * d_in + ka] = s;
            }
}

double MultiIndexSet::cardinality() const
{
    double c = 1.0;
    for (int d : dims) c *= d;
    return c;
}

bool MultiIndexSet::contains(const std::vector<int>& mu) const
{
    if (mu.size() != dims.size()) return false;
    for (std::size_t m = 0; m < dims.size(); ++m)
        if (mu[m] < 0 || mu[m] >= dims[m]) return false;
    return true;
}

void MultiIndexSet::validate() const
{
    for (int d : dims)
        if (d < 1) throw std::invalid_argument("MultiIndexSet: degree caps must be >= 1");
}

MultiIndexSet coefficient_index_set(const MultiIndexSet& lambda)
{
    lambda.validate();
    MultiIndexSet xi;
    for (int d : lambda.dims) xi.dims.push_back(2 * (d - 1) + 1);
    return xi;
}

}  // namespace rdsg
