#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace rdsg {

/// Legendre polynomial of degree n orthonormal w.r.t. the probability measure dx/2 on [-1,1].
double legendre_orthonormal(int n, double x);
/// Values for degrees 0..count-1.
Eigen::VectorXd legendre_all(int count, double x);

struct GaussRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;  ///< sum to 1 (probability measure)
};
GaussRule gauss_legendre(int n);

/// E[P_a P_b P_c] under dx/2; exact Gauss quadrature.
double triple_product(int a, int b, int c);

/// beta(nu, mu, kappa) = E[P_nu P_mu P_kappa] for nu < d_out, mu < d_coef, kappa < d_in.
class TripleProductTable {
public:
    TripleProductTable() = default;
    TripleProductTable(int d_out, int d_coef, int d_in);
    double operator()(int nu, int mu, int kappa) const
    {
        return values_[(std::int64_t(nu) * d_coef_ + mu) * d_in_ + kappa];
    }
    int d_out() const noexcept { return d_out_; }
    int d_coef() const noexcept { return d_coef_; }
    int d_in() const noexcept { return d_in_; }

private:
    int d_out_ = 0, d_coef_ = 0, d_in_ = 0;
    std::vector<double> values_;
};

/// Full tensor index set {mu : 0 <= mu_m < d_m}.
struct MultiIndexSet {
    std::vector<int> dims;

    int order() const noexcept { return static_cast<int>(dims.size()); }
    /// Cardinality as a double (may exceed integer range).
    double cardinality() const;
    bool contains(const std::vector<int>& mu) const;
    void validate() const;
};

/// Degree caps 2(d_m - 1) + 1 so that 2mu lies in the set for every mu in lambda.
MultiIndexSet coefficient_index_set(const MultiIndexSet& lambda);

}  // namespace rdsg
