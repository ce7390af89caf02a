#pragma once
#include <array>

#include "qitt/mps.hpp"

namespace qitt {

// Rank-4 operator site tensor, logical shape (Bl, 2, 2, Br). w[so*2+si] is
// the (Bl x Br) matrix of bond coefficients for the physical entry
// |so><si|; so indexes the output (row) leg, si the input (column) leg.
struct MpoSite {
  std::array<Matrix, 4> w;

  Eigen::Index Bl() const { return w[0].rows(); }
  Eigen::Index Br() const { return w[0].cols(); }
  const Matrix& at(int so, int si) const { return w[so * 2 + si]; }
  Matrix& at(int so, int si) { return w[so * 2 + si]; }

  static MpoSite zero(Eigen::Index bl, Eigen::Index br) {
    MpoSite s;
    for (auto& x : s.w) x = Matrix::Zero(bl, br);
    return s;
  }
  // place the 2x2 physical gate g on the bond channel (b, bp)
  void add_gate(Eigen::Index b, Eigen::Index bp, const Eigen::Matrix2cd& g) {
    for (int so = 0; so < 2; ++so)
      for (int si = 0; si < 2; ++si) at(so, si)(b, bp) += g(so, si);
  }
};

// Tensor-train encoding of a 2^N x 2^N linear operator. Boundary bonds are 1.
struct Mpo {
  std::vector<MpoSite> sites;
  GridSpec grid;

  int n_sites() const { return (int)sites.size(); }
};

Mpo identity_mpo(const GridSpec& grid);
Mpo zero_mpo(const GridSpec& grid);

// diagonal operator returning the coordinate of dimension `dim`
Mpo position_mpo(const GridSpec& grid, int dim);
// (S+ f)(x_s) = f(x_{s+1}) for direction=+1, (S- f)(x_s) = f(x_{s-1}) for
// direction=-1; rows referencing off-grid points are zero
Mpo shift_mpo(const GridSpec& grid, int dim, int direction);
// three-point second difference (S+ + S- - 2)/dx^2 along `dim`
Mpo second_derivative_mpo(const GridSpec& grid, int dim);
// diagonal operator (1/2) x^T A x over grid coordinates; A symmetric d x d
Mpo quadratic_potential_mpo(const GridSpec& grid, const Eigen::MatrixXd& A);
// A = O(theta)^T diag(1/sigma_max^4, 1/sigma_min^4) O(theta)
Eigen::Matrix2d squeezing_matrix(double theta, double sigma_max, double sigma_min);
// H = -(1/2) sum_d d^2/dx_d^2 + (1/2) x^T A x
Mpo hamiltonian(const GridSpec& grid, const Eigen::MatrixXd& A);

Mpo mpo_add(const Mpo& a, const Mpo& b);
Mpo mpo_scale(const Mpo& o, Complex factor);
Mpo mpo_adjoint(const Mpo& o);
Mpo mpo_multiply(const Mpo& a, const Mpo& b);  // dense(a)*dense(b), bonds multiply

// exact <bra|O|ket> by single-pass environment contraction
Complex expectation(const MpsState& bra, const Mpo& O, const MpsState& ket);
// exact <bra|O1*O2|ket> without forming the product operator
Complex mpo_pair_expectation(const MpsState& bra, const Mpo& O1, const Mpo& O2,
                             const MpsState& ket);

Eigen::MatrixXcd mpo_to_dense(const Mpo& o, int cap = 12);
int mpo_max_bond(const Mpo& o);

}  // namespace qitt
