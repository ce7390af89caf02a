#pragma once
#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "qitt/grid.hpp"
#include "qitt/truncation.hpp"

namespace qitt {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Rank-3 site tensor, logical shape (Dl, 2, Dr). Stored as the right
// unfolding: a (2*Dl) x Dr column-major matrix with row index l + s*Dl.
// The left unfolding (Dl x 2*Dr, column index s + 2*r) reinterprets the same
// buffer, so both factorization directions are copy-free.
struct SiteTensor {
  Matrix m;

  Eigen::Index Dl() const { return m.rows() / 2; }
  Eigen::Index Dr() const { return m.cols(); }

  using Slice = Eigen::Map<Matrix, 0, Eigen::OuterStride<>>;
  using ConstSlice = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;
  // physical slice A^s, a Dl x Dr view
  Slice phys(int s) {
    return Slice(m.data() + s * Dl(), Dl(), Dr(), Eigen::OuterStride<>(m.rows()));
  }
  ConstSlice phys(int s) const {
    return ConstSlice(m.data() + s * Dl(), Dl(), Dr(), Eigen::OuterStride<>(m.rows()));
  }
  Eigen::Map<Matrix> left() { return {m.data(), Dl(), 2 * Dr()}; }
  Eigen::Map<const Matrix> left() const { return {m.data(), Dl(), 2 * Dr()}; }

  static SiteTensor zero(Eigen::Index dl, Eigen::Index dr) {
    return {Matrix::Zero(2 * dl, dr)};
  }
  // reinterpret a (D x 2R) left unfolding
  static SiteTensor from_left(const Matrix& l) {
    SiteTensor t;
    t.m = Eigen::Map<const Matrix>(l.data(), 2 * l.rows(), l.cols() / 2);
    return t;
  }
};

// Tensor-train encoding of a length-2^N complex vector. Boundary bonds are 1.
// If `center` is set, tensors left of it are left-isometric and tensors right
// of it are right-isometric. The represented vector carries an extra factor
// exp(log_scale) so long products of small decay factors never underflow.
struct MpsState {
  std::vector<SiteTensor> tensors;
  std::optional<int> center{};
  GridSpec grid;
  double log_scale = 0.0;

  int sites() const { return (int)tensors.size(); }
};

MpsState make_constant_mps(const GridSpec& grid);
MpsState make_random_product_mps(const GridSpec& grid, std::uint64_t seed);
// bond-1 state with all-zero tensors (the degenerate-zero simplify outcome)
MpsState make_zero_mps(const GridSpec& grid);

MpsState mps_from_dense(const Vector& v, const GridSpec& grid, const Truncation& trunc);
Vector mps_to_dense(const MpsState& m, int cap = 24);

Complex inner(const MpsState& a, const MpsState& b);
double norm(const MpsState& m);
// scales tensors to unit norm, folds the factor into log_scale; returns the
// prior norm
double normalize(MpsState& m);
double distance2(const MpsState& a, const MpsState& b);  // ||a-b||^2
void scale(MpsState& m, Complex factor);

MpsState canonicalize(const MpsState& m, int center, const Truncation& trunc);
void move_center(MpsState& m, int center, const Truncation& trunc);  // in place

int max_bond(const MpsState& m);
long parameter_count(const MpsState& m);

// Truncated factorization M ~= iso*rest (split_left, iso has orthonormal
// columns) or M ~= rest*iso (split_right, iso has orthonormal rows).
struct SvdSplit {
  Matrix iso, rest;
  double discarded2 = 0, total2 = 0;
  int rank = 0;
};
SvdSplit split_left(const Matrix& M, const Truncation& trunc);
SvdSplit split_right(const Matrix& M, const Truncation& trunc);

}  // namespace qitt
