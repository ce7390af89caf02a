#include "qitt/mps.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace qitt {

namespace {

struct ThinSvd {
  Matrix U, V;
  Eigen::VectorXd S;
};

ThinSvd thin_svd(const Matrix& M) {
  if (std::min(M.rows(), M.cols()) <= 16) {
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.matrixV(), svd.singularValues()};
  }
  Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.matrixV(), svd.singularValues()};
}

}  // namespace

SvdSplit split_left(const Matrix& M, const Truncation& trunc) {
  ThinSvd svd = thin_svd(M);
  TruncationCut cut = truncation_cut(svd.S.data(), (int)svd.S.size(), trunc);
  SvdSplit r;
  r.rank = cut.rank;
  r.discarded2 = cut.discarded2;
  r.total2 = cut.total2;
  r.iso = svd.U.leftCols(cut.rank);
  r.rest = svd.S.head(cut.rank).asDiagonal() * svd.V.leftCols(cut.rank).adjoint();
  return r;
}

SvdSplit split_right(const Matrix& M, const Truncation& trunc) {
  ThinSvd svd = thin_svd(M);
  TruncationCut cut = truncation_cut(svd.S.data(), (int)svd.S.size(), trunc);
  SvdSplit r;
  r.rank = cut.rank;
  r.discarded2 = cut.discarded2;
  r.total2 = cut.total2;
  r.iso = svd.V.leftCols(cut.rank).adjoint();
  r.rest = svd.U.leftCols(cut.rank) * svd.S.head(cut.rank).asDiagonal();
  return r;
}

MpsState make_constant_mps(const GridSpec& grid) {
  grid.validate();
  MpsState m;
  m.grid = grid;
  const double a = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < grid.total_sites(); ++k) {
    SiteTensor t = SiteTensor::zero(1, 1);
    t.m(0, 0) = a;
    t.m(1, 0) = a;
    m.tensors.push_back(std::move(t));
  }
  m.center = 0;
  return m;
}

MpsState make_random_product_mps(const GridSpec& grid, std::uint64_t seed) {
  grid.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  MpsState m;
  m.grid = grid;
  for (int k = 0; k < grid.total_sites(); ++k) {
    SiteTensor t = SiteTensor::zero(1, 1);
    t.m(0, 0) = Complex(gauss(rng), gauss(rng));
    t.m(1, 0) = Complex(gauss(rng), gauss(rng));
    t.m /= t.m.norm();
    m.tensors.push_back(std::move(t));
  }
  m.center = 0;
  return m;
}

MpsState make_zero_mps(const GridSpec& grid) {
  grid.validate();
  MpsState m;
  m.grid = grid;
  for (int k = 0; k < grid.total_sites(); ++k) m.tensors.push_back(SiteTensor::zero(1, 1));
  return m;
}

MpsState mps_from_dense(const Vector& v, const GridSpec& grid, const Truncation& trunc) {
  grid.validate();
  const int N = grid.total_sites();
  if (N > 40 || v.size() != (Eigen::Index(1) << N))
    throw std::invalid_argument("mps_from_dense: vector length does not match grid");
  MpsState out;
  out.grid = grid;
  out.tensors.reserve(N);
  Matrix W = Eigen::Map<const Matrix>(v.data(), 1, v.size());
  for (int k = 0; k < N - 1; ++k) {
    const Eigen::Index r = W.rows(), half = W.cols() / 2;
    Matrix M(2 * r, half);
    M.topRows(r) = W.leftCols(half);
    M.bottomRows(r) = W.rightCols(half);
    SvdSplit sp = split_left(M, trunc);
    out.tensors.push_back({std::move(sp.iso)});
    W = std::move(sp.rest);
  }
  Matrix last(2 * W.rows(), 1);
  last.topRows(W.rows()) = W.col(0);
  last.bottomRows(W.rows()) = W.col(1);
  out.tensors.push_back({std::move(last)});
  out.center = N - 1;
  return out;
}

Vector mps_to_dense(const MpsState& m, int cap) {
  const int N = m.sites();
  if (N > cap) throw std::invalid_argument("mps_to_dense: site cap exceeded");
  Matrix w = Matrix::Constant(1, 1, std::exp(m.log_scale));
  for (const auto& t : m.tensors) {
    Matrix next(w.rows() * 2, t.Dr());
    for (int s = 0; s < 2; ++s) {
      const Matrix ws = w * t.phys(s);
      for (Eigen::Index x = 0; x < w.rows(); ++x) next.row(2 * x + s) = ws.row(x);
    }
    w = std::move(next);
  }
  return w.col(0);
}

Complex inner(const MpsState& a, const MpsState& b) {
  if (a.sites() != b.sites()) throw std::invalid_argument("inner: site count mismatch");
  Matrix E = Matrix::Identity(1, 1);
  for (int k = 0; k < a.sites(); ++k) {
    const auto& A = a.tensors[k];
    const auto& B = b.tensors[k];
    Matrix next = Matrix::Zero(A.Dr(), B.Dr());
    for (int s = 0; s < 2; ++s) next.noalias() += A.phys(s).adjoint() * E * B.phys(s);
    E = std::move(next);
  }
  return E(0, 0) * std::exp(a.log_scale + b.log_scale);
}

double norm(const MpsState& m) {
  double n2 = std::real(inner(m, m));
  return n2 > 0 ? std::sqrt(n2) : 0.0;
}

double normalize(MpsState& m) {
  const double full = norm(m);
  if (!(full > 0)) throw std::invalid_argument("normalize: state has zero norm");
  const double tensor_norm = full * std::exp(-m.log_scale);
  m.tensors[m.center.value_or(0)].m /= tensor_norm;
  m.log_scale = 0.0;
  return full;
}

double distance2(const MpsState& a, const MpsState& b) {
  const double d = std::real(inner(a, a)) + std::real(inner(b, b)) - 2.0 * std::real(inner(a, b));
  return d > 0 ? d : 0.0;
}

void scale(MpsState& m, Complex factor) {
  m.tensors[m.center.value_or(0)].m *= factor;
}

namespace {

// left-orthogonalize site k by QR, absorbing the factor into site k+1
void qr_left(MpsState& m, int k) {
  auto& t = m.tensors[k];
  const Eigen::Index r = std::min(t.m.rows(), t.m.cols());
  Eigen::HouseholderQR<Matrix> qr(t.m);
  Matrix Q = qr.householderQ() * Matrix::Identity(t.m.rows(), r);
  Matrix R = Matrix(qr.matrixQR().topRows(r).triangularView<Eigen::Upper>());
  t.m = std::move(Q);
  auto& n = m.tensors[k + 1];
  SiteTensor nn = SiteTensor::zero(r, n.Dr());
  for (int s = 0; s < 2; ++s) nn.phys(s).noalias() = R * n.phys(s);
  n = std::move(nn);
}

// right-orthogonalize site k (LQ via QR of the adjoint), absorbing into k-1
void qr_right(MpsState& m, int k) {
  auto& t = m.tensors[k];
  const Matrix l = t.left();
  const Eigen::Index r = std::min(l.rows(), l.cols());
  Eigen::HouseholderQR<Matrix> qr(l.adjoint());
  Matrix Q = qr.householderQ() * Matrix::Identity(l.cols(), r);
  Matrix R = Matrix(qr.matrixQR().topRows(r).triangularView<Eigen::Upper>());
  t = SiteTensor::from_left(Matrix(Q.adjoint()));
  auto& p = m.tensors[k - 1];
  SiteTensor pp = SiteTensor::zero(p.Dl(), r);
  const Matrix L = R.adjoint();
  for (int s = 0; s < 2; ++s) pp.phys(s).noalias() = p.phys(s) * L;
  p = std::move(pp);
}

void svd_left(MpsState& m, int k, const Truncation& trunc) {
  auto& t = m.tensors[k];
  SvdSplit sp = split_left(t.m, trunc);
  t.m = std::move(sp.iso);
  auto& n = m.tensors[k + 1];
  SiteTensor nn = SiteTensor::zero(sp.rank, n.Dr());
  for (int s = 0; s < 2; ++s) nn.phys(s).noalias() = sp.rest * n.phys(s);
  n = std::move(nn);
}

void svd_right(MpsState& m, int k, const Truncation& trunc) {
  auto& t = m.tensors[k];
  SvdSplit sp = split_right(Matrix(t.left()), trunc);
  t = SiteTensor::from_left(sp.iso);
  auto& p = m.tensors[k - 1];
  SiteTensor pp = SiteTensor::zero(p.Dl(), sp.rank);
  for (int s = 0; s < 2; ++s) pp.phys(s).noalias() = p.phys(s) * sp.rest;
  p = std::move(pp);
}

}  // namespace

void move_center(MpsState& m, int center, const Truncation& trunc) {
  const int N = m.sites();
  if (center < 0 || center >= N) throw std::invalid_argument("move_center: bad site index");
  if (m.center) {
    // already canonical somewhere: a single truncated pass is optimal
    for (int k = *m.center; k < center; ++k) svd_left(m, k, trunc);
    for (int k = *m.center; k > center; --k) svd_right(m, k, trunc);
    m.center = center;
    return;
  }
  // unknown gauge: orthogonalize to the right end, then truncate while
  // sweeping back so every cut happens in a fully canonical environment
  for (int k = 0; k < N - 1; ++k) qr_left(m, k);
  for (int k = N - 1; k > 0; --k) svd_right(m, k, trunc);
  m.center = 0;
  for (int k = 0; k < center; ++k) svd_left(m, k, trunc);
  m.center = center;
}

MpsState canonicalize(const MpsState& m, int center, const Truncation& trunc) {
  MpsState out = m;
  // force the full re-orthogonalization path so every bond (not just the ones
  // between the old and new center) honors the truncation contract
  out.center.reset();
  move_center(out, center, trunc);
  return out;
}

int max_bond(const MpsState& m) {
  int b = 1;
  for (int k = 0; k + 1 < m.sites(); ++k) b = std::max(b, (int)m.tensors[k].Dr());
  return b;
}

long parameter_count(const MpsState& m) {
  long n = 0;
  for (const auto& t : m.tensors) n += (long)t.m.size();
  return n;
}

}  // namespace qitt
