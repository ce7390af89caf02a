#include "qitt/mpo.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <stdexcept>

namespace qitt {

namespace {

Eigen::Matrix2cd gate_i() { return Eigen::Matrix2cd::Identity(); }
Eigen::Matrix2cd gate_n() {
  Eigen::Matrix2cd g = Eigen::Matrix2cd::Zero();
  g(1, 1) = 1.0;
  return g;
}
// |0><1| : fetches the higher bit value
Eigen::Matrix2cd gate_e01() {
  Eigen::Matrix2cd g = Eigen::Matrix2cd::Zero();
  g(0, 1) = 1.0;
  return g;
}
Eigen::Matrix2cd gate_e10() {
  Eigen::Matrix2cd g = Eigen::Matrix2cd::Zero();
  g(1, 0) = 1.0;
  return g;
}

MpoSite identity_site() {
  MpoSite s = MpoSite::zero(1, 1);
  s.add_gate(0, 0, gate_i());
  return s;
}

void check_dim(const GridSpec& g, int dim) {
  if (dim < 0 || dim >= g.dims()) throw std::invalid_argument("mpo: dimension index out of range");
}

}  // namespace

Mpo identity_mpo(const GridSpec& grid) {
  grid.validate();
  Mpo o;
  o.grid = grid;
  for (int k = 0; k < grid.total_sites(); ++k) o.sites.push_back(identity_site());
  return o;
}

Mpo zero_mpo(const GridSpec& grid) {
  grid.validate();
  Mpo o;
  o.grid = grid;
  for (int k = 0; k < grid.total_sites(); ++k) o.sites.push_back(MpoSite::zero(1, 1));
  return o;
}

Mpo position_mpo(const GridSpec& grid, int dim) {
  grid.validate();
  check_dim(grid, dim);
  Mpo o = identity_mpo(grid);
  const int n = grid.qubits_per_dim[dim];
  const int off = grid.register_offset(dim);
  const double dx = grid.spacing(dim);
  const double a = grid.lower[dim];
  // running sum over register bits: channel 0 carries the accumulated value,
  // channel 1 the not-yet-started identity
  for (int j = 0; j < n; ++j) {
    const double u = dx * std::pow(2.0, n - 1 - j);
    Eigen::Matrix2cd f = u * gate_n();
    if (j == 0) f += a * gate_i();
    MpoSite s;
    if (n == 1) {
      s = MpoSite::zero(1, 1);
      s.add_gate(0, 0, f);
    } else if (j == 0) {
      s = MpoSite::zero(1, 2);
      s.add_gate(0, 0, f);
      s.add_gate(0, 1, gate_i());
    } else if (j == n - 1) {
      s = MpoSite::zero(2, 1);
      s.add_gate(0, 0, gate_i());
      s.add_gate(1, 0, f);
    } else {
      s = MpoSite::zero(2, 2);
      s.add_gate(0, 0, gate_i());
      s.add_gate(1, 0, f);
      s.add_gate(1, 1, gate_i());
    }
    o.sites[off + j] = std::move(s);
  }
  return o;
}

Mpo shift_mpo(const GridSpec& grid, int dim, int direction) {
  grid.validate();
  check_dim(grid, dim);
  if (direction != 1 && direction != -1) throw std::invalid_argument("shift_mpo: direction must be +-1");
  Mpo o = identity_mpo(grid);
  const int n = grid.qubits_per_dim[dim];
  const int off = grid.register_offset(dim);
  // incrementing the register flips the lowest 0 bit and clears the trailing
  // 1s: one "flip" gate somewhere, "tail" gates after it
  const Eigen::Matrix2cd flip = direction == 1 ? gate_e01() : gate_e10();
  const Eigen::Matrix2cd tail = direction == 1 ? gate_e10() : gate_e01();
  for (int j = 0; j < n; ++j) {
    MpoSite s;
    if (n == 1) {
      s = MpoSite::zero(1, 1);
      s.add_gate(0, 0, flip);
    } else if (j == 0) {
      s = MpoSite::zero(1, 2);
      s.add_gate(0, 0, gate_i());
      s.add_gate(0, 1, flip);
    } else if (j == n - 1) {
      s = MpoSite::zero(2, 1);
      s.add_gate(0, 0, flip);
      s.add_gate(1, 0, tail);
    } else {
      s = MpoSite::zero(2, 2);
      s.add_gate(0, 0, gate_i());
      s.add_gate(0, 1, flip);
      s.add_gate(1, 1, tail);
    }
    o.sites[off + j] = std::move(s);
  }
  return o;
}

Mpo second_derivative_mpo(const GridSpec& grid, int dim) {
  grid.validate();
  check_dim(grid, dim);
  Mpo o = identity_mpo(grid);
  const int n = grid.qubits_per_dim[dim];
  const int off = grid.register_offset(dim);
  const double idx2 = 1.0 / (grid.spacing(dim) * grid.spacing(dim));
  // channels: 0 = untouched, 1 = up-shift tail, 2 = down-shift tail
  const Eigen::Matrix2cd close = gate_e01() + gate_e10() - 2.0 * gate_i();
  for (int j = 0; j < n; ++j) {
    MpoSite s;
    if (n == 1) {
      s = MpoSite::zero(1, 1);
      s.add_gate(0, 0, close);
    } else if (j == 0) {
      s = MpoSite::zero(1, 3);
      s.add_gate(0, 0, gate_i());
      s.add_gate(0, 1, gate_e01());
      s.add_gate(0, 2, gate_e10());
    } else if (j == n - 1) {
      s = MpoSite::zero(3, 1);
      s.add_gate(0, 0, close);
      s.add_gate(1, 0, gate_e10());
      s.add_gate(2, 0, gate_e01());
    } else {
      s = MpoSite::zero(3, 3);
      s.add_gate(0, 0, gate_i());
      s.add_gate(0, 1, gate_e01());
      s.add_gate(0, 2, gate_e10());
      s.add_gate(1, 1, gate_e10());
      s.add_gate(2, 2, gate_e01());
    }
    for (auto& w : s.w) w *= (j == 0 ? idx2 : 1.0);
    o.sites[off + j] = std::move(s);
  }
  return o;
}

Eigen::Matrix2d squeezing_matrix(double theta, double sigma_max, double sigma_min) {
  if (!(sigma_max > 0) || !(sigma_min > 0))
    throw std::invalid_argument("squeezing_matrix: sigmas must be positive");
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d O;
  O << c, s, -s, c;
  Eigen::Matrix2d D = Eigen::Matrix2d::Zero();
  D(0, 0) = 1.0 / std::pow(sigma_max, 4);
  D(1, 1) = 1.0 / std::pow(sigma_min, 4);
  return O.transpose() * D * O;
}

namespace {

void check_symmetric(const Eigen::MatrixXd& A, int dims) {
  if (A.rows() != dims || A.cols() != dims)
    throw std::invalid_argument("quadratic potential: matrix size must match grid dims");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + A.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("quadratic potential: matrix must be symmetric");
}

// bond-3 scheme for d <= 2: channel 0 done, 1 value carry, 2 pending.
// The carry accumulates the register value; it is consumed inside register d
// with weight A(d,d)*u and crosses the x->y boundary rescaled by A01/A11
// (or is consumed directly with weight A01*u when A11 = 0).
Mpo quadratic_small(const GridSpec& grid, const Eigen::MatrixXd& A) {
  const int d = grid.dims();
  const int N = grid.total_sites();
  Eigen::VectorXd a(d);
  for (int i = 0; i < d; ++i) a[i] = grid.lower[i];
  const Eigen::VectorXd b = A * a;
  const double c0 = 0.5 * a.dot(A * a);

  Mpo o;
  o.grid = grid;
  for (int k = 0; k < N; ++k) {
    int reg = 0;
    while (k >= grid.register_offset(reg) + grid.qubits_per_dim[reg]) ++reg;
    const int j = k - grid.register_offset(reg);            // site within register
    const int n = grid.qubits_per_dim[reg];
    const double u = grid.spacing(reg) * std::pow(2.0, n - 1 - j);
    const double L = b[reg] * u + 0.5 * A(reg, reg) * u * u;

    double consume = A(reg, reg) * u;  // weight on the incoming carry
    double pass = 1.0;                 // carry pass-through scale
    double accum = u;                  // new carry contribution
    if (d == 2 && reg == 1) {
      if (A(1, 1) != 0.0) {
        if (j == 0) {
          consume = A(0, 1) * u;  // carry here is still the x value
          pass = A(1, 1) != 0.0 ? A(0, 1) / A(1, 1) : 1.0;
        }
      } else {
        consume = A(0, 1) * u;  // carry stays the x value for the whole register
        accum = 0.0;
      }
    }

    Eigen::Matrix2cd Lg = L * gate_n();
    if (k == 0) Lg += c0 * gate_i();
    MpoSite s;
    if (N == 1) {
      s = MpoSite::zero(1, 1);
      s.add_gate(0, 0, Lg);
    } else if (k == 0) {
      s = MpoSite::zero(1, 3);
      s.add_gate(0, 0, Lg);
      s.add_gate(0, 1, accum * gate_n());
      s.add_gate(0, 2, gate_i());
    } else if (k == N - 1) {
      s = MpoSite::zero(3, 1);
      s.add_gate(0, 0, gate_i());
      s.add_gate(1, 0, consume * gate_n());
      s.add_gate(2, 0, Lg);
    } else {
      s = MpoSite::zero(3, 3);
      s.add_gate(0, 0, gate_i());
      s.add_gate(1, 0, consume * gate_n());
      s.add_gate(1, 1, pass * gate_i());
      s.add_gate(2, 0, Lg);
      s.add_gate(2, 1, accum * gate_n());
      s.add_gate(2, 2, gate_i());
    }
    o.sites.push_back(std::move(s));
  }
  return o;
}

// general scheme with one carry channel per dimension (bond d+2)
Mpo quadratic_general(const GridSpec& grid, const Eigen::MatrixXd& A) {
  const int d = grid.dims();
  const int N = grid.total_sites();
  const int nc = d + 2;  // 0 done, 1..d carries, d+1 pending
  Eigen::VectorXd a(d);
  for (int i = 0; i < d; ++i) a[i] = grid.lower[i];
  const Eigen::VectorXd b = A * a;
  const double c0 = 0.5 * a.dot(A * a);

  Mpo o;
  o.grid = grid;
  for (int k = 0; k < N; ++k) {
    int reg = 0;
    while (k >= grid.register_offset(reg) + grid.qubits_per_dim[reg]) ++reg;
    const int j = k - grid.register_offset(reg);
    const int n = grid.qubits_per_dim[reg];
    const double u = grid.spacing(reg) * std::pow(2.0, n - 1 - j);
    const double L = b[reg] * u + 0.5 * A(reg, reg) * u * u;
    Eigen::Matrix2cd Lg = L * gate_n();
    if (k == 0) Lg += c0 * gate_i();

    MpoSite full = MpoSite::zero(nc, nc);
    full.add_gate(0, 0, gate_i());
    for (int e = 0; e < d; ++e) {
      full.add_gate(1 + e, 0, A(e, reg) * u * gate_n());  // consume carry_e here
      full.add_gate(1 + e, 1 + e, gate_i());
    }
    full.add_gate(nc - 1, 0, Lg);
    full.add_gate(nc - 1, 1 + reg, u * gate_n());  // extend this register's carry
    full.add_gate(nc - 1, nc - 1, gate_i());

    MpoSite s;
    if (N == 1) {
      s = MpoSite::zero(1, 1);
      for (int so = 0; so < 2; ++so)
        for (int si = 0; si < 2; ++si) s.at(so, si)(0, 0) = full.at(so, si)(nc - 1, 0);
    } else if (k == 0) {
      s = MpoSite::zero(1, nc);
      for (int so = 0; so < 2; ++so)
        for (int si = 0; si < 2; ++si) s.at(so, si).row(0) = full.at(so, si).row(nc - 1);
    } else if (k == N - 1) {
      s = MpoSite::zero(nc, 1);
      for (int so = 0; so < 2; ++so)
        for (int si = 0; si < 2; ++si) s.at(so, si).col(0) = full.at(so, si).col(0);
    } else {
      s = std::move(full);
    }
    o.sites.push_back(std::move(s));
  }
  return o;
}

}  // namespace

Mpo quadratic_potential_mpo(const GridSpec& grid, const Eigen::MatrixXd& A) {
  grid.validate();
  check_symmetric(A, grid.dims());
  // the carry-merging trick needs a single register boundary; beyond two
  // dimensions fall back to one carry channel per dimension
  return grid.dims() <= 2 ? quadratic_small(grid, A) : quadratic_general(grid, A);
}

Mpo hamiltonian(const GridSpec& grid, const Eigen::MatrixXd& A) {
  grid.validate();
  check_symmetric(A, grid.dims());
  Mpo h = mpo_scale(second_derivative_mpo(grid, 0), -0.5);
  for (int d = 1; d < grid.dims(); ++d)
    h = mpo_add(h, mpo_scale(second_derivative_mpo(grid, d), -0.5));
  return mpo_add(h, quadratic_potential_mpo(grid, A));
}

Mpo mpo_add(const Mpo& a, const Mpo& b) {
  if (!(a.grid == b.grid)) throw std::invalid_argument("mpo_add: grid mismatch");
  const int N = a.n_sites();
  Mpo o;
  o.grid = a.grid;
  for (int k = 0; k < N; ++k) {
    const auto& sa = a.sites[k];
    const auto& sb = b.sites[k];
    MpoSite s;
    if (N == 1) {
      s = MpoSite::zero(1, 1);
      for (int i = 0; i < 4; ++i) s.w[i] = sa.w[i] + sb.w[i];
    } else if (k == 0) {
      s = MpoSite::zero(1, sa.Br() + sb.Br());
      for (int i = 0; i < 4; ++i) {
        s.w[i].leftCols(sa.Br()) = sa.w[i];
        s.w[i].rightCols(sb.Br()) = sb.w[i];
      }
    } else if (k == N - 1) {
      s = MpoSite::zero(sa.Bl() + sb.Bl(), 1);
      for (int i = 0; i < 4; ++i) {
        s.w[i].topRows(sa.Bl()) = sa.w[i];
        s.w[i].bottomRows(sb.Bl()) = sb.w[i];
      }
    } else {
      s = MpoSite::zero(sa.Bl() + sb.Bl(), sa.Br() + sb.Br());
      for (int i = 0; i < 4; ++i) {
        s.w[i].topLeftCorner(sa.Bl(), sa.Br()) = sa.w[i];
        s.w[i].bottomRightCorner(sb.Bl(), sb.Br()) = sb.w[i];
      }
    }
    o.sites.push_back(std::move(s));
  }
  return o;
}

Mpo mpo_scale(const Mpo& o, Complex factor) {
  Mpo r = o;
  for (auto& w : r.sites[0].w) w *= factor;
  return r;
}

Mpo mpo_adjoint(const Mpo& o) {
  Mpo r = o;
  for (int k = 0; k < o.n_sites(); ++k)
    for (int so = 0; so < 2; ++so)
      for (int si = 0; si < 2; ++si) r.sites[k].at(so, si) = o.sites[k].at(si, so).conjugate();
  return r;
}

Mpo mpo_multiply(const Mpo& a, const Mpo& b) {
  if (!(a.grid == b.grid)) throw std::invalid_argument("mpo_multiply: grid mismatch");
  Mpo o;
  o.grid = a.grid;
  for (int k = 0; k < a.n_sites(); ++k) {
    const auto& sa = a.sites[k];
    const auto& sb = b.sites[k];
    MpoSite s = MpoSite::zero(sa.Bl() * sb.Bl(), sa.Br() * sb.Br());
    for (int so = 0; so < 2; ++so)
      for (int si = 0; si < 2; ++si)
        for (int m = 0; m < 2; ++m)
          s.at(so, si) += Eigen::kroneckerProduct(sa.at(so, m), sb.at(m, si));
    o.sites.push_back(std::move(s));
  }
  return o;
}

Complex expectation(const MpsState& bra, const Mpo& O, const MpsState& ket) {
  if (bra.sites() != O.n_sites() || ket.sites() != O.n_sites())
    throw std::invalid_argument("expectation: site count mismatch");
  std::vector<Matrix> E(1, Matrix::Identity(1, 1));
  for (int k = 0; k < O.n_sites(); ++k) {
    const auto& A = bra.tensors[k];
    const auto& B = ket.tensors[k];
    const auto& w = O.sites[k];
    std::vector<Matrix> next((size_t)w.Br(), Matrix::Zero(A.Dr(), B.Dr()));
    for (Eigen::Index bnd = 0; bnd < w.Bl(); ++bnd) {
      for (int si = 0; si < 2; ++si) {
        const Matrix U = E[bnd] * B.phys(si);
        for (int so = 0; so < 2; ++so) {
          const auto& coeff = w.at(so, si);
          bool any = false;
          for (Eigen::Index bp = 0; bp < w.Br(); ++bp) any |= coeff(bnd, bp) != 0.0;
          if (!any) continue;
          const Matrix V = A.phys(so).adjoint() * U;
          for (Eigen::Index bp = 0; bp < w.Br(); ++bp)
            if (coeff(bnd, bp) != 0.0) next[bp].noalias() += coeff(bnd, bp) * V;
        }
      }
    }
    E = std::move(next);
  }
  return E[0](0, 0) * std::exp(bra.log_scale + ket.log_scale);
}

Complex mpo_pair_expectation(const MpsState& bra, const Mpo& O1, const Mpo& O2,
                             const MpsState& ket) {
  if (bra.sites() != O1.n_sites() || ket.sites() != O2.n_sites() ||
      O1.n_sites() != O2.n_sites())
    throw std::invalid_argument("mpo_pair_expectation: site count mismatch");
  const int N = O1.n_sites();
  std::vector<Matrix> E(1, Matrix::Identity(1, 1));
  for (int k = 0; k < N; ++k) {
    const auto& A = bra.tensors[k];
    const auto& B = ket.tensors[k];
    const auto& w1 = O1.sites[k];
    const auto& w2 = O2.sites[k];
    const Eigen::Index b1l = w1.Bl(), b1r = w1.Br(), b2l = w2.Bl(), b2r = w2.Br();
    std::vector<Matrix> next((size_t)(b1r * b2r), Matrix::Zero(A.Dr(), B.Dr()));
    for (Eigen::Index c1 = 0; c1 < b1l; ++c1) {
      for (Eigen::Index c2 = 0; c2 < b2l; ++c2) {
        const Matrix& e = E[c1 * b2l + c2];
        for (int si = 0; si < 2; ++si) {
          Matrix U;
          bool haveU = false;
          for (int so = 0; so < 2; ++so) {
            // weight of |so><si| factored through the middle physical leg
            Matrix V;
            bool haveV = false;
            for (int m = 0; m < 2; ++m) {
              const auto& g1 = w1.at(so, m);
              const auto& g2 = w2.at(m, si);
              for (Eigen::Index p1 = 0; p1 < b1r; ++p1) {
                if (g1(c1, p1) == 0.0) continue;
                for (Eigen::Index p2 = 0; p2 < b2r; ++p2) {
                  const Complex coeff = g1(c1, p1) * g2(c2, p2);
                  if (coeff == 0.0) continue;
                  if (!haveU) {
                    U = e * B.phys(si);
                    haveU = true;
                  }
                  if (!haveV) {
                    V = A.phys(so).adjoint() * U;
                    haveV = true;
                  }
                  next[p1 * b2r + p2].noalias() += coeff * V;
                }
              }
            }
          }
        }
      }
    }
    E = std::move(next);
  }
  return E[0](0, 0) * std::exp(bra.log_scale + ket.log_scale);
}

Eigen::MatrixXcd mpo_to_dense(const Mpo& o, int cap) {
  const int N = o.n_sites();
  if (N > cap) throw std::invalid_argument("mpo_to_dense: site cap exceeded");
  std::vector<Eigen::MatrixXcd> M(1, Eigen::MatrixXcd::Constant(1, 1, 1.0));
  for (int k = 0; k < N; ++k) {
    const auto& w = o.sites[k];
    const Eigen::Index m = M[0].rows();
    std::vector<Eigen::MatrixXcd> next((size_t)w.Br(),
                                       Eigen::MatrixXcd::Zero(2 * m, 2 * m));
    using StrideD = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
    for (Eigen::Index bp = 0; bp < w.Br(); ++bp) {
      for (int so = 0; so < 2; ++so) {
        for (int si = 0; si < 2; ++si) {
          Eigen::Map<Eigen::MatrixXcd, 0, StrideD> view(
              next[bp].data() + so + Eigen::Index(si) * 2 * m, m, m, StrideD(4 * m, 2));
          for (Eigen::Index b = 0; b < w.Bl(); ++b) {
            const Complex c = w.at(so, si)(b, bp);
            if (c != 0.0) view += c * M[b];
          }
        }
      }
    }
    M = std::move(next);
  }
  return M[0];
}

int mpo_max_bond(const Mpo& o) {
  int b = 1;
  for (int k = 0; k + 1 < o.n_sites(); ++k) b = std::max(b, (int)o.sites[k].Br());
  return b;
}

}  // namespace qitt
