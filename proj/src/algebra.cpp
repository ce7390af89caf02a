#include "qitt/algebra.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace qitt {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

namespace detail {

// advance <bra|W|ket> environment past one site, left to right
ChannelEnv advance_left(const ChannelEnv& L, const SiteTensor& G, const SiteTensor& T,
                        const MpoSite* W) {
  if (!W) {
    Matrix e = G.phys(0).adjoint() * L[0] * T.phys(0);
    e.noalias() += G.phys(1).adjoint() * L[0] * T.phys(1);
    return {std::move(e)};
  }
  ChannelEnv out((size_t)W->Br(), Matrix::Zero(G.Dr(), T.Dr()));
  for (Eigen::Index b = 0; b < W->Bl(); ++b) {
    for (int si = 0; si < 2; ++si) {
      Matrix U;
      bool haveU = false;
      for (int so = 0; so < 2; ++so) {
        const auto& coeff = W->at(so, si);
        Matrix V;
        bool haveV = false;
        for (Eigen::Index bp = 0; bp < W->Br(); ++bp) {
          if (coeff(b, bp) == 0.0) continue;
          if (!haveU) {
            U = L[b] * T.phys(si);
            haveU = true;
          }
          if (!haveV) {
            V = G.phys(so).adjoint() * U;
            haveV = true;
          }
          out[bp].noalias() += coeff(b, bp) * V;
        }
      }
    }
  }
  return out;
}

ChannelEnv advance_right(const ChannelEnv& R, const SiteTensor& G, const SiteTensor& T,
                         const MpoSite* W) {
  if (!W) {
    Matrix e = G.phys(0).conjugate() * R[0] * T.phys(0).transpose();
    e.noalias() += G.phys(1).conjugate() * R[0] * T.phys(1).transpose();
    return {std::move(e)};
  }
  ChannelEnv out((size_t)W->Bl(), Matrix::Zero(G.Dl(), T.Dl()));
  for (Eigen::Index bp = 0; bp < W->Br(); ++bp) {
    for (int si = 0; si < 2; ++si) {
      Matrix U;
      bool haveU = false;
      for (int so = 0; so < 2; ++so) {
        const auto& coeff = W->at(so, si);
        Matrix V;
        bool haveV = false;
        for (Eigen::Index b = 0; b < W->Bl(); ++b) {
          if (coeff(b, bp) == 0.0) continue;
          if (!haveU) {
            U = R[bp] * T.phys(si).transpose();
            haveU = true;
          }
          if (!haveV) {
            V = G.phys(so).conjugate() * U;
            haveV = true;
          }
          out[b].noalias() += coeff(b, bp) * V;
        }
      }
    }
  }
  return out;
}

}  // namespace detail

namespace {

using detail::advance_left;
using detail::advance_right;
using detail::ChannelEnv;

// <O_i psi_i | O_j psi_j>, switching on which operators are present
Complex gram_entry(const SimplifyTarget& ti, const SimplifyTarget& tj,
                   std::map<const Mpo*, Mpo>& adjoints) {
  auto adj = [&](const Mpo* o) -> const Mpo& {
    auto it = adjoints.find(o);
    if (it == adjoints.end()) it = adjoints.emplace(o, mpo_adjoint(*o)).first;
    return it->second;
  };
  if (!ti.op && !tj.op) return inner(*ti.state, *tj.state);
  if (!ti.op) return expectation(*ti.state, *tj.op, *tj.state);
  if (!tj.op) return expectation(*ti.state, adj(ti.op), *tj.state);
  return mpo_pair_expectation(*ti.state, adj(ti.op), *tj.op, *tj.state);
}

SimplifyOutcome zero_outcome(const GridSpec& grid) {
  SimplifyOutcome out;
  out.state = make_zero_mps(grid);
  out.is_zero = true;
  return out;
}

SimplifyOutcome dense_single_site(const std::vector<SimplifyTarget>& targets,
                                  double scale, const GridSpec& grid) {
  Vector v = Vector::Zero(2);
  for (const auto& t : targets) {
    Vector x = mps_to_dense(*t.state);
    if (t.op) x = mpo_to_dense(*t.op) * x;
    v += t.coefficient * x;
  }
  if (v.norm() < 1e-14 * scale) return zero_outcome(grid);
  SimplifyOutcome out;
  out.state.grid = grid;
  out.state.center = 0;
  SiteTensor s = SiteTensor::zero(1, 1);
  s.m(0, 0) = v(0);
  s.m(1, 0) = v(1);
  out.state.tensors.push_back(std::move(s));
  return out;
}

}  // namespace

SimplifyOutcome simplify(const std::vector<SimplifyTarget>& targets_in,
                         const MpsState* guess, const Truncation& trunc,
                         int max_sweeps) {
  max_sweeps = std::max(1, max_sweeps);
  std::vector<SimplifyTarget> targets;
  for (const auto& t : targets_in)
    if (t.coefficient != 0.0) targets.push_back(t);
  if (targets_in.empty()) throw std::invalid_argument("simplify: no targets");

  const GridSpec grid = targets_in[0].state->grid;
  const int N = targets_in[0].state->sites();
  for (const auto& t : targets_in) {
    if (t.state->sites() != N || (t.op && t.op->n_sites() != N))
      throw std::invalid_argument("simplify: mismatched site counts");
  }
  if (guess && guess->sites() != N)
    throw std::invalid_argument("simplify: guess site count mismatch");
  if (targets.empty()) return zero_outcome(grid);

  const int nt = (int)targets.size();
  std::map<const Mpo*, Mpo> adjoints;
  Eigen::MatrixXcd gram(nt, nt);
  for (int i = 0; i < nt; ++i)
    for (int j = i; j < nt; ++j) {
      gram(i, j) = std::conj(targets[i].coefficient) * targets[j].coefficient *
                   gram_entry(targets[i], targets[j], adjoints);
      gram(j, i) = std::conj(gram(i, j));
    }
  double scale = 0.0;
  for (int i = 0; i < nt; ++i) scale += std::sqrt(std::max(0.0, gram(i, i).real()));
  const double tnorm2 = std::max(0.0, gram.sum().real());
  if (std::sqrt(tnorm2) < 1e-14 * scale || scale == 0.0) return zero_outcome(grid);

  if (N == 1) return dense_single_site(targets, scale, grid);

  // coefficients folded with the targets' log scales; environments see raw tensors
  std::vector<Complex> eff(nt);
  for (int i = 0; i < nt; ++i)
    eff[i] = targets[i].coefficient * std::exp(targets[i].state->log_scale);

  MpsState g = guess ? *guess : *targets[0].state;
  if (!guess) {
    int best = 0;
    for (int i = 1; i < nt; ++i)
      if (std::abs(eff[i]) > std::abs(eff[best])) best = i;
    g = *targets[best].state;
  }
  g = canonicalize(g, 0, trunc);
  g.log_scale = 0.0;

  // L[i][k], R[i][k]: channel environments at the bond left of site k
  std::vector<std::vector<ChannelEnv>> L(nt), R(nt);
  for (int i = 0; i < nt; ++i) {
    L[i].assign(N + 1, {});
    R[i].assign(N + 1, {});
    L[i][0] = {Matrix::Identity(1, 1)};
    R[i][N] = {Matrix::Identity(1, 1)};
    for (int k = N - 1; k >= 1; --k)
      R[i][k] = advance_right(R[i][k + 1], g.tensors[k], targets[i].state->tensors[k],
                              targets[i].op ? &targets[i].op->sites[k] : nullptr);
  }

  auto build_theta = [&](int k) {
    const Eigen::Index Dl = g.tensors[k].Dl();
    const Eigen::Index Dr = g.tensors[k + 1].Dr();
    Matrix theta = Matrix::Zero(2 * Dl, 2 * Dr);
    auto view = [&](int s1, int s2) {
      return Eigen::Map<Matrix, 0, Eigen::OuterStride<>>(
          theta.data() + s1 * Dl + s2 * 2 * Dl, Dl, Dr, Eigen::OuterStride<>(4 * Dl));
    };
    for (int i = 0; i < nt; ++i) {
      const SiteTensor& T1 = targets[i].state->tensors[k];
      const SiteTensor& T2 = targets[i].state->tensors[k + 1];
      if (!targets[i].op) {
        Matrix X[2] = {L[i][k][0] * T1.phys(0), L[i][k][0] * T1.phys(1)};
        Matrix Y[2] = {T2.phys(0) * R[i][k + 2][0].transpose(),
                       T2.phys(1) * R[i][k + 2][0].transpose()};
        for (int s1 = 0; s1 < 2; ++s1)
          for (int s2 = 0; s2 < 2; ++s2) view(s1, s2) += eff[i] * (X[s1] * Y[s2]);
        continue;
      }
      const MpoSite& W1 = targets[i].op->sites[k];
      const MpoSite& W2 = targets[i].op->sites[k + 1];
      const Eigen::Index Bm = W1.Br();
      std::vector<Matrix> P(2 * Bm, Matrix::Zero(Dl, T1.Dr()));
      std::vector<Matrix> Q(2 * Bm, Matrix::Zero(T2.Dl(), Dr));
      for (Eigen::Index b = 0; b < W1.Bl(); ++b)
        for (int si = 0; si < 2; ++si) {
          Matrix LT;
          bool have = false;
          for (int s1 = 0; s1 < 2; ++s1)
            for (Eigen::Index bm = 0; bm < Bm; ++bm) {
              const Complex c = W1.at(s1, si)(b, bm);
              if (c == 0.0) continue;
              if (!have) {
                LT = L[i][k][b] * T1.phys(si);
                have = true;
              }
              P[s1 * Bm + bm].noalias() += c * LT;
            }
        }
      for (Eigen::Index br = 0; br < W2.Br(); ++br)
        for (int si = 0; si < 2; ++si) {
          Matrix RT;
          bool have = false;
          for (int s2 = 0; s2 < 2; ++s2)
            for (Eigen::Index bm = 0; bm < Bm; ++bm) {
              const Complex c = W2.at(s2, si)(bm, br);
              if (c == 0.0) continue;
              if (!have) {
                RT = T2.phys(si) * R[i][k + 2][br].transpose();
                have = true;
              }
              Q[s2 * Bm + bm].noalias() += c * RT;
            }
        }
      for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2) {
          Matrix acc = Matrix::Zero(Dl, Dr);
          for (Eigen::Index bm = 0; bm < Bm; ++bm)
            acc.noalias() += P[s1 * Bm + bm] * Q[s2 * Bm + bm];
          view(s1, s2) += eff[i] * acc;
        }
    }
    return theta;
  };

  SimplifyOutcome out;
  double kept2 = 0.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (int k = 0; k <= N - 2; ++k) {
      SvdSplit sp = split_left(build_theta(k), trunc);
      kept2 = sp.total2 - sp.discarded2;
      g.tensors[k] = SiteTensor{std::move(sp.iso)};
      g.tensors[k + 1] = SiteTensor::from_left(sp.rest);
      for (int i = 0; i < nt; ++i)
        L[i][k + 1] = advance_left(L[i][k], g.tensors[k], targets[i].state->tensors[k],
                                   targets[i].op ? &targets[i].op->sites[k] : nullptr);
    }
    for (int k = N - 2; k >= 0; --k) {
      SvdSplit sp = split_right(build_theta(k), trunc);
      kept2 = sp.total2 - sp.discarded2;
      g.tensors[k] = SiteTensor{std::move(sp.rest)};
      g.tensors[k + 1] = SiteTensor::from_left(sp.iso);
      for (int i = 0; i < nt; ++i)
        R[i][k + 1] =
            advance_right(R[i][k + 2], g.tensors[k + 1], targets[i].state->tensors[k + 1],
                          targets[i].op ? &targets[i].op->sites[k + 1] : nullptr);
    }
    const double d = std::max(0.0, tnorm2 - kept2);
    out.sweep_distances.push_back(d);
    ++out.sweeps_used;
    if (d <= 8 * kEps * tnorm2) break;
    if (out.sweeps_used >= 2) {
      const double prev = out.sweep_distances[out.sweeps_used - 2];
      if (prev - d <= trunc.tolerance * prev) break;
    }
  }

  g.center = 0;
  out.state = std::move(g);
  out.relative_error = out.sweep_distances.back() / tnorm2;
  out.max_bond = max_bond(out.state);
  return out;
}

SimplifyOutcome apply_mpo(const Mpo& O, const MpsState& psi, const Truncation& trunc,
                          int max_sweeps) {
  std::vector<SimplifyTarget> t = {{1.0, &O, &psi}};
  return simplify(t, &psi, trunc, max_sweeps);
}

namespace detail {

MpsState zip_apply(const Mpo& O, const MpsState& psi) {
  if (O.n_sites() != psi.sites())
    throw std::invalid_argument("zip_apply: site count mismatch");
  MpsState r;
  r.grid = psi.grid;
  r.log_scale = psi.log_scale;
  for (int k = 0; k < psi.sites(); ++k) {
    const MpoSite& W = O.sites[k];
    const SiteTensor& T = psi.tensors[k];
    SiteTensor t = SiteTensor::zero(W.Bl() * T.Dl(), W.Br() * T.Dr());
    for (int so = 0; so < 2; ++so) {
      auto slice = t.phys(so);
      for (int si = 0; si < 2; ++si)
        slice += Eigen::kroneckerProduct(W.at(so, si), T.phys(si));
    }
    r.tensors.push_back(std::move(t));
  }
  return r;
}

}  // namespace detail

namespace {

// bond-1 diagonal MPO projecting onto the last grid point of one register
Mpo last_point_projector(const GridSpec& grid, int dim) {
  Mpo o = identity_mpo(grid);
  const int off = grid.register_offset(dim);
  for (int j = 0; j < grid.qubits_per_dim[dim]; ++j) {
    MpoSite s = MpoSite::zero(1, 1);
    s.at(1, 1)(0, 0) = 1.0;
    o.sites[off + j] = std::move(s);
  }
  return o;
}

// append a fixed-bit qubit site at chain position pos (identity on the bond)
MpsState insert_qubit(const MpsState& f, int pos, int bit, const GridSpec& g2) {
  MpsState r;
  r.grid = g2;
  r.log_scale = f.log_scale;
  const Eigen::Index D = f.tensors[pos - 1].Dr();
  SiteTensor t = SiteTensor::zero(D, D);
  t.phys(bit) = Matrix::Identity(D, D);
  for (int k = 0; k < pos; ++k) r.tensors.push_back(f.tensors[k]);
  r.tensors.push_back(std::move(t));
  for (int k = pos; k < f.sites(); ++k) r.tensors.push_back(f.tensors[k]);
  return r;
}

}  // namespace

MpsState interpolate_double(const MpsState& psi, int dim, const Truncation& trunc) {
  psi.grid.validate();
  if (dim < 0 || dim >= psi.grid.dims())
    throw std::invalid_argument("interpolate_double: dimension index out of range");
  GridSpec g2 = psi.grid;
  g2.qubits_per_dim[dim] += 1;
  const int pos = psi.grid.register_offset(dim) + psi.grid.qubits_per_dim[dim];

  // even points copy f; odd points average f and its up-shift, except the last
  // odd point which copies the last sample (the shift row there is zero)
  const MpsState up = detail::zip_apply(shift_mpo(psi.grid, dim, 1), psi);
  const MpsState last = detail::zip_apply(last_point_projector(psi.grid, dim), psi);
  const MpsState even = insert_qubit(psi, pos, 0, g2);
  const MpsState odd_f = insert_qubit(psi, pos, 1, g2);
  const MpsState odd_up = insert_qubit(up, pos, 1, g2);
  const MpsState odd_last = insert_qubit(last, pos, 1, g2);

  const std::vector<SimplifyTarget> targets = {
      {1.0, &even}, {0.5, &odd_f}, {0.5, &odd_up}, {0.5, &odd_last}};
  return simplify(targets, nullptr, trunc).state;
}

}  // namespace qitt
