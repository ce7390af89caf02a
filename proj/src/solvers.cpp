#include "qitt/solvers.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qitt {

namespace {

// Shared per-run bookkeeping: trajectory, ledger, observer calls, and the
// stop conditions (instability band, |dE| tolerance, step budget).
struct Run {
  SolverReport rep;
  const SolverConfig& cfg;
  const StepObserver& obs;
  double emin = 0.0;

  Run(const SolverConfig& c, const StepObserver& o) : cfg(c), obs(o) {}

  void notify(int step, double e, double var, const MpsState& st) {
    if (obs) obs({step, e, var, st, rep.ledger});
  }

  // records the starting point; returns false when there is no step budget
  bool start(double e, double var, const MpsState& st) {
    rep.energies.push_back(e);
    rep.variances.push_back(var);
    emin = e;
    notify(0, e, var, st);
    if (!std::isfinite(e)) {
      rep.unstable = true;
      return false;
    }
    return cfg.max_steps > 0;
  }

  // records one completed step; returns false when the run should stop
  bool record(double e, double var, const MpsState& st) {
    const double prev = rep.energies.back();
    rep.steps += 1;
    rep.energies.push_back(e);
    rep.variances.push_back(var);
    notify(rep.steps, e, var, st);
    if (!std::isfinite(e)) {
      rep.unstable = true;
      return false;
    }
    emin = std::min(emin, e);
    const double e0 = rep.energies.front();
    const double band = std::max(10.0 * (e0 - emin), 1e-6 * std::max(1.0, std::abs(e0)));
    if (e > emin + band) {
      rep.unstable = true;
      return false;
    }
    if (std::abs(e - prev) < cfg.energy_tolerance) {
      rep.converged = true;
      return false;
    }
    return rep.steps < cfg.max_steps;
  }
};

MpsState prepare_start(const MpsState& psi0, const Truncation& trunc, const char* who) {
  if (!(norm(psi0) > 0))
    throw std::invalid_argument(std::string(who) + ": initial state has zero norm");
  MpsState psi = canonicalize(psi0, 0, trunc);
  normalize(psi);
  return psi;
}

// sum_i c_i O_i |s_i> through simplify, with ledger accounting: one product
// per operator target, one combination when several targets are merged
MpsState combine(Run& run, const std::vector<SimplifyTarget>& targets, const MpsState* guess,
                 const Truncation& trunc, bool* is_zero = nullptr) {
  SimplifyOutcome out = simplify(targets, guess, trunc);
  long ops = 0;
  for (const auto& t : targets)
    if (t.op) ++ops;
  run.rep.ledger.mpo_mps_products += ops;
  if (targets.size() >= 2) run.rep.ledger.mps_combinations += 1;
  run.rep.ledger.simplification_sweeps += out.sweeps_used;
  if (is_zero) *is_zero = out.is_zero;
  return std::move(out.state);
}

MpsState product(Run& run, const Mpo& O, const MpsState& psi, const Truncation& trunc) {
  SimplifyOutcome out = apply_mpo(O, psi, trunc);
  run.rep.ledger.mpo_mps_products += 1;
  run.rep.ledger.simplification_sweeps += out.sweeps_used;
  return std::move(out.state);
}

struct Moments {
  double energy;
  double h2;
  double variance;
};

// first and second moments of H from the truncated product phi = H psi
Moments moments(const MpsState& psi, const MpsState& phi) {
  const double n2 = std::real(inner(psi, psi));
  const double e = std::real(inner(psi, phi)) / n2;
  const double h2 = std::real(inner(phi, phi)) / n2;
  return {e, h2, std::max(0.0, h2 - e * e)};
}

void finish(Run& run, Method m, int n_v, MpsState&& state) {
  run.rep.state = std::move(state);
  run.rep.ledger.rescaled_cost = cost_constant(m, n_v) * run.rep.steps;
}

SolverReport fixed_step_solve(const Mpo& H, const MpsState& psi0, const SolverConfig& cfg,
                              const StepObserver& obs) {
  Run run(cfg, obs);
  MpsState psi = prepare_start(psi0, cfg.trunc, "imaginary_time_solve");
  const double db = cfg.delta_beta;
  bool first = true;
  bool go = true;
  while (go) {
    MpsState k1 = product(run, H, psi, cfg.trunc);
    const Moments mom = moments(psi, k1);
    go = first ? run.start(mom.energy, mom.variance, psi)
               : run.record(mom.energy, mom.variance, psi);
    first = false;
    if (!go) break;

    bool zero = false;
    MpsState next;
    if (cfg.method == Method::euler) {
      next = combine(run, {{1.0, &psi}, {-db, &k1}}, &psi, cfg.trunc, &zero);
    } else if (cfg.method == Method::heun) {
      MpsState mid = combine(run, {{1.0, &psi}, {-db, &k1}}, &psi, cfg.trunc, &zero);
      if (!zero) {
        MpsState k2 = product(run, H, mid, cfg.trunc);
        next = combine(run, {{1.0, &psi}, {-0.5 * db, &k1}, {-0.5 * db, &k2}}, &psi,
                       cfg.trunc, &zero);
      }
    } else {
      MpsState s2 = combine(run, {{1.0, &psi}, {-0.5 * db, &k1}}, &psi, cfg.trunc, &zero);
      if (!zero) {
        MpsState k2 = product(run, H, s2, cfg.trunc);
        MpsState s3 = combine(run, {{1.0, &psi}, {-0.5 * db, &k2}}, &psi, cfg.trunc, &zero);
        if (!zero) {
          MpsState k3 = product(run, H, s3, cfg.trunc);
          MpsState s4 = combine(run, {{1.0, &psi}, {-db, &k3}}, &psi, cfg.trunc, &zero);
          if (!zero) {
            MpsState k4 = product(run, H, s4, cfg.trunc);
            next = combine(run,
                           {{1.0, &psi},
                            {-db / 6.0, &k1},
                            {-db / 3.0, &k2},
                            {-db / 3.0, &k3},
                            {-db / 6.0, &k4}},
                           &psi, cfg.trunc, &zero);
          }
        }
      }
    }
    if (zero) {
      run.rep.stalled = true;
      break;
    }
    normalize(next);
    psi = std::move(next);
  }
  finish(run, cfg.method, cfg.n_v, std::move(psi));
  return std::move(run.rep);
}

SolverReport rkf_solve(const Mpo& H, const MpsState& psi0, const SolverConfig& cfg,
                       const StepObserver& obs) {
  Run run(cfg, obs);
  MpsState psi = prepare_start(psi0, cfg.trunc, "imaginary_time_solve");
  const RkfConfig& rc = cfg.rkf;
  double h = std::clamp(rc.initial_step, rc.min_step, rc.max_step);

  // Fehlberg 4(5) tableau
  constexpr double a21 = 1.0 / 4;
  constexpr double a31 = 3.0 / 32, a32 = 9.0 / 32;
  constexpr double a41 = 1932.0 / 2197, a42 = -7200.0 / 2197, a43 = 7296.0 / 2197;
  constexpr double a51 = 439.0 / 216, a52 = -8.0, a53 = 3680.0 / 513, a54 = -845.0 / 4104;
  constexpr double a61 = -8.0 / 27, a62 = 2.0, a63 = -3544.0 / 2565, a64 = 1859.0 / 4104,
                   a65 = -11.0 / 40;
  constexpr double b1 = 25.0 / 216, b3 = 1408.0 / 2565, b4 = 2197.0 / 4104, b5 = -1.0 / 5;
  // fifth-minus-fourth order weights, the embedded error direction
  constexpr double d[6] = {1.0 / 360, 0.0, -128.0 / 4275, -2197.0 / 75240, 1.0 / 50, 2.0 / 55};

  bool first = true;
  bool go = true;
  while (go) {
    MpsState k1 = product(run, H, psi, cfg.trunc);
    const Moments mom = moments(psi, k1);
    go = first ? run.start(mom.energy, mom.variance, psi)
               : run.record(mom.energy, mom.variance, psi);
    first = false;
    if (!go) break;

    bool zero = false;
    MpsState y4;
    for (;;) {
      MpsState s2 = combine(run, {{1.0, &psi}, {-h * a21, &k1}}, &psi, cfg.trunc, &zero);
      if (zero) break;
      MpsState k2 = product(run, H, s2, cfg.trunc);
      MpsState s3 = combine(run, {{1.0, &psi}, {-h * a31, &k1}, {-h * a32, &k2}}, &psi,
                            cfg.trunc, &zero);
      if (zero) break;
      MpsState k3 = product(run, H, s3, cfg.trunc);
      MpsState s4 = combine(
          run, {{1.0, &psi}, {-h * a41, &k1}, {-h * a42, &k2}, {-h * a43, &k3}}, &psi,
          cfg.trunc, &zero);
      if (zero) break;
      MpsState k4 = product(run, H, s4, cfg.trunc);
      MpsState s5 = combine(
          run,
          {{1.0, &psi}, {-h * a51, &k1}, {-h * a52, &k2}, {-h * a53, &k3}, {-h * a54, &k4}},
          &psi, cfg.trunc, &zero);
      if (zero) break;
      MpsState k5 = product(run, H, s5, cfg.trunc);
      MpsState s6 = combine(run,
                            {{1.0, &psi},
                             {-h * a61, &k1},
                             {-h * a62, &k2},
                             {-h * a63, &k3},
                             {-h * a64, &k4},
                             {-h * a65, &k5}},
                            &psi, cfg.trunc, &zero);
      if (zero) break;
      MpsState k6 = product(run, H, s6, cfg.trunc);
      y4 = combine(
          run, {{1.0, &psi}, {-h * b1, &k1}, {-h * b3, &k3}, {-h * b4, &k4}, {-h * b5, &k5}},
          &psi, cfg.trunc, &zero);
      if (zero) break;

      // embedded error via the exact Gram matrix of the stages
      const MpsState* ks[6] = {&k1, &k2, &k3, &k4, &k5, &k6};
      double err2 = 0.0;
      for (int i = 0; i < 6; ++i) {
        if (d[i] == 0.0) continue;
        err2 += d[i] * d[i] * std::real(inner(*ks[i], *ks[i]));
        for (int j = i + 1; j < 6; ++j) {
          if (d[j] == 0.0) continue;
          err2 += 2.0 * d[i] * d[j] * std::real(inner(*ks[i], *ks[j]));
        }
      }
      const double err = h * std::sqrt(std::max(0.0, err2));
      const double tolv = rc.abs_tol + rc.rel_tol * norm(y4);
      const bool accept = err <= tolv || h <= rc.min_step * (1.0 + 1e-12);
      double factor = err > 0 ? 0.9 * std::pow(tolv / err, 0.2) : 4.0;
      factor = std::clamp(factor, 0.1, 4.0);
      h = std::clamp(h * factor, rc.min_step, rc.max_step);
      if (accept) break;
    }
    if (zero) {
      run.rep.stalled = true;
      break;
    }
    normalize(y4);
    psi = std::move(y4);
  }
  finish(run, Method::rkf45, cfg.n_v, std::move(psi));
  return std::move(run.rep);
}

// Ritz combination over a stored basis; the guess is the dominant member
MpsState assemble_ritz(Run& run, const std::vector<MpsState>& V, const Vector& coeff,
                       const Truncation& trunc) {
  if (V.size() == 1) return V[0];
  int best = 0;
  for (int i = 1; i < (int)V.size(); ++i)
    if (std::abs(coeff(i)) > std::abs(coeff(best))) best = i;
  std::vector<SimplifyTarget> targets;
  targets.reserve(V.size());
  for (int i = 0; i < (int)V.size(); ++i) targets.emplace_back(coeff(i), &V[i]);
  bool zero = false;
  MpsState out = combine(run, targets, &V[best], trunc, &zero);
  if (zero) return V[best];
  return out;
}

Complex dotm(const Matrix& a, const Matrix& b) {
  return a.conjugate().cwiseProduct(b).sum();
}

// warm-started Lanczos for the minimal eigenpair of the two-site effective
// operator; full single-pass reorthogonalization, seeded jitter on breakdown
Matrix lanczos_min(const std::function<Matrix(const Matrix&)>& heff, const Matrix& theta0,
                   double tol, std::uint64_t seed) {
  const Eigen::Index rows = theta0.rows(), cols = theta0.cols();
  const Eigen::Index dim = rows * cols;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  auto randomize = [&](Matrix& w) {
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = Complex(nd(rng), nd(rng));
  };

  Matrix v = theta0;
  double n0 = v.norm();
  if (!(n0 > 1e-300)) {
    randomize(v);
    n0 = v.norm();
  }
  v /= n0;
  std::vector<Matrix> V = {v};
  std::vector<double> alpha, beta;
  const int cap = (int)std::min<Eigen::Index>(100, dim);
  Eigen::MatrixXd evecs;
  int m = 0;
  for (int it = 0; it < cap; ++it) {
    Matrix w = heff(V[it]);
    const double a = std::real(dotm(V[it], w));
    alpha.push_back(a);
    w -= a * V[it];
    if (it > 0) w -= beta[it - 1] * V[it - 1];
    for (int j = 0; j <= it; ++j) w -= dotm(V[j], w) * V[j];
    m = it + 1;

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) T(i, i) = alpha[i];
    for (int i = 0; i + 1 < m; ++i) T(i, i + 1) = T(i + 1, i) = beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    evecs = es.eigenvectors();

    const double b = w.norm();
    const double resid = b * std::abs(evecs(m - 1, 0));
    if (resid <= tol || m >= cap || m >= dim) break;
    if (b <= 1e-14 * std::max(1.0, std::abs(es.eigenvalues()(0)))) {
      // numerically invariant subspace: continue from a jittered direction
      randomize(w);
      for (int j = 0; j <= it; ++j) w -= dotm(V[j], w) * V[j];
      const double bj = w.norm();
      if (!(bj > 1e-12)) break;
      V.push_back(w / bj);
      beta.push_back(0.0);
      continue;
    }
    V.push_back(w / b);
    beta.push_back(b);
  }
  Matrix out = Matrix::Zero(rows, cols);
  for (int i = 0; i < m; ++i) out += evecs(i, 0) * V[i];
  const double on = out.norm();
  if (on > 0) out /= on;
  return out;
}

}  // namespace

double cost_constant(Method m, int n_v) {
  switch (m) {
    case Method::euler:
      return 7.0;
    case Method::heun:
      return 14.0;
    case Method::rk4:
      return 28.0;
    case Method::rkf45:
      return 43.0;
    case Method::gradient:
      return 13.0;
    case Method::improved_gradient:
      return 13.0;
    case Method::arnoldi: {
      const int nv = std::max(2, n_v);
      return (6.0 * (nv - 2) + 13.0) / (nv - 1);
    }
    case Method::dmrg:
      return 1.0;
  }
  return 0.0;
}

SolverReport imaginary_time_solve(const Mpo& H, const MpsState& psi0, const SolverConfig& cfg,
                                  const StepObserver& obs) {
  if (H.n_sites() != psi0.sites())
    throw std::invalid_argument("imaginary_time_solve: site count mismatch");
  switch (cfg.method) {
    case Method::euler:
    case Method::heun:
    case Method::rk4:
      return fixed_step_solve(H, psi0, cfg, obs);
    case Method::rkf45:
      return rkf_solve(H, psi0, cfg, obs);
    default:
      throw std::invalid_argument("imaginary_time_solve: not an imaginary-time method");
  }
}

double optimal_step(double mean, double central2, double central3) {
  (void)mean;
  if (!(central2 > 0))
    throw std::invalid_argument("optimal_step: central variance must be positive");
  return (central3 - std::sqrt(central3 * central3 + 4.0 * central2 * central2 * central2)) /
         (2.0 * central2 * central2);
}

SolverReport gradient_descent_solve(const Mpo& H, const MpsState& psi0,
                                    const SolverConfig& cfg, const StepObserver& obs) {
  if (H.n_sites() != psi0.sites())
    throw std::invalid_argument("gradient_descent_solve: site count mismatch");
  Run run(cfg, obs);
  MpsState psi = prepare_start(psi0, cfg.trunc, "gradient_descent_solve");
  bool first = true;
  bool go = true;
  while (go) {
    MpsState phi = product(run, H, psi, cfg.trunc);
    const Moments mom = moments(psi, phi);
    go = first ? run.start(mom.energy, mom.variance, psi)
               : run.record(mom.energy, mom.variance, psi);
    first = false;
    if (!go) break;
    if (mom.variance < 1e-14) {
      run.rep.converged = true;
      break;
    }
    const double h3 = std::real(expectation(phi, H, phi));
    const double mu3 =
        h3 - 3.0 * mom.energy * mom.h2 + 2.0 * mom.energy * mom.energy * mom.energy;
    const double db = optimal_step(mom.energy, mom.variance, mu3);
    bool zero = false;
    MpsState next =
        combine(run, {{1.0 - db * mom.energy, &psi}, {db, &phi}}, &psi, cfg.trunc, &zero);
    if (zero) {
      run.rep.stalled = true;
      break;
    }
    normalize(next);
    psi = std::move(next);
  }
  finish(run, Method::gradient, cfg.n_v, std::move(psi));
  return std::move(run.rep);
}

SolverReport improved_gradient_solve(const Mpo& H, const MpsState& psi0,
                                     const SolverConfig& cfg, const StepObserver& obs) {
  if (H.n_sites() != psi0.sites())
    throw std::invalid_argument("improved_gradient_solve: site count mismatch");
  Run run(cfg, obs);
  MpsState psi = prepare_start(psi0, cfg.trunc, "improved_gradient_solve");
  bool first = true;
  bool go = true;
  while (go) {
    MpsState phi = product(run, H, psi, cfg.trunc);
    const Moments mom = moments(psi, phi);
    go = first ? run.start(mom.energy, mom.variance, psi)
               : run.record(mom.energy, mom.variance, psi);
    first = false;
    if (!go) break;

    Eigen::MatrixXcd N(2, 2);
    N << 1.0, mom.energy, mom.energy, mom.h2;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> en(N);
    if (!(en.eigenvalues()(0) > 1e-12 * en.eigenvalues()(1))) {
      run.rep.converged = true;
      break;
    }
    const double h3 = std::real(expectation(phi, H, phi));
    Eigen::MatrixXcd A(2, 2);
    A << mom.energy, mom.h2, mom.h2, h3;
    const GeneralizedEigResult ge = solve_generalized_eig({A, N});
    bool zero = false;
    MpsState next = combine(run, {{ge.coefficients(0), &psi}, {ge.coefficients(1), &phi}},
                            &psi, cfg.trunc, &zero);
    if (zero) {
      run.rep.stalled = true;
      break;
    }
    normalize(next);
    psi = std::move(next);
  }
  finish(run, Method::improved_gradient, cfg.n_v, std::move(psi));
  return std::move(run.rep);
}

SolverReport arnoldi_solve(const Mpo& H, const MpsState& psi0, const SolverConfig& cfg,
                           const StepObserver& obs) {
  if (cfg.n_v < 2) throw std::invalid_argument("arnoldi_solve: n_v must be at least 2");
  if (H.n_sites() != psi0.sites())
    throw std::invalid_argument("arnoldi_solve: site count mismatch");
  Run run(cfg, obs);
  MpsState psi = prepare_start(psi0, cfg.trunc, "arnoldi_solve");

  std::vector<MpsState> V;
  Eigen::MatrixXcd A, N;
  Vector coeff;
  bool first = true;
  bool go = true;
  while (go) {
    V.clear();
    V.push_back(psi);
    N = Eigen::MatrixXcd::Identity(1, 1);
    A = Eigen::MatrixXcd::Zero(1, 1);
    A(0, 0) = expectation(V[0], H, V[0]);
    coeff = Vector::Ones(1);
    if (!A.allFinite()) {
      run.rep.unstable = true;
      break;
    }

    while (go && (int)V.size() < cfg.n_v) {
      MpsState w_raw = product(run, H, V.back(), cfg.trunc);
      const Moments mom = moments(V.back(), w_raw);
      if (first) {
        first = false;
        go = run.start(std::real(A(0, 0)), mom.variance, V[0]);
        if (!go) break;
      }

      // one oblique Gram-Schmidt pass; N keeps the true inner products
      const int m = (int)V.size();
      Vector g(m);
      for (int i = 0; i < m; ++i) g(i) = inner(V[i], w_raw);
      const Vector c = N.ldlt().solve(g);
      std::vector<SimplifyTarget> targets;
      targets.reserve(m + 1);
      targets.emplace_back(1.0, &w_raw);
      for (int i = 0; i < m; ++i) targets.emplace_back(-c(i), &V[i]);
      bool zero = false;
      MpsState w = combine(run, targets, &w_raw, cfg.trunc, &zero);
      if (zero || !(norm(w) > 0)) {
        if (m == 1) {
          run.rep.converged = true;
          go = false;
        }
        break;
      }
      normalize(w);

      Eigen::MatrixXcd Nc(m + 1, m + 1);
      Nc.topLeftCorner(m, m) = N;
      for (int i = 0; i < m; ++i) {
        const Complex v = inner(V[i], w);
        Nc(i, m) = v;
        Nc(m, i) = std::conj(v);
      }
      Nc(m, m) = 1.0;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Nc);
      if (!(es.eigenvalues()(0) > 1e-12 * es.eigenvalues()(m))) {
        if (m == 1) {
          run.rep.converged = true;
          go = false;
        }
        break;
      }
      Eigen::MatrixXcd Ac(m + 1, m + 1);
      Ac.topLeftCorner(m, m) = A;
      for (int i = 0; i < m; ++i) {
        const Complex a = expectation(V[i], H, w);
        Ac(i, m) = a;
        Ac(m, i) = std::conj(a);
      }
      Ac(m, m) = std::real(expectation(w, H, w));
      if (!Ac.allFinite() || !Nc.allFinite()) {
        run.rep.unstable = true;
        go = false;
        break;
      }
      V.push_back(std::move(w));
      A = std::move(Ac);
      N = std::move(Nc);
      const GeneralizedEigResult ge = solve_generalized_eig({A, N});
      coeff = ge.coefficients;
      go = run.record(ge.eigenvalue, mom.variance, V[0]);
    }
    if (!go) break;

    // implicit restart from the lowest Ritz vector
    psi = assemble_ritz(run, V, coeff, cfg.trunc);
    if (!(norm(psi) > 0)) {
      run.rep.stalled = true;
      break;
    }
    normalize(psi);
  }

  MpsState out = assemble_ritz(run, V, coeff, cfg.trunc);
  if (norm(out) > 0)
    normalize(out);
  else
    out = std::move(psi);
  finish(run, Method::arnoldi, cfg.n_v, std::move(out));
  return std::move(run.rep);
}

GeneralizedEigResult solve_generalized_eig(const KrylovMatrices& m) {
  const Eigen::Index L = m.N.rows();
  if (L == 0 || m.A.rows() != L || m.A.cols() != L || m.N.cols() != L)
    throw std::invalid_argument("solve_generalized_eig: shape mismatch");
  const Eigen::MatrixXcd Nh = 0.5 * (m.N + m.N.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> en(Nh);
  const Eigen::VectorXd& mu = en.eigenvalues();
  const double mumax = mu(L - 1);
  if (!(mumax > 0)) throw std::invalid_argument("solve_generalized_eig: N numerically zero");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < L; ++i)
    if (mu(i) > 1e-12 * mumax) keep.push_back(i);
  if (keep.empty()) throw std::invalid_argument("solve_generalized_eig: N numerically zero");

  Eigen::MatrixXcd B(L, (Eigen::Index)keep.size());
  for (Eigen::Index j = 0; j < (Eigen::Index)keep.size(); ++j)
    B.col(j) = en.eigenvectors().col(keep[j]) / std::sqrt(mu(keep[j]));
  const Eigen::MatrixXcd Ah = 0.5 * (m.A + m.A.adjoint());
  Eigen::MatrixXcd Ar = B.adjoint() * Ah * B;
  Ar = 0.5 * (Ar + Ar.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ea(Ar);

  GeneralizedEigResult out;
  out.eigenvalue = ea.eigenvalues()(0);
  out.coefficients = B * ea.eigenvectors().col(0);
  out.degenerate =
      keep.size() >= 2 && ea.eigenvalues()(1) - ea.eigenvalues()(0) <=
                              1e-12 * std::max(1.0, std::abs(ea.eigenvalues()(0)));
  return out;
}

SolverReport dmrg_solve(const Mpo& H, const MpsState& psi0, const SolverConfig& cfg,
                        const StepObserver& obs) {
  if (H.n_sites() != psi0.sites())
    throw std::invalid_argument("dmrg_solve: site count mismatch");
  Run run(cfg, obs);
  MpsState psi = prepare_start(psi0, cfg.trunc, "dmrg_solve");
  const int nsites = psi.sites();

  if (nsites == 1) {
    const Matrix Hd = mpo_to_dense(H, 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(Hd);
    SiteTensor t = SiteTensor::zero(1, 1);
    t.m(0, 0) = es.eigenvectors()(0, 0);
    t.m(1, 0) = es.eigenvectors()(1, 0);
    psi.tensors[0] = std::move(t);
    psi.center = 0;
    psi.log_scale = 0.0;
    run.start(es.eigenvalues()(0), 0.0, psi);
    run.rep.converged = true;
    finish(run, Method::dmrg, cfg.n_v, std::move(psi));
    return std::move(run.rep);
  }

  auto exact_pair = [&](const MpsState& s) {
    const double e = std::real(expectation(s, H, s));
    const double h2 = std::real(mpo_pair_expectation(s, H, H, s));
    return std::pair<double, double>(e, std::max(0.0, h2 - e * e));
  };

  using detail::advance_left;
  using detail::advance_right;
  using detail::ChannelEnv;
  std::vector<ChannelEnv> Lenv(nsites + 1), Renv(nsites + 1);
  Lenv[0] = {Matrix::Identity(1, 1)};
  Renv[nsites] = {Matrix::Identity(1, 1)};
  for (int j = nsites - 1; j >= 2; --j)
    Renv[j] = advance_right(Renv[j + 1], psi.tensors[j], psi.tensors[j], &H.sites[j]);

  // the local solver tolerance tracks the energy gap still to be closed,
  // estimated from the change over the previous sweep
  double conv_gap = 1.0;
  int sweep = 0;

  auto local_update = [&](int k, bool moving_right) {
    const MpoSite& W1 = H.sites[k];
    const MpoSite& W2 = H.sites[k + 1];
    SiteTensor& T1 = psi.tensors[k];
    SiteTensor& T2 = psi.tensors[k + 1];
    const Eigen::Index Dl = T1.Dl(), Dr = T2.Dr();
    const ChannelEnv& L = Lenv[k];
    const ChannelEnv& R = Renv[k + 2];

    auto heff = [&](const Matrix& th) -> Matrix {
      auto blk = [&](const Matrix& M, int s1, int s2) {
        return Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>(
            M.data() + s1 * Dl + s2 * 2 * Dl, Dl, Dr, Eigen::OuterStride<>(4 * Dl));
      };
      const Eigen::Index Bm = W1.Br(), Br = W2.Br();
      // X[bm][s1'][s2] = sum_{b,s1} W1(s1',s1)(b,bm) L[b] th_{s1,s2}
      std::vector<Matrix> X((size_t)(4 * Bm));
      std::vector<bool> xok((size_t)(4 * Bm), false);
      for (Eigen::Index b = 0; b < W1.Bl(); ++b) {
        Matrix LT[2][2];
        bool lok[2][2] = {{false, false}, {false, false}};
        for (int s1p = 0; s1p < 2; ++s1p)
          for (int s1 = 0; s1 < 2; ++s1) {
            const auto& w1 = W1.at(s1p, s1);
            for (Eigen::Index bm = 0; bm < Bm; ++bm) {
              const Complex cw = w1(b, bm);
              if (cw == 0.0) continue;
              for (int s2 = 0; s2 < 2; ++s2) {
                if (!lok[s1][s2]) {
                  LT[s1][s2].noalias() = L[b] * blk(th, s1, s2);
                  lok[s1][s2] = true;
                }
                const size_t xi = (size_t)(bm * 4 + s1p * 2 + s2);
                if (!xok[xi]) {
                  X[xi] = cw * LT[s1][s2];
                  xok[xi] = true;
                } else {
                  X[xi].noalias() += cw * LT[s1][s2];
                }
              }
            }
          }
      }
      // Z[br][s1'][s2'] = sum_{bm,s2} W2(s2',s2)(bm,br) X[bm][s1'][s2]
      std::vector<Matrix> Z((size_t)(4 * Br));
      std::vector<bool> zok((size_t)(4 * Br), false);
      for (Eigen::Index bm = 0; bm < Bm; ++bm)
        for (int s2p = 0; s2p < 2; ++s2p)
          for (int s2 = 0; s2 < 2; ++s2) {
            const auto& w2 = W2.at(s2p, s2);
            for (Eigen::Index br = 0; br < Br; ++br) {
              const Complex cw = w2(bm, br);
              if (cw == 0.0) continue;
              for (int s1p = 0; s1p < 2; ++s1p) {
                const size_t xi = (size_t)(bm * 4 + s1p * 2 + s2);
                if (!xok[xi]) continue;
                const size_t zi = (size_t)(br * 4 + s1p * 2 + s2p);
                if (!zok[zi]) {
                  Z[zi] = cw * X[xi];
                  zok[zi] = true;
                } else {
                  Z[zi].noalias() += cw * X[xi];
                }
              }
            }
          }
      Matrix y = Matrix::Zero(2 * Dl, 2 * Dr);
      for (Eigen::Index br = 0; br < Br; ++br)
        for (int s1p = 0; s1p < 2; ++s1p)
          for (int s2p = 0; s2p < 2; ++s2p) {
            const size_t zi = (size_t)(br * 4 + s1p * 2 + s2p);
            if (!zok[zi]) continue;
            Eigen::Map<Matrix, 0, Eigen::OuterStride<>> yb(
                y.data() + s1p * Dl + s2p * 2 * Dl, Dl, Dr, Eigen::OuterStride<>(4 * Dl));
            yb.noalias() += Z[zi] * R[br].transpose();
          }
      return y;
    };

    const Matrix theta0 = T1.m * T2.left();
    const std::uint64_t seed =
        (std::uint64_t)(sweep * 1000003 + k * 97 + (moving_right ? 0 : 1)) *
            0x9E3779B97F4A7C15ull +
        0xD1B54A32D192ED03ull;
    const double tol = std::max(1e-3 * conv_gap, 1e-2 * cfg.energy_tolerance);
    const Matrix theta = lanczos_min(heff, theta0, tol, seed);

    if (moving_right) {
      SvdSplit sp = split_left(theta, cfg.trunc);
      T1.m = std::move(sp.iso);
      T2 = SiteTensor::from_left(sp.rest);
      Lenv[k + 1] = advance_left(Lenv[k], T1, T1, &W1);
    } else {
      SvdSplit sp = split_right(theta, cfg.trunc);
      T1.m = std::move(sp.rest);
      T2 = SiteTensor::from_left(sp.iso);
      Renv[k + 1] = advance_right(Renv[k + 2], T2, T2, &W2);
    }
  };

  auto [e0, v0] = exact_pair(psi);
  bool go = run.start(e0, v0, psi);
  while (go) {
    for (int k = 0; k <= nsites - 2; ++k) local_update(k, true);
    for (int k = nsites - 2; k >= 0; --k) local_update(k, false);
    psi.center = 0;
    normalize(psi);
    sweep += 1;
    const double prev = run.rep.energies.back();
    auto [e, var] = exact_pair(psi);
    conv_gap = std::max(std::abs(e - prev), cfg.energy_tolerance);
    go = run.record(e, var, psi);
  }
  finish(run, Method::dmrg, cfg.n_v, std::move(psi));
  return std::move(run.rep);
}

SolverReport source_solve(const Mpo& D, const MpsState& g, const MpsState& f0,
                          const SolverConfig& cfg, const StepObserver& obs) {
  if (D.n_sites() != g.sites() || g.sites() != f0.sites())
    throw std::invalid_argument("source_solve: site count mismatch");
  Run run(cfg, obs);
  const Mpo Dadj = mpo_adjoint(D);
  const Mpo M = mpo_multiply(Dadj, D);
  MpsState f = canonicalize(f0, 0, cfg.trunc);
  const MpsState h = product(run, Dadj, g, cfg.trunc);
  const double g2 = std::real(inner(g, g));
  const double href = norm(h);

  MpsState u;
  bool have_u = false;
  for (;;) {
    double cost =
        std::real(expectation(f, M, f)) - 2.0 * std::real(expectation(g, D, f)) + g2;
    if (std::isfinite(cost)) cost = std::max(0.0, cost);
    run.rep.energies.push_back(cost);
    run.notify(run.rep.steps, cost, 0.0, f);
    if (!std::isfinite(cost)) {
      run.rep.unstable = true;
      break;
    }
    if (cost < cfg.energy_tolerance) {
      run.rep.converged = true;
      break;
    }
    if (run.rep.steps >= cfg.max_steps) break;

    const MpsState* fguess = norm(f) > 0 ? &f : nullptr;
    bool zero = false;
    std::vector<SimplifyTarget> dir;
    dir.emplace_back(1.0, &M, &f);
    dir.emplace_back(-1.0, &h);
    MpsState unew = combine(run, dir, have_u ? &u : fguess, cfg.trunc, &zero);
    if (zero || !(norm(unew) > 1e-14 * (norm(f) + href))) {
      run.rep.stalled = true;
      break;
    }
    u = std::move(unew);
    have_u = true;
    const double uMu = std::real(expectation(u, M, u));
    if (!(uMu > 0)) {
      run.rep.stalled = true;
      break;
    }
    // exact slope of ||D f - g||^2 along u
    const double slope =
        std::real(expectation(u, M, f)) - std::real(expectation(g, D, u));
    const double db = -slope / uMu;
    bool fzero = false;
    MpsState fn = combine(run, {{1.0, &f}, {db, &u}}, fguess, cfg.trunc, &fzero);
    f = fzero ? make_zero_mps(f.grid) : std::move(fn);
    run.rep.steps += 1;
  }
  run.rep.state = std::move(f);
  run.rep.ledger.rescaled_cost = (double)run.rep.steps;
  return std::move(run.rep);
}

SolverReport ground_state_solve(const Mpo& H, const MpsState& psi0, const SolverConfig& cfg,
                                const StepObserver& obs) {
  switch (cfg.method) {
    case Method::euler:
    case Method::heun:
    case Method::rk4:
    case Method::rkf45:
      return imaginary_time_solve(H, psi0, cfg, obs);
    case Method::gradient:
      return gradient_descent_solve(H, psi0, cfg, obs);
    case Method::improved_gradient:
      return improved_gradient_solve(H, psi0, cfg, obs);
    case Method::arnoldi:
      return arnoldi_solve(H, psi0, cfg, obs);
    case Method::dmrg:
      return dmrg_solve(H, psi0, cfg, obs);
  }
  throw std::invalid_argument("ground_state_solve: unknown method");
}

}  // namespace qitt
