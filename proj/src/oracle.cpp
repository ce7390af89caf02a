#include "qitt/oracle.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace qitt {

namespace {

long index_stride_after(const GridSpec& grid, int dim) {
  long s = 1;
  for (int d = dim + 1; d < grid.dims(); ++d) s *= grid.points(d);
  return s;
}

Vector matvec(const Eigen::MatrixXd& H, const Vector& v) {
  Vector out(v.size());
  out.real() = H * v.real();
  out.imag() = H * v.imag();
  return out;
}

}  // namespace

Eigen::MatrixXd dense_hamiltonian(const GridSpec& grid, const Eigen::MatrixXd& A, int cap) {
  grid.validate();
  const int dims = grid.dims();
  if (A.rows() != dims || A.cols() != dims)
    throw std::invalid_argument("dense_hamiltonian: A must be d x d for a d-dimensional grid");
  if (grid.total_sites() > cap)
    throw std::invalid_argument("dense_hamiltonian: site cap exceeded");

  long total = 1;
  for (int d = 0; d < dims; ++d) total *= grid.points(d);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(total, total);

  // kinetic part: -(1/2) three-point second difference per dimension
  for (int d = 0; d < dims; ++d) {
    const long P = grid.points(d);
    const double idx2 = 1.0 / (grid.spacing(d) * grid.spacing(d));
    const long after = index_stride_after(grid, d);
    const long before = total / (P * after);
    for (long bi = 0; bi < before; ++bi)
      for (long s = 0; s < P; ++s)
        for (long ai = 0; ai < after; ++ai) {
          const long row = (bi * P + s) * after + ai;
          H(row, row) += idx2;
          if (s + 1 < P) {
            const long right = (bi * P + s + 1) * after + ai;
            H(row, right) += -0.5 * idx2;
            H(right, row) += -0.5 * idx2;
          }
        }
  }

  // potential diagonal (1/2) x^T A x
  for (long i = 0; i < total; ++i) {
    Eigen::VectorXd x(dims);
    for (int d = 0; d < dims; ++d) {
      const long after = index_stride_after(grid, d);
      const long s = (i / after) % grid.points(d);
      x(d) = grid.coordinate(d, (int)s);
    }
    H(i, i) += 0.5 * x.dot(A * x);
  }
  return H;
}

std::pair<double, Eigen::VectorXd> dense_ground_state(const Eigen::MatrixXd& H) {
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("dense_ground_state: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  Eigen::VectorXd v = es.eigenvectors().col(0);
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v(imax) < 0) v = -v;
  v /= v.norm();
  return {es.eigenvalues()(0), std::move(v)};
}

const DenseProblem& dense_problem(const GridSpec& grid, const Eigen::MatrixXd& A) {
  static std::mutex mu;
  static std::map<std::string, DenseProblem> cache;

  std::ostringstream key;
  key.precision(17);
  for (int d = 0; d < grid.dims(); ++d)
    key << grid.qubits_per_dim[d] << "," << grid.lower[d] << "," << grid.length[d] << ";";
  key << "|";
  for (Eigen::Index i = 0; i < A.size(); ++i) key << A(i) << ",";

  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key.str());
  if (it != cache.end()) return it->second;

  DenseProblem p;
  p.grid = grid;
  p.matrix = dense_hamiltonian(grid, A);
  auto [e0, v0] = dense_ground_state(p.matrix);
  p.ground_energy = e0;
  p.ground_vector = std::move(v0);
  return cache.emplace(key.str(), std::move(p)).first->second;
}

namespace {

// same trajectory bookkeeping as the MPS solvers
struct DenseRun {
  DenseTrajectory rep;
  const SolverConfig& cfg;
  double emin = 0.0;

  explicit DenseRun(const SolverConfig& c) : cfg(c) {}

  bool start(double e, double var) {
    rep.energies.push_back(e);
    rep.variances.push_back(var);
    emin = e;
    if (!std::isfinite(e)) {
      rep.unstable = true;
      return false;
    }
    return cfg.max_steps > 0;
  }

  bool record(double e, double var) {
    const double prev = rep.energies.back();
    rep.steps += 1;
    rep.energies.push_back(e);
    rep.variances.push_back(var);
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

struct DenseMoments {
  double energy, h2, variance;
};

DenseMoments dense_moments(const Vector& v, const Vector& phi) {
  const double n2 = v.squaredNorm();
  const double e = std::real(v.dot(phi)) / n2;
  const double h2 = phi.squaredNorm() / n2;
  return {e, h2, std::max(0.0, h2 - e * e)};
}

DenseTrajectory dense_fixed_step(Method method, const Eigen::MatrixXd& H, Vector v,
                                 const SolverConfig& cfg) {
  DenseRun run(cfg);
  const double db = cfg.delta_beta;
  bool first = true;
  bool go = true;
  while (go) {
    const Vector k1 = matvec(H, v);
    const DenseMoments mom = dense_moments(v, k1);
    go = first ? run.start(mom.energy, mom.variance) : run.record(mom.energy, mom.variance);
    first = false;
    if (!go) break;
    Vector next;
    if (method == Method::euler) {
      next = v - db * k1;
    } else if (method == Method::heun) {
      const Vector k2 = matvec(H, Vector(v - db * k1));
      next = v - 0.5 * db * (k1 + k2);
    } else {
      const Vector k2 = matvec(H, Vector(v - 0.5 * db * k1));
      const Vector k3 = matvec(H, Vector(v - 0.5 * db * k2));
      const Vector k4 = matvec(H, Vector(v - db * k3));
      next = v - db / 6.0 * k1 - db / 3.0 * k2 - db / 3.0 * k3 - db / 6.0 * k4;
    }
    const double nn = next.norm();
    if (!(nn > 0)) {
      run.rep.stalled = true;
      break;
    }
    v = next / nn;
  }
  run.rep.state = std::move(v);
  return std::move(run.rep);
}

DenseTrajectory dense_rkf(const Eigen::MatrixXd& H, Vector v, const SolverConfig& cfg) {
  DenseRun run(cfg);
  const RkfConfig& rc = cfg.rkf;
  double h = std::clamp(rc.initial_step, rc.min_step, rc.max_step);
  constexpr double a21 = 1.0 / 4;
  constexpr double a31 = 3.0 / 32, a32 = 9.0 / 32;
  constexpr double a41 = 1932.0 / 2197, a42 = -7200.0 / 2197, a43 = 7296.0 / 2197;
  constexpr double a51 = 439.0 / 216, a52 = -8.0, a53 = 3680.0 / 513, a54 = -845.0 / 4104;
  constexpr double a61 = -8.0 / 27, a62 = 2.0, a63 = -3544.0 / 2565, a64 = 1859.0 / 4104,
                   a65 = -11.0 / 40;
  constexpr double b1 = 25.0 / 216, b3 = 1408.0 / 2565, b4 = 2197.0 / 4104, b5 = -1.0 / 5;
  constexpr double d1 = 1.0 / 360, d3 = -128.0 / 4275, d4 = -2197.0 / 75240, d5 = 1.0 / 50,
                   d6 = 2.0 / 55;

  bool first = true;
  bool go = true;
  while (go) {
    const Vector k1 = matvec(H, v);
    const DenseMoments mom = dense_moments(v, k1);
    go = first ? run.start(mom.energy, mom.variance) : run.record(mom.energy, mom.variance);
    first = false;
    if (!go) break;
    Vector y4;
    for (;;) {
      const Vector k2 = matvec(H, Vector(v - h * a21 * k1));
      const Vector k3 = matvec(H, Vector(v - h * (a31 * k1 + a32 * k2)));
      const Vector k4 = matvec(H, Vector(v - h * (a41 * k1 + a42 * k2 + a43 * k3)));
      const Vector k5 = matvec(H, Vector(v - h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
      const Vector k6 = matvec(
          H, Vector(v - h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
      y4 = v - h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5);
      // same Gram-expansion evaluation of the embedded error as the MPS
      // solver, so the paired step controllers see identical estimates
      const double d[6] = {d1, 0.0, d3, d4, d5, d6};
      const Vector* ks[6] = {&k1, &k2, &k3, &k4, &k5, &k6};
      double err2 = 0.0;
      for (int i = 0; i < 6; ++i) {
        if (d[i] == 0.0) continue;
        err2 += d[i] * d[i] * std::real(ks[i]->dot(*ks[i]));
        for (int j = i + 1; j < 6; ++j) {
          if (d[j] == 0.0) continue;
          err2 += 2.0 * d[i] * d[j] * std::real(ks[i]->dot(*ks[j]));
        }
      }
      const double err = h * std::sqrt(std::max(0.0, err2));
      const double tolv = rc.abs_tol + rc.rel_tol * y4.norm();
      const bool accept = err <= tolv || h <= rc.min_step * (1.0 + 1e-12);
      double factor = err > 0 ? 0.9 * std::pow(tolv / err, 0.2) : 4.0;
      factor = std::clamp(factor, 0.1, 4.0);
      h = std::clamp(h * factor, rc.min_step, rc.max_step);
      if (accept) break;
    }
    const double nn = y4.norm();
    if (!(nn > 0)) {
      run.rep.stalled = true;
      break;
    }
    v = y4 / nn;
  }
  run.rep.state = std::move(v);
  return std::move(run.rep);
}

DenseTrajectory dense_gradient(const Eigen::MatrixXd& H, Vector v, const SolverConfig& cfg) {
  DenseRun run(cfg);
  bool first = true;
  bool go = true;
  while (go) {
    const Vector phi = matvec(H, v);
    const DenseMoments mom = dense_moments(v, phi);
    go = first ? run.start(mom.energy, mom.variance) : run.record(mom.energy, mom.variance);
    first = false;
    if (!go) break;
    if (mom.variance < 1e-14) {
      run.rep.converged = true;
      break;
    }
    const double h3 = std::real(phi.dot(matvec(H, phi)));
    const double mu3 =
        h3 - 3.0 * mom.energy * mom.h2 + 2.0 * mom.energy * mom.energy * mom.energy;
    const double db = optimal_step(mom.energy, mom.variance, mu3);
    Vector next = (1.0 - db * mom.energy) * v + db * phi;
    const double nn = next.norm();
    if (!(nn > 0)) {
      run.rep.stalled = true;
      break;
    }
    v = next / nn;
  }
  run.rep.state = std::move(v);
  return std::move(run.rep);
}

DenseTrajectory dense_improved(const Eigen::MatrixXd& H, Vector v, const SolverConfig& cfg) {
  DenseRun run(cfg);
  bool first = true;
  bool go = true;
  while (go) {
    const Vector phi = matvec(H, v);
    const DenseMoments mom = dense_moments(v, phi);
    go = first ? run.start(mom.energy, mom.variance) : run.record(mom.energy, mom.variance);
    first = false;
    if (!go) break;
    Eigen::MatrixXcd N(2, 2);
    N << 1.0, mom.energy, mom.energy, mom.h2;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> en(N);
    if (!(en.eigenvalues()(0) > 1e-12 * en.eigenvalues()(1))) {
      run.rep.converged = true;
      break;
    }
    const double h3 = std::real(phi.dot(matvec(H, phi)));
    Eigen::MatrixXcd A(2, 2);
    A << mom.energy, mom.h2, mom.h2, h3;
    const GeneralizedEigResult ge = solve_generalized_eig({A, N});
    Vector next = ge.coefficients(0) * v + ge.coefficients(1) * phi;
    const double nn = next.norm();
    if (!(nn > 0)) {
      run.rep.stalled = true;
      break;
    }
    v = next / nn;
  }
  run.rep.state = std::move(v);
  return std::move(run.rep);
}

DenseTrajectory dense_arnoldi(const Eigen::MatrixXd& H, Vector psi, const SolverConfig& cfg) {
  if (cfg.n_v < 2) throw std::invalid_argument("dense_solver_mirror: n_v must be at least 2");
  DenseRun run(cfg);
  std::vector<Vector> V;
  Eigen::MatrixXcd A, N;
  Vector coeff;
  bool first = true;
  bool go = true;
  while (go) {
    V.clear();
    V.push_back(psi);
    N = Eigen::MatrixXcd::Identity(1, 1);
    A = Eigen::MatrixXcd::Zero(1, 1);
    A(0, 0) = V[0].dot(matvec(H, V[0]));
    coeff = Vector::Ones(1);
    if (!A.allFinite()) {
      run.rep.unstable = true;
      break;
    }
    while (go && (int)V.size() < cfg.n_v) {
      const Vector w_raw = matvec(H, V.back());
      const DenseMoments mom = dense_moments(V.back(), w_raw);
      if (first) {
        first = false;
        go = run.start(std::real(A(0, 0)), mom.variance);
        if (!go) break;
      }
      const int m = (int)V.size();
      Vector g(m);
      for (int i = 0; i < m; ++i) g(i) = V[i].dot(w_raw);
      const Vector c = N.ldlt().solve(g);
      Vector w = w_raw;
      for (int i = 0; i < m; ++i) w -= c(i) * V[i];
      const double wn = w.norm();
      if (!(wn > 0)) {
        if (m == 1) {
          run.rep.converged = true;
          go = false;
        }
        break;
      }
      w /= wn;
      Eigen::MatrixXcd Nc(m + 1, m + 1);
      Nc.topLeftCorner(m, m) = N;
      for (int i = 0; i < m; ++i) {
        const Complex vv = V[i].dot(w);
        Nc(i, m) = vv;
        Nc(m, i) = std::conj(vv);
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
      const Vector Hw = matvec(H, w);
      for (int i = 0; i < m; ++i) {
        const Complex a = V[i].dot(Hw);
        Ac(i, m) = a;
        Ac(m, i) = std::conj(a);
      }
      Ac(m, m) = std::real(w.dot(Hw));
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
      go = run.record(ge.eigenvalue, mom.variance);
    }
    if (!go) break;
    Vector next = Vector::Zero(psi.size());
    for (int i = 0; i < (int)V.size(); ++i) next += coeff(i) * V[i];
    const double nn = next.norm();
    if (!(nn > 0)) {
      run.rep.stalled = true;
      break;
    }
    psi = next / nn;
  }
  Vector out = Vector::Zero(psi.size());
  for (int i = 0; i < (int)V.size() && i < coeff.size(); ++i) out += coeff(i) * V[i];
  const double on = out.norm();
  run.rep.state = on > 0 ? Vector(out / on) : psi;
  return std::move(run.rep);
}

}  // namespace

DenseTrajectory dense_solver_mirror(Method method, const Eigen::MatrixXd& H, const Vector& v0,
                                    const SolverConfig& cfg) {
  if (H.rows() != H.cols() || H.rows() != v0.size())
    throw std::invalid_argument("dense_solver_mirror: shape mismatch");
  const double n0 = v0.norm();
  if (!(n0 > 0)) throw std::invalid_argument("dense_solver_mirror: initial state has zero norm");
  Vector v = v0 / n0;
  switch (method) {
    case Method::euler:
    case Method::heun:
    case Method::rk4:
      return dense_fixed_step(method, H, std::move(v), cfg);
    case Method::rkf45:
      return dense_rkf(H, std::move(v), cfg);
    case Method::gradient:
      return dense_gradient(H, std::move(v), cfg);
    case Method::improved_gradient:
      return dense_improved(H, std::move(v), cfg);
    case Method::arnoldi:
      return dense_arnoldi(H, std::move(v), cfg);
    case Method::dmrg:
      break;
  }
  throw std::invalid_argument("dense_solver_mirror: dmrg has no dense mirror");
}

DenseTrajectory dense_source_mirror(const Eigen::MatrixXd& D, const Vector& g,
                                    const Vector& f0, const SolverConfig& cfg) {
  if (D.rows() != D.cols() || D.rows() != g.size() || g.size() != f0.size())
    throw std::invalid_argument("dense_source_mirror: shape mismatch");
  DenseRun run(cfg);
  const Eigen::MatrixXd M = D.transpose() * D;
  const Vector h = matvec(D.transpose(), g);
  const double g2 = g.squaredNorm();
  const double href = h.norm();
  Vector f = f0;
  for (;;) {
    double cost = std::real(f.dot(matvec(M, f))) - 2.0 * std::real(g.dot(matvec(D, f))) + g2;
    if (std::isfinite(cost)) cost = std::max(0.0, cost);
    run.rep.energies.push_back(cost);
    if (!std::isfinite(cost)) {
      run.rep.unstable = true;
      break;
    }
    if (cost < cfg.energy_tolerance) {
      run.rep.converged = true;
      break;
    }
    if (run.rep.steps >= cfg.max_steps) break;
    const Vector u = matvec(M, f) - h;
    if (!(u.norm() > 1e-14 * (f.norm() + href))) {
      run.rep.stalled = true;
      break;
    }
    const double uMu = std::real(u.dot(matvec(M, u)));
    if (!(uMu > 0)) {
      run.rep.stalled = true;
      break;
    }
    const double slope = std::real(u.dot(matvec(M, f))) - std::real(g.dot(matvec(D, u)));
    f += (-slope / uMu) * u;
    run.rep.steps += 1;
  }
  run.rep.state = std::move(f);
  return std::move(run.rep);
}

std::vector<FixtureEntry> load_fixtures(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_fixtures: cannot open " + path);
  std::vector<FixtureEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    FixtureEntry e;
    std::istringstream ls(line);
    std::string tok;
    bool any = false;
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string k = tok.substr(0, eq);
      const std::string v = tok.substr(eq + 1);
      if (k == "problem") e.problem = v;
      else if (k == "dims") e.dims = std::stoi(v);
      else if (k == "qubits") e.qubits = std::stoi(v);
      else if (k == "lower") e.lower = std::stod(v);
      else if (k == "length") e.length = std::stod(v);
      else if (k == "e0") e.e0 = std::stod(v);
      any = true;
    }
    if (any) out.push_back(std::move(e));
  }
  return out;
}

void write_fixtures(const std::string& path, const std::vector<FixtureEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_fixtures: cannot open " + path);
  out << "# frozen dense-oracle ground energies\n";
  char buf[64];
  for (const auto& e : entries) {
    out << "problem=" << e.problem << " dims=" << e.dims << " qubits=" << e.qubits;
    std::snprintf(buf, sizeof buf, "%.15g", e.lower);
    out << " lower=" << buf;
    std::snprintf(buf, sizeof buf, "%.15g", e.length);
    out << " length=" << buf;
    std::snprintf(buf, sizeof buf, "%.15g", e.e0);
    out << " e0=" << buf << "\n";
  }
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("fnv1a_file: cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  char c;
  while (in.get(c)) {
    h ^= (std::uint64_t)(unsigned char)c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace qitt
