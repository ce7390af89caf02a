#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qitt/oracle.hpp"

#include <cmath>
#include <cstdio>
#include <random>

using namespace qitt;

namespace {

Eigen::MatrixXd ho_coupling(double omega = 1.0) {
  Eigen::MatrixXd w(1, 1);
  w(0, 0) = omega * omega;
  return w;
}

}  // namespace

TEST_CASE("dense_hamiltonian equals the MPO expansion elementwise") {
  Eigen::MatrixXd w = ho_coupling();
  for (int n : {3, 4, 6}) {
    GridSpec g = grid1d(n, -5.0, 10.0);
    Eigen::MatrixXd Hd = dense_hamiltonian(g, w);
    Eigen::MatrixXcd Hm = mpo_to_dense(hamiltonian(g, w));
    CHECK((Hd.cast<Complex>() - Hm).cwiseAbs().maxCoeff() < 1e-12 * Hd.cwiseAbs().maxCoeff());
    CHECK((Hd - Hd.transpose()).norm() == 0.0);
  }

  // 2D with cross terms
  GridSpec g2 = grid_nd(2, 3, -5.0, 10.0);
  Eigen::Matrix2d A = squeezing_matrix(M_PI / 4.0, 1.0, 0.5);
  Eigen::MatrixXd Hd2 = dense_hamiltonian(g2, A);
  Eigen::MatrixXcd Hm2 = mpo_to_dense(hamiltonian(g2, A));
  CHECK((Hd2.cast<Complex>() - Hm2).cwiseAbs().maxCoeff() < 1e-12 * Hd2.cwiseAbs().maxCoeff());
}

TEST_CASE("dense_hamiltonian has the tridiagonal kinetic structure") {
  GridSpec g = grid1d(3, -5.0, 10.0);
  double dx = g.spacing(0);
  Eigen::MatrixXd H = dense_hamiltonian(g, ho_coupling());
  for (int i = 0; i < 8; ++i) {
    double x = g.coordinate(0, i);
    CHECK(H(i, i) == doctest::Approx(1.0 / (dx * dx) + 0.5 * x * x).epsilon(1e-13));
    for (int j = 0; j < 8; ++j) {
      if (std::abs(i - j) == 1) CHECK(H(i, j) == doctest::Approx(-0.5 / (dx * dx)).epsilon(1e-13));
      if (std::abs(i - j) > 1) CHECK(H(i, j) == 0.0);
    }
  }
  CHECK_THROWS(dense_hamiltonian(grid1d(13, -5.0, 10.0), ho_coupling()));
}

TEST_CASE("dense_ground_state on hand problems") {
  Eigen::MatrixXd d3 = Eigen::Vector3d(3.0, 1.0, 2.0).asDiagonal();
  auto [e1, v1] = dense_ground_state(d3);
  CHECK(e1 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(v1(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(v1(0)) < 1e-13);

  Eigen::MatrixXd pauli(2, 2);
  pauli << 0.0, 1.0, 1.0, 0.0;
  auto [e2, v2] = dense_ground_state(pauli);
  CHECK(e2 == doctest::Approx(-1.0).epsilon(1e-14));
  double isq = 1.0 / std::sqrt(2.0);
  CHECK(v2(0) == doctest::Approx(isq).epsilon(1e-12));
  CHECK(v2(1) == doctest::Approx(-isq).epsilon(1e-12));

  Eigen::MatrixXd nonsym(2, 2);
  nonsym << 0.0, 1.0, 0.0, 0.0;
  CHECK_THROWS(dense_ground_state(nonsym));
}

TEST_CASE("dense_problem residual invariant and memoization") {
  GridSpec g = grid1d(6, -5.0, 10.0);
  const DenseProblem& p = dense_problem(g, ho_coupling());
  CHECK((p.matrix * p.ground_vector - p.ground_energy * p.ground_vector).norm() <
        1e-10 * p.matrix.norm());
  CHECK(p.ground_vector.norm() == doctest::Approx(1.0).epsilon(1e-13));
  const DenseProblem& q = dense_problem(g, ho_coupling());
  CHECK(&p == &q);  // cached instance

  // frozen fixture agreement at n=8
  const DenseProblem& p8 = dense_problem(grid1d(8, -5.0, 10.0), ho_coupling());
  CHECK(p8.ground_energy == doctest::Approx(0.499951936993554).epsilon(1e-12));
}

TEST_CASE("euler mirror reproduces the two-level hand iteration") {
  Eigen::MatrixXd H(2, 2);
  H << 0.0, 0.0, 0.0, 1.0;
  Vector v0 = Vector::Constant(2, Complex(1.0 / std::sqrt(2.0), 0.0));
  SolverConfig cfg;
  cfg.method = Method::euler;
  cfg.delta_beta = 0.5;
  cfg.max_steps = 1;
  cfg.energy_tolerance = 1e-16;
  DenseTrajectory t = dense_solver_mirror(Method::euler, H, v0, cfg);
  REQUIRE(t.energies.size() == 2);
  CHECK(t.energies[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.energies[1] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(std::abs(t.state(0)) == doctest::Approx(1.0 / std::sqrt(1.25)).epsilon(1e-13));
  CHECK(std::abs(t.state(1)) == doctest::Approx(0.5 / std::sqrt(1.25)).epsilon(1e-13));
}

TEST_CASE("every solver tracks its dense mirror at machine-exact truncation") {
  GridSpec g = grid1d(6, -5.0, 10.0);
  Eigen::MatrixXd w = ho_coupling();
  Mpo H = hamiltonian(g, w);
  const DenseProblem& prob = dense_problem(g, w);
  MpsState psi0 = make_constant_mps(g);
  Vector v0 = Vector::Constant(64, Complex(0.125, 0.0));

  for (Method m : {Method::euler, Method::heun, Method::rk4, Method::rkf45, Method::gradient,
                   Method::improved_gradient, Method::arnoldi}) {
    SolverConfig cfg;
    cfg.method = m;
    cfg.delta_beta = 0.02;
    cfg.max_steps = 60;
    cfg.energy_tolerance = 1e-14;
    cfg.trunc = Truncation::exact();
    cfg.n_v = 3;
    // the adaptive controller's embedded error estimate is evaluated in Gram
    // form; keep its tolerance above the cancellation noise floor
    cfg.rkf.abs_tol = 1e-5;
    cfg.rkf.rel_tol = 1e-5;
    SolverReport r = ground_state_solve(H, psi0, cfg);
    DenseTrajectory t = dense_solver_mirror(m, prob.matrix, v0, cfg);
    REQUIRE(r.energies.size() == t.energies.size());
    for (size_t k = 0; k < r.energies.size(); ++k)
      CHECK(std::abs(r.energies[k] - t.energies[k]) < 1e-10);
  }

  CHECK_THROWS(dense_solver_mirror(Method::dmrg, prob.matrix, v0, SolverConfig{}));
}

TEST_CASE("arnoldi mirror with a full basis equals dense_ground_state") {
  GridSpec g = grid1d(3, -5.0, 10.0);
  const DenseProblem& prob = dense_problem(g, ho_coupling());
  Vector v0 = Vector::Constant(8, Complex(std::pow(2.0, -1.5), 0.0));
  SolverConfig cfg;
  cfg.method = Method::arnoldi;
  cfg.n_v = 8;
  cfg.max_steps = 10;
  cfg.energy_tolerance = 1e-14;
  DenseTrajectory t = dense_solver_mirror(Method::arnoldi, prob.matrix, v0, cfg);
  CHECK(std::abs(t.energies.back() - prob.ground_energy) < 1e-12);
  Vector ref = prob.ground_vector.cast<Complex>();
  Complex overlap = ref.dot(t.state);
  CHECK(std::abs(std::abs(overlap) - 1.0) < 1e-10);
}

TEST_CASE("source mirror pairs with the MPS source solver") {
  GridSpec g = grid1d(5, -5.0, 10.0);
  Mpo D = second_derivative_mpo(g, 0);
  Eigen::MatrixXcd Dd = mpo_to_dense(D);
  Vector gv(32);
  for (int s = 0; s < 32; ++s) {
    double x = g.coordinate(0, s);
    gv(s) = std::exp(-0.3 * x * x);
  }
  MpsState gm = mps_from_dense(gv, g, Truncation::exact());
  SolverConfig cfg;
  cfg.max_steps = 50;
  cfg.energy_tolerance = 1e-20;
  cfg.trunc = Truncation::exact();
  SolverReport r = source_solve(D, gm, make_zero_mps(g), cfg);
  DenseTrajectory t = dense_source_mirror(Dd.real(), gv, Vector::Zero(32), cfg);
  REQUIRE(r.energies.size() == t.energies.size());
  for (size_t k = 0; k < r.energies.size(); ++k) {
    double scale = std::max(1.0, std::abs(t.energies[k]));
    CHECK(std::abs(r.energies[k] - t.energies[k]) < 1e-10 * scale);
  }
}

TEST_CASE("fixture files round trip and hash stably") {
  std::vector<FixtureEntry> entries = {
      {"ho1d", 1, 8, -5.0, 10.0, 0.499951936993554},
      {"squeezed2d", 2, 5, -5.0, 10.0, 2.45869952972505},
  };
  std::string path = "fixture_roundtrip_test.txt";
  write_fixtures(path, entries);
  std::vector<FixtureEntry> back = load_fixtures(path);
  REQUIRE(back.size() == entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    CHECK(back[i].problem == entries[i].problem);
    CHECK(back[i].dims == entries[i].dims);
    CHECK(back[i].qubits == entries[i].qubits);
    CHECK(back[i].lower == entries[i].lower);
    CHECK(back[i].length == entries[i].length);
    CHECK(back[i].e0 == doctest::Approx(entries[i].e0).epsilon(1e-15));
  }

  std::uint64_t h1 = fnv1a_file(path);
  std::uint64_t h2 = fnv1a_file(path);
  CHECK(h1 == h2);
  CHECK(h1 != 0);

  // hash changes when content changes
  entries[0].e0 = 0.5;
  write_fixtures(path, entries);
  CHECK(fnv1a_file(path) != h1);
  std::remove(path.c_str());

  CHECK_THROWS(load_fixtures("does_not_exist_anywhere.txt"));
}

TEST_CASE("checked-in fixtures match live recomputation at small sizes") {
  std::string path = std::string(QITT_DATA_DIR) + "/oracle_fixtures.txt";
  std::vector<FixtureEntry> entries = load_fixtures(path);
  REQUIRE(entries.size() >= 14);
  int verified = 0;
  for (const FixtureEntry& e : entries) {
    int total_sites = e.dims * e.qubits;
    if (total_sites > 8) continue;  // keep the live eigensolves cheap
    GridSpec g = grid_nd(e.dims, e.qubits, e.lower, e.length);
    Eigen::MatrixXd A = e.problem == "squeezed2d"
                            ? Eigen::MatrixXd(squeezing_matrix(M_PI / 4.0, 1.0, 0.5))
                            : ho_coupling();
    const DenseProblem& p = dense_problem(g, A);
    CHECK(std::abs(p.ground_energy - e.e0) < 5e-15 * std::max(1.0, std::abs(e.e0)));
    ++verified;
  }
  CHECK(verified >= 8);
}
