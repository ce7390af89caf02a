#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qitt/algebra.hpp"

#include <cmath>
#include <random>

using namespace qitt;

namespace {

Vector random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(gauss(rng), gauss(rng));
  return v;
}

MpsState random_state(const GridSpec& g, std::uint64_t seed) {
  return mps_from_dense(random_vector(Eigen::Index(1) << g.total_sites(), seed), g,
                        Truncation::exact());
}

}  // namespace

TEST_CASE("simplify reproduces a single target exactly") {
  GridSpec g = grid1d(6, -5.0, 10.0);
  MpsState psi = random_state(g, 101);
  SimplifyOutcome out = simplify({{Complex(1.0, 0.0), &psi}}, nullptr, Truncation::exact());
  CHECK(out.relative_error < 1e-14);
  CHECK_FALSE(out.is_zero);
  CHECK((mps_to_dense(out.state) - mps_to_dense(psi)).norm() / norm(psi) < 1e-13);
  CHECK(out.state.center.has_value());
}

TEST_CASE("simplify detects an exactly cancelling combination") {
  GridSpec g = grid1d(5, 0.0, 1.0);
  MpsState psi = random_state(g, 102);
  SimplifyOutcome out = simplify({{Complex(1.0, 0.0), &psi}, {Complex(-1.0, 0.0), &psi}},
                                 nullptr, Truncation::exact());
  CHECK(out.is_zero);
  CHECK(norm(out.state) < 1e-10);
  CHECK(max_bond(out.state) == 1);
}

TEST_CASE("three-term combinations match the dense sum") {
  GridSpec g = grid1d(6, -5.0, 10.0);
  for (int trial = 0; trial < 8; ++trial) {
    Vector va = random_vector(64, 7000 + trial);
    Vector vb = random_vector(64, 8000 + trial);
    Vector vc = random_vector(64, 9000 + trial);
    MpsState a = mps_from_dense(va, g, Truncation::exact());
    MpsState b = mps_from_dense(vb, g, Truncation::exact());
    MpsState c = mps_from_dense(vc, g, Truncation::exact());
    Complex ca(0.7, 0.1), cb(-1.3, 0.0), cc(0.0, 2.0);
    SimplifyOutcome out =
        simplify({{ca, &a}, {cb, &b}, {cc, &c}}, nullptr, Truncation::rel(1e-13));
    Vector want = ca * va + cb * vb + cc * vc;
    CHECK((mps_to_dense(out.state) - want).norm() / want.norm() < 1e-10);
  }
}

TEST_CASE("simplify reports its own error within contract tolerance") {
  GridSpec g = grid1d(6, 0.0, 1.0);
  MpsState a = random_state(g, 201);
  MpsState b = random_state(g, 202);
  Vector want = 1.0 * mps_to_dense(a) + 0.5 * mps_to_dense(b);

  // force a lossy result through a bond cap
  SimplifyOutcome out = simplify({{Complex(1.0, 0.0), &a}, {Complex(0.5, 0.0), &b}},
                                 nullptr, Truncation::rel(1e-12, 3));
  CHECK(out.max_bond <= 3);
  CHECK(max_bond(out.state) <= 3);
  double measured = (mps_to_dense(out.state) - want).squaredNorm() / want.squaredNorm();
  CHECK(out.relative_error == doctest::Approx(measured).epsilon(1e-6));
  CHECK(out.relative_error >= -1e-14);
}

TEST_CASE("sweep distances are non-increasing") {
  GridSpec g = grid1d(6, 0.0, 1.0);
  MpsState a = random_state(g, 301);
  MpsState b = random_state(g, 302);
  MpsState c = random_state(g, 303);
  MpsState guess = make_constant_mps(g);
  SimplifyOutcome out = simplify(
      {{Complex(1.0, 0.0), &a}, {Complex(1.0, 0.0), &b}, {Complex(1.0, 0.0), &c}}, &guess,
      Truncation::rel(0.0, 2), 6);
  REQUIRE(out.sweeps_used >= 1);
  REQUIRE((int)out.sweep_distances.size() == out.sweeps_used);
  for (size_t i = 1; i < out.sweep_distances.size(); ++i)
    CHECK(out.sweep_distances[i] <= out.sweep_distances[i - 1] * (1.0 + 1e-12) + 1e-15);
}

TEST_CASE("simplify rejects mismatched sites") {
  MpsState a = make_constant_mps(grid1d(4, 0.0, 1.0));
  MpsState b = make_constant_mps(grid1d(5, 0.0, 1.0));
  CHECK_THROWS(simplify({{Complex(1.0, 0.0), &a}, {Complex(1.0, 0.0), &b}}, nullptr,
                        Truncation::exact()));
  CHECK_THROWS(simplify({}, nullptr, Truncation::exact()));
}

TEST_CASE("apply_mpo with the identity returns the state") {
  GridSpec g = grid1d(6, 0.0, 1.0);
  MpsState psi = random_state(g, 401);
  SimplifyOutcome out = apply_mpo(identity_mpo(g), psi, Truncation::exact());
  CHECK(out.relative_error < 1e-13);
  CHECK((mps_to_dense(out.state) - mps_to_dense(psi)).norm() / norm(psi) < 1e-12);
}

TEST_CASE("apply_mpo position on the constant state") {
  GridSpec g = grid1d(2, 0.0, 3.0);
  SimplifyOutcome out =
      apply_mpo(position_mpo(g, 0), make_constant_mps(g), Truncation::exact());
  Vector v = mps_to_dense(out.state);
  for (int s = 0; s < 4; ++s) CHECK(std::abs(v(s) - Complex(0.5 * s, 0.0)) < 1e-13);
}

TEST_CASE("apply_mpo hamiltonian matches the dense product") {
  GridSpec g = grid1d(6, -5.0, 10.0);
  Eigen::MatrixXd w(1, 1);
  w(0, 0) = 1.0;
  Mpo H = hamiltonian(g, w);
  Eigen::MatrixXcd Hd = mpo_to_dense(H);
  for (int trial = 0; trial < 6; ++trial) {
    Vector v = random_vector(64, 10000 + trial);
    MpsState psi = mps_from_dense(v, g, Truncation::exact());
    SimplifyOutcome out = apply_mpo(H, psi, Truncation::rel(1e-12));
    Vector want = Hd * v;
    CHECK((mps_to_dense(out.state) - want).norm() / want.norm() < 1e-10);

    // norm error bounded by the reported relative error (triangle inequality)
    double got = norm(out.state), tgt = want.norm();
    CHECK(std::abs(got - tgt) <= tgt * (std::sqrt(std::max(out.relative_error, 0.0)) + 1e-10));
  }
}

TEST_CASE("apply_mpo agrees with the exact zip contraction") {
  GridSpec g = grid1d(6, -5.0, 10.0);
  Mpo D = second_derivative_mpo(g, 0);
  MpsState psi = random_state(g, 501);
  MpsState exact = detail::zip_apply(D, psi);
  SimplifyOutcome swept = apply_mpo(D, psi, Truncation::exact());
  CHECK((mps_to_dense(exact) - mps_to_dense(swept.state)).norm() / norm(exact) < 1e-11);
}

TEST_CASE("simplify with operator-carrying targets") {
  GridSpec g = grid1d(5, -5.0, 10.0);
  Mpo X = position_mpo(g, 0);
  Mpo D = second_derivative_mpo(g, 0);
  MpsState a = random_state(g, 601);
  MpsState b = random_state(g, 602);
  SimplifyOutcome out = simplify(
      {{Complex(2.0, 0.0), &X, &a}, {Complex(-0.5, 0.0), &D, &b}, {Complex(1.0, 0.0), &b}},
      nullptr, Truncation::rel(1e-13));
  Vector want = 2.0 * (mpo_to_dense(X) * mps_to_dense(a)) -
                0.5 * (mpo_to_dense(D) * mps_to_dense(b)) + mps_to_dense(b);
  CHECK((mps_to_dense(out.state) - want).norm() / want.norm() < 1e-10);
}

TEST_CASE("max_bond cap is respected through sweeps") {
  GridSpec g = grid1d(7, -5.0, 10.0);
  MpsState a = random_state(g, 701);
  MpsState b = random_state(g, 702);
  for (int cap : {2, 4, 6}) {
    SimplifyOutcome out = simplify({{Complex(1.0, 0.0), &a}, {Complex(1.0, 0.0), &b}},
                                   nullptr, Truncation::rel(1e-12, cap));
    CHECK(max_bond(out.state) <= cap);
    CHECK(out.max_bond <= cap);
  }
}

TEST_CASE("simplify is deterministic") {
  GridSpec g = grid1d(6, 0.0, 1.0);
  MpsState a = random_state(g, 801);
  MpsState b = random_state(g, 802);
  SimplifyOutcome o1 = simplify({{Complex(1.0, 0.0), &a}, {Complex(0.3, 0.4), &b}}, nullptr,
                                Truncation::rel(1e-10, 5));
  SimplifyOutcome o2 = simplify({{Complex(1.0, 0.0), &a}, {Complex(0.3, 0.4), &b}}, nullptr,
                                Truncation::rel(1e-10, 5));
  CHECK(distance2(o1.state, o2.state) < 1e-28);
  CHECK(o1.sweeps_used == o2.sweeps_used);
}

TEST_CASE("interpolate_double on constant and linear functions") {
  GridSpec g = grid1d(4, -5.0, 10.0);

  MpsState c = make_constant_mps(g);
  MpsState cd = interpolate_double(c, 0, Truncation::exact());
  CHECK(cd.grid.qubits_per_dim[0] == 5);
  Vector cv = mps_to_dense(cd);
  for (int s = 0; s < 32; ++s) CHECK(std::abs(cv(s) - cv(0)) < 1e-13);

  // linear samples: midpoint rule is exact on the interior
  Vector lin(16);
  for (int s = 0; s < 16; ++s) lin(s) = g.coordinate(0, s);
  MpsState l = mps_from_dense(lin, g, Truncation::exact());
  MpsState ld = interpolate_double(l, 0, Truncation::exact());
  Vector lv = mps_to_dense(ld);
  for (int s = 0; s < 15; ++s) {
    CHECK(std::abs(lv(2 * s) - lin(s)) < 1e-12);
    CHECK(std::abs(lv(2 * s + 1) - 0.5 * (lin(s) + lin(s + 1))) < 1e-12);
  }
  CHECK(std::abs(lv(30) - lin(15)) < 1e-12);
  CHECK(std::abs(lv(31) - lin(15)) < 1e-12);  // boundary copy
}

TEST_CASE("interpolate_double matches the pointwise rule on a gaussian") {
  GridSpec g = grid1d(5, -5.0, 10.0);
  Vector f(32);
  for (int s = 0; s < 32; ++s) {
    double x = g.coordinate(0, s);
    f(s) = std::exp(-0.5 * x * x);
  }
  MpsState m = mps_from_dense(f, g, Truncation::exact());
  MpsState d = interpolate_double(m, 0, Truncation::exact());
  Vector got = mps_to_dense(d);
  REQUIRE(got.size() == 64);
  for (int s = 0; s < 31; ++s) {
    CHECK(std::abs(got(2 * s) - f(s)) < 1e-12);
    CHECK(std::abs(got(2 * s + 1) - 0.5 * (f(s) + f(s + 1))) < 1e-12);
  }
  CHECK(std::abs(got(62) - f(31)) < 1e-12);
  CHECK(std::abs(got(63) - f(31)) < 1e-12);
}

TEST_CASE("interpolate_double doubles one register of a 2D grid") {
  GridSpec g = grid_nd(2, 3, -1.0, 2.0);
  Vector f(64);
  for (int sx = 0; sx < 8; ++sx)
    for (int sy = 0; sy < 8; ++sy) {
      double x = g.coordinate(0, sx), y = g.coordinate(1, sy);
      f(sx * 8 + sy) = std::exp(-(x * x + 0.5 * y * y));
    }
  MpsState m = mps_from_dense(f, g, Truncation::exact());
  MpsState d = interpolate_double(m, 1, Truncation::exact());
  CHECK(d.grid.qubits_per_dim[0] == 3);
  CHECK(d.grid.qubits_per_dim[1] == 4);
  Vector got = mps_to_dense(d);
  REQUIRE(got.size() == 128);
  for (int sx = 0; sx < 8; ++sx) {
    for (int sy = 0; sy < 7; ++sy) {
      double fs = std::real(f(sx * 8 + sy)), fs1 = std::real(f(sx * 8 + sy + 1));
      CHECK(std::abs(got(sx * 16 + 2 * sy) - fs) < 1e-12);
      CHECK(std::abs(got(sx * 16 + 2 * sy + 1) - 0.5 * (fs + fs1)) < 1e-12);
    }
    CHECK(std::abs(got(sx * 16 + 15) - f(sx * 8 + 7)) < 1e-12);
  }
}
