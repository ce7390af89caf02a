#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "qitt/solvers.hpp"

namespace qitt {

// Exact-diagonalization reference for one benchmark problem. Matrix storage
// limits the cap well below what MPS runs handle; see dense_hamiltonian.
struct DenseProblem {
  Eigen::MatrixXd matrix;
  GridSpec grid;
  double ground_energy = 0.0;
  Eigen::VectorXd ground_vector;
};

// H = -(1/2) sum_d d^2/dx_d^2 + (1/2) x^T A x assembled densely; matches
// mpo_to_dense(hamiltonian(grid, A)) elementwise. cap bounds total sites.
Eigen::MatrixXd dense_hamiltonian(const GridSpec& grid, const Eigen::MatrixXd& A,
                                  int cap = 12);

// minimal eigenpair of a real symmetric matrix; the returned vector is
// normalized with its largest-magnitude component made positive
std::pair<double, Eigen::VectorXd> dense_ground_state(const Eigen::MatrixXd& H);

// assembled + diagonalized problem, memoized per (grid, A) within the process
const DenseProblem& dense_problem(const GridSpec& grid, const Eigen::MatrixXd& A);

// Dense-vector twin of a solver run: identical update rules, bookkeeping and
// stop conditions, with exact arithmetic in place of truncated algebra.
struct DenseTrajectory {
  std::vector<double> energies;
  std::vector<double> variances;
  Vector state;
  bool converged = false;
  bool unstable = false;
  bool stalled = false;
  int steps = 0;
};

// mirrors euler/heun/rk4/rkf45/gradient/improved_gradient/arnoldi (dmrg has
// no dense counterpart and is rejected)
DenseTrajectory dense_solver_mirror(Method method, const Eigen::MatrixXd& H,
                                    const Vector& v0, const SolverConfig& cfg);
// mirror of source_solve on ||D f - g||^2
DenseTrajectory dense_source_mirror(const Eigen::MatrixXd& D, const Vector& g,
                                    const Vector& f0, const SolverConfig& cfg);

// Frozen reference energies, one line per problem instance.
struct FixtureEntry {
  std::string problem;  // "ho1d" or "squeezed2d"
  int dims = 1;
  int qubits = 0;  // per dimension
  double lower = 0.0;
  double length = 0.0;
  double e0 = 0.0;
};

std::vector<FixtureEntry> load_fixtures(const std::string& path);
void write_fixtures(const std::string& path, const std::vector<FixtureEntry>& entries);
// FNV-1a content hash used to pin fixture files in run manifests
std::uint64_t fnv1a_file(const std::string& path);

}  // namespace qitt
