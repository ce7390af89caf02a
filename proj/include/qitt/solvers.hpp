#pragma once
#include <functional>
#include <vector>

#include "qitt/algebra.hpp"

namespace qitt {

enum class Method { euler, heun, rk4, rkf45, gradient, improved_gradient, arnoldi, dmrg };

// adaptive-step parameters, rkf45 only
struct RkfConfig {
  double abs_tol = 1e-8;
  double rel_tol = 1e-8;
  double initial_step = 1e-2;
  double min_step = 1e-8;
  double max_step = 1.0;
};

struct SolverConfig {
  Method method = Method::euler;
  double delta_beta = 1e-2;  // imaginary-time step; self-calibrated methods ignore it
  int n_v = 3;               // Krylov basis cap, arnoldi only
  int max_steps = 1000;
  double energy_tolerance = 1e-10;
  Truncation trunc;
  RkfConfig rkf;
};

struct CostLedger {
  long mpo_mps_products = 0;
  long mps_combinations = 0;
  long simplification_sweeps = 0;
  double rescaled_cost = 0.0;
};

// Energies are recorded per step with the starting point first, so
// energies.size() == steps + 1; the last entry always reflects `state`.
// source_solve reuses `energies` for the cost functional trajectory and
// leaves `variances` empty.
struct SolverReport {
  std::vector<double> energies;
  std::vector<double> variances;
  MpsState state;
  CostLedger ledger;
  bool converged = false;
  bool unstable = false;
  bool stalled = false;
  int steps = 0;
};

// per-step callback; `step` counts completed updates (0 = starting point)
struct StepInfo {
  int step;
  double energy;
  double variance;
  const MpsState& state;
  const CostLedger& ledger;
};
using StepObserver = std::function<void(const StepInfo&)>;

struct KrylovMatrices {
  Eigen::MatrixXcd A;  // <v_i|H|v_j>
  Eigen::MatrixXcd N;  // <v_i|v_j>
};

struct GeneralizedEigResult {
  double eigenvalue = 0.0;
  Vector coefficients;
  bool degenerate = false;
};

// Table of per-step cost factors C; rescaled_cost = C * steps.
double cost_constant(Method m, int n_v);

// fixed-step integrators (euler, heun, rk4) and the adaptive rkf45
SolverReport imaginary_time_solve(const Mpo& H, const MpsState& psi0,
                                  const SolverConfig& cfg, const StepObserver& obs = {});
SolverReport gradient_descent_solve(const Mpo& H, const MpsState& psi0,
                                    const SolverConfig& cfg, const StepObserver& obs = {});
// negative root of the cubic optimality condition over the central moments
double optimal_step(double mean, double central2, double central3);
SolverReport improved_gradient_solve(const Mpo& H, const MpsState& psi0,
                                     const SolverConfig& cfg, const StepObserver& obs = {});
SolverReport arnoldi_solve(const Mpo& H, const MpsState& psi0, const SolverConfig& cfg,
                           const StepObserver& obs = {});
// minimal eigenpair of A v = lambda N v over the subspace where N is
// numerically positive
GeneralizedEigResult solve_generalized_eig(const KrylovMatrices& m);
SolverReport dmrg_solve(const Mpo& H, const MpsState& psi0, const SolverConfig& cfg,
                        const StepObserver& obs = {});
// minimizes ||D f - g||^2 by steepest descent with exact line search
SolverReport source_solve(const Mpo& D, const MpsState& g, const MpsState& f0,
                          const SolverConfig& cfg, const StepObserver& obs = {});

// dispatch on cfg.method for the ground-state solvers
SolverReport ground_state_solve(const Mpo& H, const MpsState& psi0,
                                const SolverConfig& cfg, const StepObserver& obs = {});

}  // namespace qitt
