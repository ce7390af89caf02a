#pragma once
#include <functional>
#include <vector>

namespace qitt {

// fixed-step integrators with a stability polynomial; `exact` is the
// reference decay e^{-z} used for comparison profiles
enum class Integrator { euler, heun, rk4, exact };

// value of the method's stability polynomial at z = delta_beta * E
double stability_eigenvalue(Integrator method, double delta_beta, double E);

struct StabilityProfile {
  Integrator method = Integrator::euler;
  std::vector<double> energies;
  double delta_beta = 0.0;
  std::vector<double> lambdas;
  std::vector<double> ratios;  // r_m = lambda_m / lambda_0
  bool unstable = false;       // some excited mode contracts no faster than the ground mode
};

// contraction ratios of every mode of an ascending spectrum under one step
StabilityProfile contraction_profile(Integrator method, double delta_beta,
                                     const std::vector<double>& energies);

// Golden-section minimization of `merit` over [lo, hi] with a fixed
// evaluation budget; deterministic. Non-finite merit samples are treated as
// +inf; if every sample is non-finite the search throws. When the sampled
// merits are not unimodal, *warning is set and the best sample is returned.
double calibrate_step(const std::function<double(double)>& merit, double lo, double hi,
                      int budget, bool* warning = nullptr);

}  // namespace qitt
