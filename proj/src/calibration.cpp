#include "qitt/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace qitt {

double stability_eigenvalue(Integrator method, double delta_beta, double E) {
  const double z = delta_beta * E;
  switch (method) {
    case Integrator::euler:
      return 1.0 - z;
    case Integrator::heun:
      return 1.0 - z + 0.5 * z * z;
    case Integrator::rk4:
      return 1.0 - z + z * z / 2.0 - z * z * z / 6.0 + z * z * z * z / 24.0;
    case Integrator::exact:
      return std::exp(-z);
  }
  return 0.0;
}

StabilityProfile contraction_profile(Integrator method, double delta_beta,
                                     const std::vector<double>& energies) {
  if (energies.empty())
    throw std::invalid_argument("contraction_profile: empty spectrum");
  for (size_t m = 1; m < energies.size(); ++m)
    if (energies[m] < energies[m - 1])
      throw std::invalid_argument("contraction_profile: energies must be ascending");

  StabilityProfile p;
  p.method = method;
  p.energies = energies;
  p.delta_beta = delta_beta;
  p.lambdas.reserve(energies.size());
  for (double e : energies) p.lambdas.push_back(stability_eigenvalue(method, delta_beta, e));
  if (p.lambdas[0] == 0.0)
    throw std::invalid_argument("contraction_profile: step parameter sits on a stability root");
  p.ratios.reserve(energies.size());
  for (size_t m = 0; m < p.lambdas.size(); ++m) {
    const double r = p.lambdas[m] / p.lambdas[0];
    p.ratios.push_back(r);
    if (m > 0 && (std::abs(r) >= 1.0 || std::abs(p.lambdas[m]) >= std::abs(p.lambdas[0])))
      p.unstable = true;
  }
  return p;
}

double calibrate_step(const std::function<double(double)>& merit, double lo, double hi,
                      int budget, bool* warning) {
  if (!(lo < hi)) throw std::invalid_argument("calibrate_step: interval must satisfy lo < hi");
  if (budget < 3) throw std::invalid_argument("calibrate_step: budget must be at least 3");
  if (warning) *warning = false;

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> samples;
  auto eval = [&](double x) {
    double f = merit(x);
    if (!std::isfinite(f)) f = inf;
    samples.emplace_back(x, f);
    return f;
  };

  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = eval(x1);
  double f2 = eval(x2);
  int used = 2;
  while (used < budget) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = eval(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = eval(x2);
    }
    ++used;
  }

  std::sort(samples.begin(), samples.end());
  size_t best = 0;
  for (size_t i = 1; i < samples.size(); ++i)
    if (samples[i].second < samples[best].second) best = i;
  if (samples[best].second == inf)
    throw std::invalid_argument("calibrate_step: merit is non-finite across the interval");

  // unimodality audit over the sorted samples: strictly better than the best
  // before the minimum or after it means the merit has several valleys
  if (warning) {
    const double scale = std::max(1.0, std::abs(samples[best].second));
    double running = inf;
    for (size_t i = 0; i < best; ++i) {
      if (samples[i].second < running - 1e-12 * scale) running = samples[i].second;
      else if (samples[i].second > running + 1e-9 * scale) *warning = true;
    }
    running = inf;
    for (size_t i = samples.size(); i-- > best + 1;) {
      if (samples[i].second < running - 1e-12 * scale) running = samples[i].second;
      else if (samples[i].second > running + 1e-9 * scale) *warning = true;
    }
  }
  return samples[best].first;
}

}  // namespace qitt
