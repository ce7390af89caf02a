#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qitt/mpo.hpp"
#include "qitt/mps.hpp"
#include "qitt/oracle.hpp"
#include "qitt/solvers.hpp"

namespace qitt {

// Benchmark problem family. "constant" is the identity-operator sanity case:
// every state is an eigenstate, so warm starts converge with zero iterations.
struct ProblemSpec {
  std::string name = "ho1d";  // ho1d | squeezed2d | constant
  double omega = 1.0;         // ho1d fundamental frequency
  double theta = 0.78539816339744831;
  double sigma_max = 1.0;
  double sigma_min = 0.5;

  int dims() const;
  // ground energy of the continuum problem, the fallback reference beyond
  // the dense-oracle cap
  double continuum_energy() const;
  Eigen::MatrixXd coupling() const;  // the A matrix of (1/2) x^T A x
};

struct BenchmarkConfig {
  ProblemSpec problem;
  std::vector<int> qubits;  // per-dimension counts; consecutive ascending for ranges
  double L = 10.0;          // box [-L/2, L/2] along every dimension
  SolverConfig solver;
  bool warm_start = false;
  std::string output;            // CSV path; manifest lands next to it
  std::uint64_t seed = 0;        // 0 = constant start, else random product state
  double epsilon_target = 1e-8;  // steps-to-tolerance threshold (renormalize)
  std::string fixtures;          // frozen-oracle table; "" = bundled default
};

struct MetricsRecord {
  int step = 0;
  double energy = 0.0;
  std::optional<double> epsilon;  // |E0 - E|, absent without a reference
  std::optional<double> norm1;    // 1-norm distance after phase alignment
  std::optional<double> infidelity;
  double sigma = 0.0;  // sqrt(<H^2> - <H>^2), recomputed exactly from the state
  CostLedger ledger;
  double rescaled_cost = 0.0;
  int max_bond = 1;
  long mps_parameter_count = 0;
  double wall_ms = 0.0;
};

// sigma always; epsilon/norm1/infidelity only when an oracle is supplied
MetricsRecord compute_metrics(const MpsState& state, const Mpo& H, const DenseProblem* oracle);

struct BenchResult {
  std::vector<MetricsRecord> rows;  // one per step, starting point included
  SolverReport report;
  std::string status;             // converged | unstable | stalled | budget
  std::string epsilon_reference;  // oracle | continuum
  GridSpec grid;
};

GridSpec make_grid(const ProblemSpec& problem, int qubits_per_dim, double L);
Mpo make_operator(const ProblemSpec& problem, const GridSpec& grid);
// dense reference when the problem admits one under the cap, else nullptr
const DenseProblem* problem_oracle(const ProblemSpec& problem, const GridSpec& grid,
                                   int cap = 12);
// reference ground energy: fixture table, then dense oracle, then continuum
double reference_energy(const BenchmarkConfig& cfg, const GridSpec& grid, bool* from_oracle);

// runs cfg.solver on the problem at cfg.qubits.front(); writes CSV + JSON
// manifest when cfg.output is set
BenchResult run_benchmark(const BenchmarkConfig& cfg);

struct RenormalizedRow {
  int qubits = 0;
  int cold_steps = -1;  // first step with epsilon < target; -1 = not reached
  int warm_steps = -1;
  double cold_ms = 0.0, warm_ms = 0.0;  // wall time up to that step
  double cold_epsilon = 0.0, warm_epsilon = 0.0;  // final epsilon of each run
};
// cold start at every n in cfg.qubits versus a chain warm-started by
// interpolating the previous solution up one qubit per dimension
std::vector<RenormalizedRow> run_renormalized(const BenchmarkConfig& cfg);

struct MemoryReport {
  long mps_parameters = 0;
  long long dense_parameters = 0;  // 2^N
};
MemoryReport report_memory(const MpsState& state);

void write_csv(const std::string& path, const BenchResult& result);
void write_manifest(const std::string& path, const BenchmarkConfig& cfg,
                    const BenchResult& result);
void write_renormalized_csv(const std::string& path,
                            const std::vector<RenormalizedRow>& rows);

}  // namespace qitt
