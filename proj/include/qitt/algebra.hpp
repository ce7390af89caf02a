#pragma once
#include <utility>
#include <vector>

#include "qitt/mpo.hpp"
#include "qitt/mps.hpp"
#include "qitt/truncation.hpp"

namespace qitt {

// One addend of the combination being approximated: coefficient * op * state,
// where op is optional (nullptr = plain state). Pointers are borrowed and must
// outlive the call.
struct SimplifyTarget {
  Complex coefficient;
  const Mpo* op = nullptr;
  const MpsState* state = nullptr;

  SimplifyTarget(Complex c, const MpsState* s) : coefficient(c), state(s) {}
  SimplifyTarget(Complex c, const Mpo* o, const MpsState* s)
      : coefficient(c), op(o), state(s) {}
};

struct SimplifyOutcome {
  MpsState state;
  // final squared distance divided by the squared norm of the combination
  double relative_error = 0.0;
  int sweeps_used = 0;
  int max_bond = 1;
  // the combination had numerically zero norm; state is a flagged zero state
  bool is_zero = false;
  std::vector<double> sweep_distances;
};

// Best bounded-bond approximation of sum_i c_i O_i |psi_i> by alternating
// two-site updates. guess may be null (largest-|coefficient| target is used).
// One sweep = a left-to-right plus a right-to-left pass; stops early when the
// relative distance improvement drops below trunc.tolerance.
SimplifyOutcome simplify(const std::vector<SimplifyTarget>& targets,
                         const MpsState* guess, const Truncation& trunc,
                         int max_sweeps = 4);

SimplifyOutcome apply_mpo(const Mpo& O, const MpsState& psi, const Truncation& trunc,
                          int max_sweeps = 4);

// Refines register `dim` from n to n+1 qubits on the same interval:
// g(2s) = f(s), g(2s+1) = (f(s) + f(s+1))/2, with the last odd point copying
// the last sample.
MpsState interpolate_double(const MpsState& psi, int dim, const Truncation& trunc);

namespace detail {
// exact MPO application by direct contraction (bonds multiply); reference
// path for tests and for the cheap bond-2 shifts inside interpolate_double
MpsState zip_apply(const Mpo& O, const MpsState& psi);

// <bra|W|ket> transfer-matrix environments, one matrix per MPO bond channel
// (a single channel when W is null). Used by the sweeping algorithms.
using ChannelEnv = std::vector<Matrix>;
ChannelEnv advance_left(const ChannelEnv& L, const SiteTensor& bra, const SiteTensor& ket,
                        const MpoSite* W);
ChannelEnv advance_right(const ChannelEnv& R, const SiteTensor& bra, const SiteTensor& ket,
                         const MpoSite* W);
}  // namespace detail

}  // namespace qitt
