#pragma once
#include <limits>
#include <optional>

namespace qitt {

// Precision contract for every approximate operation.
//
// `tolerance` bounds the relative 2-norm error allowed per truncation: the
// discarded singular values satisfy
//   sum(s_disc^2) <= tolerance^2 * sum(s^2).
// machine_exact ignores `tolerance` and keeps everything above the
// numerical-noise floor (s_i > 64*eps*s_max), i.e. only directions that are
// zero up to rounding are dropped.
struct Truncation {
  enum class Mode { relative_singular_values, machine_exact };

  double tolerance = 1e-12;
  std::optional<int> max_bond{};
  Mode mode = Mode::relative_singular_values;

  static Truncation exact() { return {0.0, {}, Mode::machine_exact}; }
  static Truncation rel(double tol, std::optional<int> cap = {}) {
    return {tol, cap, Mode::relative_singular_values};
  }
};

struct TruncationCut {
  int rank;
  double discarded2;  // sum of squares of dropped singular values
  double total2;      // sum of squares of all singular values
};

// sv must be sorted descending. Keeps at least one value.
inline TruncationCut truncation_cut(const double* sv, int n, const Truncation& t) {
  double total2 = 0.0;
  for (int i = 0; i < n; ++i) total2 += sv[i] * sv[i];
  int rank = n;
  double disc = 0.0;
  if (t.mode == Truncation::Mode::machine_exact) {
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * (n ? sv[0] : 0.0);
    while (rank > 1 && sv[rank - 1] <= floor) {
      disc += sv[rank - 1] * sv[rank - 1];
      --rank;
    }
  } else {
    const double budget = t.tolerance * t.tolerance * total2;
    while (rank > 1 && disc + sv[rank - 1] * sv[rank - 1] <= budget) {
      disc += sv[rank - 1] * sv[rank - 1];
      --rank;
    }
  }
  if (t.max_bond && rank > *t.max_bond) {
    for (int i = *t.max_bond; i < rank; ++i) disc += sv[i] * sv[i];
    rank = *t.max_bond;
  }
  if (rank < 1) rank = 1;
  return {rank, disc, total2};
}

}  // namespace qitt
