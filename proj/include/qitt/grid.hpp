#pragma once
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qitt {

// Discretization of a d-dimensional box. Register i holds qubits_per_dim[i]
// binary sites encoding 2^n_i grid points x = lower[i] + s*spacing(i), with
// spacing = length[i]/(2^n_i - 1) so both endpoints lie on the grid.
//
// Site order is global and fixed: most significant bit first inside each
// register, registers concatenated serially (all x sites, then all y sites).
struct GridSpec {
  std::vector<int> qubits_per_dim;
  std::vector<double> lower;
  std::vector<double> length;

  int dims() const { return (int)qubits_per_dim.size(); }
  int total_sites() const {
    int n = 0;
    for (int q : qubits_per_dim) n += q;
    return n;
  }
  std::int64_t points(int d) const { return std::int64_t(1) << qubits_per_dim[d]; }
  double spacing(int d) const { return length[d] / double(points(d) - 1); }
  int register_offset(int d) const {
    int o = 0;
    for (int i = 0; i < d; ++i) o += qubits_per_dim[i];
    return o;
  }
  double coordinate(int d, std::int64_t s) const { return lower[d] + double(s) * spacing(d); }

  void validate() const {
    if (qubits_per_dim.empty() || lower.size() != qubits_per_dim.size() ||
        length.size() != qubits_per_dim.size())
      throw std::invalid_argument("GridSpec: inconsistent field sizes");
    for (int d = 0; d < dims(); ++d) {
      if (qubits_per_dim[d] < 1) throw std::invalid_argument("GridSpec: qubits_per_dim < 1");
      if (!(length[d] > 0)) throw std::invalid_argument("GridSpec: length <= 0");
    }
  }
  bool operator==(const GridSpec&) const = default;
};

inline GridSpec grid1d(int qubits, double lower, double length) {
  GridSpec g{{qubits}, {lower}, {length}};
  g.validate();
  return g;
}

// same interval replicated across `dims` dimensions
inline GridSpec grid_nd(int dims, int qubits, double lower, double length) {
  GridSpec g;
  g.qubits_per_dim.assign(dims, qubits);
  g.lower.assign(dims, lower);
  g.length.assign(dims, length);
  g.validate();
  return g;
}

}  // namespace qitt
