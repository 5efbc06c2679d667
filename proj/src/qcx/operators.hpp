#pragma once

#include <functional>
#include <vector>

#include "qcx/grid.hpp"

namespace qcx {

// Operators are passed as application procedures psi -> A psi; matrices are
// used only in finite dimensions.
using OpApply = std::function<GridWaveFunction(const GridWaveFunction&)>;

// Static electromagnetic configuration on a grid. A is sampled per axis;
// b3 is the in-plane magnetic field B3 = d1 A2 - d2 A1 (d = 2). For uniform-B
// runs with a linear (non-periodic) gauge, `uniform_b3` carries the analytic
// value and derivative checks use it instead of spectral curls.
struct FieldConfig {
  UniformGrid grid;
  RealField V;                       // scalar potential (empty = 0)
  std::vector<RealField> A;          // vector potential components (empty = 0)
  bool has_uniform_b3 = false;
  double uniform_b3 = 0.0;

  bool has_A() const { return !A.empty(); }
};

OpApply identity_op();
OpApply position_op(int axis);
OpApply momentum_op(int axis);     // P_j = -i d/dx_j, spectral
OpApply momentum_squared_op();     // P^2 = -Laplacian
OpApply kinetic_op();              // -Laplacian / 2
OpApply multiply_op(RealField v);
OpApply schrodinger_op(RealField v);                // -Lap/2 + V
OpApply magnetic_hamiltonian_op(FieldConfig cfg);   // (P-A)^2/2 + V
OpApply add_ops(OpApply a, OpApply b);
OpApply scale_op(cplx s, OpApply a);

// spectral indicator of a momentum box [lo, hi) per axis (1_J(P))
OpApply momentum_indicator_op(std::vector<double> lo, std::vector<double> hi);
// indicator of a position box [lo, hi) per axis (1_I(X))
OpApply position_indicator_op(std::vector<double> lo, std::vector<double> hi);

// E_psi(A) = Re (A psi, psi)
double expectation(const OpApply& apply, const GridWaveFunction& psi);

}  // namespace qcx
