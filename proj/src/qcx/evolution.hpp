#pragma once

#include <array>
#include <functional>

#include "qcx/grid.hpp"
#include "qcx/operators.hpp"

namespace qcx {

enum class Scheme { crank_nicolson, split_step };

struct EvolutionTrace {
  std::vector<double> times;
  std::vector<GridWaveFunction> snapshots;
  FieldConfig config;
  double dt = 0.0;
  int stride = 1;

  const GridWaveFunction& at(std::size_t i) const { return snapshots[i]; }
  std::size_t steps_stored() const { return snapshots.size(); }
};

// i d psi/dt = (-Lap/2 + V) psi. Crank-Nicolson (unconditionally stable,
// norm-preserving up to the 1e-12 solver residual) or Strang split-step
// (spectral). Snapshots stored every `stride` steps, t = 0 included.
EvolutionTrace schrodinger_evolve(const GridWaveFunction& psi0,
                                  const FieldConfig& config, double dt,
                                  int steps, Scheme scheme, int stride = 1);

// i d psi/dt = ((P-A)^2/2 + V) psi, Crank-Nicolson with a spectral kinetic
// preconditioner. With empty A this is bit-identical to the scalar CN path.
EvolutionTrace magnetic_schrodinger_evolve(const GridWaveFunction& psi0,
                                           const FieldConfig& config, double dt,
                                           int steps, int stride = 1);

using BFieldOfTime = std::function<std::array<double, 3>(double)>;

struct TwoLevelTrace {
  std::vector<double> times;
  std::vector<TwoLevelState> states;
  double dt = 0.0;
};

// i d psi/dt = (B.S) psi on C^2; per-step propagator is the exact exponential
// of the midpoint Hamiltonian.
TwoLevelTrace two_level_evolve(const TwoLevelState& psi0, const BFieldOfTime& b,
                               double dt, int steps, int stride = 1);

// Magnetic field entering the Pauli spin coupling: either a static in-plane
// B3(x) (d = 2, consistent with curl A) or a uniform, possibly time-dependent
// 3-vector (orbital A dropped: pure spin coupling).
struct SpinCoupling {
  RealField b3;             // non-empty: B = (0, 0, b3(x))
  BFieldOfTime uniform_b;   // non-null: uniform B(t)

  bool spatial() const { return !b3.empty(); }
  std::array<double, 3> at(double t, std::size_t idx) const {
    if (spatial()) return {0.0, 0.0, b3[idx]};
    if (uniform_b) return uniform_b(t);
    return {0.0, 0.0, 0.0};
  }
};

struct SpinorTrace {
  std::vector<double> times;
  std::vector<SpinorGridWaveFunction> snapshots;
  FieldConfig config;
  SpinCoupling coupling;
  double dt = 0.0;
  int stride = 1;
};

// i d Psi/dt = (H_{A,V} I + B.S) Psi via Strang splitting: exact pointwise
// 2x2 spin exponentials around a Crank-Nicolson orbital step.
SpinorTrace pauli_evolve(const SpinorGridWaveFunction& psi0,
                         const FieldConfig& config, const SpinCoupling& coupling,
                         double dt, int steps, int stride = 1);

// exact single-step application of exp(-i dt B.S) to a two-level amplitude
void apply_spin_rotation(const std::array<double, 3>& b, double dt, cplx& plus,
                         cplx& minus);

}  // namespace qcx
