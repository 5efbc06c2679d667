#pragma once

#include <array>
#include <functional>

#include "qcx/evolution.hpp"
#include "qcx/grid.hpp"

namespace qcx {

// periodic multilinear interpolation of a real grid field
double interpolate(const UniformGrid& g, const RealField& f, const double* x);

struct Trajectory {
  std::vector<double> times;
  std::vector<std::array<double, 3>> x;
  bool velocity_capped = false;
};

// dx/dt = p_B(x,t) - [with_A] A(x): RK4 in t, multilinear in space, linear in
// time between snapshots. Velocity magnitude capped at L/(10 dt) with a flag.
Trajectory guidance_trajectory(const EvolutionTrace& trace,
                               const std::array<double, 3>& x0, bool with_A,
                               int substeps = 1);

// max_t | d pi/dt - rhs | with pi(t) = p_B(x(t), t), rhs the Hamilton force
// (free: -grad(V+Q); with A: sum_k (pi_k - A_k) grad_j A_k - grad_j(V+Q)).
// Time derivative by central differences at snapshot times.
double hamilton_residual(const EvolutionTrace& trace, const Trajectory& traj);

struct DeviationRun {
  std::vector<double> times;
  std::vector<std::array<double, 3>> x;       // Hamiltonian trajectory
  std::vector<std::array<double, 3>> pi;      // conjugate momentum
  std::vector<std::array<double, 3>> actual;  // pi(t) - p_B(x(t), t)
  std::vector<std::array<double, 3>> linear;  // integrated linear system
  double max_mismatch = 0.0;
  double max_actual = 0.0;
};

// integrates the full Hamilton equations for (x, pi) alongside the linear
// system d(delta pi)/dt = -grad(p_B - A)^T delta pi
DeviationRun constraint_deviation_run(const EvolutionTrace& trace,
                                      const std::array<double, 3>& x0,
                                      const std::array<double, 3>& dpi0,
                                      int substeps = 1);

using ScalarFn = std::function<double(const double*)>;
using VectorFn = std::function<std::array<double, 3>(const double*)>;

struct PoissonCheckReport {
  double max_on_shell = 0.0;      // |{h - eps, pi_j - p_j}| at on-shell samples
  double max_formula_dev = 0.0;   // finite-difference vs analytic, off shell
  double max_involution = 0.0;    // |{pi_j - p_j, pi_k - p_k}|
  double max_self = 0.0;          // |{k, k}|
};

// Extended-phase-space bracket check at sampled points: the bracket of
// k = h - eps with the constraints pi_j - p_j(x,t), once from the analytic
// formula -J^T(pi - p) and once from central finite differences of k and the
// constraints in (x, pi, t, eps). Potentials enter analytically.
PoissonCheckReport poisson_constraint_check(const EvolutionTrace& trace,
                                            const ScalarFn& V, const VectorFn& A,
                                            int n_samples, std::uint64_t seed);

struct AlternativeGuidanceReport {
  double div_v_max = 0.0;            // spectral divergence of the added field
  double continuity_residual = 0.0;  // modified continuity equation residual
  double trajectory_separation = 0.0;
};

// guidance field p_B + calV / rho for a divergence-free calV: same continuity
// equation, different trajectories
AlternativeGuidanceReport alternative_guidance_check(
    const EvolutionTrace& trace, const std::vector<RealField>& calv,
    const std::array<double, 3>& x0, int substeps = 1);

// Kolmogorov-Smirnov distance between the empirical density of n_paths
// Born-sampled trajectories at the final trace time and |psi|^2 (1-d)
double equivariance_ks(const EvolutionTrace& trace, int n_paths,
                       std::uint64_t seed, int substeps = 1);

// max |d1 p_B2 - d2 p_B1| over the carrying support (2-d snapshot)
double curl_residual(const GridWaveFunction& psi, double support_rel = 1e-4);

}  // namespace qcx
