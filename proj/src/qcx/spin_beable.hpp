#pragma once

#include <array>

#include "qcx/evolution.hpp"
#include "qcx/grid.hpp"

namespace qcx {

// Conditional expectations of the spin components given S3 for a two-level
// state: two 3-vectors S_+ = (s1+, s2+, +1/2), S_- = (s1-, s2-, -1/2) with
// occupation probabilities rho_+-.
struct ConditionalSpinState {
  std::array<double, 3> s_plus{0, 0, 0.5};
  std::array<double, 3> s_minus{0, 0, -0.5};
  double rho_plus = 1.0;
  double rho_minus = 0.0;
  bool plus_valid = true;   // psi_+ != 0, so S_+' is finite
  bool minus_valid = true;  // psi_- != 0

  // max violation of: the +/- relation, 4||S||^2 = 1/rho, S+.S- = 0,
  // (S+ x S-)_3 = 0, rho_+ + rho_- = 1
  double constraint_residual() const;
};

ConditionalSpinState conditional_spin(const TwoLevelState& psi);
// canonical representative with arg(psi_+) = 0
TwoLevelState reconstruct_state(const ConditionalSpinState& s);

// right side of the conditional-spin system for one chart (sign = +1 or -1):
// ds_j/dt = -sign 2 (B x S)_3 s_j + (B x S)_j + sign (e3 x B)_j ||S||^2
std::array<double, 3> spin_ode_rhs(int sign, const std::array<double, 3>& s,
                                   const std::array<double, 3>& b);

struct SpinOdeTrace {
  std::vector<double> times;
  std::vector<ConditionalSpinState> states;
  int chart_switches = 0;
};

// RK4 on the active chart, switching charts when ||S'_active|| > 10
SpinOdeTrace integrate_spin_ode(const ConditionalSpinState& s0,
                                const BFieldOfTime& b, double dt, int steps,
                                int stride = 1);

struct RiccatiTrace {
  std::vector<double> times;
  std::vector<cplx> value;    // z = psi_-/psi_+ or w = 1/z
  std::vector<int> chart;     // 0: z, 1: w
  int chart_switches = 0;
};

RiccatiTrace riccati_evolve(cplx z0, int chart0, const BFieldOfTime& b, double dt,
                            int steps, int stride = 1);

// time-dependent two-state generating matrix built from the Schroedinger flux
struct JumpGenerator {
  double flux = 0.0;            // J_{+-}
  double a = 0.0;               // free parameter, a >= |J_{+-}|
  double q_plus_minus = 0.0;    // rate of the - -> + transition
  double q_minus_plus = 0.0;    // rate of the + -> - transition
  // column-sum-zero matrix [[-q_-+, q_+-], [q_-+, -q_+-]]
};

struct APolicy {
  enum class Kind { bell_minimal, fixed, offset };
  Kind kind = Kind::bell_minimal;
  double value = 0.0;  // fixed: a itself; offset: a = |J| + value
};

JumpGenerator jump_generator(const TwoLevelState& psi,
                             const std::array<double, 3>& b, const APolicy& pol);

// |J_{+-} - (-q_-+ rho_+ + q_+- rho_-)|: the Kolmogorov consistency identity
double kolmogorov_residual(const TwoLevelState& psi, const JumpGenerator& gen);

struct JumpPathStats {
  std::vector<double> times;
  std::vector<double> occupation;  // empirical P(X_t = +)
  std::vector<double> expected;    // rho_+(t)
  double max_abs_err = 0.0;
  double mean_jumps = 0.0;
  bool rate_capped = false;
};

JumpPathStats simulate_jump_paths(const TwoLevelTrace& trace, const APolicy& pol,
                                  int n_paths, std::uint64_t seed,
                                  int n_out = 25);

struct BohmBellReport {
  double max_residual = 0.0;    // matrix equation residual
  double f_dual_residual = 0.0; // two assemblies of the F(a) matrix
};

// residual of dS/dt + Q(a) S = S B + F(a) S + S S^T B' along an exact trace
BohmBellReport bohm_bell_residual(const TwoLevelTrace& trace,
                                  const BFieldOfTime& b, const APolicy& pol);

struct SdeDriftReport {
  double max_sigma_dev = 0.0;   // worst |MC - drift| / stderr
  double max_abs_dev = 0.0;
  bool rate_capped = false;
};

// Monte Carlo conditional increments of Sigma_t = S_{X_t}(t) against the
// drift B x Sigma + X_t ||Sigma||^2 (e3 x B) + Phi, Phi_j = sum_nu s_j,nu
// F_nu,X_t
SdeDriftReport sde_drift_check(const TwoLevelTrace& trace, const BFieldOfTime& b,
                               const APolicy& pol, int n_paths,
                               std::uint64_t seed, int n_samples = 6,
                               int increment_steps = 10);

}  // namespace qcx
