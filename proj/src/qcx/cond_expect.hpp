#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "qcx/finite.hpp"
#include "qcx/grid.hpp"
#include "qcx/operators.hpp"

namespace qcx {

// Derived real fields of one wavefunction snapshot.
struct BohmFields {
  UniformGrid grid;
  std::vector<RealField> p_B;     // Bohm momentum, per axis
  std::vector<RealField> p_O;     // osmotic momentum, per axis
  std::vector<RealField> j_flux;  // probability current, per axis
  RealField q_pot;                // quantum potential
  RealField density;              // |psi|^2
  RealField cond_var_P;           // E(P^2|X) - E(P|X)^2, computed directly
  std::array<std::array<double, 3>, 3> fisher{};  // dim x dim block used
  MaskField mask;
};

struct WeakValueField {
  UniformGrid grid;
  std::vector<cplx> values;  // A(psi)/psi, zero on masked points
  MaskField mask;
};

struct FisherReport {
  double expected_q = 0.0;       // E_psi(Q)
  double trace_fisher = 0.0;     // Tr I_F
  double q_residual = 0.0;       // |E(Q) - Tr I_F / 8|
  double cov_residual = 0.0;     // max_jk |E(cov(P_j,P_k|X)) - I_F,jk / 4|
  std::array<std::array<double, 3>, 3> fisher{};
};

// E_psi(A|X) as a function on the grid: Re(conj(psi) A psi)/|psi|^2, masked.
RealField cond_exp_position(const OpApply& apply_a, const GridWaveFunction& psi);

// ||A psi||^2 - E_psi(E_psi(A|X)^2); masked points contribute |A psi|^2.
double prediction_error(const OpApply& apply_a, const GridWaveFunction& psi);

WeakValueField weak_value(const OpApply& apply_a, const GridWaveFunction& psi);

BohmFields bohm_fields(const GridWaveFunction& psi);

// max over unmasked points of |cond_var_P - 2 q_pot|. Points with
// |psi| < support_rel * max|psi| are excluded: both sides are quotients whose
// floating-point noise scales like 1/|psi|, so the identity is only
// numerically meaningful on the carrying support.
double conditional_variance_identity_check(const GridWaveFunction& psi,
                                           double support_rel = 1e-6);

FisherReport fisher_checks(const GridWaveFunction& psi);

// --- spinor / mixed / complex-linear variants ---------------------------------

using SpinorOpApply =
    std::function<SpinorGridWaveFunction(const SpinorGridWaveFunction&)>;

SpinorOpApply spinor_componentwise(OpApply a);  // A tensor identity

enum class SpinorConditioning { x_only, x_and_sigma3 };

struct SpinorCondExp {
  RealField x_only;                    // filled for x_only
  std::array<RealField, 2> channels;   // filled for x_and_sigma3 (+,-)
  std::array<MaskField, 2> masks;
  MaskField mask_x_only;
};

SpinorCondExp cond_exp_spinor(const SpinorOpApply& apply_a,
                              const SpinorGridWaveFunction& psi,
                              SpinorConditioning conditioning);

RealField cond_exp_mixed(const OpApply& apply_a,
                         const std::vector<double>& weights,
                         const std::vector<GridWaveFunction>& states);

// C-linear extension ((A psi) conj(psi) + psi conj(A* psi)) / (2 |psi|^2)
WeakValueField complex_linear_ce(const OpApply& apply_a,
                                 const OpApply& apply_a_adjoint,
                                 const GridWaveFunction& psi);

// --- discrete / momentum / radial conditioning --------------------------------

struct DiscreteCondExp {
  std::vector<double> coeff;        // c_nu, zero where invalid
  std::vector<bool> valid;          // Pi_nu psi != 0
  Mat as_matrix;                    // sum c_nu Pi_nu
};

DiscreteCondExp cond_exp_discrete(const Mat& a, const SpectralDecomposition& d,
                                  const Vec& psi);
double prediction_error_discrete(const Mat& a, const SpectralDecomposition& d,
                                 const Vec& psi);

// E_psi(X_j|P) on the dual grid: -Im(conj(psi-hat) grad_p psi-hat)/|psi-hat|^2
struct EpsteinPosition {
  UniformGrid grid;                  // dual grid, FFT order
  std::vector<RealField> values;     // per axis
  MaskField mask;
};
EpsteinPosition epstein_position(const GridWaveFunction& psi);

// E_psi(A | -Laplacian), binned by the dual-grid |p|^2 (d = 1 or 2)
struct RadialCondExp {
  std::vector<double> lambda;   // bin label |p|^2
  std::vector<double> value;
  std::vector<bool> valid;
};
RadialCondExp cond_exp_radial(const OpApply& apply_a, const GridWaveFunction& psi);

// || E_{U psi}(U A U* | U B U*) - U E_psi(A|B) U* || (Frobenius)
double unitary_covariance_check(const Mat& a, const SpectralDecomposition& d,
                                const Mat& u, const Vec& psi);

// --- brute-force minimizer oracle ---------------------------------------------

// Independent oracle for the least-squares definition: scans f per grid cell
// (or per projection) with golden-section refinement of ||(A - f) psi||^2.
struct OracleResult {
  std::vector<double> argmin;   // per cell / per projection, 0 where masked
  double minimum = 0.0;         // attained objective
};
OracleResult brute_force_minimizer_grid(const OpApply& apply_a,
                                        const GridWaveFunction& psi);
OracleResult brute_force_minimizer_discrete(const Mat& a,
                                            const SpectralDecomposition& d,
                                            const Vec& psi);

// direct objective ||(A - f(X)) psi||^2 for an arbitrary real field f
double objective_grid(const OpApply& apply_a, const GridWaveFunction& psi,
                      const RealField& f);
double objective_discrete(const Mat& a, const SpectralDecomposition& d,
                          const Vec& psi, const std::vector<double>& coeff);

double golden_section_min(const std::function<double(double)>& f, double lo,
                          double hi, double tol);

}  // namespace qcx
