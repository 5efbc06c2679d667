#pragma once

#include "qcx/cond_expect.hpp"
#include "qcx/grid.hpp"
#include "qcx/operators.hpp"

namespace qcx {

// Phase-space quasi-probability density on (position grid) x (momentum dual
// grid), 1-d states. values[x * n + k] with k in FFT order; may be negative.
struct PhaseSpaceDensity {
  enum class Kind { f_psi, wigner };
  Kind kind;
  UniformGrid grid;             // the position grid; dual grid implied
  std::vector<double> values;   // n x n, row = position index
  double cell() const { return grid.spacing() * (2.0 * kPi / grid.length); }

  double total_mass() const;
  RealField marginal_position() const;  // integral over p
  RealField marginal_momentum() const;  // integral over x, FFT order
};

// F(x, p) = (2 pi)^-1 Re( psi-hat(p) conj(psi(x)) e^{i x p} )
PhaseSpaceDensity quasi_density_f(const GridWaveFunction& psi);

// W(x, p) = (2 pi)^-1 integral psi(x - y/2) conj(psi(x + y/2)) e^{i y p} dy
// with Fourier-interpolated half shifts on the periodic grid
PhaseSpaceDensity wigner(const GridWaveFunction& psi);

// E_psi({1_I(X), 1_J(P)}) via two operator applications (Jordan product)
double joint_quasi_probability(double x_lo, double x_hi, double p_lo,
                               double p_hi, const GridWaveFunction& psi);
// the same set function integrated from a density
double box_integral(const PhaseSpaceDensity& d, double x_lo, double x_hi,
                    double p_lo, double p_hi);

// space-conditional moment of P^alpha under the Wigner distribution,
// |alpha| <= 2 (1-d): alpha = 1 gives p_B, alpha = 2 the second moment
RealField moyal_conditional_moment(const GridWaveFunction& psi, int alpha);

// max over carrying support of
// | E^W(P^2|X) - E_psi(P^2|X) - p_O^2 - (1/2) div p_O |
double moyal_vs_condexp_identity(const GridWaveFunction& psi,
                                 double support_rel = 1e-6);

}  // namespace qcx
