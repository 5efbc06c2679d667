#pragma once

#include "qcx/cond_expect.hpp"
#include "qcx/finite.hpp"

namespace qcx {

// conditional expectation onto the commutant of the algebra: sum Pi A Pi
Mat ce_commutant(const Mat& a, const SpectralDecomposition& d);

// conditional expectation onto the algebra itself: normalized block traces
struct AlgebraCE {
  std::vector<cplx> coeff;  // Tr(Pi A Pi) / rank
  Mat as_matrix;
};
AlgebraCE ce_algebra(const Mat& a, const SpectralDecomposition& d);

// E(Pi_psi)^{-1} as per-block scalar reciprocals; throws if some Pi psi = 0
Mat ce_projector_inverse(const SpectralDecomposition& d, const Vec& psi);

// || E_psi(A|B) - (1/2) E(A Pi_psi + Pi_psi A) E(Pi_psi)^{-1} ||_F
double bridge_identity_residual(const Mat& a, const SpectralDecomposition& d,
                             const Vec& psi);

// right side of the conditional-expectation evolution equation at state psi
Mat ce_dynamics_rhs(const Mat& h, const Mat& a, const SpectralDecomposition& d,
                    const Vec& psi);

// exact propagation (eigendecomposition of h); central-difference time
// derivative of E_psi(A|B) against the assembled right side, max over a few
// interior times
double ce_dynamics_residual(const Mat& h, const Mat& a,
                            const SpectralDecomposition& d, const Vec& psi0,
                            double dt, int steps);

// the simplified equation for A = H
Mat energy_ce_dynamics_rhs(const Mat& h, const SpectralDecomposition& d,
                           const Vec& psi);
double energy_ce_dynamics_residual(const Mat& h, const SpectralDecomposition& d,
                                   const Vec& psi0, double dt, int steps);

// E_psi(d/dt E_psi(A|B)) = (i[H, A - E_psi(A|B)] psi, psi) with the exact
// right-side assembly
double consistency_expectation_residual(const Mat& h, const Mat& a,
                                        const SpectralDecomposition& d,
                                        const Vec& psi);

// Im(A psi / psi) = -E_psi(i[A, Pi_psi] | X) realized with a rank-1 basis
// decomposition in finite dimensions
double weak_value_projection_residual(const Mat& a, const Vec& psi);

// --- property checks used by tests and the acceptance suite ----------------

// || E(B1 A B2) - B1 E(A) B2 ||_F for algebra elements B1, B2
double module_property_residual(const Mat& a, const SpectralDecomposition& d,
                                const std::vector<cplx>& b1,
                                const std::vector<cplx>& b2);

// operator-norm gap max(0, ||E_{B'}(A)|| - ||A||)
double tomiyama_norm_gap(const Mat& a, const SpectralDecomposition& d);

double trace_preservation_residual(const Mat& a, const SpectralDecomposition& d);

// min over blocks of Re c_nu for A = G* G (positive semidefinite)
double positivity_floor(const Mat& g_factor, const SpectralDecomposition& d);

}  // namespace qcx
