#pragma once

#include <array>

#include "qcx/grid.hpp"
#include "qcx/rng.hpp"

namespace qcx {

// psi(x) ~ exp(-|x - c|^2 / (4 sigma^2) + i k.x); position variance sigma^2
// per axis after normalization.
GridWaveFunction gaussian_state(const UniformGrid& g,
                                const std::array<double, 3>& center,
                                double sigma, const std::array<double, 3>& k);

// anisotropic, optionally rotated 2-d Gaussian: psi ~ exp(-x^T Sinv x / 4)
// with Sinv the inverse covariance of the resulting |psi|^2
GridWaveFunction gaussian_state_2d(const UniformGrid& g, double sigma1,
                                   double sigma2, double angle);

// e^{i k x} / sqrt(L^d) with k on the dual grid (k_int integer per axis)
GridWaveFunction plane_wave_state(const UniformGrid& g,
                                  const std::array<int, 3>& k_int);

// harmonic oscillator eigenstate of V = x^2/2 (1-d; level 0 or 1)
GridWaveFunction oscillator_eigenstate(const UniformGrid& g, int level);

// ground-state profile displaced to x0: pi^{-1/4} exp(-(x-x0)^2/2) (1-d)
GridWaveFunction coherent_state(const UniformGrid& g, double x0);

// nowhere-vanishing band-limited state exp(g(x)) with random band-limited g
GridWaveFunction random_bandlimited_state(const UniformGrid& g, std::uint64_t seed,
                                          int band_limit);

SpinorGridWaveFunction spinor_product_state(const GridWaveFunction& spatial,
                                            const TwoLevelState& chi);
// independent packets per component, weights (w_plus, w_minus)
SpinorGridWaveFunction spinor_two_packet_state(
    const UniformGrid& g, double w_plus, const std::array<double, 3>& c_plus,
    double sigma_plus, const std::array<double, 3>& k_plus, double w_minus,
    const std::array<double, 3>& c_minus, double sigma_minus,
    const std::array<double, 3>& k_minus);

}  // namespace qcx
