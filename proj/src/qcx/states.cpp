#include "qcx/states.hpp"

#include <cmath>

namespace qcx {

GridWaveFunction gaussian_state(const UniformGrid& g,
                                const std::array<double, 3>& center,
                                double sigma, const std::array<double, 3>& k) {
  GridWaveFunction f(g);
  const double inv4s2 = 1.0 / (4.0 * sigma * sigma);
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto c = g.unflatten(i);
    double q = 0.0, phase = 0.0;
    for (int d = 0; d < g.dim; ++d) {
      const double x = g.coord(c[d]);
      q += (x - center[d]) * (x - center[d]);
      phase += k[d] * x;
    }
    f.amp[i] = std::exp(-q * inv4s2) * cplx(std::cos(phase), std::sin(phase));
  }
  normalize(f);
  return f;
}

GridWaveFunction gaussian_state_2d(const UniformGrid& g, double sigma1,
                                   double sigma2, double angle) {
  if (g.dim != 2) throw std::invalid_argument("gaussian_state_2d: dim != 2");
  GridWaveFunction f(g);
  const double c = std::cos(angle), s = std::sin(angle);
  const double a1 = 1.0 / (sigma1 * sigma1), a2 = 1.0 / (sigma2 * sigma2);
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto cc = g.unflatten(i);
    const double x = g.coord(cc[0]), y = g.coord(cc[1]);
    const double u = c * x + s * y, v = -s * x + c * y;
    f.amp[i] = std::exp(-0.25 * (a1 * u * u + a2 * v * v));
  }
  normalize(f);
  return f;
}

GridWaveFunction plane_wave_state(const UniformGrid& g,
                                  const std::array<int, 3>& k_int) {
  GridWaveFunction f(g);
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto c = g.unflatten(i);
    double phase = 0.0;
    for (int d = 0; d < g.dim; ++d)
      phase += 2.0 * kPi * k_int[d] / g.length * g.coord(c[d]);
    f.amp[i] = cplx(std::cos(phase), std::sin(phase));
  }
  normalize(f);
  return f;
}

GridWaveFunction oscillator_eigenstate(const UniformGrid& g, int level) {
  if (g.dim != 1) throw std::invalid_argument("oscillator_eigenstate: dim != 1");
  if (level < 0 || level > 1)
    throw std::invalid_argument("oscillator_eigenstate: level must be 0 or 1");
  GridWaveFunction f(g);
  for (int i = 0; i < g.n; ++i) {
    const double x = g.coord(i);
    double v = std::exp(-0.5 * x * x);
    if (level == 1) v *= x;
    f.amp[i] = v;
  }
  normalize(f);
  return f;
}

GridWaveFunction coherent_state(const UniformGrid& g, double x0) {
  if (g.dim != 1) throw std::invalid_argument("coherent_state: dim != 1");
  GridWaveFunction f(g);
  for (int i = 0; i < g.n; ++i) {
    const double x = g.coord(i);
    f.amp[i] = std::exp(-0.5 * (x - x0) * (x - x0));
  }
  normalize(f);
  return f;
}

GridWaveFunction random_bandlimited_state(const UniformGrid& g,
                                          std::uint64_t seed, int band_limit) {
  Rng rng(seed);
  // band-limited complex exponent g(x); state exp(g) never vanishes
  GridWaveFunction expo(g);
  for (std::size_t i = 0; i < expo.size(); ++i) {
    auto c = g.unflatten(i);
    bool in_band = true;
    for (int d = 0; d < g.dim; ++d)
      if (std::abs(g.signed_index(c[d])) > band_limit) in_band = false;
    expo.amp[i] = in_band ? rng.cnormal() : cplx(0.0, 0.0);
  }
  GridWaveFunction gx = inverse_fourier_transform(expo);
  double mx = 0.0;
  for (const cplx& z : gx.amp) mx = std::max(mx, std::abs(z));
  const double scale = mx > 0.0 ? 1.5 / mx : 0.0;
  GridWaveFunction f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f.amp[i] = std::exp(scale * gx.amp[i]);
  normalize(f);
  return f;
}

SpinorGridWaveFunction spinor_product_state(const GridWaveFunction& spatial,
                                            const TwoLevelState& chi) {
  SpinorGridWaveFunction s{spatial, spatial};
  for (std::size_t i = 0; i < spatial.size(); ++i) {
    s.plus.amp[i] = chi.plus * spatial.amp[i];
    s.minus.amp[i] = chi.minus * spatial.amp[i];
  }
  normalize(s);
  return s;
}

SpinorGridWaveFunction spinor_two_packet_state(
    const UniformGrid& g, double w_plus, const std::array<double, 3>& c_plus,
    double sigma_plus, const std::array<double, 3>& k_plus, double w_minus,
    const std::array<double, 3>& c_minus, double sigma_minus,
    const std::array<double, 3>& k_minus) {
  SpinorGridWaveFunction s{gaussian_state(g, c_plus, sigma_plus, k_plus),
                           gaussian_state(g, c_minus, sigma_minus, k_minus)};
  simd::active().scale_real(w_plus, s.plus.amp.data(), s.plus.size());
  simd::active().scale_real(w_minus, s.minus.amp.data(), s.minus.size());
  normalize(s);
  return s;
}

}  // namespace qcx
