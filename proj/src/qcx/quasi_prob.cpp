#include "qcx/quasi_prob.hpp"

#include <cmath>

#include "qcx/fft.hpp"

namespace qcx {

namespace {
void require_1d(const GridWaveFunction& psi, const char* who) {
  if (psi.grid.dim != 1)
    throw std::invalid_argument(std::string(who) + ": 1-d states only");
}
}  // namespace

double PhaseSpaceDensity::total_mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * cell();
}

RealField PhaseSpaceDensity::marginal_position() const {
  const int n = grid.n;
  const double dp = 2.0 * kPi / grid.length;
  RealField m(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += values[std::size_t(i) * n + k];
    m[i] = s * dp;
  }
  return m;
}

RealField PhaseSpaceDensity::marginal_momentum() const {
  const int n = grid.n;
  RealField m(n, 0.0);
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += values[std::size_t(i) * n + k];
    m[k] = s * grid.spacing();
  }
  return m;
}

PhaseSpaceDensity quasi_density_f(const GridWaveFunction& psi) {
  require_1d(psi, "quasi_density_f");
  const int n = psi.grid.n;
  GridWaveFunction psihat = fourier_transform(psi);
  PhaseSpaceDensity d{PhaseSpaceDensity::Kind::f_psi, psi.grid,
                      std::vector<double>(std::size_t(n) * n, 0.0)};
  const double pref = 1.0 / (2.0 * kPi);
  for (int i = 0; i < n; ++i) {
    const double x = psi.grid.coord(i);
    const cplx cpsi = std::conj(psi.amp[i]);
    for (int k = 0; k < n; ++k) {
      const double p = psi.grid.momentum(k);
      const cplx phase(std::cos(x * p), std::sin(x * p));
      d.values[std::size_t(i) * n + k] =
          pref * (psihat.amp[k] * cpsi * phase).real();
    }
  }
  return d;
}

PhaseSpaceDensity wigner(const GridWaveFunction& psi) {
  require_1d(psi, "wigner");
  const int n = psi.grid.n;
  const double h = psi.grid.spacing();

  // Fourier interpolation onto the half-step grid (2n points)
  std::vector<cplx> spec(psi.amp);
  fft::forward(1, n, spec);
  std::vector<cplx> wide(std::size_t(2) * n, cplx(0.0, 0.0));
  for (int k = 0; k < n; ++k) {
    const int ks = psi.grid.signed_index(k);
    if (ks == -n / 2) {
      // split the Nyquist coefficient symmetrically
      wide[std::size_t((2 * n - n / 2))] = 0.5 * spec[k];
      wide[std::size_t(n / 2)] = 0.5 * spec[k];
    } else {
      wide[std::size_t((ks + 2 * n) % (2 * n))] = spec[k];
    }
  }
  fft::backward(1, 2 * n, wide);
  for (cplx& z : wide) z /= static_cast<double>(n);
  // wide[m] ~ psi(-L/2 + m h/2)

  PhaseSpaceDensity d{PhaseSpaceDensity::Kind::wigner, psi.grid,
                      std::vector<double>(std::size_t(n) * n, 0.0)};
  std::vector<cplx> row(n);
  const double pref = h / (2.0 * kPi);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int js = psi.grid.signed_index(j);
      const int a = ((2 * i - js) % (2 * n) + 2 * n) % (2 * n);
      const int b = ((2 * i + js) % (2 * n) + 2 * n) % (2 * n);
      row[j] = wide[a] * std::conj(wide[b]);
    }
    fft::backward(1, n, row);  // sum_j C e^{+2 pi i jk/n}
    for (int k = 0; k < n; ++k)
      d.values[std::size_t(i) * n + k] = pref * row[k].real();
  }
  return d;
}

double joint_quasi_probability(double x_lo, double x_hi, double p_lo,
                               double p_hi, const GridWaveFunction& psi) {
  require_1d(psi, "joint_quasi_probability");
  GridWaveFunction px = position_indicator_op({x_lo}, {x_hi})(psi);
  GridWaveFunction pp = momentum_indicator_op({p_lo}, {p_hi})(psi);
  return inner_product(pp, px).real();
}

double box_integral(const PhaseSpaceDensity& d, double x_lo, double x_hi,
                    double p_lo, double p_hi) {
  const int n = d.grid.n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = d.grid.coord(i);
    if (x < x_lo || x >= x_hi) continue;
    for (int k = 0; k < n; ++k) {
      const double p = d.grid.momentum(k);
      if (p < p_lo || p >= p_hi) continue;
      s += d.values[std::size_t(i) * n + k];
    }
  }
  return s * d.cell();
}

RealField moyal_conditional_moment(const GridWaveFunction& psi, int alpha) {
  require_1d(psi, "moyal_conditional_moment");
  if (alpha < 1 || alpha > 2)
    throw std::invalid_argument("moyal_conditional_moment: |alpha| must be 1 or 2");
  GridWaveFunction d1 = gradient(psi, 0, DerivMethod::spectral);
  RealField out(psi.size(), 0.0);
  if (alpha == 1) {
    simd::active().imag_quotient(psi.amp.data(), d1.amp.data(),
                                 psi.node_mask.data(), out.data(), psi.size());
    return out;
  }
  GridWaveFunction d2 = gradient(d1, 0, DerivMethod::spectral);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (psi.node_mask[i]) continue;
    const double rho = std::norm(psi.amp[i]);
    out[i] = -0.5 * (std::conj(psi.amp[i]) * d2.amp[i]).real() / rho +
             0.5 * std::norm(d1.amp[i]) / rho;
  }
  return out;
}

double moyal_vs_condexp_identity(const GridWaveFunction& psi, double support_rel) {
  require_1d(psi, "moyal_vs_condexp_identity");
  RealField w2 = moyal_conditional_moment(psi, 2);

  GridWaveFunction d2 = gradient(gradient(psi, 0), 0);
  RealField e_p2(psi.size());
  GridWaveFunction md2 = d2;
  simd::active().scale_real(-1.0, md2.amp.data(), md2.size());
  simd::active().real_quotient(psi.amp.data(), md2.amp.data(),
                               psi.node_mask.data(), e_p2.data(), psi.size());

  // p_O = R'/R and div p_O = R''/R - (R'/R)^2 from the smooth field R = |psi|
  RealField r(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) r[i] = std::abs(psi.amp[i]);
  RealField r1 = real_gradient(psi.grid, r, 0);
  RealField r2 = real_gradient(psi.grid, r1, 0);

  double max_amp = 0.0;
  for (const cplx& z : psi.amp) max_amp = std::max(max_amp, std::abs(z));
  const double floor = support_rel * max_amp;

  double worst = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (psi.node_mask[i] || std::abs(psi.amp[i]) < floor) continue;
    const double po = r1[i] / r[i];
    const double div_po = r2[i] / r[i] - po * po;
    const double resid = w2[i] - e_p2[i] - po * po - 0.5 * div_po;
    worst = std::max(worst, std::abs(resid));
  }
  return worst;
}

}  // namespace qcx
