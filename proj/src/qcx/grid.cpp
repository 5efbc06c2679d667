#include "qcx/grid.hpp"

#include <algorithm>
#include <cmath>

#include "qcx/fft.hpp"

namespace qcx {

UniformGrid::UniformGrid(int dim_, int n_, double length_)
    : dim(dim_), n(n_), length(length_) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("grid: dim must be 1..3");
  if (n < 2 || (n & (n - 1)) != 0)
    throw std::invalid_argument("grid: points per axis must be a power of two");
  if (!(length > 0.0)) throw std::invalid_argument("grid: length must be positive");
}

void GridWaveFunction::refresh_mask() {
  node_mask.assign(amp.size(), 0);
  double max2 = 0.0;
  for (const cplx& z : amp) max2 = std::max(max2, std::norm(z));
  const double thr2 = kNodeThresholdRel * kNodeThresholdRel * max2;
  for (std::size_t i = 0; i < amp.size(); ++i)
    node_mask[i] = std::norm(amp[i]) <= thr2 ? 1 : 0;
}

void TwoLevelState::normalize() {
  const double nrm = std::sqrt(std::norm(plus) + std::norm(minus));
  if (nrm == 0.0) throw std::runtime_error("cannot normalize zero state");
  plus /= nrm;
  minus /= nrm;
}

void check_same_grid(const UniformGrid& a, const UniformGrid& b) {
  if (!(a == b)) throw std::invalid_argument("grid mismatch");
}

cplx inner_product(const GridWaveFunction& f, const GridWaveFunction& g) {
  check_same_grid(f.grid, g.grid);
  return f.grid.cell_volume() *
         simd::active().cdot(f.amp.data(), g.amp.data(), f.size());
}

double norm_squared(const GridWaveFunction& f) {
  return f.grid.cell_volume() * simd::active().sum_abs2(f.amp.data(), f.size());
}

void normalize(GridWaveFunction& f) {
  const double n2 = norm_squared(f);
  if (n2 == 0.0) throw std::runtime_error("cannot normalize zero state");
  simd::active().scale_real(1.0 / std::sqrt(n2), f.amp.data(), f.size());
  f.refresh_mask();
}

double norm_squared(const SpinorGridWaveFunction& f) {
  check_same_grid(f.plus.grid, f.minus.grid);
  return norm_squared(f.plus) + norm_squared(f.minus);
}

void normalize(SpinorGridWaveFunction& f) {
  const double n2 = norm_squared(f);
  if (n2 == 0.0) throw std::runtime_error("cannot normalize zero state");
  const double s = 1.0 / std::sqrt(n2);
  simd::active().scale_real(s, f.plus.amp.data(), f.plus.size());
  simd::active().scale_real(s, f.minus.amp.data(), f.minus.size());
  f.plus.refresh_mask();
  f.minus.refresh_mask();
}

RealField density(const GridWaveFunction& f) {
  RealField rho(f.size());
  simd::active().abs2(f.amp.data(), rho.data(), f.size());
  return rho;
}

namespace {

// parity of the sum of FFT-order indices of flat index `idx`
inline int index_parity(const UniformGrid& g, std::size_t idx) {
  int s = 0;
  for (int d = 0; d < g.dim; ++d) {
    s += static_cast<int>(idx % g.n);
    idx /= g.n;
  }
  return s & 1;
}

void apply_alternating_sign(const UniformGrid& g, std::vector<cplx>& v) {
  // (-1)^(k1+...+kd); innermost axis alternates fastest
  const std::size_t n = static_cast<std::size_t>(g.n);
  const std::size_t total = v.size();
  for (std::size_t base = 0; base < total; base += n) {
    int p = index_parity(g, base);
    for (std::size_t j = 0; j < n; ++j)
      if ((static_cast<int>(j) + p) & 1) v[base + j] = -v[base + j];
  }
}

}  // namespace

GridWaveFunction fourier_transform(const GridWaveFunction& f) {
  GridWaveFunction out = f;
  fft::forward(f.grid.dim, f.grid.n, out.amp);
  apply_alternating_sign(f.grid, out.amp);
  simd::active().scale_real(f.grid.cell_volume(), out.amp.data(), out.size());
  out.refresh_mask();
  return out;
}

GridWaveFunction inverse_fourier_transform(const GridWaveFunction& fhat) {
  GridWaveFunction out = fhat;
  apply_alternating_sign(fhat.grid, out.amp);
  fft::backward(fhat.grid.dim, fhat.grid.n, out.amp);
  double s = 1.0;
  for (int d = 0; d < fhat.grid.dim; ++d) s /= fhat.grid.length;
  simd::active().scale_real(s, out.amp.data(), out.size());
  out.refresh_mask();
  return out;
}

namespace {

// multiply DFT coefficients by a per-axis-frequency function of one axis
template <class Fn>
void spectral_multiply_axis(const UniformGrid& g, std::vector<cplx>& v, int axis,
                            Fn&& factor) {
  const std::size_t total = v.size();
  std::size_t stride = 1;
  for (int d = g.dim - 1; d > axis; --d) stride *= g.n;
  for (std::size_t idx = 0; idx < total; ++idx) {
    const int k = static_cast<int>((idx / stride) % g.n);
    v[idx] *= factor(k);
  }
}

}  // namespace

GridWaveFunction gradient(const GridWaveFunction& f, int axis, DerivMethod method) {
  if (axis < 0 || axis >= f.grid.dim)
    throw std::invalid_argument("gradient: axis out of range");
  GridWaveFunction out = f;
  if (method == DerivMethod::spectral) {
    fft::forward(f.grid.dim, f.grid.n, out.amp);
    spectral_multiply_axis(f.grid, out.amp, axis, [&](int k) {
      return cplx(0.0, f.grid.momentum(k));
    });
    fft::backward(f.grid.dim, f.grid.n, out.amp);
    simd::active().scale_real(1.0 / static_cast<double>(f.grid.size()),
                              out.amp.data(), out.size());
  } else {
    const double inv2h = 1.0 / (2.0 * f.grid.spacing());
    const std::size_t total = f.size();
    std::size_t stride = 1;
    for (int d = f.grid.dim - 1; d > axis; --d) stride *= f.grid.n;
    const std::size_t span = stride * f.grid.n;
    for (std::size_t idx = 0; idx < total; ++idx) {
      const std::size_t block = idx - idx % span;
      const std::size_t up = block + (idx - block + stride) % span;
      const std::size_t dn = block + (idx - block + span - stride) % span;
      out.amp[idx] = (f.amp[up] - f.amp[dn]) * inv2h;
    }
  }
  out.refresh_mask();
  return out;
}

GridWaveFunction laplacian(const GridWaveFunction& f) {
  GridWaveFunction out = f;
  fft::forward(f.grid.dim, f.grid.n, out.amp);
  const std::size_t total = out.size();
  for (std::size_t idx = 0; idx < total; ++idx) {
    auto c = f.grid.unflatten(idx);
    double p2 = 0.0;
    for (int d = 0; d < f.grid.dim; ++d) {
      const double p = f.grid.momentum(c[d]);
      p2 += p * p;
    }
    out.amp[idx] *= -p2;
  }
  fft::backward(f.grid.dim, f.grid.n, out.amp);
  simd::active().scale_real(1.0 / static_cast<double>(f.grid.size()),
                            out.amp.data(), out.size());
  out.refresh_mask();
  return out;
}

RealField real_gradient(const UniformGrid& g, const RealField& f, int axis) {
  GridWaveFunction tmp(g);
  for (std::size_t i = 0; i < f.size(); ++i) tmp.amp[i] = cplx(f[i], 0.0);
  GridWaveFunction df = gradient(tmp, axis, DerivMethod::spectral);
  RealField out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = df.amp[i].real();
  return out;
}

RealField real_laplacian(const UniformGrid& g, const RealField& f) {
  GridWaveFunction tmp(g);
  for (std::size_t i = 0; i < f.size(); ++i) tmp.amp[i] = cplx(f[i], 0.0);
  GridWaveFunction df = laplacian(tmp);
  RealField out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = df.amp[i].real();
  return out;
}

FourierInterpolant::FourierInterpolant(const UniformGrid& g, const RealField& f)
    : grid_(g), coeff_(g.size()) {
  if (g.dim > 2)
    throw std::invalid_argument("FourierInterpolant supports dim <= 2");
  for (std::size_t i = 0; i < f.size(); ++i) coeff_[i] = cplx(f[i], 0.0);
  fft::forward(g.dim, g.n, coeff_);
  const double s = 1.0 / static_cast<double>(g.size());
  for (cplx& c : coeff_) c *= s;
}

double FourierInterpolant::operator()(const double* x) const {
  const int n = grid_.n;
  // phase tables per axis: e^{i p_k (x_d + L/2)}
  std::array<std::vector<cplx>, 2> ph;
  for (int d = 0; d < grid_.dim; ++d) {
    ph[d].resize(n);
    const double u = x[d] + 0.5 * grid_.length;
    for (int k = 0; k < n; ++k) {
      const double a = grid_.momentum(k) * u;
      ph[d][k] = cplx(std::cos(a), std::sin(a));
    }
  }
  cplx acc(0.0, 0.0);
  if (grid_.dim == 1) {
    for (int k = 0; k < n; ++k) acc += coeff_[k] * ph[0][k];
  } else {
    for (int k1 = 0; k1 < n; ++k1) {
      cplx row(0.0, 0.0);
      const cplx* c = coeff_.data() + static_cast<std::size_t>(k1) * n;
      for (int k2 = 0; k2 < n; ++k2) row += c[k2] * ph[1][k2];
      acc += row * ph[0][k1];
    }
  }
  return acc.real();
}

}  // namespace qcx
