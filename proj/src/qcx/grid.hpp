#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qcx/simd/kernels.hpp"

namespace qcx {

using cplx = std::complex<double>;
constexpr double kPi = 3.14159265358979323846;

// Uniform periodic grid on [-L/2, L/2)^dim with n points per axis
// (n a power of two). Dimensionless units, hbar = m = 1.
struct UniformGrid {
  int dim = 1;
  int n = 0;
  double length = 0.0;

  UniformGrid() = default;
  UniformGrid(int dim_, int n_, double length_);

  double spacing() const { return length / n; }
  std::size_t size() const {
    std::size_t s = 1;
    for (int d = 0; d < dim; ++d) s *= static_cast<std::size_t>(n);
    return s;
  }
  double cell_volume() const {
    double v = 1.0;
    for (int d = 0; d < dim; ++d) v *= spacing();
    return v;
  }
  // measure of one dual-grid cell with the (2*pi)^-d convention
  double dual_cell_volume() const {
    double v = 1.0;
    for (int d = 0; d < dim; ++d) v *= 1.0 / length;
    return v;
  }

  double coord(int i) const { return -0.5 * length + i * spacing(); }
  // FFT-order index k in [0, n) -> signed integer index in [-n/2, n/2-1]
  int signed_index(int k) const { return k <= n / 2 - 1 ? k : k - n; }
  double momentum(int k) const { return 2.0 * kPi / length * signed_index(k); }

  std::array<int, 3> unflatten(std::size_t idx) const {
    std::array<int, 3> c{0, 0, 0};
    for (int d = dim - 1; d >= 0; --d) {
      c[d] = static_cast<int>(idx % n);
      idx /= n;
    }
    return c;
  }
  std::size_t flatten(const std::array<int, 3>& c) const {
    std::size_t idx = 0;
    for (int d = 0; d < dim; ++d)
      idx = idx * n + static_cast<std::size_t>((c[d] % n + n) % n);
    return idx;
  }

  bool operator==(const UniformGrid& o) const {
    return dim == o.dim && n == o.n && length == o.length;
  }
};

using RealField = std::vector<double>;
using MaskField = std::vector<std::uint8_t>;

// Complex amplitude field over a UniformGrid, row-major. node_mask marks
// points where |psi| < 1e-12 * max|psi|; conditional-expectation fields are
// forced to zero there.
struct GridWaveFunction {
  UniformGrid grid;
  std::vector<cplx> amp;
  MaskField node_mask;

  GridWaveFunction() = default;
  explicit GridWaveFunction(const UniformGrid& g)
      : grid(g), amp(g.size(), cplx(0.0, 0.0)), node_mask(g.size(), 1) {}

  std::size_t size() const { return amp.size(); }
  void refresh_mask();
};

constexpr double kNodeThresholdRel = 1e-12;

struct SpinorGridWaveFunction {
  GridWaveFunction plus;
  GridWaveFunction minus;
};

struct TwoLevelState {
  cplx plus{1.0, 0.0};
  cplx minus{0.0, 0.0};
  void normalize();
};

// --- elementary field algebra ------------------------------------------------

void check_same_grid(const UniformGrid& a, const UniformGrid& b);

// (f, g) = h^d * sum_j f_j conj(g_j)   (linear in the first argument)
cplx inner_product(const GridWaveFunction& f, const GridWaveFunction& g);
double norm_squared(const GridWaveFunction& f);
void normalize(GridWaveFunction& f);
double norm_squared(const SpinorGridWaveFunction& f);
void normalize(SpinorGridWaveFunction& f);

RealField density(const GridWaveFunction& f);

// --- transforms and derivatives ---------------------------------------------

enum class DerivMethod { spectral, central_difference };

// Samples of psi-hat(p) = integral psi(x) exp(-i p.x) dx on the dual grid
// (FFT frequency order along every axis).
GridWaveFunction fourier_transform(const GridWaveFunction& f);
GridWaveFunction inverse_fourier_transform(const GridWaveFunction& fhat);

GridWaveFunction gradient(const GridWaveFunction& f, int axis,
                          DerivMethod method = DerivMethod::spectral);
GridWaveFunction laplacian(const GridWaveFunction& f);

// Spectral derivative of a real field; result is real.
RealField real_gradient(const UniformGrid& g, const RealField& f, int axis);
RealField real_laplacian(const UniformGrid& g, const RealField& f);

// Exact evaluation of the periodic trigonometric interpolant of a real grid
// field at arbitrary points (dim <= 2; O(n^dim) per evaluation).
class FourierInterpolant {
 public:
  FourierInterpolant(const UniformGrid& g, const RealField& f);
  double operator()(const double* x) const;

 private:
  UniformGrid grid_;
  std::vector<cplx> coeff_;
};

// --- helpers ------------------------------------------------------------------

inline double real_integral(const UniformGrid& g, const RealField& f) {
  double s = 0.0;
  for (double v : f) s += v;
  return s * g.cell_volume();
}

}  // namespace qcx
