#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qcx/grid.hpp"
#include "qcx/operators.hpp"
#include "qcx/states.hpp"

using namespace qcx;

TEST_CASE("grid invariants") {
  UniformGrid g(1, 64, 10.0);
  CHECK(g.spacing() == doctest::Approx(10.0 / 64));
  CHECK(g.size() == 64);
  CHECK_THROWS(UniformGrid(1, 63, 10.0));
  CHECK_THROWS(UniformGrid(4, 64, 10.0));
  CHECK_THROWS(UniformGrid(1, 64, -1.0));
  UniformGrid g2(2, 8, 4.0);
  CHECK(g2.size() == 64);
  auto c = g2.unflatten(9);
  CHECK(c[0] == 1);
  CHECK(c[1] == 1);
  CHECK(g2.flatten(c) == 9);
}

TEST_CASE("normalization and node mask") {
  UniformGrid g(1, 256, 20.0);
  GridWaveFunction f = gaussian_state(g, {0, 0, 0}, 0.5, {0, 0, 0});
  CHECK(norm_squared(f) == doctest::Approx(1.0).epsilon(1e-12));
  // far tail of the Gaussian is below the node threshold
  CHECK(f.node_mask[0] == 1);
  CHECK(f.node_mask[128] == 0);
}

TEST_CASE("spectral gradient: Fourier mode is exact") {
  UniformGrid g(1, 128, 10.0);
  const double k = 2.0 * kPi * 3.0 / g.length;
  GridWaveFunction f(g);
  for (int i = 0; i < g.n; ++i) {
    const double x = g.coord(i);
    f.amp[i] = cplx(std::cos(k * x), std::sin(k * x));
  }
  GridWaveFunction df = gradient(f, 0, DerivMethod::spectral);
  for (int i = 0; i < g.n; ++i) {
    const cplx expect = cplx(0.0, k) * f.amp[i];
    CHECK(std::abs(df.amp[i] - expect) < 1e-12 * k);
  }
}

TEST_CASE("gradient of constant field vanishes") {
  UniformGrid g(2, 16, 5.0);
  GridWaveFunction f(g);
  for (auto& z : f.amp) z = cplx(0.7, -0.2);
  for (auto method : {DerivMethod::spectral, DerivMethod::central_difference}) {
    GridWaveFunction df = gradient(f, 1, method);
    for (const auto& z : df.amp) CHECK(std::abs(z) < 1e-13);
  }
  CHECK_THROWS(gradient(f, 2, DerivMethod::spectral));
}

TEST_CASE("gradient of Gaussian matches analytic derivative") {
  UniformGrid g(1, 1024, 40.0);
  GridWaveFunction f(g);
  for (int i = 0; i < g.n; ++i) {
    const double x = g.coord(i);
    f.amp[i] = std::exp(-x * x / 4.0);
  }
  GridWaveFunction df = gradient(f, 0, DerivMethod::spectral);
  for (int i = 0; i < g.n; ++i) {
    const double x = g.coord(i);
    const double expect = -(x / 2.0) * std::exp(-x * x / 4.0);
    CHECK(std::abs(df.amp[i].real() - expect) < 1e-10);
    CHECK(std::abs(df.amp[i].imag()) < 1e-12);
  }
  // central difference is O(h^2): still close but far from spectral accuracy
  GridWaveFunction dc = gradient(f, 0, DerivMethod::central_difference);
  double worst = 0.0;
  for (int i = 0; i < g.n; ++i) {
    const double x = g.coord(i);
    worst = std::max(worst,
                     std::abs(dc.amp[i].real() + (x / 2.0) * std::exp(-x * x / 4.0)));
  }
  CHECK(worst < 1e-3);
  CHECK(worst > 1e-8);
}

TEST_CASE("Parseval identity on the dual grid") {
  UniformGrid g(1, 512, 30.0);
  GridWaveFunction f = gaussian_state(g, {0.7, 0, 0}, 1.3, {2.0, 0, 0});
  GridWaveFunction fh = fourier_transform(f);
  double dual = 0.0;
  for (const auto& z : fh.amp) dual += std::norm(z);
  dual *= g.dual_cell_volume();
  CHECK(dual == doctest::Approx(norm_squared(f)).epsilon(1e-12));

  GridWaveFunction back = inverse_fourier_transform(fh);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(std::abs(back.amp[i] - f.amp[i]) < 1e-12);
}

TEST_CASE("momentum-space samples match the analytic transform") {
  // psi-hat of a centered Gaussian exp(-x^2/(4 s^2)) is real and Gaussian
  UniformGrid g(1, 512, 40.0);
  const double s = 1.1;
  GridWaveFunction f(g);
  for (int i = 0; i < g.n; ++i)
    f.amp[i] = std::exp(-g.coord(i) * g.coord(i) / (4 * s * s));
  GridWaveFunction fh = fourier_transform(f);
  // integral exp(-x^2/(4s^2) - ipx) dx = 2 s sqrt(pi) exp(-s^2 p^2)
  for (int k = 0; k < g.n; ++k) {
    const double p = g.momentum(k);
    const double expect = 2.0 * s * std::sqrt(kPi) * std::exp(-s * s * p * p);
    CHECK(std::abs(fh.amp[k].real() - expect) < 1e-10);
    CHECK(std::abs(fh.amp[k].imag()) < 1e-10);
  }
}

TEST_CASE("gradient commutes with global phase and matches transform route") {
  UniformGrid g(1, 256, 25.0);
  GridWaveFunction f = gaussian_state(g, {-0.4, 0, 0}, 0.9, {1.5, 0, 0});
  const cplx phase(std::cos(0.83), std::sin(0.83));
  GridWaveFunction fp = f;
  for (auto& z : fp.amp) z *= phase;
  GridWaveFunction df = gradient(f, 0);
  GridWaveFunction dfp = gradient(fp, 0);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(std::abs(dfp.amp[i] - phase * df.amp[i]) < 1e-14);

  // transform -> multiply by ip -> inverse equals gradient
  GridWaveFunction fh = fourier_transform(f);
  for (int k = 0; k < g.n; ++k) fh.amp[k] *= cplx(0.0, g.momentum(k));
  GridWaveFunction dg = inverse_fourier_transform(fh);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(std::abs(dg.amp[i] - df.amp[i]) < 1e-12);
}

TEST_CASE("inner product and expectations") {
  UniformGrid g(1, 256, 20.0);
  GridWaveFunction f = gaussian_state(g, {0, 0, 0}, 1.0, {0.3, 0, 0});
  GridWaveFunction h = gaussian_state(g, {0.2, 0, 0}, 1.4, {-0.8, 0, 0});
  CHECK(std::abs(inner_product(f, h) - std::conj(inner_product(h, f))) < 1e-14);
  UniformGrid g2(1, 128, 20.0);
  GridWaveFunction other(g2);
  CHECK_THROWS(inner_product(f, other));

  CHECK(expectation(identity_op(), f) == doctest::Approx(1.0).epsilon(1e-12));

  // momentum eigenstate: expectation(P) = k
  const int kint = 4;
  GridWaveFunction pw = plane_wave_state(g, {kint, 0, 0});
  const double k = 2.0 * kPi * kint / g.length;
  CHECK(expectation(momentum_op(0), pw) == doctest::Approx(k).epsilon(1e-12));

  // E(X^2) on the sigma = 1 Gaussian equals the position variance 1
  GridWaveFunction gs = gaussian_state(g, {0, 0, 0}, 1.0, {0, 0, 0});
  OpApply x2 = [](const GridWaveFunction& psi) {
    GridWaveFunction out = position_op(0)(psi);
    return position_op(0)(out);
  };
  CHECK(expectation(x2, gs) == doctest::Approx(1.0).epsilon(1e-8));

  // Hermitian application gives a real expectation
  GridWaveFunction hf = kinetic_op()(f);
  CHECK(std::abs(inner_product(hf, f).imag()) < 1e-10);
}

TEST_CASE("two-level state normalization") {
  TwoLevelState s{cplx(3.0, 0.0), cplx(0.0, 4.0)};
  s.normalize();
  CHECK(std::norm(s.plus) + std::norm(s.minus) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spinor norm and product state") {
  UniformGrid g(1, 128, 16.0);
  GridWaveFunction spatial = gaussian_state(g, {0, 0, 0}, 0.8, {0, 0, 0});
  TwoLevelState chi{cplx(1.0, 0.0), cplx(1.0, 0.0)};
  chi.normalize();
  SpinorGridWaveFunction sp = spinor_product_state(spatial, chi);
  CHECK(norm_squared(sp) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Fourier interpolant reproduces grid values and is smooth") {
  UniformGrid g(1, 128, 12.0);
  GridWaveFunction f = gaussian_state(g, {0.5, 0, 0}, 0.9, {0, 0, 0});
  RealField rho = density(f);
  FourierInterpolant itp(g, rho);
  for (int i = 0; i < g.n; i += 7) {
    double x = g.coord(i);
    CHECK(itp(&x) == doctest::Approx(rho[i]).epsilon(1e-12));
  }
  // off-grid evaluation stays close to the analytic density
  const double x = 0.3217;
  const double expect = std::exp(-(x - 0.5) * (x - 0.5) / (2 * 0.81)) /
                        std::sqrt(2 * kPi * 0.81);
  CHECK(itp(&x) == doctest::Approx(expect).epsilon(1e-9));
}
