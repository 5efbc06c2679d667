#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qcx/cond_expect.hpp"
#include "qcx/evolution.hpp"
#include "qcx/states.hpp"

using namespace qcx;

namespace {

FieldConfig oscillator_config(const UniformGrid& g) {
  FieldConfig cfg;
  cfg.grid = g;
  cfg.V.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto c = g.unflatten(i);
    double v = 0.0;
    for (int d = 0; d < g.dim; ++d) v += 0.5 * g.coord(c[d]) * g.coord(c[d]);
    cfg.V[i] = v;
  }
  return cfg;
}

// analytic coherent-state solution for V = x^2/2, psi0 centered at q0 at rest
GridWaveFunction coherent_exact(const UniformGrid& g, double q0, double t) {
  GridWaveFunction f(g);
  const double q = q0 * std::cos(t), p = -q0 * std::sin(t);
  const double phase0 = 0.25 * q0 * q0 * std::sin(2.0 * t) - 0.5 * t;
  for (int i = 0; i < g.n; ++i) {
    const double x = g.coord(i);
    const double a = p * x + phase0;
    f.amp[i] = std::pow(kPi, -0.25) * std::exp(-0.5 * (x - q) * (x - q)) *
               cplx(std::cos(a), std::sin(a));
  }
  // analytic form is normalized already; keep grid normalization exact
  normalize(f);
  return f;
}

double mean_x(const GridWaveFunction& f) {
  RealField rho = density(f);
  double s = 0.0;
  for (int i = 0; i < f.grid.n; ++i) s += f.grid.coord(i) * rho[i];
  return s * f.grid.cell_volume();
}

double err_norm(const GridWaveFunction& a, const GridWaveFunction& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a.amp[i] - b.amp[i]);
  return std::sqrt(s * a.grid.cell_volume());
}

}  // namespace

TEST_CASE("stationary ground state keeps unit overlap") {
  UniformGrid g(1, 512, 20.0);
  FieldConfig cfg = oscillator_config(g);
  GridWaveFunction psi0 = oscillator_eigenstate(g, 0);
  for (Scheme sch : {Scheme::split_step, Scheme::crank_nicolson}) {
    const double t_end = sch == Scheme::split_step ? 10.0 : 1.0;
    const int steps = int(t_end / 1e-3 + 0.5);
    EvolutionTrace tr = schrodinger_evolve(psi0, cfg, 1e-3, steps, sch, steps);
    const GridWaveFunction& fin = tr.snapshots.back();
    CHECK(std::abs(std::abs(inner_product(fin, psi0)) - 1.0) < 1e-6);
    CHECK(std::abs(norm_squared(fin) - 1.0) < 1e-10);
  }
}

TEST_CASE("free Gaussian spreading matches the closed form") {
  UniformGrid g(1, 512, 40.0);
  FieldConfig cfg;
  cfg.grid = g;
  const double s0 = 1.0;
  GridWaveFunction psi0 = gaussian_state(g, {0, 0, 0}, s0, {0, 0, 0});
  EvolutionTrace tr = schrodinger_evolve(psi0, cfg, 1e-3, 1000, Scheme::split_step, 1000);
  const GridWaveFunction& fin = tr.snapshots.back();
  RealField rho = density(fin);
  double var = 0.0;
  for (int i = 0; i < g.n; ++i) var += g.coord(i) * g.coord(i) * rho[i];
  var *= g.cell_volume();
  const double t = 1.0;
  const double expect = s0 * s0 + t * t / (4.0 * s0 * s0);
  CHECK(std::abs(var - expect) < 1e-4);
}

TEST_CASE("coherent state: <X>(t) = cos t and second-order convergence") {
  UniformGrid g(1, 512, 20.0);
  FieldConfig cfg = oscillator_config(g);
  GridWaveFunction psi0 = coherent_state(g, 1.0);

  EvolutionTrace tr =
      schrodinger_evolve(psi0, cfg, 1e-3, 3000, Scheme::split_step, 500);
  for (std::size_t s = 0; s < tr.times.size(); ++s)
    CHECK(std::abs(mean_x(tr.snapshots[s]) - std::cos(tr.times[s])) < 1e-4);

  // error against the analytic solution drops ~4x when dt halves
  for (Scheme sch : {Scheme::split_step, Scheme::crank_nicolson}) {
    const double T = 1.0;
    GridWaveFunction exact = coherent_exact(g, 1.0, T);
    EvolutionTrace c1 = schrodinger_evolve(psi0, cfg, 2e-3, 500, sch, 500);
    EvolutionTrace c2 = schrodinger_evolve(psi0, cfg, 1e-3, 1000, sch, 1000);
    const double e1 = err_norm(c1.snapshots.back(), exact);
    const double e2 = err_norm(c2.snapshots.back(), exact);
    const double ratio = e1 / e2;
    CHECK(ratio > 3.2);
    CHECK(ratio < 4.8);
  }
}

TEST_CASE("energy conservation over t in [0, 10]") {
  UniformGrid g(1, 512, 20.0);
  FieldConfig cfg = oscillator_config(g);
  GridWaveFunction psi0 = coherent_state(g, 1.0);
  OpApply h = schrodinger_op(cfg.V);
  const double e0 = expectation(h, psi0);
  EvolutionTrace tr =
      schrodinger_evolve(psi0, cfg, 1e-3, 10000, Scheme::split_step, 2000);
  for (const auto& snap : tr.snapshots) {
    CHECK(std::abs(expectation(h, snap) - e0) < 1e-6);
    CHECK(std::abs(norm_squared(snap) - 1.0) < 1e-10);
  }
}

TEST_CASE("magnetic stepper: A = 0 reduces to the scalar path") {
  UniformGrid g(1, 256, 20.0);
  FieldConfig cfg = oscillator_config(g);
  GridWaveFunction psi0 = coherent_state(g, 0.7);
  EvolutionTrace a = schrodinger_evolve(psi0, cfg, 1e-3, 50, Scheme::crank_nicolson, 50);
  EvolutionTrace b = magnetic_schrodinger_evolve(psi0, cfg, 1e-3, 50, 50);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(std::abs(a.snapshots.back().amp[i] - b.snapshots.back().amp[i]) < 1e-12);
}

TEST_CASE("constant vector potential is a gauge shift of free evolution") {
  UniformGrid g(1, 256, 20.0);
  const double a = 2.0 * kPi * 3 / g.length;  // dual-grid value keeps e^{iax} periodic
  FieldConfig free_cfg;
  free_cfg.grid = g;
  FieldConfig mag_cfg;
  mag_cfg.grid = g;
  mag_cfg.A.assign(1, RealField(g.size(), a));

  GridWaveFunction psi0 = gaussian_state(g, {0, 0, 0}, 1.0, {0.5, 0, 0});
  EvolutionTrace tr = magnetic_schrodinger_evolve(psi0, mag_cfg, 1e-3, 500, 500);

  GridWaveFunction shifted = psi0;
  for (int i = 0; i < g.n; ++i) {
    const double ph = -a * g.coord(i);
    shifted.amp[i] *= cplx(std::cos(ph), std::sin(ph));
  }
  EvolutionTrace fr =
      schrodinger_evolve(shifted, free_cfg, 1e-3, 500, Scheme::crank_nicolson, 500);
  GridWaveFunction gauge = fr.snapshots.back();
  for (int i = 0; i < g.n; ++i) {
    const double ph = a * g.coord(i);
    gauge.amp[i] *= cplx(std::cos(ph), std::sin(ph));
  }
  CHECK(err_norm(tr.snapshots.back(), gauge) < 1e-8);
}

TEST_CASE("2d uniform field: velocity expectation rotates at rate |B|") {
  UniformGrid g(2, 128, 20.0);
  const double bz = 1.0;
  FieldConfig cfg;
  cfg.grid = g;
  cfg.A.assign(2, RealField(g.size(), 0.0));
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto c = g.unflatten(i);
    cfg.A[0][i] = -0.5 * bz * g.coord(c[1]);
    cfg.A[1][i] = 0.5 * bz * g.coord(c[0]);
  }
  cfg.has_uniform_b3 = true;
  cfg.uniform_b3 = bz;

  GridWaveFunction psi0 = gaussian_state(g, {2.0, 0.0, 0}, 1.0, {0, 0, 0});
  const double dt = 2e-3, T = 0.3;
  const int steps = int(T / dt + 0.5);
  EvolutionTrace tr = magnetic_schrodinger_evolve(psi0, cfg, dt, steps, steps);

  auto mean_v = [&](const GridWaveFunction& f) {
    std::array<double, 2> v{};
    RealField rho = density(f);
    for (int ax = 0; ax < 2; ++ax) {
      v[ax] = expectation(momentum_op(ax), f);
      double s = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) s += cfg.A[ax][i] * rho[i];
      v[ax] -= s * g.cell_volume();
    }
    return v;
  };
  auto v0 = mean_v(tr.snapshots.front());
  auto v1 = mean_v(tr.snapshots.back());
  const double a0 = std::atan2(v0[1], v0[0]);
  const double a1 = std::atan2(v1[1], v1[0]);
  double dphi = a1 - a0;
  while (dphi > kPi) dphi -= 2 * kPi;
  while (dphi < -kPi) dphi += 2 * kPi;
  CHECK(std::abs(std::abs(dphi) / T - bz) < 1e-3);
  CHECK(std::abs(norm_squared(tr.snapshots.back()) - 1.0) < 1e-10);
}

TEST_CASE("two-level evolution: precession, Rabi, and the trivial field") {
  const double b = 1.3;
  // B along e3: exact diagonal phases
  TwoLevelState s0{cplx(1 / std::sqrt(2.0), 0), cplx(1 / std::sqrt(2.0), 0)};
  TwoLevelTrace tr = two_level_evolve(
      s0, [b](double) { return std::array<double, 3>{0, 0, b}; }, 1e-3, 2000, 2000);
  const double t = tr.times.back();
  CHECK(std::abs(tr.states.back().plus -
                 cplx(std::cos(-b * t / 2), std::sin(-b * t / 2)) / std::sqrt(2.0)) <
        1e-10);
  CHECK(std::abs(tr.states.back().minus -
                 cplx(std::cos(b * t / 2), std::sin(b * t / 2)) / std::sqrt(2.0)) <
        1e-10);

  // B along e1: Rabi populations
  TwoLevelState up{cplx(1, 0), cplx(0, 0)};
  TwoLevelTrace tr2 = two_level_evolve(
      up, [b](double) { return std::array<double, 3>{b, 0, 0}; }, 1e-3, 2500, 250);
  for (std::size_t i = 0; i < tr2.times.size(); ++i) {
    const double rho_p = std::norm(tr2.states[i].plus);
    const double expect = std::pow(std::cos(0.5 * b * tr2.times[i]), 2);
    CHECK(std::abs(rho_p - expect) < 1e-10);
  }

  // zero field: identity
  TwoLevelTrace tr3 = two_level_evolve(
      up, [](double) { return std::array<double, 3>{0, 0, 0}; }, 1e-2, 100, 100);
  CHECK(std::abs(tr3.states.back().plus - up.plus) < 1e-14);
}

TEST_CASE("pauli evolution: zero coupling decouples the components") {
  UniformGrid g(1, 128, 16.0);
  FieldConfig cfg = oscillator_config(g);
  SpinorGridWaveFunction psi0 = spinor_two_packet_state(
      g, 0.8, {0.3, 0, 0}, 0.9, {0.5, 0, 0}, 0.6, {-0.4, 0, 0}, 1.1, {-0.2, 0, 0});
  SpinCoupling none;
  SpinorTrace tr = pauli_evolve(psi0, cfg, none, 1e-3, 100, 100);
  EvolutionTrace p = magnetic_schrodinger_evolve(psi0.plus, cfg, 1e-3, 100, 100);
  EvolutionTrace m = magnetic_schrodinger_evolve(psi0.minus, cfg, 1e-3, 100, 100);
  CHECK(err_norm(tr.snapshots.back().plus, p.snapshots.back()) < 1e-10);
  CHECK(err_norm(tr.snapshots.back().minus, m.snapshots.back()) < 1e-10);
}

TEST_CASE("pauli evolution: aligned uniform field keeps populations") {
  UniformGrid g(1, 256, 16.0);
  FieldConfig cfg = oscillator_config(g);
  TwoLevelState chi{cplx(0.8, 0.1), cplx(0.5, -0.3)};
  chi.normalize();
  SpinorGridWaveFunction psi0 =
      spinor_product_state(gaussian_state(g, {0.4, 0, 0}, 0.8, {0.6, 0, 0}), chi);
  SpinCoupling cpl;
  cpl.uniform_b = [](double) { return std::array<double, 3>{0, 0, 2.0}; };
  SpinorTrace tr = pauli_evolve(psi0, cfg, cpl, 1e-3, 400, 100);
  const double rp0 = norm_squared(tr.snapshots.front().plus);
  for (const auto& snap : tr.snapshots) {
    CHECK(std::abs(norm_squared(snap.plus) - rp0) < 1e-8);
    CHECK(std::abs(norm_squared(snap.plus) + norm_squared(snap.minus) - 1.0) < 1e-10);
  }
}

TEST_CASE("two-level stepper is second order for time-dependent fields") {
  BFieldOfTime b = [](double t) {
    return std::array<double, 3>{1.2 * std::cos(0.7 * t), 0.4,
                                 0.9 * std::sin(t)};
  };
  TwoLevelState psi0{cplx(0.8, 0.1), cplx(0.5, -0.3)};
  psi0.normalize();
  const double T = 2.0;
  auto terminal = [&](double dt) {
    return two_level_evolve(psi0, b, dt, int(T / dt + 0.5), 1 << 30)
        .states.back();
  };
  TwoLevelState ref = terminal(1.25e-4);
  auto err = [&](const TwoLevelState& s) {
    return std::sqrt(std::norm(s.plus - ref.plus) +
                     std::norm(s.minus - ref.minus));
  };
  const double e1 = err(terminal(4e-3));
  const double e2 = err(terminal(2e-3));
  CHECK(e1 / e2 > 3.2);
  CHECK(e1 / e2 < 4.8);
}
