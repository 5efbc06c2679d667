#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qcx/cond_expect.hpp"
#include "qcx/pauli_channels.hpp"
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

// shared-envelope spinor whose component ratio is smooth and bounded
SpinorGridWaveFunction modulated_packet(const UniformGrid& g) {
  GridWaveFunction env = gaussian_state(g, {0, 0, 0}, 1.0, {0.4, 0, 0});
  SpinorGridWaveFunction s{env, env};
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto c = g.unflatten(i);
    const double x = g.coord(c[0]);
    const double th1 = 2.0 * kPi * x / g.length;
    const double th2 = 4.0 * kPi * x / g.length;
    s.plus.amp[i] *= 1.0 + 0.25 * cplx(std::cos(th1), std::sin(th1));
    s.minus.amp[i] *=
        cplx(0.65, 0.1) + 0.2 * cplx(std::cos(th2), -std::sin(th2));
  }
  normalize(s);
  return s;
}

SpinCoupling transverse(double b) {
  SpinCoupling c;
  c.uniform_b = [b](double) { return std::array<double, 3>{b, 0, 0}; };
  return c;
}

}  // namespace

TEST_CASE("pauli_cond_fields: single-channel state reduces to scalar fields") {
  UniformGrid g(1, 256, 20.0);
  FieldConfig cfg;
  cfg.grid = g;
  GridWaveFunction up = gaussian_state(g, {0.3, 0, 0}, 1.0, {0.8, 0, 0});
  SpinorGridWaveFunction psi{up, GridWaveFunction(g)};
  psi.minus.refresh_mask();
  ChannelFields cf = pauli_cond_fields(psi, cfg);
  BohmFields bf = bohm_fields(up);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (cf.mask[0][i] || bf.mask[i]) continue;
    CHECK(std::abs(cf.p[0][0][i] - bf.p_B[0][i]) < 1e-12);
    CHECK(std::abs(cf.q_pot[0][i] - bf.q_pot[i]) < 1e-10);
    CHECK(std::abs(cf.rho[0][i] - bf.density[i]) < 1e-14);
  }
  // minus channel entirely masked
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(cf.mask[1][i] == 1);
}

TEST_CASE("pauli_cond_fields: separable spinor has flat spin fields") {
  UniformGrid g(1, 256, 20.0);
  FieldConfig cfg;
  cfg.grid = g;
  TwoLevelState chi{cplx(1, 0), cplx(1, 0)};
  chi.normalize();
  SpinorGridWaveFunction psi =
      spinor_product_state(gaussian_state(g, {0, 0, 0}, 1.0, {0.6, 0, 0}), chi);
  ChannelFields cf = pauli_cond_fields(psi, cfg);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!cf.well[i]) continue;
    CHECK(cf.s1[0][i] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(std::abs(cf.s2[0][i]) < 1e-10);
    CHECK(std::abs(cf.p[0][0][i] - cf.p[1][0][i]) < 1e-9);
    for (int ax = 0; ax < 1; ++ax) {
      CHECK(std::abs(cf.x_diff[ax][i]) < 1e-9);
      CHECK(std::abs(cf.y_diff[ax][i]) < 1e-9);
    }
  }
  CHECK(cf.spin_constraint_residual() < 1e-9);
}

TEST_CASE("cross-channel gradient relations") {
  UniformGrid g(1, 512, 20.0);
  FieldConfig cfg;
  cfg.grid = g;
  SpinorGridWaveFunction psi = modulated_packet(g);
  ChannelFields cf = pauli_cond_fields(psi, cfg);
  GradientRelationsReport rep = gradient_relations_check(cf);
  CHECK(rep.x_residual < 1e-6);
  CHECK(rep.y_residual < 1e-6);
  CHECK(rep.presolved_residual < 1e-6);
  CHECK(rep.solve_residual < 1e-6);

  // separable state: both sides vanish
  TwoLevelState chi{cplx(0.8, 0.1), cplx(0.55, -0.2)};
  chi.normalize();
  SpinorGridWaveFunction sep =
      spinor_product_state(gaussian_state(g, {0, 0, 0}, 1.0, {0.3, 0, 0}), chi);
  GradientRelationsReport rs = gradient_relations_check(pauli_cond_fields(sep, cfg));
  CHECK(rs.x_residual < 1e-8);
  CHECK(rs.y_residual < 1e-8);
}

TEST_CASE("first-order system and channel dynamics: 1-d transverse field") {
  UniformGrid g(1, 512, 20.0);
  FieldConfig cfg = oscillator_config(g);
  SpinorGridWaveFunction psi0 = modulated_packet(g);
  SpinCoupling cpl = transverse(1.0);
  SpinorTrace tr = pauli_evolve(psi0, cfg, cpl, 1e-3, 2, 1);

  ResidualReport sys = first_order_system_residual(tr, 1);
  CHECK(sys.max_residual < 1e-4);
  ResidualReport chp = channel_dynamics_residual(tr, 1, 0);
  CHECK(chp.max_residual < 1e-4);
  ResidualReport chm = channel_dynamics_residual(tr, 1, 1);
  CHECK(chm.max_residual < 1e-4);

  // halving dx and dt cuts the residual about fourfold
  UniformGrid g2(1, 1024, 20.0);
  FieldConfig cfg2 = oscillator_config(g2);
  // same analytic initial data sampled on the finer grid
  SpinorGridWaveFunction psi2 = modulated_packet(g2);
  SpinorTrace tr2 = pauli_evolve(psi2, cfg2, cpl, 5e-4, 2, 1);
  ResidualReport sys2 = first_order_system_residual(tr2, 1);
  const double ratio = sys.max_residual / sys2.max_residual;
  CHECK(ratio > 3.2);
  CHECK(ratio < 4.8);
}

TEST_CASE("stationary Pauli eigenstate: time derivatives vanish") {
  UniformGrid g(1, 512, 20.0);
  FieldConfig cfg = oscillator_config(g);
  TwoLevelState chi{cplx(1, 0), cplx(1, 0)};
  chi.normalize();
  SpinorGridWaveFunction psi0 =
      spinor_product_state(oscillator_eigenstate(g, 0), chi);
  SpinCoupling cpl = transverse(0.8);  // psi0 is an eigenvector of b S1
  SpinorTrace tr = pauli_evolve(psi0, cfg, cpl, 1e-3, 2, 1);
  ChannelFields fm = pauli_cond_fields(tr.snapshots[0], cfg);
  ChannelFields fp = pauli_cond_fields(tr.snapshots[2], cfg);
  const double dt2 = tr.times[2] - tr.times[0];
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!fm.well[i] || !fp.well[i]) continue;
    worst = std::max(worst, std::abs(fp.s1[0][i] - fm.s1[0][i]) / dt2);
    worst = std::max(worst, std::abs(fp.s2[0][i] - fm.s2[0][i]) / dt2);
    worst = std::max(worst, std::abs(fp.rho[0][i] - fm.rho[0][i]) / dt2);
    worst = std::max(worst, std::abs(fp.p[0][0][i] - fm.p[0][0][i]) / dt2);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("first-order system in two dimensions with an in-plane vector potential") {
  UniformGrid g(2, 128, 20.0);
  FieldConfig cfg;
  cfg.grid = g;
  // A = (d2 chi, -d1 chi) for a bump chi: div A = 0, B3 = -Lap chi
  RealField bump(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto c = g.unflatten(i);
    const double x = g.coord(c[0]), y = g.coord(c[1]);
    bump[i] = 0.4 * std::exp(-(x * x + y * y) / 4.0);
  }
  cfg.A.resize(2);
  cfg.A[0] = real_gradient(g, bump, 1);
  RealField d1 = real_gradient(g, bump, 0);
  cfg.A[1].resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) cfg.A[1][i] = -d1[i];

  SpinCoupling cpl;
  RealField lap = real_laplacian(g, bump);
  cpl.b3.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) cpl.b3[i] = -lap[i];

  // consistency of the stored coupling with curl A (spectral)
  RealField d1a2 = real_gradient(g, cfg.A[1], 0);
  RealField d2a1 = real_gradient(g, cfg.A[0], 1);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(std::abs(d1a2[i] - d2a1[i] - cpl.b3[i]) < 1e-8);

  TwoLevelState chi{cplx(0.9, 0.0), cplx(0.42, 0.1)};
  chi.normalize();
  SpinorGridWaveFunction psi0 =
      spinor_product_state(gaussian_state(g, {0.5, -0.3, 0}, 1.0, {0.4, 0.2, 0}),
                           chi);
  SpinorTrace tr = pauli_evolve(psi0, cfg, cpl, 2e-3, 2, 1);
  ResidualReport sys = first_order_system_residual(tr, 1);
  CHECK(sys.max_residual < 1e-3);
  ResidualReport chp = channel_dynamics_residual(tr, 1, 0);
  CHECK(chp.max_residual < 1e-3);
  ChannelFields cf = pauli_cond_fields(tr.snapshots[1], cfg);
  CHECK(cf.spin_constraint_residual() < 1e-8);
}

TEST_CASE("two-fluid diagnostics: sum rules, stress identity, balances") {
  UniformGrid g(1, 512, 20.0);
  FieldConfig cfg = oscillator_config(g);
  SpinorGridWaveFunction psi0 = modulated_packet(g);
  SpinCoupling cpl = transverse(1.0);
  SpinorTrace tr = pauli_evolve(psi0, cfg, cpl, 1e-3, 2, 1);
  TwoFluidDiagnostics d = two_fluid_diagnostics(tr, 1);

  CHECK(d.mass_sum_rule < 1e-16);
  CHECK(d.momentum_sum_rule < 1e-10);
  CHECK(d.torque_sum_rule < 1e-10);
  CHECK(d.decomposition_residual < 1e-8);
  CHECK(d.takabayasi_residual < 1e-5);
  CHECK(d.mass_balance < 1e-4);
  CHECK(d.momentum_balance < 1e-3);
  CHECK(d.spin_balance < 1e-4);

  auto book = probability_bookkeeping(tr, 1);
  CHECK(book[0] < 1e-10);
  CHECK(book[1] < 1e-6);
}

TEST_CASE("mixing identity with the X-only conditioning") {
  UniformGrid g(1, 256, 20.0);
  FieldConfig cfg;
  cfg.grid = g;
  SpinorGridWaveFunction psi = modulated_packet(g);
  CHECK(mixing_identity_residual(psi, cfg) < 1e-10);
}

TEST_CASE("beable flow+jump: aligned field reduces to scalar equivariance") {
  UniformGrid g(1, 512, 20.0);
  FieldConfig cfg = oscillator_config(g);
  TwoLevelState chi{cplx(0.8, 0.0), cplx(0.6, 0.0)};
  chi.normalize();
  SpinorGridWaveFunction psi0 =
      spinor_product_state(coherent_state(g, 1.0), chi);
  SpinCoupling cpl;
  cpl.uniform_b = [](double) { return std::array<double, 3>{0, 0, 1.5}; };
  SpinorTrace tr = pauli_evolve(psi0, cfg, cpl, 1e-3, 1000, 5);
  BeableSimStats st = beable_flow_jump_sim(tr, {APolicy::Kind::bell_minimal, 0.0},
                                           20000, 41, 5);
  CHECK(st.mean_jumps == 0.0);
  CHECK(st.ks_plus < 0.03);
  CHECK(st.ks_minus < 0.03);
  // population is conserved per path; only the initial Born sampling
  // fluctuates (binomial, 3 sigma)
  CHECK(st.pop_plus_err < 3.0 * std::sqrt(0.64 * 0.36 / 20000.0));
}

TEST_CASE("beable flow+jump: zero-velocity state matches the pure jump chain") {
  UniformGrid g(1, 256, 20.0);
  FieldConfig cfg = oscillator_config(g);
  const double b = 1.0;
  TwoLevelState chi{cplx(1, 0), cplx(0, 0)};
  SpinorGridWaveFunction psi0 =
      spinor_product_state(oscillator_eigenstate(g, 0), chi);
  SpinCoupling cpl = transverse(b);
  const double t_end = 2.0;
  SpinorTrace tr = pauli_evolve(psi0, cfg, cpl, 1e-3, int(t_end / 1e-3), 2);
  BeableSimStats st = beable_flow_jump_sim(tr, {APolicy::Kind::bell_minimal, 0.0},
                                           20000, 43, 2);
  // sheet population matches the closed-form Rabi occupation within 3 sigma
  const double expect = std::pow(std::cos(0.5 * b * t_end), 2);
  const double sigma = std::sqrt(expect * (1 - expect) / 20000.0);
  CHECK(std::abs(st.pop_plus_err) < std::max(3.0 * sigma, 0.01));
  CHECK(st.ks_plus < 0.03);
}

TEST_CASE("spin-mixing operator under (X, sigma3) conditioning") {
  UniformGrid g(1, 256, 20.0);
  FieldConfig cfg;
  cfg.grid = g;
  SpinorGridWaveFunction psi = modulated_packet(g);
  ChannelFields cf = pauli_cond_fields(psi, cfg);
  // spin-flip operator: (sigma1 Psi)_+ = Psi_-, (sigma1 Psi)_- = Psi_+
  SpinorOpApply flip = [](const SpinorGridWaveFunction& s) {
    return SpinorGridWaveFunction{s.minus, s.plus};
  };
  SpinorCondExp ce =
      cond_exp_spinor(flip, psi, SpinorConditioning::x_and_sigma3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!cf.well[i]) continue;
    // Re(Psi_-/Psi_+) = 2 s1+,  Re(Psi_+/Psi_-) = 2 s1-
    CHECK(ce.channels[0][i] == doctest::Approx(2.0 * cf.s1[0][i]).epsilon(1e-10));
    CHECK(ce.channels[1][i] == doctest::Approx(2.0 * cf.s1[1][i]).epsilon(1e-10));
  }
  // X-only: Re(Psi* sigma1 Psi) / (Psi* Psi) = 2 <S1>(x) / rho_total
  SpinorCondExp xo = cond_exp_spinor(flip, psi, SpinorConditioning::x_only);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!cf.well[i] || xo.mask_x_only[i]) continue;
    const double s1x =
        (std::conj(psi.plus.amp[i]) * psi.minus.amp[i]).real();
    const double expect = 2.0 * s1x / (cf.rho[0][i] + cf.rho[1][i]);
    CHECK(xo.x_only[i] == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("three-dimensional fields assemble at reduced resolution") {
  UniformGrid g(3, 16, 12.0);
  FieldConfig cfg;
  cfg.grid = g;
  TwoLevelState chi{cplx(0.8, 0.1), cplx(0.55, -0.2)};
  chi.normalize();
  SpinorGridWaveFunction psi =
      spinor_product_state(gaussian_state(g, {0.3, -0.2, 0.4}, 1.2,
                                          {0.5, 0.0, -0.3}),
                           chi);
  ChannelFields cf = pauli_cond_fields(psi, cfg);
  CHECK(cf.spin_constraint_residual() < 1e-9);
  // separable spinor: both channels share one Bohm momentum field
  for (std::size_t i = 0; i < g.size(); ++i)
    if (cf.well[i])
      for (int ax = 0; ax < 3; ++ax)
        CHECK(std::abs(cf.x_diff[ax][i]) < 1e-8);
  CHECK(mixing_identity_residual(psi, cfg) < 1e-10);
}

TEST_CASE("channel redundancy: minus channel from the plus chart") {
  UniformGrid g(1, 512, 20.0);
  FieldConfig cfg;
  cfg.grid = g;
  ChannelFields cf = pauli_cond_fields(modulated_packet(g), cfg);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!cf.well[i]) continue;
    const double sp2 = cf.s1[0][i] * cf.s1[0][i] + cf.s2[0][i] * cf.s2[0][i];
    // occupation relation rho_- = 4 rho_+ ||S'_+||^2
    CHECK(cf.rho[1][i] ==
          doctest::Approx(4.0 * cf.rho[0][i] * sp2).epsilon(1e-6));
    // spin reconstruction s_j,- = s_j,+ / (4 ||S'_+||^2)
    CHECK(cf.s1[1][i] ==
          doctest::Approx(0.25 * cf.s1[0][i] / sp2).epsilon(1e-6));
    CHECK(cf.s2[1][i] ==
          doctest::Approx(0.25 * cf.s2[0][i] / sp2).epsilon(1e-6));
  }
}

TEST_CASE("optional cross-channel difference identities") {
  UniformGrid g(1, 512, 20.0);
  FieldConfig cfg;
  cfg.grid = g;
  ChannelFields cf = pauli_cond_fields(modulated_packet(g), cfg);
  AlternativeDifferenceReport rep = alternative_difference_identities(cf);
  CHECK(rep.osmotic_form_residual < 1e-6);
  CHECK(rep.q_difference_residual < 1e-6);
}
