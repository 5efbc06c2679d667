#include "qcx/evolution.hpp"

#include <cmath>
#include <cstdio>

#include "qcx/fft.hpp"

namespace qcx {
namespace {

// multiply by a spectral factor g(p^2) in place (unnormalized DFT in, out)
void spectral_factor(const UniformGrid& g, std::vector<cplx>& v,
                     const std::function<cplx(double)>& factor) {
  const std::size_t total = v.size();
  for (std::size_t idx = 0; idx < total; ++idx) {
    auto c = g.unflatten(idx);
    double p2 = 0.0;
    for (int d = 0; d < g.dim; ++d) {
      const double p = g.momentum(c[d]);
      p2 += p * p;
    }
    v[idx] *= factor(p2);
  }
}

// W psi for W = H - T: potential, and the magnetic part when A is present
GridWaveFunction apply_potential_part(const FieldConfig& cfg,
                                      const GridWaveFunction& f,
                                      const std::vector<RealField>* divA) {
  GridWaveFunction out(f.grid);
  if (!cfg.V.empty())
    for (std::size_t i = 0; i < f.size(); ++i) out.amp[i] = cfg.V[i] * f.amp[i];
  if (cfg.has_A()) {
    for (int ax = 0; ax < f.grid.dim; ++ax) {
      GridWaveFunction pf = gradient(f, ax, DerivMethod::spectral);
      for (std::size_t i = 0; i < f.size(); ++i)
        out.amp[i] -= cfg.A[ax][i] * cplx(0.0, -1.0) * pf.amp[i];
    }
    const RealField& dA = (*divA)[0];
    for (std::size_t i = 0; i < f.size(); ++i) {
      double a2 = 0.0;
      for (int ax = 0; ax < f.grid.dim; ++ax) a2 += cfg.A[ax][i] * cfg.A[ax][i];
      out.amp[i] += (cplx(0.0, 0.5) * dA[i] + 0.5 * a2) * f.amp[i];
    }
  }
  return out;
}

// solve (I + i dt/2 H) psi = b by Richardson iteration preconditioned with
// the exact kinetic factor; contraction needs dt max|V| modest (stability
// guidance dt max|V| <= 0.5)
GridWaveFunction cn_solve(const FieldConfig& cfg, const GridWaveFunction& b,
                          double dt, const std::vector<RealField>* divA) {
  const UniformGrid& g = b.grid;
  auto precond = [&](GridWaveFunction v) {
    fft::forward(g.dim, g.n, v.amp);
    spectral_factor(g, v.amp, [dt](double p2) {
      return 1.0 / cplx(1.0, 0.25 * dt * p2);
    });
    fft::backward(g.dim, g.n, v.amp);
    simd::active().scale_real(1.0 / double(g.size()), v.amp.data(), v.size());
    return v;
  };
  const double b_norm = std::sqrt(norm_squared(b));
  GridWaveFunction psi = precond(b);
  for (int it = 0; it < 256; ++it) {
    // residual r = b - (I + i dt/2 (T + W)) psi
    GridWaveFunction t = laplacian(psi);
    GridWaveFunction w = apply_potential_part(cfg, psi, divA);
    GridWaveFunction r = b;
    for (std::size_t i = 0; i < r.size(); ++i)
      r.amp[i] -= psi.amp[i] +
                  cplx(0.0, 0.5 * dt) * (-0.5 * t.amp[i] + w.amp[i]);
    const double rn = std::sqrt(norm_squared(r));
    if (rn <= 1e-12 * b_norm) return psi;
    GridWaveFunction dr = precond(std::move(r));
    simd::active().caxpy(cplx(1.0, 0.0), dr.amp.data(), psi.amp.data(),
                         psi.size());
  }
  throw std::runtime_error("crank-nicolson solver did not reach 1e-12");
}

GridWaveFunction cn_step(const FieldConfig& cfg, const GridWaveFunction& psi,
                         double dt, const std::vector<RealField>* divA) {
  // b = (I - i dt/2 H) psi
  GridWaveFunction t = laplacian(psi);
  GridWaveFunction w = apply_potential_part(cfg, psi, divA);
  GridWaveFunction b = psi;
  for (std::size_t i = 0; i < b.size(); ++i)
    b.amp[i] -= cplx(0.0, 0.5 * dt) * (-0.5 * t.amp[i] + w.amp[i]);
  return cn_solve(cfg, b, dt, divA);
}

std::vector<RealField> precompute_divA(const FieldConfig& cfg) {
  std::vector<RealField> out;
  if (!cfg.has_A()) return out;
  RealField divA(cfg.grid.size(), 0.0);
  for (int ax = 0; ax < cfg.grid.dim; ++ax) {
    RealField d = real_gradient(cfg.grid, cfg.A[ax], ax);
    for (std::size_t i = 0; i < divA.size(); ++i) divA[i] += d[i];
  }
  out.push_back(std::move(divA));
  return out;
}

}  // namespace

EvolutionTrace schrodinger_evolve(const GridWaveFunction& psi0,
                                  const FieldConfig& config, double dt,
                                  int steps, Scheme scheme, int stride) {
  if (!config.V.empty()) {
    double vmax = 0.0;
    for (double v : config.V) vmax = std::max(vmax, std::abs(v));
    if (dt * vmax > 0.5)
      std::fprintf(stderr,
                   "warning: dt * max|V| = %.3g exceeds 0.5; accuracy of the "
                   "potential phases degrades\n",
                   dt * vmax);
  }
  if (config.has_A())
    return magnetic_schrodinger_evolve(psi0, config, dt, steps, stride);
  EvolutionTrace tr;
  tr.config = config;
  tr.dt = dt;
  tr.stride = stride;
  GridWaveFunction psi = psi0;
  psi.refresh_mask();
  tr.times.push_back(0.0);
  tr.snapshots.push_back(psi);
  const UniformGrid& g = psi.grid;

  if (scheme == Scheme::split_step) {
    // Strang: half potential, full kinetic, half potential
    std::vector<cplx> half_v(g.size(), cplx(1.0, 0.0));
    if (!config.V.empty())
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double a = -0.5 * dt * config.V[i];
        half_v[i] = cplx(std::cos(a), std::sin(a));
      }
    for (int s = 1; s <= steps; ++s) {
      simd::active().cmul_inplace(psi.amp.data(), half_v.data(), psi.size());
      fft::forward(g.dim, g.n, psi.amp);
      spectral_factor(g, psi.amp, [dt](double p2) {
        const double a = -0.5 * dt * p2;
        return cplx(std::cos(a), std::sin(a));
      });
      fft::backward(g.dim, g.n, psi.amp);
      simd::active().scale_real(1.0 / double(g.size()), psi.amp.data(),
                                psi.size());
      simd::active().cmul_inplace(psi.amp.data(), half_v.data(), psi.size());
      if (s % stride == 0 || s == steps) {
        psi.refresh_mask();
        tr.times.push_back(s * dt);
        tr.snapshots.push_back(psi);
      }
    }
    return tr;
  }

  for (int s = 1; s <= steps; ++s) {
    psi = cn_step(config, psi, dt, nullptr);
    if (s % stride == 0 || s == steps) {
      psi.refresh_mask();
      tr.times.push_back(s * dt);
      tr.snapshots.push_back(psi);
    }
  }
  return tr;
}

EvolutionTrace magnetic_schrodinger_evolve(const GridWaveFunction& psi0,
                                           const FieldConfig& config, double dt,
                                           int steps, int stride) {
  EvolutionTrace tr;
  tr.config = config;
  tr.dt = dt;
  tr.stride = stride;
  GridWaveFunction psi = psi0;
  psi.refresh_mask();
  tr.times.push_back(0.0);
  tr.snapshots.push_back(psi);
  const std::vector<RealField> divA = precompute_divA(config);
  const std::vector<RealField>* dptr = config.has_A() ? &divA : nullptr;
  for (int s = 1; s <= steps; ++s) {
    psi = cn_step(config, psi, dt, dptr);
    if (s % stride == 0 || s == steps) {
      psi.refresh_mask();
      tr.times.push_back(s * dt);
      tr.snapshots.push_back(psi);
    }
  }
  return tr;
}

void apply_spin_rotation(const std::array<double, 3>& b, double dt, cplx& plus,
                         cplx& minus) {
  const double bn = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
  if (bn == 0.0 || dt == 0.0) return;
  const double theta = 0.5 * bn * dt;  // H = B.S = (1/2) B.sigma
  const double c = std::cos(theta), s = std::sin(theta);
  const double n1 = b[0] / bn, n2 = b[1] / bn, n3 = b[2] / bn;
  // U = cos(theta) I - i sin(theta) (n.sigma)
  const cplx u00(c, -s * n3), u11(c, s * n3);
  const cplx u01 = cplx(0.0, -s) * cplx(n1, -n2);
  const cplx u10 = cplx(0.0, -s) * cplx(n1, n2);
  const cplx p = plus, m = minus;
  plus = u00 * p + u01 * m;
  minus = u10 * p + u11 * m;
}

TwoLevelTrace two_level_evolve(const TwoLevelState& psi0, const BFieldOfTime& b,
                               double dt, int steps, int stride) {
  TwoLevelTrace tr;
  tr.dt = dt;
  TwoLevelState psi = psi0;
  tr.times.push_back(0.0);
  tr.states.push_back(psi);
  for (int s = 1; s <= steps; ++s) {
    const double tmid = (s - 0.5) * dt;
    apply_spin_rotation(b(tmid), dt, psi.plus, psi.minus);
    if (s % stride == 0 || s == steps) {
      tr.times.push_back(s * dt);
      tr.states.push_back(psi);
    }
  }
  return tr;
}

SpinorTrace pauli_evolve(const SpinorGridWaveFunction& psi0,
                         const FieldConfig& config, const SpinCoupling& coupling,
                         double dt, int steps, int stride) {
  check_same_grid(psi0.plus.grid, psi0.minus.grid);
  check_same_grid(psi0.plus.grid, config.grid);
  SpinorTrace tr;
  tr.config = config;
  tr.coupling = coupling;
  tr.dt = dt;
  tr.stride = stride;
  SpinorGridWaveFunction psi = psi0;
  psi.plus.refresh_mask();
  psi.minus.refresh_mask();
  tr.times.push_back(0.0);
  tr.snapshots.push_back(psi);
  const std::vector<RealField> divA = precompute_divA(config);
  const std::vector<RealField>* dptr = config.has_A() ? &divA : nullptr;

  auto spin_half = [&](SpinorGridWaveFunction& s, double tmid) {
    for (std::size_t i = 0; i < s.plus.size(); ++i)
      apply_spin_rotation(coupling.at(tmid, i), 0.5 * dt, s.plus.amp[i],
                          s.minus.amp[i]);
  };

  for (int s = 1; s <= steps; ++s) {
    const double t0 = (s - 1) * dt;
    spin_half(psi, t0 + 0.25 * dt);
    psi.plus = cn_step(config, psi.plus, dt, dptr);
    psi.minus = cn_step(config, psi.minus, dt, dptr);
    spin_half(psi, t0 + 0.75 * dt);
    if (s % stride == 0 || s == steps) {
      psi.plus.refresh_mask();
      psi.minus.refresh_mask();
      tr.times.push_back(s * dt);
      tr.snapshots.push_back(psi);
    }
  }
  return tr;
}

}  // namespace qcx
