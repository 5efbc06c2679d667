#include "qcx/pauli_channels.hpp"

#include <algorithm>
#include <cmath>

#include "qcx/cond_expect.hpp"
#include "qcx/fft.hpp"
#include "qcx/bohm_flow.hpp"
#include "qcx/rng.hpp"

namespace qcx {

namespace {

constexpr double kWellRhoFloor = 1e-8;
constexpr double kWellSLow = 0.05;
constexpr double kWellSHigh = 20.0;

// complex log-derivatives and second-derivative quotients of one snapshot
struct SnapDeriv {
  int dim = 1;
  std::size_t n = 0;
  // [channel][axis][point]: L = grad psi / psi
  std::array<std::vector<std::vector<cplx>>, 2> L;
  // [channel][j*dim+k][point]: D2 = d2 psi / psi - L_j L_k
  std::array<std::vector<std::vector<cplx>>, 2> D2;
  // R-route quantum-potential gradient pieces per channel
  std::array<RealField, 2> lap_r;
  std::array<RealField, 2> r;
  std::array<std::vector<RealField>, 2> grad_r;
  std::array<std::vector<RealField>, 2> grad_lap_r;

  SnapDeriv(const SpinorGridWaveFunction& psi, bool with_second) {
    const UniformGrid& g = psi.plus.grid;
    dim = g.dim;
    n = g.size();
    const GridWaveFunction* comps[2] = {&psi.plus, &psi.minus};
    for (int c = 0; c < 2; ++c) {
      const GridWaveFunction& f = *comps[c];
      std::vector<GridWaveFunction> d1;
      for (int ax = 0; ax < dim; ++ax)
        d1.push_back(gradient(f, ax, DerivMethod::spectral));
      L[c].assign(dim, std::vector<cplx>(n, cplx(0, 0)));
      for (int ax = 0; ax < dim; ++ax)
        for (std::size_t i = 0; i < n; ++i)
          if (!f.node_mask[i]) L[c][ax][i] = d1[ax].amp[i] / f.amp[i];
      if (with_second) {
        D2[c].assign(std::size_t(dim) * dim, std::vector<cplx>(n, cplx(0, 0)));
        for (int j = 0; j < dim; ++j)
          for (int k = 0; k <= j; ++k) {
            GridWaveFunction djk = gradient(d1[j], k, DerivMethod::spectral);
            for (std::size_t i = 0; i < n; ++i) {
              if (f.node_mask[i]) continue;
              const cplx val = djk.amp[i] / f.amp[i] - L[c][j][i] * L[c][k][i];
              D2[c][std::size_t(j) * dim + k][i] = val;
              D2[c][std::size_t(k) * dim + j][i] = val;
            }
          }
      }
      r[c].resize(n);
      for (std::size_t i = 0; i < n; ++i) r[c][i] = std::abs(f.amp[i]);
      lap_r[c] = real_laplacian(g, r[c]);
      grad_r[c].resize(dim);
      grad_lap_r[c].resize(dim);
      for (int ax = 0; ax < dim; ++ax) {
        grad_r[c][ax] = real_gradient(g, r[c], ax);
        grad_lap_r[c][ax] = real_gradient(g, lap_r[c], ax);
      }
    }
  }

  // grad_j Q_c at point i (0 on the channel mask)
  double grad_q(int c, int j, std::size_t i, const MaskField& mask) const {
    if (mask[i]) return 0.0;
    const double rr = r[c][i];
    return -0.5 * grad_lap_r[c][j][i] / rr +
           0.5 * lap_r[c][i] * grad_r[c][j][i] / (rr * rr);
  }

  // grad_j of the active-channel spin pair (ds1, ds2) at point i
  // channel 0: z = psi_-/(2 psi_+), ds1 = Re dz, ds2 = Im dz
  // channel 1: w = psi_+/(2 psi_-), ds1 = Re dw, ds2 = -Im dw
  std::array<double, 2> grad_s(int c, int j, std::size_t i, cplx ratio) const {
    const cplx diff = c == 0 ? (L[1][j][i] - L[0][j][i])
                             : (L[0][j][i] - L[1][j][i]);
    const cplx d = ratio * diff;
    return c == 0 ? std::array<double, 2>{d.real(), d.imag()}
                  : std::array<double, 2>{d.real(), -d.imag()};
  }
};

// spectral derivative table d_k A_j, built once per snapshot scan
std::vector<RealField> grad_a_table(const UniformGrid& g, const FieldConfig& cfg) {
  std::vector<RealField> out;
  if (!cfg.has_A()) return out;
  out.resize(std::size_t(g.dim) * g.dim);
  for (int j = 0; j < g.dim; ++j)
    for (int k = 0; k < g.dim; ++k)
      out[std::size_t(j) * g.dim + k] = real_gradient(g, cfg.A[j], k);
  return out;
}

// central-difference derivative of a sampled potential (exact for the
// polynomial potentials used in scenarios)
double cd_deriv(const UniformGrid& g, const RealField& f, std::size_t i, int ax) {
  auto c = g.unflatten(i);
  auto up = c, dn = c;
  up[ax] = (c[ax] + 1) % g.n;
  dn[ax] = (c[ax] - 1 + g.n) % g.n;
  return (f[g.flatten(up)] - f[g.flatten(dn)]) / (2.0 * g.spacing());
}

std::array<double, 3> spin_vec(const ChannelFields& cf, int c, std::size_t i) {
  return {cf.s1[c][i], cf.s2[c][i], c == 0 ? 0.5 : -0.5};
}

inline std::array<double, 3> cross3(const std::array<double, 3>& a,
                                    const std::array<double, 3>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

}  // namespace

double ChannelFields::spin_constraint_residual() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < well.size(); ++i) {
    if (!well[i]) continue;
    const double dot =
        s1[0][i] * s1[1][i] + s2[0][i] * s2[1][i] - 0.25;  // S+.S- = 0
    const double crossz = s1[0][i] * s2[1][i] - s2[0][i] * s1[1][i];
    worst = std::max(worst, std::abs(dot));
    worst = std::max(worst, std::abs(crossz));
    const double sp2 = s1[0][i] * s1[0][i] + s2[0][i] * s2[0][i];
    worst = std::max(worst, std::abs(s1[1][i] - 0.25 * s1[0][i] / sp2) /
                                (1.0 + std::abs(s1[1][i])));
    worst = std::max(worst, std::abs(s2[1][i] - 0.25 * s2[0][i] / sp2) /
                                (1.0 + std::abs(s2[1][i])));
  }
  return worst;
}

ChannelFields pauli_cond_fields(const SpinorGridWaveFunction& psi,
                                const FieldConfig& config) {
  const UniformGrid& g = psi.plus.grid;
  const int dim = g.dim;
  const std::size_t n = g.size();
  ChannelFields cf;
  cf.grid = g;
  const GridWaveFunction* comps[2] = {&psi.plus, &psi.minus};

  for (int c = 0; c < 2; ++c) {
    const GridWaveFunction& f = *comps[c];
    cf.mask[c] = f.node_mask;
    cf.rho[c] = density(f);
    cf.p[c].resize(dim);
    cf.p_o[c].resize(dim);
    cf.v[c].resize(dim);
    std::vector<GridWaveFunction> d1;
    for (int ax = 0; ax < dim; ++ax)
      d1.push_back(gradient(f, ax, DerivMethod::spectral));
    for (int ax = 0; ax < dim; ++ax) {
      cf.p[c][ax].resize(n);
      cf.p_o[c][ax].resize(n);
      simd::active().imag_quotient(f.amp.data(), d1[ax].amp.data(),
                                   f.node_mask.data(), cf.p[c][ax].data(), n);
      simd::active().real_quotient(f.amp.data(), d1[ax].amp.data(),
                                   f.node_mask.data(), cf.p_o[c][ax].data(), n);
      cf.v[c][ax] = cf.p[c][ax];
      if (config.has_A())
        for (std::size_t i = 0; i < n; ++i) cf.v[c][ax][i] -= config.A[ax][i];
    }
    // quantum potential
    RealField r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = std::abs(f.amp[i]);
    RealField lap_r = real_laplacian(g, r);
    cf.q_pot[c].assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (!f.node_mask[i]) cf.q_pot[c][i] = -0.5 * lap_r[i] / r[i];
    // Bohm energy
    cf.h[c].assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (f.node_mask[i]) continue;
      double kin = 0.0;
      for (int ax = 0; ax < dim; ++ax) kin += cf.v[c][ax][i] * cf.v[c][ax][i];
      cf.h[c][i] = 0.5 * kin + cf.q_pot[c][i] +
                   (config.V.empty() ? 0.0 : config.V[i]);
    }
    // F = rho^-1 div(rho v): divergence of the smooth flux j - rho A
    RealField div_flux(n, 0.0);
    for (int ax = 0; ax < dim; ++ax) {
      RealField flux(n);
      for (std::size_t i = 0; i < n; ++i) {
        flux[i] = (std::conj(f.amp[i]) * d1[ax].amp[i]).imag();
        if (config.has_A()) flux[i] -= cf.rho[c][i] * config.A[ax][i];
      }
      RealField d = real_gradient(g, flux, ax);
      for (std::size_t i = 0; i < n; ++i) div_flux[i] += d[i];
    }
    cf.f_div[c].assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (!f.node_mask[i]) cf.f_div[c][i] = div_flux[i] / cf.rho[c][i];
  }

  // pointwise conditional spin per channel
  for (int c = 0; c < 2; ++c) {
    cf.s1[c].assign(n, 0.0);
    cf.s2[c].assign(n, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!psi.plus.node_mask[i]) {
      const cplx z = psi.minus.amp[i] / (2.0 * psi.plus.amp[i]);
      cf.s1[0][i] = z.real();
      cf.s2[0][i] = z.imag();
    }
    if (!psi.minus.node_mask[i]) {
      const cplx w = psi.plus.amp[i] / (2.0 * psi.minus.amp[i]);
      cf.s1[1][i] = w.real();
      cf.s2[1][i] = -w.imag();
    }
  }

  cf.x_diff.resize(dim);
  cf.y_diff.resize(dim);
  for (int ax = 0; ax < dim; ++ax) {
    cf.x_diff[ax].resize(n);
    cf.y_diff[ax].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      cf.x_diff[ax][i] = cf.p[1][ax][i] - cf.p[0][ax][i];
      cf.y_diff[ax][i] = cf.p_o[1][ax][i] - cf.p_o[0][ax][i];
    }
  }

  cf.well.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (psi.plus.node_mask[i] || psi.minus.node_mask[i]) continue;
    if (cf.rho[0][i] <= kWellRhoFloor || cf.rho[1][i] <= kWellRhoFloor) continue;
    const double sp = std::hypot(cf.s1[0][i], cf.s2[0][i]);
    if (sp < kWellSLow || sp > kWellSHigh) continue;
    cf.well[i] = 1;
  }
  return cf;
}

namespace {

struct RhsFirstOrder {
  double s1, s2, rho;
  std::array<double, 3> p;
};

// right sides of the first-order system for channel c at point i
RhsFirstOrder rhs_first_order(const ChannelFields& cf, const SnapDeriv& sd,
                   const FieldConfig& config, const SpinCoupling& coupling,
                   double t, std::size_t i, int c,
                   const std::vector<RealField>* grad_b3,
                   const std::vector<RealField>& grad_a) {
  const int dim = cf.grid.dim;
  const double sign = c == 0 ? 1.0 : -1.0;
  const auto b = coupling.at(t, i);
  const auto s = spin_vec(cf, c, i);
  const auto bxs = cross3(b, s);
  const double s_norm2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
  const double f_diff = cf.f_div[0][i] - cf.f_div[1][i];
  const double h_diff = cf.h[0][i] - cf.h[1][i];

  RhsFirstOrder out{};
  out.s1 = sign * 0.5 * f_diff * cf.s1[c][i] - h_diff * cf.s2[c][i] -
           sign * 2.0 * bxs[2] * cf.s1[c][i] + bxs[0] - sign * b[1] * s_norm2;
  out.s2 = h_diff * cf.s1[c][i] + sign * 0.5 * f_diff * cf.s2[c][i] -
           sign * 2.0 * bxs[2] * cf.s2[c][i] + bxs[1] + sign * b[0] * s_norm2;
  out.rho = -cf.f_div[c][i] + sign * 2.0 * bxs[2];

  // -grad(h_c + B.S_c)
  const cplx ratio = c == 0 ? cplx(cf.s1[0][i], cf.s2[0][i])
                            : cplx(cf.s1[1][i], -cf.s2[1][i]);
  for (int j = 0; j < dim; ++j) {
    double grad_h = sd.grad_q(c, j, i, cf.mask[c]);
    if (!config.V.empty()) grad_h += cd_deriv(cf.grid, config.V, i, j);
    for (int k = 0; k < dim; ++k) {
      double dv = sd.D2[c][std::size_t(k) * dim + j][i].imag();
      if (config.has_A()) dv -= grad_a[std::size_t(k) * dim + j][i];
      grad_h += cf.v[c][k][i] * dv;
    }
    double grad_bs = 0.0;
    const auto ds = sd.grad_s(c, j, i, ratio);
    grad_bs += b[0] * ds[0] + b[1] * ds[1];
    if (grad_b3) grad_bs += (*grad_b3)[j][i] * s[2];
    out.p[j] = -(grad_h + grad_bs);
  }
  return out;
}

}  // namespace

namespace {
// time-residual scans additionally require a relative density floor: the
// crank-nicolson solver tolerance enters the fields as noise ~ eps/|psi| and
// is divided by dt in the time differences, so the fixed 1e-8 constraint
// floor does not converge under refinement
MaskField residual_scan_mask(const ChannelFields& cf, double rel = 1e-4) {
  double mx[2] = {0.0, 0.0};
  for (int c = 0; c < 2; ++c)
    for (double r : cf.rho[c]) mx[c] = std::max(mx[c], r);
  MaskField keep(cf.well.size(), 0);
  for (std::size_t i = 0; i < keep.size(); ++i)
    keep[i] = cf.well[i] && cf.rho[0][i] >= rel * mx[0] &&
                      cf.rho[1][i] >= rel * mx[1]
                  ? 1
                  : 0;
  return keep;
}
}  // namespace

ResidualReport first_order_system_residual(const SpinorTrace& trace, std::size_t s_idx) {
  if (s_idx == 0 || s_idx + 1 >= trace.snapshots.size())
    throw std::invalid_argument("first_order_system_residual: need interior snapshot");
  const double dt2 = trace.times[s_idx + 1] - trace.times[s_idx - 1];
  ChannelFields fm = pauli_cond_fields(trace.snapshots[s_idx - 1], trace.config);
  ChannelFields f0 = pauli_cond_fields(trace.snapshots[s_idx], trace.config);
  ChannelFields fp = pauli_cond_fields(trace.snapshots[s_idx + 1], trace.config);
  SnapDeriv sd(trace.snapshots[s_idx], true);
  const int dim = f0.grid.dim;
  const double t = trace.times[s_idx];
  const std::vector<RealField> grad_a = grad_a_table(f0.grid, trace.config);
  MaskField keep = residual_scan_mask(f0);

  std::vector<RealField> grad_b3;
  const std::vector<RealField>* gb3 = nullptr;
  if (trace.coupling.spatial()) {
    grad_b3.resize(dim);
    for (int ax = 0; ax < dim; ++ax)
      grad_b3[ax] = real_gradient(f0.grid, trace.coupling.b3, ax);
    gb3 = &grad_b3;
  }

  ResidualReport rep;
  for (std::size_t i = 0; i < f0.well.size(); ++i) {
    if (!keep[i] || !fm.well[i] || !fp.well[i]) continue;
    for (int c = 0; c < 2; ++c) {
      RhsFirstOrder rhs = rhs_first_order(f0, sd, trace.config, trace.coupling, t, i, c, gb3,
                               grad_a);
      const double r1 =
          std::abs((fp.s1[c][i] - fm.s1[c][i]) / dt2 - rhs.s1);
      const double r2 =
          std::abs((fp.s2[c][i] - fm.s2[c][i]) / dt2 - rhs.s2);
      const double rr =
          std::abs((fp.rho[c][i] - fm.rho[c][i]) / dt2 / f0.rho[c][i] - rhs.rho);
      double rp = 0.0;
      for (int j = 0; j < dim; ++j)
        rp = std::max(rp, std::abs((fp.p[c][j][i] - fm.p[c][j][i]) / dt2 -
                                   rhs.p[j]));
      rep.by_equation[0] = std::max(rep.by_equation[0], r1);
      rep.by_equation[1] = std::max(rep.by_equation[1], r2);
      rep.by_equation[2] = std::max(rep.by_equation[2], rp);
      rep.by_equation[3] = std::max(rep.by_equation[3], rr);
    }
  }
  rep.max_residual = std::max(std::max(rep.by_equation[0], rep.by_equation[1]),
                              std::max(rep.by_equation[2], rep.by_equation[3]));
  return rep;
}

ResidualReport channel_dynamics_residual(const SpinorTrace& trace,
                                         std::size_t s_idx, int channel) {
  if (s_idx == 0 || s_idx + 1 >= trace.snapshots.size())
    throw std::invalid_argument("channel_dynamics_residual: interior snapshot");
  const int c = channel;
  const double sign = c == 0 ? 1.0 : -1.0;
  const double dt2 = trace.times[s_idx + 1] - trace.times[s_idx - 1];
  ChannelFields fm = pauli_cond_fields(trace.snapshots[s_idx - 1], trace.config);
  ChannelFields f0 = pauli_cond_fields(trace.snapshots[s_idx], trace.config);
  ChannelFields fp = pauli_cond_fields(trace.snapshots[s_idx + 1], trace.config);
  SnapDeriv sd(trace.snapshots[s_idx], true);
  const UniformGrid& g = f0.grid;
  const int dim = g.dim;
  const double t = trace.times[s_idx];
  const std::vector<RealField> grad_a = grad_a_table(g, trace.config);
  MaskField keep = residual_scan_mask(f0);

  std::vector<RealField> grad_b3;
  const std::vector<RealField>* gb3 = nullptr;
  if (trace.coupling.spatial()) {
    grad_b3.resize(dim);
    for (int ax = 0; ax < dim; ++ax)
      grad_b3[ax] = real_gradient(g, trace.coupling.b3, ax);
    gb3 = &grad_b3;
  }

  ResidualReport rep;
  for (std::size_t i = 0; i < f0.well.size(); ++i) {
    if (!keep[i] || !fm.well[i] || !fp.well[i]) continue;
    const auto b = trace.coupling.at(t, i);
    const auto s = spin_vec(f0, c, i);
    const auto bxs = cross3(b, s);
    const double s_norm2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
    const cplx ratio = c == 0 ? cplx(f0.s1[0][i], f0.s2[0][i])
                              : cplx(f0.s1[1][i], -f0.s2[1][i]);

    // grad s and the diffusion-like terms
    std::array<std::array<double, 2>, 3> ds{};  // [axis][component]
    for (int j = 0; j < dim; ++j) ds[j] = sd.grad_s(c, j, i, ratio);
    // laplacian of the ratio: z [ sum (Lm-Lp)^2 + D2m_jj - D2p_jj ]
    cplx lap_ratio(0, 0);
    for (int j = 0; j < dim; ++j) {
      const cplx diff = c == 0 ? (sd.L[1][j][i] - sd.L[0][j][i])
                               : (sd.L[0][j][i] - sd.L[1][j][i]);
      const cplx dd = c == 0
                          ? (sd.D2[1][std::size_t(j) * dim + j][i] -
                             sd.D2[0][std::size_t(j) * dim + j][i])
                          : (sd.D2[0][std::size_t(j) * dim + j][i] -
                             sd.D2[1][std::size_t(j) * dim + j][i]);
      lap_ratio += diff * diff + dd;
    }
    lap_ratio *= ratio;
    const double lap_s1 = c == 0 ? lap_ratio.real() : lap_ratio.real();
    const double lap_s2 = c == 0 ? lap_ratio.imag() : -lap_ratio.imag();
    // rho^-1 div(rho grad s) = lap s + 2 p_O . grad s
    double diff_s1 = lap_s1, diff_s2 = lap_s2;
    for (int j = 0; j < dim; ++j) {
      diff_s1 += 2.0 * f0.p_o[c][j][i] * ds[j][0];
      diff_s2 += 2.0 * f0.p_o[c][j][i] * ds[j][1];
    }

    // material derivatives
    double dts1 = (fp.s1[c][i] - fm.s1[c][i]) / dt2;
    double dts2 = (fp.s2[c][i] - fm.s2[c][i]) / dt2;
    double dtrho = (fp.rho[c][i] - fm.rho[c][i]) / dt2;
    for (int j = 0; j < dim; ++j) {
      dts1 += f0.v[c][j][i] * ds[j][0];
      dts2 += f0.v[c][j][i] * ds[j][1];
      dtrho += f0.v[c][j][i] * 2.0 * f0.p_o[c][j][i] * f0.rho[c][i];
    }

    const double rhs1 = -sign * 0.5 * diff_s2 - sign * 2.0 * bxs[2] * s[0] +
                        bxs[0] - sign * b[1] * s_norm2;
    const double rhs2 = sign * 0.5 * diff_s1 - sign * 2.0 * bxs[2] * s[1] +
                        bxs[1] + sign * b[0] * s_norm2;
    rep.by_equation[0] = std::max(rep.by_equation[0], std::abs(dts1 - rhs1));
    rep.by_equation[1] = std::max(rep.by_equation[1], std::abs(dts2 - rhs2));

    // momentum: D_t v = -grad(V + Q + B.S) + v x B - dA/dt
    for (int j = 0; j < dim; ++j) {
      double dtv = (fp.v[c][j][i] - fm.v[c][j][i]) / dt2;
      for (int k = 0; k < dim; ++k) {
        double dvk = sd.D2[c][std::size_t(j) * dim + k][i].imag();
        if (trace.config.has_A()) dvk -= grad_a[std::size_t(j) * dim + k][i];
        dtv += f0.v[c][k][i] * dvk;
      }
      double grad = sd.grad_q(c, j, i, f0.mask[c]);
      if (!trace.config.V.empty()) grad += cd_deriv(g, trace.config.V, i, j);
      const auto dsj = ds[j];
      grad += b[0] * dsj[0] + b[1] * dsj[1];
      if (gb3) grad += (*gb3)[j][i] * s[2];
      std::array<double, 3> v3{0, 0, 0};
      for (int k = 0; k < dim; ++k) v3[k] = f0.v[c][k][i];
      const auto vxb = cross3(v3, b);
      const double rhs = -grad + vxb[j];
      rep.by_equation[2] = std::max(rep.by_equation[2], std::abs(dtv - rhs));
    }

    // density: rho^-1 D_t rho = -div v + sign 2 (B x S)_3
    double divv = 0.0;
    for (int j = 0; j < dim; ++j) {
      divv += sd.D2[c][std::size_t(j) * dim + j][i].imag();
      if (trace.config.has_A()) divv -= grad_a[std::size_t(j) * dim + j][i];
    }
    const double rhsr = -divv + sign * 2.0 * bxs[2];
    rep.by_equation[3] = std::max(rep.by_equation[3],
                                  std::abs(dtrho / f0.rho[c][i] - rhsr));
  }
  rep.max_residual = std::max(std::max(rep.by_equation[0], rep.by_equation[1]),
                              std::max(rep.by_equation[2], rep.by_equation[3]));
  return rep;
}

GradientRelationsReport gradient_relations_check(const ChannelFields& cf) {
  const UniformGrid& g = cf.grid;
  const int dim = g.dim;
  GradientRelationsReport rep;
  // independent derivative route: spectral differentiation of the sampled
  // s-fields (valid for states whose component ratio stays bounded)
  std::vector<RealField> ds1(dim), ds2(dim);
  for (int ax = 0; ax < dim; ++ax) {
    ds1[ax] = real_gradient(g, cf.s1[0], ax);
    ds2[ax] = real_gradient(g, cf.s2[0], ax);
  }
  for (std::size_t i = 0; i < cf.well.size(); ++i) {
    if (!cf.well[i]) continue;
    const double sp2 = cf.s1[0][i] * cf.s1[0][i] + cf.s2[0][i] * cf.s2[0][i];
    for (int ax = 0; ax < dim; ++ax) {
      const double x = cf.x_diff[ax][i], y = cf.y_diff[ax][i];
      const double xq =
          (cf.s1[0][i] * ds2[ax][i] - cf.s2[0][i] * ds1[ax][i]) / sp2;
      const double yq =
          (cf.s1[0][i] * ds1[ax][i] + cf.s2[0][i] * ds2[ax][i]) / sp2;
      const double scale = 1.0 + std::abs(x) + std::abs(y);
      rep.x_residual = std::max(rep.x_residual, std::abs(x - xq) / scale);
      rep.y_residual = std::max(rep.y_residual, std::abs(y - yq) / scale);
      // pre-solved linear system
      const double r1 = ds1[ax][i] - (cf.s1[0][i] * y - cf.s2[0][i] * x);
      const double r2 = ds2[ax][i] - (cf.s1[0][i] * x + cf.s2[0][i] * y);
      rep.presolved_residual =
          std::max(rep.presolved_residual,
                   std::max(std::abs(r1), std::abs(r2)) / scale);
      // 2x2 solve for (X, Y) from the measured gradients
      const double det = sp2;
      const double xs =
          (cf.s1[0][i] * ds2[ax][i] - cf.s2[0][i] * ds1[ax][i]) / det;
      const double ys =
          (cf.s2[0][i] * ds2[ax][i] + cf.s1[0][i] * ds1[ax][i]) / det;
      rep.solve_residual = std::max(
          rep.solve_residual,
          std::max(std::abs(xs - x), std::abs(ys - y)) / scale);
    }
  }
  return rep;
}

AlternativeDifferenceReport alternative_difference_identities(
    const ChannelFields& cf) {
  const UniformGrid& g = cf.grid;
  const int dim = g.dim;
  AlternativeDifferenceReport rep;
  // sampled norm field ||S'_+|| and its spectral derivatives (valid for
  // states with a bounded component ratio, as in gradient_relations_check)
  RealField norm_s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    norm_s[i] = std::hypot(cf.s1[0][i], cf.s2[0][i]);
  std::vector<RealField> dnorm(dim);
  for (int ax = 0; ax < dim; ++ax) dnorm[ax] = real_gradient(g, norm_s, ax);
  RealField lap_norm = real_laplacian(g, norm_s);

  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!cf.well[i]) continue;
    double ydotpo = 0.0;
    for (int ax = 0; ax < dim; ++ax) {
      const double osm = dnorm[ax][i] / norm_s[i];
      rep.osmotic_form_residual = std::max(
          rep.osmotic_form_residual,
          std::abs(cf.y_diff[ax][i] - osm) /
              (1.0 + std::abs(cf.y_diff[ax][i])));
      ydotpo += cf.y_diff[ax][i] * cf.p_o[0][ax][i];
    }
    const double lhs = cf.q_pot[0][i] - cf.q_pot[1][i];
    const double rhs = ydotpo + 0.5 * lap_norm[i] / norm_s[i];
    rep.q_difference_residual =
        std::max(rep.q_difference_residual,
                 std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
  }
  return rep;
}

TwoFluidDiagnostics two_fluid_diagnostics(const SpinorTrace& trace,
                                          std::size_t s_idx) {
  if (s_idx == 0 || s_idx + 1 >= trace.snapshots.size())
    throw std::invalid_argument("two_fluid_diagnostics: interior snapshot");
  const SpinorGridWaveFunction& psi = trace.snapshots[s_idx];
  const UniformGrid& g = psi.plus.grid;
  const int dim = g.dim;
  const std::size_t n = g.size();
  const double dt2 = trace.times[s_idx + 1] - trace.times[s_idx - 1];
  const double t = trace.times[s_idx];
  ChannelFields fm = pauli_cond_fields(trace.snapshots[s_idx - 1], trace.config);
  ChannelFields f0 = pauli_cond_fields(trace.snapshots[s_idx], trace.config);
  ChannelFields fp = pauli_cond_fields(trace.snapshots[s_idx + 1], trace.config);
  SnapDeriv sd(psi, true);
  const std::vector<RealField> grad_a = grad_a_table(g, trace.config);
  MaskField keep = residual_scan_mask(f0);

  std::vector<RealField> grad_b3;
  if (trace.coupling.spatial()) {
    grad_b3.resize(dim);
    for (int ax = 0; ax < dim; ++ax)
      grad_b3[ax] = real_gradient(g, trace.coupling.b3, ax);
  }

  TwoFluidDiagnostics d;
  // mass transfer m_pm = pm (B x <S>)_3, <S_j> = psi* S_j psi pointwise
  for (int c = 0; c < 2; ++c) d.m[c].assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = trace.coupling.at(t, i);
    const cplx cr = std::conj(psi.plus.amp[i]) * psi.minus.amp[i];
    const double m = b[0] * cr.imag() - b[1] * cr.real();
    d.m[0][i] = m;
    d.m[1][i] = -m;
  }

  // per-channel transfers, stresses, couples, body terms
  for (int c = 0; c < 2; ++c) {
    const double sign = c == 0 ? 1.0 : -1.0;
    d.i_transfer[c].assign(dim, RealField(n, 0.0));
    d.tau[c].assign(3, RealField(n, 0.0));
    d.stress[c].assign(std::size_t(dim) * dim, RealField(n, 0.0));
    d.couple[c].assign(std::size_t(3) * dim, RealField(n, 0.0));
    d.body_force[c].assign(dim, RealField(n, 0.0));
    d.body_couple[c].assign(3, RealField(n, 0.0));

    // grad rho and second derivatives of rho for the Korteweg stress
    std::vector<RealField> drho(dim);
    for (int ax = 0; ax < dim; ++ax) drho[ax] = real_gradient(g, f0.rho[c], ax);
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k) {
        RealField d2jk = real_gradient(g, drho[j], k);
        for (std::size_t i = 0; i < n; ++i) {
          const double rho = f0.rho[c][i];
          const double quad = rho > 1e-300 ? drho[j][i] * drho[k][i] / rho : 0.0;
          d.stress[c][std::size_t(j) * dim + k][i] =
              0.25 * (d2jk[i] - quad);
        }
      }

    for (std::size_t i = 0; i < n; ++i) {
      const auto b = trace.coupling.at(t, i);
      const auto s = spin_vec(f0, c, i);
      const cplx ratio = c == 0 ? cplx(f0.s1[0][i], f0.s2[0][i])
                                : cplx(f0.s1[1][i], -f0.s2[1][i]);
      const bool ok = !f0.mask[c][i];
      // I = -rho (B1 grad s1 + B2 grad s2)
      for (int j = 0; j < dim; ++j) {
        if (!ok) continue;
        const auto ds = sd.grad_s(c, j, i, ratio);
        d.i_transfer[c][j][i] =
            -f0.rho[c][i] * (b[0] * ds[0] + b[1] * ds[1]);
      }
      // tau = -m S pm (1/4)(rho+ + rho-) e3 x B
      const double trrho = f0.rho[0][i] + f0.rho[1][i];
      const std::array<double, 3> e3xb{-b[1], b[0], 0.0};
      for (int j = 0; j < 3; ++j)
        d.tau[c][j][i] = -d.m[c][i] * s[j] + sign * 0.25 * trrho * e3xb[j];
      // couple stress M: rows (e3 x S) = (-s2, s1, 0), M_jk = sign/2 rho d_k(.)_j
      if (ok)
        for (int k = 0; k < dim; ++k) {
          const auto ds = sd.grad_s(c, k, i, ratio);
          d.couple[c][0 * dim + k][i] = -sign * 0.5 * f0.rho[c][i] * ds[1];
          d.couple[c][1 * dim + k][i] = sign * 0.5 * f0.rho[c][i] * ds[0];
        }
      // body force b = E + v x B - S . grad B ; body couple L = B x S
      std::array<double, 3> v3{0, 0, 0};
      for (int k = 0; k < dim; ++k) v3[k] = f0.v[c][k][i];
      const auto vxb = cross3(v3, b);
      for (int j = 0; j < dim; ++j) {
        double bf = vxb[j];
        if (!trace.config.V.empty()) bf -= cd_deriv(g, trace.config.V, i, j);
        if (trace.coupling.spatial()) bf -= s[2] * grad_b3[j][i];
        d.body_force[c][j][i] = bf;
      }
      const auto bxs = cross3(b, s);
      for (int j = 0; j < 3; ++j) d.body_couple[c][j][i] = bxs[j];
    }
  }

  // sum rules (pointwise, all points)
  for (std::size_t i = 0; i < n; ++i) {
    d.mass_sum_rule = std::max(d.mass_sum_rule, std::abs(d.m[0][i] + d.m[1][i]));
    for (int j = 0; j < dim; ++j) {
      const double s = d.m[0][i] * f0.v[0][j][i] + d.i_transfer[0][j][i] +
                       d.m[1][i] * f0.v[1][j][i] + d.i_transfer[1][j][i];
      if (f0.well[i]) {
        d.momentum_sum_rule = std::max(d.momentum_sum_rule, std::abs(s));
        const double dec = d.i_transfer[0][j][i] + d.i_transfer[1][j][i] -
                           d.m[0][i] * (f0.v[1][j][i] - f0.v[0][j][i]);
        d.decomposition_residual =
            std::max(d.decomposition_residual, std::abs(dec));
      }
    }
    for (int j = 0; j < 3; ++j) {
      const auto sp = spin_vec(f0, 0, i);
      const auto sm = spin_vec(f0, 1, i);
      const double s = d.tau[0][j][i] + d.m[0][i] * sp[j] + d.tau[1][j][i] +
                       d.m[1][i] * sm[j];
      if (f0.well[i]) d.torque_sum_rule = std::max(d.torque_sum_rule, std::abs(s));
    }
  }

  // balance laws on well-conditioned points
  for (int c = 0; c < 2; ++c) {
    // div T and div M (spectral on the assembled smooth fields)
    std::vector<RealField> divT(dim, RealField(n, 0.0));
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k) {
        RealField dk = real_gradient(g, d.stress[c][std::size_t(j) * dim + k], k);
        for (std::size_t i = 0; i < n; ++i) divT[j][i] += dk[i];
      }
    std::vector<RealField> divM(3, RealField(n, 0.0));
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < dim; ++k) {
        RealField dk = real_gradient(g, d.couple[c][std::size_t(j) * dim + k], k);
        for (std::size_t i = 0; i < n; ++i) divM[j][i] += dk[i];
      }
    // mass flux divergence
    RealField divflux(n, 0.0);
    for (int ax = 0; ax < dim; ++ax) {
      RealField flux(n);
      for (std::size_t i = 0; i < n; ++i)
        flux[i] = f0.rho[c][i] * f0.v[c][ax][i];
      RealField dk = real_gradient(g, flux, ax);
      for (std::size_t i = 0; i < n; ++i) divflux[i] += dk[i];
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i] || !fm.well[i] || !fp.well[i]) continue;
      // mass balance
      const double dtrho = (fp.rho[c][i] - fm.rho[c][i]) / dt2;
      d.mass_balance = std::max(
          d.mass_balance, std::abs(dtrho + divflux[i] - d.m[c][i]));
      // momentum balance: rho D_t v = div T + rho b + I
      const cplx ratio = c == 0 ? cplx(f0.s1[0][i], f0.s2[0][i])
                                : cplx(f0.s1[1][i], -f0.s2[1][i]);
      for (int j = 0; j < dim; ++j) {
        double dtv = (fp.v[c][j][i] - fm.v[c][j][i]) / dt2;
        for (int k = 0; k < dim; ++k) {
          double dvk = sd.D2[c][std::size_t(j) * dim + k][i].imag();
          if (trace.config.has_A())
            dvk -= grad_a[std::size_t(j) * dim + k][i];
          dtv += f0.v[c][k][i] * dvk;
        }
        const double lhs = f0.rho[c][i] * dtv;
        const double rhs = divT[j][i] +
                           f0.rho[c][i] * d.body_force[c][j][i] +
                           d.i_transfer[c][j][i];
        d.momentum_balance = std::max(d.momentum_balance, std::abs(lhs - rhs));
        // Takabayasi: -rho grad Q = (div T)_j
        const double gq = -f0.rho[c][i] * sd.grad_q(c, j, i, f0.mask[c]);
        d.takabayasi_residual =
            std::max(d.takabayasi_residual, std::abs(gq - divT[j][i]));
      }
      // spin balance: rho D_t S = div M + tau + rho L
      for (int j = 0; j < 3; ++j) {
        double dts;
        if (j == 0)
          dts = (fp.s1[c][i] - fm.s1[c][i]) / dt2;
        else if (j == 1)
          dts = (fp.s2[c][i] - fm.s2[c][i]) / dt2;
        else
          dts = 0.0;
        for (int k = 0; k < dim; ++k) {
          const auto ds = sd.grad_s(c, k, i, ratio);
          if (j == 0) dts += f0.v[c][k][i] * ds[0];
          if (j == 1) dts += f0.v[c][k][i] * ds[1];
        }
        const double lhs = f0.rho[c][i] * dts;
        const double rhs = divM[j][i] + d.tau[c][j][i] +
                           f0.rho[c][i] * d.body_couple[c][j][i];
        d.spin_balance = std::max(d.spin_balance, std::abs(lhs - rhs));
      }
    }
  }
  return d;
}

BeableSimStats beable_flow_jump_sim(const SpinorTrace& trace, const APolicy& pol,
                                    int n_paths, std::uint64_t seed,
                                    int substeps) {
  const UniformGrid& g = trace.snapshots.front().plus.grid;
  if (g.dim != 1)
    throw std::invalid_argument("beable_flow_jump_sim: 1-d scenarios");
  const std::size_t n = g.size();
  const std::size_t n_snap = trace.snapshots.size();

  // per-snapshot velocity and rate fields
  std::vector<std::array<RealField, 2>> vels(n_snap), rates(n_snap);
  bool capped = false;
  const double rate_cap = 1e4;
  for (std::size_t s = 0; s < n_snap; ++s) {
    ChannelFields cf = pauli_cond_fields(trace.snapshots[s], trace.config);
    const double t = trace.times[s];
    vels[s][0] = cf.v[0][0];
    vels[s][1] = cf.v[1][0];
    rates[s][0].assign(n, 0.0);  // + -> - rate q_-+
    rates[s][1].assign(n, 0.0);  // - -> + rate q_+-
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = trace.coupling.at(t, i);
      const cplx cr = std::conj(trace.snapshots[s].plus.amp[i]) *
                      trace.snapshots[s].minus.amp[i];
      const double flux = b[0] * cr.imag() - b[1] * cr.real();
      double a = std::abs(flux);
      if (pol.kind == APolicy::Kind::offset) a += pol.value;
      if (pol.kind == APolicy::Kind::fixed) a = std::max(pol.value, a);
      const double rp = cf.rho[0][i], rm = cf.rho[1][i];
      double qmp = rp > 1e-14 ? (a - flux) / (2.0 * rp) : 0.0;
      double qpm = rm > 1e-14 ? (a + flux) / (2.0 * rm) : 0.0;
      qmp = std::clamp(qmp, 0.0, rate_cap);
      qpm = std::clamp(qpm, 0.0, rate_cap);
      if (qmp == rate_cap || qpm == rate_cap) capped = true;
      rates[s][0][i] = qmp;
      rates[s][1][i] = qpm;
    }
  }

  // initial joint sampling from rho_pm(x, 0)
  ChannelFields cf0 = pauli_cond_fields(trace.snapshots.front(), trace.config);
  std::vector<double> cdf(2 * n + 1, 0.0);
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < n; ++i)
      cdf[std::size_t(c) * n + i + 1] =
          cdf[std::size_t(c) * n + i] + cf0.rho[c][i] * g.cell_volume();
  const double total = cdf.back();

  // direct 1-d linear interpolation (hot path of the path loop)
  const double inv_h = 1.0 / g.spacing();
  const double half_l = 0.5 * g.length;
  auto interp_field = [&](const RealField& f, double x) {
    double u = (x + half_l) * inv_h;
    u -= std::floor(u / double(n)) * double(n);
    const std::size_t i0 = std::min<std::size_t>(std::size_t(u), n - 1);
    const std::size_t i1 = (i0 + 1) % n;
    const double w = u - double(i0);
    return (1.0 - w) * f[i0] + w * f[i1];
  };

  std::vector<double> finals_x(n_paths);
  std::vector<int> finals_sheet(n_paths);
  long total_jumps = 0;
  for (int p = 0; p < n_paths; ++p) {
    Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(p));
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t cell = std::min<std::size_t>(
        static_cast<std::size_t>(it - cdf.begin()) - 1, 2 * n - 1);
    int sheet = cell < n ? 0 : 1;
    std::size_t ci = cell % n;
    const double frac =
        (u - cdf[cell]) / std::max(cdf[cell + 1] - cdf[cell], 1e-300);
    double x = g.coord(static_cast<int>(ci)) + frac * g.spacing();

    for (std::size_t s = 0; s + 1 < n_snap; ++s) {
      const double dt = (trace.times[s + 1] - trace.times[s]) / substeps;
      const double vcap = g.length / (10.0 * dt);
      for (int k = 0; k < substeps; ++k) {
        const double w = (k + 0.5) / substeps;
        auto vel = [&](double xx) {
          const double a = interp_field(vels[s][sheet], xx);
          const double b = interp_field(vels[s + 1][sheet], xx);
          return std::clamp((1.0 - w) * a + w * b, -vcap, vcap);
        };
        // RK4 advection on the current sheet
        const double k1 = vel(x);
        const double k2 = vel(x + 0.5 * dt * k1);
        const double k3 = vel(x + 0.5 * dt * k2);
        const double k4 = vel(x + dt * k3);
        x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        const double half = 0.5 * g.length;
        while (x >= half) x -= g.length;
        while (x < -half) x += g.length;
        // jump with the local rate
        const double ra = interp_field(rates[s][sheet], x);
        const double rb = interp_field(rates[s + 1][sheet], x);
        const double rate = std::max((1.0 - w) * ra + w * rb, 0.0);
        if (rng.uniform() < 1.0 - std::exp(-rate * dt)) {
          sheet = 1 - sheet;
          ++total_jumps;
        }
      }
    }
    finals_x[p] = x;
    finals_sheet[p] = sheet;
  }

  // per-sheet KS distances against rho_pm(., T)
  ChannelFields cft = pauli_cond_fields(trace.snapshots.back(), trace.config);
  BeableSimStats out;
  out.rate_capped = capped;
  out.mean_jumps = double(total_jumps) / n_paths;
  double pop_plus = 0.0;
  for (int c = 0; c < 2; ++c) {
    std::vector<double> xs;
    for (int p = 0; p < n_paths; ++p)
      if (finals_sheet[p] == c) xs.push_back(finals_x[p]);
    if (c == 0) pop_plus = double(xs.size()) / n_paths;
    std::sort(xs.begin(), xs.end());
    std::vector<double> cdft(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      cdft[i + 1] = cdft[i] + cft.rho[c][i] * g.cell_volume();
    const double tot = cdft.back();
    double ks = 0.0;
    for (std::size_t p = 0; p < xs.size(); ++p) {
      double uu = (xs[p] + 0.5 * g.length) / g.spacing();
      uu = std::clamp(uu, 0.0, double(n));
      const std::size_t cell2 = std::min<std::size_t>(
          static_cast<std::size_t>(uu), n - 1);
      const double fr = uu - double(cell2);
      const double fe =
          (cdft[cell2] + fr * (cdft[cell2 + 1] - cdft[cell2])) / tot;
      ks = std::max(ks, std::abs(fe - double(p) / xs.size()));
      ks = std::max(ks, std::abs(fe - double(p + 1) / xs.size()));
    }
    if (c == 0)
      out.ks_plus = ks;
    else
      out.ks_minus = ks;
  }
  double rho_plus_int = 0.0;
  for (std::size_t i = 0; i < n; ++i) rho_plus_int += cft.rho[0][i];
  rho_plus_int *= g.cell_volume();
  out.pop_plus_err = std::abs(pop_plus - rho_plus_int);
  return out;
}

double mixing_identity_residual(const SpinorGridWaveFunction& psi,
                                const FieldConfig& config) {
  ChannelFields cf = pauli_cond_fields(psi, config);
  SpinorOpApply p0 = spinor_componentwise(momentum_op(0));
  SpinorCondExp xo = cond_exp_spinor(p0, psi, SpinorConditioning::x_only);
  double worst = 0.0;
  for (std::size_t i = 0; i < cf.well.size(); ++i) {
    if (!cf.well[i] || xo.mask_x_only[i]) continue;
    const double mix =
        (cf.rho[0][i] * cf.p[0][0][i] + cf.rho[1][i] * cf.p[1][0][i]) /
        (cf.rho[0][i] + cf.rho[1][i]);
    worst = std::max(worst, std::abs(xo.x_only[i] - mix));
  }
  return worst;
}

std::array<double, 2> probability_bookkeeping(const SpinorTrace& trace,
                                              std::size_t s_idx) {
  const UniformGrid& g = trace.snapshots.front().plus.grid;
  const double dt2 = trace.times[s_idx + 1] - trace.times[s_idx - 1];
  ChannelFields fm = pauli_cond_fields(trace.snapshots[s_idx - 1], trace.config);
  ChannelFields f0 = pauli_cond_fields(trace.snapshots[s_idx], trace.config);
  ChannelFields fp = pauli_cond_fields(trace.snapshots[s_idx + 1], trace.config);

  double tot = 0.0, rp_m = 0.0, rp_p = 0.0, m_int = 0.0;
  const double t = trace.times[s_idx];
  for (std::size_t i = 0; i < g.size(); ++i) {
    tot += f0.rho[0][i] + f0.rho[1][i];
    rp_m += fm.rho[0][i];
    rp_p += fp.rho[0][i];
    const auto b = trace.coupling.at(t, i);
    const cplx cr = std::conj(trace.snapshots[s_idx].plus.amp[i]) *
                    trace.snapshots[s_idx].minus.amp[i];
    m_int += b[0] * cr.imag() - b[1] * cr.real();
  }
  const double vol = g.cell_volume();
  return {std::abs(tot * vol - 1.0),
          std::abs((rp_p - rp_m) * vol / dt2 - m_int * vol)};
}

}  // namespace qcx
