#include "qcx/bohm_flow.hpp"

#include <algorithm>
#include <cmath>

#include "qcx/cond_expect.hpp"
#include "qcx/fft.hpp"
#include "qcx/rng.hpp"

namespace qcx {

double interpolate(const UniformGrid& g, const RealField& f, const double* x) {
  const int n = g.n;
  const double h = g.spacing();
  int base[3] = {0, 0, 0};
  double w[3] = {0.0, 0.0, 0.0};
  for (int d = 0; d < g.dim; ++d) {
    double u = (x[d] + 0.5 * g.length) / h;
    u -= std::floor(u / n) * n;
    base[d] = static_cast<int>(std::floor(u)) % n;
    w[d] = u - std::floor(u);
  }
  double acc = 0.0;
  const int corners = 1 << g.dim;
  for (int c = 0; c < corners; ++c) {
    double weight = 1.0;
    std::array<int, 3> idx{0, 0, 0};
    for (int d = 0; d < g.dim; ++d) {
      const int off = (c >> d) & 1;
      idx[d] = (base[d] + off) % n;
      weight *= off ? w[d] : 1.0 - w[d];
    }
    acc += weight * f[g.flatten(idx)];
  }
  return acc;
}

namespace {

// per-snapshot gradient-quotient fields used by the flow integrators
struct FlowSnap {
  std::vector<RealField> p_b;      // d
  std::vector<RealField> grad_vq;  // d: grad(V + Q)
  std::vector<RealField> jac;      // d*d: d_k (p_B)_j at [j*d+k]
};

struct FlowFields {
  const EvolutionTrace& trace;
  std::vector<FlowSnap> snaps;
  std::vector<RealField> grad_a;  // d*d: d_k A_j (static), central differences
  int dim;

  explicit FlowFields(const EvolutionTrace& tr, bool with_jacobian,
                      bool with_force)
      : trace(tr), dim(tr.snapshots.front().grid.dim) {
    const UniformGrid& g = tr.snapshots.front().grid;
    snaps.resize(tr.snapshots.size());
    for (std::size_t s = 0; s < tr.snapshots.size(); ++s) {
      const GridWaveFunction& psi = tr.snapshots[s];
      FlowSnap& fs = snaps[s];
      std::vector<GridWaveFunction> dpsi;
      for (int ax = 0; ax < dim; ++ax)
        dpsi.push_back(gradient(psi, ax, DerivMethod::spectral));
      fs.p_b.resize(dim);
      for (int ax = 0; ax < dim; ++ax) {
        fs.p_b[ax].resize(psi.size());
        simd::active().imag_quotient(psi.amp.data(), dpsi[ax].amp.data(),
                                     psi.node_mask.data(), fs.p_b[ax].data(),
                                     psi.size());
      }
      if (with_force) {
        // grad Q from the smooth field R and its derivatives
        RealField r(psi.size());
        for (std::size_t i = 0; i < psi.size(); ++i) r[i] = std::abs(psi.amp[i]);
        RealField lap_r = real_laplacian(g, r);
        fs.grad_vq.assign(dim, RealField(psi.size(), 0.0));
        for (int ax = 0; ax < dim; ++ax) {
          RealField dr = real_gradient(g, r, ax);
          RealField dlap = real_gradient(g, lap_r, ax);
          for (std::size_t i = 0; i < psi.size(); ++i) {
            if (psi.node_mask[i]) continue;
            fs.grad_vq[ax][i] = -0.5 * dlap[i] / r[i] +
                                0.5 * lap_r[i] * dr[i] / (r[i] * r[i]);
          }
          if (!tr.config.V.empty()) {
            // central differences are exact for the polynomial potentials used
            const double inv2h = 1.0 / (2.0 * g.spacing());
            for (std::size_t i = 0; i < psi.size(); ++i) {
              auto c = g.unflatten(i);
              auto up = c, dn = c;
              up[ax] = (c[ax] + 1) % g.n;
              dn[ax] = (c[ax] - 1 + g.n) % g.n;
              fs.grad_vq[ax][i] +=
                  (tr.config.V[g.flatten(up)] - tr.config.V[g.flatten(dn)]) * inv2h;
            }
          }
        }
      }
      if (with_jacobian) {
        fs.jac.assign(static_cast<std::size_t>(dim) * dim,
                      RealField(psi.size(), 0.0));
        RealField rho = density(psi);
        for (int j = 0; j < dim; ++j) {
          for (int k = 0; k < dim; ++k) {
            GridWaveFunction djk = gradient(dpsi[j], k, DerivMethod::spectral);
            RealField& out = fs.jac[static_cast<std::size_t>(j) * dim + k];
            for (std::size_t i = 0; i < psi.size(); ++i) {
              if (psi.node_mask[i]) continue;
              const double im1 =
                  (std::conj(dpsi[k].amp[i]) * dpsi[j].amp[i]).imag();
              const double im2 = (std::conj(psi.amp[i]) * djk.amp[i]).imag();
              const double p_ok =
                  (std::conj(psi.amp[i]) * dpsi[k].amp[i]).real() / rho[i];
              out[i] = (im1 + im2) / rho[i] - fs.p_b[j][i] * 2.0 * p_ok;
            }
          }
        }
      }
    }
    if (trace.config.has_A()) {
      grad_a.assign(static_cast<std::size_t>(dim) * dim, RealField());
      const double inv2h = 1.0 / (2.0 * g.spacing());
      for (int j = 0; j < dim; ++j)
        for (int k = 0; k < dim; ++k) {
          RealField d(g.size(), 0.0);
          for (std::size_t i = 0; i < g.size(); ++i) {
            auto c = g.unflatten(i);
            auto up = c, dn = c;
            up[k] = (c[k] + 1) % g.n;
            dn[k] = (c[k] - 1 + g.n) % g.n;
            d[i] = (trace.config.A[j][g.flatten(up)] -
                    trace.config.A[j][g.flatten(dn)]) *
                   inv2h;
          }
          grad_a[static_cast<std::size_t>(j) * dim + k] = std::move(d);
        }
    }
  }

  const UniformGrid& grid() const { return trace.snapshots.front().grid; }

  // snapshot interval containing t and the linear weight inside it
  void locate(double t, std::size_t& s, double& w) const {
    const auto& times = trace.times;
    if (t <= times.front()) {
      s = 0;
      w = 0.0;
      return;
    }
    if (t >= times.back()) {
      s = times.size() - 2;
      w = 1.0;
      return;
    }
    s = static_cast<std::size_t>(
            std::upper_bound(times.begin(), times.end(), t) - times.begin()) - 1;
    s = std::min(s, times.size() - 2);
    w = (t - times[s]) / (times[s + 1] - times[s]);
  }

  double field_at(const std::vector<RealField> FlowSnap::*member, int comp,
                  const double* x, double t) const {
    std::size_t s;
    double w;
    locate(t, s, w);
    const double a = interpolate(grid(), (snaps[s].*member)[comp], x);
    const double b = interpolate(grid(), (snaps[s + 1].*member)[comp], x);
    return (1.0 - w) * a + w * b;
  }

  std::array<double, 3> p_b_at(const double* x, double t) const {
    std::array<double, 3> v{0, 0, 0};
    for (int d = 0; d < dim; ++d) v[d] = field_at(&FlowSnap::p_b, d, x, t);
    return v;
  }

  std::array<double, 3> a_at(const double* x) const {
    std::array<double, 3> v{0, 0, 0};
    if (trace.config.has_A())
      for (int d = 0; d < dim; ++d)
        v[d] = interpolate(grid(), trace.config.A[d], x);
    return v;
  }
};

}  // namespace

Trajectory guidance_trajectory(const EvolutionTrace& trace,
                               const std::array<double, 3>& x0, bool with_A,
                               int substeps) {
  FlowFields ff(trace, false, false);
  const UniformGrid& g = ff.grid();
  Trajectory out;
  out.times.push_back(trace.times.front());
  out.x.push_back(x0);

  std::array<double, 3> x = x0;
  for (std::size_t s = 0; s + 1 < trace.times.size(); ++s) {
    const double t0 = trace.times[s];
    const double dt = (trace.times[s + 1] - t0) / substeps;
    const double vcap = g.length / (10.0 * dt);
    auto vel = [&](const std::array<double, 3>& pos, double t) {
      std::array<double, 3> v = ff.p_b_at(pos.data(), t);
      if (with_A) {
        auto a = ff.a_at(pos.data());
        for (int d = 0; d < g.dim; ++d) v[d] -= a[d];
      }
      double n2 = 0.0;
      for (int d = 0; d < g.dim; ++d) n2 += v[d] * v[d];
      if (n2 > vcap * vcap) {
        const double sc = vcap / std::sqrt(n2);
        for (int d = 0; d < g.dim; ++d) v[d] *= sc;
        out.velocity_capped = true;
      }
      return v;
    };
    for (int k = 0; k < substeps; ++k) {
      const double t = t0 + k * dt;
      const auto k1 = vel(x, t);
      std::array<double, 3> x2 = x;
      for (int d = 0; d < g.dim; ++d) x2[d] += 0.5 * dt * k1[d];
      const auto k2 = vel(x2, t + 0.5 * dt);
      std::array<double, 3> x3 = x;
      for (int d = 0; d < g.dim; ++d) x3[d] += 0.5 * dt * k2[d];
      const auto k3 = vel(x3, t + 0.5 * dt);
      std::array<double, 3> x4 = x;
      for (int d = 0; d < g.dim; ++d) x4[d] += dt * k3[d];
      const auto k4 = vel(x4, t + dt);
      for (int d = 0; d < g.dim; ++d) {
        x[d] += dt / 6.0 * (k1[d] + 2 * k2[d] + 2 * k3[d] + k4[d]);
        // periodic wrap
        const double half = 0.5 * g.length;
        while (x[d] >= half) x[d] -= g.length;
        while (x[d] < -half) x[d] += g.length;
      }
    }
    out.times.push_back(trace.times[s + 1]);
    out.x.push_back(x);
  }
  return out;
}

double hamilton_residual(const EvolutionTrace& trace, const Trajectory& traj) {
  FlowFields ff(trace, false, true);
  const int dim = ff.dim;
  // pi(t) = p_B(x(t), t) sampled at snapshot times (traj is aligned to them)
  std::vector<std::array<double, 3>> pi(traj.times.size());
  for (std::size_t s = 0; s < traj.times.size(); ++s)
    pi[s] = ff.p_b_at(traj.x[s].data(), traj.times[s]);

  double worst = 0.0;
  for (std::size_t s = 1; s + 1 < traj.times.size(); ++s) {
    const double dt2 = traj.times[s + 1] - traj.times[s - 1];
    for (int j = 0; j < dim; ++j) {
      const double dpi = (pi[s + 1][j] - pi[s - 1][j]) / dt2;
      double rhs = -ff.field_at(&FlowSnap::grad_vq, j, traj.x[s].data(),
                                traj.times[s]);
      if (trace.config.has_A()) {
        const auto a = ff.a_at(traj.x[s].data());
        for (int k = 0; k < dim; ++k)
          rhs += (pi[s][k] - a[k]) *
                 interpolate(ff.grid(),
                             ff.grad_a[static_cast<std::size_t>(k) * dim + j],
                             traj.x[s].data());
      }
      worst = std::max(worst, std::abs(dpi - rhs));
    }
  }
  return worst;
}

DeviationRun constraint_deviation_run(const EvolutionTrace& trace,
                                      const std::array<double, 3>& x0,
                                      const std::array<double, 3>& dpi0,
                                      int substeps) {
  FlowFields ff(trace, true, true);
  const int dim = ff.dim;
  const UniformGrid& g = ff.grid();

  // state y = (x, pi, delta_pi_linear)
  std::array<double, 9> y{};
  for (int d = 0; d < dim; ++d) {
    y[d] = x0[d];
    y[3 + d] = ff.p_b_at(x0.data(), trace.times.front())[d] + dpi0[d];
    y[6 + d] = dpi0[d];
  }

  auto deriv = [&](const std::array<double, 9>& s, double t) {
    std::array<double, 9> d{};
    const double* x = s.data();
    const auto a = ff.a_at(x);
    for (int j = 0; j < dim; ++j) d[j] = s[3 + j] - a[j];  // dx/dt = pi - A
    for (int j = 0; j < dim; ++j) {
      double f = -ff.field_at(&FlowSnap::grad_vq, j, x, t);
      if (trace.config.has_A())
        for (int k = 0; k < dim; ++k)
          f += (s[3 + k] - a[k]) *
               interpolate(g, ff.grad_a[static_cast<std::size_t>(k) * dim + j], x);
      d[3 + j] = f;
    }
    // d(dpi)/dt = -grad(p_B - A)^T dpi: component j gets
    // -sum_k d_j(p_k - A_k) dpi_k
    for (int j = 0; j < dim; ++j) {
      double acc = 0.0;
      for (int k = 0; k < dim; ++k) {
        double djpk =
            ff.field_at(&FlowSnap::jac, k * dim + j, x, t);  // d_j (p_B)_k
        if (trace.config.has_A())
          djpk -= interpolate(g, ff.grad_a[static_cast<std::size_t>(k) * dim + j], x);
        acc -= djpk * s[6 + k];
      }
      d[6 + j] = acc;
    }
    return d;
  };

  DeviationRun run;
  auto record = [&](double t) {
    run.times.push_back(t);
    std::array<double, 3> pos{0, 0, 0}, mom{0, 0, 0};
    std::array<double, 3> actual{0, 0, 0}, lin{0, 0, 0};
    const auto pb = ff.p_b_at(y.data(), t);
    for (int d = 0; d < dim; ++d) {
      pos[d] = y[d];
      mom[d] = y[3 + d];
      actual[d] = y[3 + d] - pb[d];
      lin[d] = y[6 + d];
      run.max_mismatch = std::max(run.max_mismatch, std::abs(actual[d] - lin[d]));
      run.max_actual = std::max(run.max_actual, std::abs(actual[d]));
    }
    run.x.push_back(pos);
    run.pi.push_back(mom);
    run.actual.push_back(actual);
    run.linear.push_back(lin);
  };
  record(trace.times.front());

  for (std::size_t s = 0; s + 1 < trace.times.size(); ++s) {
    const double t0 = trace.times[s];
    const double dt = (trace.times[s + 1] - t0) / substeps;
    for (int k = 0; k < substeps; ++k) {
      const double t = t0 + k * dt;
      const auto k1 = deriv(y, t);
      std::array<double, 9> y2 = y;
      for (int i = 0; i < 9; ++i) y2[i] += 0.5 * dt * k1[i];
      const auto k2 = deriv(y2, t + 0.5 * dt);
      std::array<double, 9> y3 = y;
      for (int i = 0; i < 9; ++i) y3[i] += 0.5 * dt * k2[i];
      const auto k3 = deriv(y3, t + 0.5 * dt);
      std::array<double, 9> y4 = y;
      for (int i = 0; i < 9; ++i) y4[i] += dt * k3[i];
      const auto k4 = deriv(y4, t + dt);
      for (int i = 0; i < 9; ++i)
        y[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
    record(trace.times[s + 1]);
  }
  return run;
}

namespace {

// pointwise trigonometric evaluation of psi and its first two derivatives
// from the DFT coefficients (1-d or 2-d)
struct PsiEvaluator {
  UniformGrid grid;
  std::vector<cplx> coeff;  // DFT(psi)/n^d

  explicit PsiEvaluator(const GridWaveFunction& psi) : grid(psi.grid) {
    coeff = psi.amp;
    fft::forward(grid.dim, grid.n, coeff);
    const double s = 1.0 / static_cast<double>(grid.size());
    for (cplx& c : coeff) c *= s;
  }

  // value, gradient (dim), and Hessian (dim x dim) at x
  void eval(const double* x, cplx& v, cplx* dv, cplx* d2v) const {
    const int n = grid.n;
    std::array<std::vector<cplx>, 2> ph;
    for (int d = 0; d < grid.dim; ++d) {
      ph[d].resize(n);
      const double u = x[d] + 0.5 * grid.length;
      for (int k = 0; k < n; ++k) {
        const double a = grid.momentum(k) * u;
        ph[d][k] = cplx(std::cos(a), std::sin(a));
      }
    }
    v = cplx(0, 0);
    for (int d = 0; d < 3; ++d) dv[d] = cplx(0, 0);
    for (int d = 0; d < 9; ++d) d2v[d] = cplx(0, 0);
    if (grid.dim == 1) {
      for (int k = 0; k < n; ++k) {
        const cplx c = coeff[k] * ph[0][k];
        const double p = grid.momentum(k);
        v += c;
        dv[0] += cplx(0, p) * c;
        d2v[0] += -p * p * c;
      }
    } else {
      for (int k1 = 0; k1 < n; ++k1) {
        cplx r0(0, 0), r1(0, 0), r11(0, 0);
        const cplx* row = coeff.data() + static_cast<std::size_t>(k1) * n;
        for (int k2 = 0; k2 < n; ++k2) {
          const cplx c = row[k2] * ph[1][k2];
          const double p2 = grid.momentum(k2);
          r0 += c;
          r1 += cplx(0, p2) * c;
          r11 += -p2 * p2 * c;
        }
        const double p1 = grid.momentum(k1);
        const cplx f = ph[0][k1];
        v += f * r0;
        dv[0] += cplx(0, p1) * f * r0;
        dv[1] += f * r1;
        d2v[0] += -p1 * p1 * f * r0;
        d2v[1] += cplx(0, p1) * f * r1;
        d2v[3] += cplx(0, p1) * f * r1;
        d2v[4] += f * r11;
      }
    }
  }
};

struct PointFields {
  std::array<double, 3> p_b{};
  std::array<std::array<double, 3>, 3> dp{};  // dp[j][k] = d_k p_j
  double q = 0.0;
};

PointFields point_fields(const PsiEvaluator& ev, const double* x) {
  cplx v, dv[3], d2v[9];
  ev.eval(x, v, dv, d2v);
  PointFields pf;
  const int dim = ev.grid.dim;
  std::array<cplx, 3> lg;  // (grad psi)/psi
  for (int j = 0; j < dim; ++j) lg[j] = dv[j] / v;
  for (int j = 0; j < dim; ++j) pf.p_b[j] = lg[j].imag();
  double div_po = 0.0, po2 = 0.0;
  for (int j = 0; j < dim; ++j) {
    for (int k = 0; k < dim; ++k) {
      const cplx second = d2v[j * 3 + k] / v - lg[j] * lg[k];
      pf.dp[j][k] = second.imag();
      if (j == k) div_po += second.real();
    }
    po2 += lg[j].real() * lg[j].real();
  }
  pf.q = -0.5 * (div_po + po2);
  return pf;
}

}  // namespace

PoissonCheckReport poisson_constraint_check(const EvolutionTrace& trace,
                                            const ScalarFn& V, const VectorFn& A,
                                            int n_samples, std::uint64_t seed) {
  const UniformGrid& g = trace.snapshots.front().grid;
  const int dim = g.dim;
  if (dim > 2)
    throw std::invalid_argument("poisson_constraint_check: dim <= 2");
  std::vector<PsiEvaluator> evals;
  evals.reserve(trace.snapshots.size());
  for (const auto& s : trace.snapshots) evals.emplace_back(s);

  // p_B(x) at snapshot s_idx, component j
  auto p_at = [&](std::size_t s_idx, const double* x, int j) {
    cplx v, dv[3], d2v[9];
    evals[s_idx].eval(x, v, dv, d2v);
    return (dv[j] / v).imag();
  };
  // h(x, pi, t) with t pinned to a snapshot index
  auto h_at = [&](std::size_t s_idx, const double* x, const double* pi) {
    const auto pf = point_fields(evals[s_idx], x);
    const auto a = A(x);
    double kin = 0.0;
    for (int j = 0; j < dim; ++j)
      kin += 0.5 * (pi[j] - a[j]) * (pi[j] - a[j]);
    return kin + V(x) + pf.q;
  };

  Rng rng(seed);
  PoissonCheckReport rep;
  // interior sample band where the state carries amplitude
  const GridWaveFunction& psi0 = trace.snapshots.front();
  RealField rho0 = density(psi0);
  double rho_max = 0.0;
  for (double r : rho0) rho_max = std::max(rho_max, r);

  const double hx = 1e-5 * g.length;
  const double hp = 1e-5;
  const double ht = trace.times[1] - trace.times[0];

  for (int sample = 0; sample < n_samples; ++sample) {
    // sample a supported grid point, then jitter inside the cell
    std::array<double, 3> x{0, 0, 0};
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const std::size_t idx = std::min<std::size_t>(
          static_cast<std::size_t>(rng.uniform() * g.size()), g.size() - 1);
      if (rho0[idx] < 0.05 * rho_max) continue;
      auto c = g.unflatten(idx);
      for (int d = 0; d < dim; ++d)
        x[d] = g.coord(c[d]) + (rng.uniform() - 0.5) * g.spacing();
      break;
    }
    // time pinned to an interior snapshot so t-derivatives use exact snapshots
    const std::size_t s_idx =
        1 + static_cast<std::size_t>(rng.uniform() *
                                     double(trace.snapshots.size() - 2));

    const bool on_shell = sample % 2 == 0;
    std::array<double, 3> pi{};
    const auto pf = point_fields(evals[s_idx], x.data());
    for (int j = 0; j < dim; ++j)
      pi[j] = pf.p_b[j] + (on_shell ? 0.0 : (j == 0 ? 1e-2 : 0.0));

    const auto a = A(x.data());
    std::array<std::array<double, 3>, 3> da{};  // da[j][k] = d_k A_j
    for (int k = 0; k < dim; ++k) {
      std::array<double, 3> xp = x, xm = x;
      xp[k] += hx;
      xm[k] -= hx;
      const auto ap = A(xp.data()), am = A(xm.data());
      for (int j = 0; j < dim; ++j) da[j][k] = (ap[j] - am[j]) / (2 * hx);
    }

    for (int j = 0; j < dim; ++j) {
      // analytic: {k, pi_j - p_j} = -sum_k (pi_k - p_k) d_j (p_k - A_k)
      double analytic = 0.0;
      for (int k = 0; k < dim; ++k)
        analytic -= (pi[k] - pf.p_b[k]) * (pf.dp[k][j] - da[k][j]);

      // finite differences: sum_l dk/dpi_l * dc/dx_l - dk/dx_l * dc/dpi_l
      //                     + dc/dt (from -d_eps k = 1)
      double fd = 0.0;
      for (int l = 0; l < dim; ++l) {
        const double dk_dpi = pi[l] - a[l];  // exact
        std::array<double, 3> xp = x, xm = x;
        xp[l] += hx;
        xm[l] -= hx;
        const double dc_dxl =
            -(p_at(s_idx, xp.data(), j) - p_at(s_idx, xm.data(), j)) / (2 * hx);
        std::array<double, 3> pip = pi, pim = pi;
        pip[l] += hp;
        pim[l] -= hp;
        const double dk_dxl =
            (h_at(s_idx, xp.data(), pi.data()) - h_at(s_idx, xm.data(), pi.data())) /
            (2 * hx);
        const double dc_dpil =
            ((pip[j] - pf.p_b[j]) - (pim[j] - pf.p_b[j])) / (2 * hp);
        fd += dk_dpi * dc_dxl - dk_dxl * dc_dpil;
      }
      const double dpdt = (p_at(s_idx + 1, x.data(), j) -
                           p_at(s_idx - 1, x.data(), j)) /
                          (2 * ht);
      fd += -dpdt;

      if (on_shell) rep.max_on_shell = std::max(rep.max_on_shell, std::abs(fd));
      rep.max_formula_dev =
          std::max(rep.max_formula_dev, std::abs(fd - analytic));

      // involution: {c_j, c_k} = d_k p_j - d_j p_k
      for (int k = 0; k < dim; ++k)
        rep.max_involution =
            std::max(rep.max_involution, std::abs(pf.dp[j][k] - pf.dp[k][j]));
    }
    // {k, k} = 0 holds identically; finite differences reproduce it exactly
    rep.max_self = std::max(rep.max_self, 0.0);
  }
  return rep;
}

AlternativeGuidanceReport alternative_guidance_check(
    const EvolutionTrace& trace, const std::vector<RealField>& calv,
    const std::array<double, 3>& x0, int substeps) {
  const UniformGrid& g = trace.snapshots.front().grid;
  const int dim = g.dim;
  AlternativeGuidanceReport rep;

  RealField div(g.size(), 0.0);
  for (int ax = 0; ax < dim; ++ax) {
    RealField d = real_gradient(g, calv[ax], ax);
    for (std::size_t i = 0; i < g.size(); ++i) div[i] += d[i];
  }
  for (double v : div) rep.div_v_max = std::max(rep.div_v_max, std::abs(v));

  // continuity: d_t rho + div(j + calV) = 0 at interior snapshots
  for (std::size_t s = 1; s + 1 < trace.snapshots.size(); ++s) {
    RealField rho_p = density(trace.snapshots[s + 1]);
    RealField rho_m = density(trace.snapshots[s - 1]);
    const double dt2 = trace.times[s + 1] - trace.times[s - 1];
    const GridWaveFunction& psi = trace.snapshots[s];
    RealField divj(g.size(), 0.0);
    for (int ax = 0; ax < dim; ++ax) {
      GridWaveFunction dpsi = gradient(psi, ax, DerivMethod::spectral);
      RealField flux(g.size());
      for (std::size_t i = 0; i < g.size(); ++i)
        flux[i] = (std::conj(psi.amp[i]) * dpsi.amp[i]).imag() + calv[ax][i];
      RealField d = real_gradient(g, flux, ax);
      for (std::size_t i = 0; i < g.size(); ++i) divj[i] += d[i];
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double resid = (rho_p[i] - rho_m[i]) / dt2 + divj[i];
      rep.continuity_residual = std::max(rep.continuity_residual, std::abs(resid));
    }
  }

  // trajectories separate once calV is switched on
  Trajectory bohm = guidance_trajectory(trace, x0, false, substeps);

  // integrate the modified flow: v = p_B + calV / rho
  FlowFields ff(trace, false, false);
  std::array<double, 3> x = x0;
  double sep = 0.0;
  std::size_t step_idx = 0;
  for (std::size_t s = 0; s + 1 < trace.times.size(); ++s) {
    const double t0 = trace.times[s];
    const double dt = (trace.times[s + 1] - t0) / substeps;
    auto vel = [&](const std::array<double, 3>& pos, double t) {
      std::array<double, 3> v = ff.p_b_at(pos.data(), t);
      std::size_t si;
      double w;
      ff.locate(t, si, w);
      RealField rho_a = density(trace.snapshots[si]);
      RealField rho_b = density(trace.snapshots[si + 1]);
      const double rho = (1.0 - w) * interpolate(g, rho_a, pos.data()) +
                         w * interpolate(g, rho_b, pos.data());
      for (int d = 0; d < dim; ++d)
        v[d] += interpolate(g, calv[d], pos.data()) / std::max(rho, 1e-300);
      return v;
    };
    for (int k = 0; k < substeps; ++k) {
      const double t = t0 + k * dt;
      const auto k1 = vel(x, t);
      std::array<double, 3> x2 = x;
      for (int d = 0; d < dim; ++d) x2[d] += 0.5 * dt * k1[d];
      const auto k2 = vel(x2, t + 0.5 * dt);
      std::array<double, 3> x3 = x;
      for (int d = 0; d < dim; ++d) x3[d] += 0.5 * dt * k2[d];
      const auto k3 = vel(x3, t + 0.5 * dt);
      std::array<double, 3> x4 = x;
      for (int d = 0; d < dim; ++d) x4[d] += dt * k3[d];
      const auto k4 = vel(x4, t + dt);
      for (int d = 0; d < dim; ++d)
        x[d] += dt / 6.0 * (k1[d] + 2 * k2[d] + 2 * k3[d] + k4[d]);
    }
    ++step_idx;
    double d2 = 0.0;
    for (int d = 0; d < dim; ++d)
      d2 += (x[d] - bohm.x[step_idx][d]) * (x[d] - bohm.x[step_idx][d]);
    sep = std::max(sep, std::sqrt(d2));
  }
  rep.trajectory_separation = sep;
  return rep;
}

double equivariance_ks(const EvolutionTrace& trace, int n_paths,
                       std::uint64_t seed, int substeps) {
  const UniformGrid& g = trace.snapshots.front().grid;
  if (g.dim != 1) throw std::invalid_argument("equivariance_ks: 1-d only");

  // inverse-CDF sampling of |psi(.,0)|^2 on the grid
  RealField rho0 = density(trace.snapshots.front());
  std::vector<double> cdf(g.size() + 1, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    cdf[i + 1] = cdf[i] + rho0[i] * g.cell_volume();
  const double total = cdf.back();

  std::vector<double> starts(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(p));
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t cell = std::min<std::size_t>(
        static_cast<std::size_t>(it - cdf.begin()) - 1, g.size() - 1);
    const double frac = (u - cdf[cell]) / std::max(cdf[cell + 1] - cdf[cell], 1e-300);
    starts[p] = g.coord(static_cast<int>(cell)) + frac * g.spacing();
  }

  FlowFields ff(trace, false, false);
  std::vector<double> finals(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    std::array<double, 3> x{starts[p], 0, 0};
    for (std::size_t s = 0; s + 1 < trace.times.size(); ++s) {
      const double t0 = trace.times[s];
      const double dt = (trace.times[s + 1] - t0) / substeps;
      for (int k = 0; k < substeps; ++k) {
        const double t = t0 + k * dt;
        const auto v1 = ff.p_b_at(x.data(), t);
        std::array<double, 3> x2{x[0] + 0.5 * dt * v1[0], 0, 0};
        const auto v2 = ff.p_b_at(x2.data(), t + 0.5 * dt);
        std::array<double, 3> x3{x[0] + 0.5 * dt * v2[0], 0, 0};
        const auto v3 = ff.p_b_at(x3.data(), t + 0.5 * dt);
        std::array<double, 3> x4{x[0] + dt * v3[0], 0, 0};
        const auto v4 = ff.p_b_at(x4.data(), t + dt);
        x[0] += dt / 6.0 * (v1[0] + 2 * v2[0] + 2 * v3[0] + v4[0]);
        const double half = 0.5 * g.length;
        while (x[0] >= half) x[0] -= g.length;
        while (x[0] < -half) x[0] += g.length;
      }
    }
    finals[p] = x[0];
  }
  std::sort(finals.begin(), finals.end());

  // exact CDF of |psi(., T)|^2
  RealField rhot = density(trace.snapshots.back());
  std::vector<double> cdft(g.size() + 1, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    cdft[i + 1] = cdft[i] + rhot[i] * g.cell_volume();
  const double tot = cdft.back();
  auto exact_cdf = [&](double x) {
    double u = (x + 0.5 * g.length) / g.spacing();
    u = std::clamp(u, 0.0, double(g.size()));
    const std::size_t cell = std::min<std::size_t>(
        static_cast<std::size_t>(u), g.size() - 1);
    const double frac = u - double(cell);
    return (cdft[cell] + frac * (cdft[cell + 1] - cdft[cell])) / tot;
  };

  double ks = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    const double fe = exact_cdf(finals[p]);
    ks = std::max(ks, std::abs(fe - double(p) / n_paths));
    ks = std::max(ks, std::abs(fe - double(p + 1) / n_paths));
  }
  return ks;
}

double curl_residual(const GridWaveFunction& psi, double support_rel) {
  if (psi.grid.dim < 2) return 0.0;
  const int dim = psi.grid.dim;
  // sampled quotient field p_B, then independent spectral derivatives of it;
  // meaningful on states whose amplitude stays clear of the node threshold
  std::vector<RealField> p_b(dim);
  for (int ax = 0; ax < dim; ++ax) {
    GridWaveFunction dpsi = gradient(psi, ax, DerivMethod::spectral);
    p_b[ax].resize(psi.size());
    simd::active().imag_quotient(psi.amp.data(), dpsi.amp.data(),
                                 psi.node_mask.data(), p_b[ax].data(),
                                 psi.size());
  }
  double max_amp = 0.0;
  for (const cplx& z : psi.amp) max_amp = std::max(max_amp, std::abs(z));
  const double floor = support_rel * max_amp;

  double worst = 0.0;
  for (int j = 0; j < dim; ++j)
    for (int k = 0; k < j; ++k) {
      RealField dkj = real_gradient(psi.grid, p_b[j], k);
      RealField djk = real_gradient(psi.grid, p_b[k], j);
      for (std::size_t i = 0; i < psi.size(); ++i)
        if (std::abs(psi.amp[i]) >= floor)
          worst = std::max(worst, std::abs(dkj[i] - djk[i]));
    }
  return worst;
}

}  // namespace qcx
