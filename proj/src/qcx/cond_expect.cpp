#include "qcx/cond_expect.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace qcx {

RealField cond_exp_position(const OpApply& apply_a, const GridWaveFunction& psi) {
  GridWaveFunction af = apply_a(psi);
  RealField out(psi.size());
  simd::active().real_quotient(psi.amp.data(), af.amp.data(),
                               psi.node_mask.data(), out.data(), psi.size());
  return out;
}

double prediction_error(const OpApply& apply_a, const GridWaveFunction& psi) {
  GridWaveFunction af = apply_a(psi);
  const double a2 = norm_squared(af);
  RealField f(psi.size());
  simd::active().real_quotient(psi.amp.data(), af.amp.data(),
                               psi.node_mask.data(), f.data(), psi.size());
  double proj = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    proj += f[i] * f[i] * std::norm(psi.amp[i]);
  return a2 - proj * psi.grid.cell_volume();
}

WeakValueField weak_value(const OpApply& apply_a, const GridWaveFunction& psi) {
  GridWaveFunction af = apply_a(psi);
  WeakValueField w{psi.grid, std::vector<cplx>(psi.size()), psi.node_mask};
  RealField re(psi.size()), im(psi.size());
  simd::active().real_quotient(psi.amp.data(), af.amp.data(),
                               psi.node_mask.data(), re.data(), psi.size());
  simd::active().imag_quotient(psi.amp.data(), af.amp.data(),
                               psi.node_mask.data(), im.data(), psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) w.values[i] = cplx(re[i], im[i]);
  return w;
}

BohmFields bohm_fields(const GridWaveFunction& psi) {
  const int d = psi.grid.dim;
  BohmFields bf;
  bf.grid = psi.grid;
  bf.mask = psi.node_mask;
  bf.density = density(psi);
  bf.p_B.resize(d);
  bf.p_O.resize(d);
  bf.j_flux.resize(d);

  std::vector<GridWaveFunction> grads;
  grads.reserve(d);
  for (int ax = 0; ax < d; ++ax)
    grads.push_back(gradient(psi, ax, DerivMethod::spectral));

  for (int ax = 0; ax < d; ++ax) {
    bf.p_B[ax].resize(psi.size());
    bf.p_O[ax].resize(psi.size());
    bf.j_flux[ax].resize(psi.size());
    simd::active().imag_quotient(psi.amp.data(), grads[ax].amp.data(),
                                 psi.node_mask.data(), bf.p_B[ax].data(),
                                 psi.size());
    simd::active().real_quotient(psi.amp.data(), grads[ax].amp.data(),
                                 psi.node_mask.data(), bf.p_O[ax].data(),
                                 psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i)
      bf.j_flux[ax][i] =
          (std::conj(psi.amp[i]) * grads[ax].amp[i]).imag();
  }

  // quantum potential from R = |psi|: Q = -Lap(R) / (2R)
  RealField r(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) r[i] = std::abs(psi.amp[i]);
  RealField lap_r = real_laplacian(psi.grid, r);
  bf.q_pot.assign(psi.size(), 0.0);
  for (std::size_t i = 0; i < psi.size(); ++i)
    if (!psi.node_mask[i]) bf.q_pot[i] = -0.5 * lap_r[i] / r[i];

  // conditional variance of P via E(P^2|X) = Re(conj(psi)(-Lap psi))/rho
  GridWaveFunction mlap = laplacian(psi);
  simd::active().scale_real(-1.0, mlap.amp.data(), mlap.size());
  RealField e_p2(psi.size());
  simd::active().real_quotient(psi.amp.data(), mlap.amp.data(),
                               psi.node_mask.data(), e_p2.data(), psi.size());
  bf.cond_var_P.assign(psi.size(), 0.0);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (psi.node_mask[i]) continue;
    double pb2 = 0.0;
    for (int ax = 0; ax < d; ++ax) pb2 += bf.p_B[ax][i] * bf.p_B[ax][i];
    bf.cond_var_P[i] = e_p2[i] - pb2;
  }

  // Fisher matrix I_jk = 4 * integral p_O_j p_O_k rho
  const double vol = psi.grid.cell_volume();
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < psi.size(); ++i)
        s += bf.p_O[j][i] * bf.p_O[k][i] * bf.density[i];
      bf.fisher[j][k] = 4.0 * s * vol;
    }
  return bf;
}

double conditional_variance_identity_check(const GridWaveFunction& psi,
                                           double support_rel) {
  BohmFields bf = bohm_fields(psi);
  double max_amp = 0.0;
  for (const cplx& z : psi.amp) max_amp = std::max(max_amp, std::abs(z));
  const double floor = support_rel * max_amp;
  double worst = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    if (!bf.mask[i] && std::abs(psi.amp[i]) >= floor)
      worst = std::max(worst, std::abs(bf.cond_var_P[i] - 2.0 * bf.q_pot[i]));
  return worst;
}

FisherReport fisher_checks(const GridWaveFunction& psi) {
  const int d = psi.grid.dim;
  BohmFields bf = bohm_fields(psi);
  FisherReport rep;
  rep.fisher = bf.fisher;
  for (int j = 0; j < d; ++j) rep.trace_fisher += bf.fisher[j][j];
  const double vol = psi.grid.cell_volume();
  double eq = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    eq += bf.q_pot[i] * bf.density[i];
  rep.expected_q = eq * vol;
  rep.q_residual = std::abs(rep.expected_q - rep.trace_fisher / 8.0);

  // E(cov(P_j, P_k | X)) = I_F_jk / 4, with the covariance field assembled
  // from second derivatives: Re(-d_j d_k psi / psi) - p_Bj p_Bk
  for (int j = 0; j < d; ++j) {
    GridWaveFunction gj = gradient(psi, j, DerivMethod::spectral);
    for (int k = 0; k <= j; ++k) {
      GridWaveFunction gjk = gradient(gj, k, DerivMethod::spectral);
      simd::active().scale_real(-1.0, gjk.amp.data(), gjk.size());
      RealField quot(psi.size());
      simd::active().real_quotient(psi.amp.data(), gjk.amp.data(),
                                   psi.node_mask.data(), quot.data(),
                                   psi.size());
      double s = 0.0;
      for (std::size_t i = 0; i < psi.size(); ++i)
        if (!psi.node_mask[i])
          s += (quot[i] - bf.p_B[j][i] * bf.p_B[k][i]) * bf.density[i];
      const double lhs = s * vol;
      rep.cov_residual =
          std::max(rep.cov_residual, std::abs(lhs - bf.fisher[j][k] / 4.0));
    }
  }
  return rep;
}

SpinorOpApply spinor_componentwise(OpApply a) {
  return [a = std::move(a)](const SpinorGridWaveFunction& s) {
    return SpinorGridWaveFunction{a(s.plus), a(s.minus)};
  };
}

SpinorCondExp cond_exp_spinor(const SpinorOpApply& apply_a,
                              const SpinorGridWaveFunction& psi,
                              SpinorConditioning conditioning) {
  SpinorGridWaveFunction af = apply_a(psi);
  const std::size_t n = psi.plus.size();
  SpinorCondExp out;
  if (conditioning == SpinorConditioning::x_only) {
    out.x_only.assign(n, 0.0);
    out.mask_x_only.assign(n, 0);
    // combined node rule on psi* psi
    double max2 = 0.0;
    RealField den(n);
    for (std::size_t i = 0; i < n; ++i) {
      den[i] = std::norm(psi.plus.amp[i]) + std::norm(psi.minus.amp[i]);
      max2 = std::max(max2, den[i]);
    }
    const double thr = kNodeThresholdRel * kNodeThresholdRel * max2;
    for (std::size_t i = 0; i < n; ++i) {
      if (den[i] <= thr) {
        out.mask_x_only[i] = 1;
        continue;
      }
      const double num = (std::conj(psi.plus.amp[i]) * af.plus.amp[i] +
                          std::conj(psi.minus.amp[i]) * af.minus.amp[i])
                             .real();
      out.x_only[i] = num / den[i];
    }
  } else {
    const GridWaveFunction* comps[2] = {&psi.plus, &psi.minus};
    const GridWaveFunction* acomps[2] = {&af.plus, &af.minus};
    for (int c = 0; c < 2; ++c) {
      out.channels[c].assign(n, 0.0);
      out.masks[c] = comps[c]->node_mask;
      simd::active().real_quotient(comps[c]->amp.data(), acomps[c]->amp.data(),
                                   comps[c]->node_mask.data(),
                                   out.channels[c].data(), n);
    }
  }
  return out;
}

RealField cond_exp_mixed(const OpApply& apply_a,
                         const std::vector<double>& weights,
                         const std::vector<GridWaveFunction>& states) {
  if (weights.size() != states.size() || states.empty())
    throw std::invalid_argument("cond_exp_mixed: weights/states mismatch");
  const std::size_t n = states[0].size();
  RealField num(n, 0.0), den(n, 0.0);
  for (std::size_t v = 0; v < states.size(); ++v) {
    check_same_grid(states[0].grid, states[v].grid);
    GridWaveFunction af = apply_a(states[v]);
    for (std::size_t i = 0; i < n; ++i) {
      num[i] += weights[v] * (std::conj(states[v].amp[i]) * af.amp[i]).real();
      den[i] += weights[v] * std::norm(states[v].amp[i]);
    }
  }
  double max_den = 0.0;
  for (double x : den) max_den = std::max(max_den, x);
  const double thr = kNodeThresholdRel * kNodeThresholdRel * max_den;
  RealField out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (den[i] > thr) out[i] = num[i] / den[i];
  return out;
}

WeakValueField complex_linear_ce(const OpApply& apply_a,
                                 const OpApply& apply_a_adjoint,
                                 const GridWaveFunction& psi) {
  GridWaveFunction af = apply_a(psi);
  GridWaveFunction adf = apply_a_adjoint(psi);
  WeakValueField w{psi.grid, std::vector<cplx>(psi.size(), cplx(0, 0)),
                   psi.node_mask};
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (psi.node_mask[i]) continue;
    const cplx num = af.amp[i] * std::conj(psi.amp[i]) +
                     psi.amp[i] * std::conj(adf.amp[i]);
    w.values[i] = 0.5 * num / std::norm(psi.amp[i]);
  }
  return w;
}

DiscreteCondExp cond_exp_discrete(const Mat& a, const SpectralDecomposition& d,
                                  const Vec& psi) {
  d.validate();
  const std::size_t m = d.projections.size();
  DiscreteCondExp out;
  out.coeff.assign(m, 0.0);
  out.valid.assign(m, false);
  out.as_matrix = Mat::Zero(d.dim(), d.dim());
  const Vec apsi = a * psi;
  for (std::size_t nu = 0; nu < m; ++nu) {
    const Vec pv = d.projections[nu] * psi;
    const double den = pv.squaredNorm();
    if (den < 1e-28) continue;
    out.valid[nu] = true;
    out.coeff[nu] = (pv.adjoint() * apsi)(0).real() / den;
    out.as_matrix += out.coeff[nu] * d.projections[nu];
  }
  return out;
}

double prediction_error_discrete(const Mat& a, const SpectralDecomposition& d,
                                 const Vec& psi) {
  DiscreteCondExp ce = cond_exp_discrete(a, d, psi);
  const Vec apsi = a * psi;
  double proj = 0.0;
  for (std::size_t nu = 0; nu < d.projections.size(); ++nu) {
    if (!ce.valid[nu]) continue;
    const double w = (d.projections[nu] * psi).squaredNorm();
    proj += ce.coeff[nu] * ce.coeff[nu] * w;
  }
  return apsi.squaredNorm() - proj;
}

EpsteinPosition epstein_position(const GridWaveFunction& psi) {
  GridWaveFunction psihat = fourier_transform(psi);
  EpsteinPosition out;
  out.grid = psi.grid;
  out.mask = psihat.node_mask;
  out.values.resize(psi.grid.dim);
  for (int ax = 0; ax < psi.grid.dim; ++ax) {
    // grad_p psi-hat sampled exactly as the transform of -i x psi
    GridWaveFunction xpsi = position_op(ax)(psi);
    for (cplx& z : xpsi.amp) z *= cplx(0.0, -1.0);
    GridWaveFunction dhat = fourier_transform(xpsi);
    out.values[ax].resize(psi.size());
    simd::active().imag_quotient(psihat.amp.data(), dhat.amp.data(),
                                 psihat.node_mask.data(), out.values[ax].data(),
                                 psi.size());
    for (double& v : out.values[ax]) v = -v;
  }
  return out;
}

RadialCondExp cond_exp_radial(const OpApply& apply_a, const GridWaveFunction& psi) {
  if (psi.grid.dim > 2)
    throw std::invalid_argument("cond_exp_radial: d = 1 or 2 only");
  GridWaveFunction psihat = fourier_transform(psi);
  GridWaveFunction ahat = fourier_transform(apply_a(psi));
  // bin key: d=1 pairs {+p, -p}; d=2 bins of width (2 pi / L)^2 in |p|^2
  const double unit = std::pow(2.0 * kPi / psi.grid.length, 2);
  std::map<long, std::array<double, 3>> bins;  // key -> (num, den, lambda)
  for (std::size_t i = 0; i < psi.size(); ++i) {
    auto c = psi.grid.unflatten(i);
    double p2 = 0.0;
    for (int d = 0; d < psi.grid.dim; ++d) {
      const double p = psi.grid.momentum(c[d]);
      p2 += p * p;
    }
    long key;
    if (psi.grid.dim == 1)
      key = std::abs(psi.grid.signed_index(c[0]));
    else
      key = static_cast<long>(std::floor(p2 / unit + 0.5));
    auto& acc = bins[key];
    acc[0] += (std::conj(psihat.amp[i]) * ahat.amp[i]).real();
    acc[1] += std::norm(psihat.amp[i]);
    acc[2] = p2;  // representative label (exact in d=1)
  }
  double max_den = 0.0;
  for (auto& [k, acc] : bins) max_den = std::max(max_den, acc[1]);
  RadialCondExp out;
  for (auto& [k, acc] : bins) {
    out.lambda.push_back(acc[2]);
    const bool ok = acc[1] > 1e-20 * max_den;
    out.valid.push_back(ok);
    out.value.push_back(ok ? acc[0] / acc[1] : 0.0);
  }
  return out;
}

double unitary_covariance_check(const Mat& a, const SpectralDecomposition& d,
                                const Mat& u, const Vec& psi) {
  DiscreteCondExp lhs_in = cond_exp_discrete(a, d, psi);
  SpectralDecomposition du;
  du.ranks = d.ranks;
  du.labels = d.labels;
  for (const Mat& p : d.projections)
    du.projections.push_back(u * p * u.adjoint());
  const Mat ua = u * a * u.adjoint();
  const Vec upsi = u * psi;
  DiscreteCondExp lhs = cond_exp_discrete(ua, du, upsi);
  const Mat rhs = u * lhs_in.as_matrix * u.adjoint();
  return (lhs.as_matrix - rhs).norm();
}

double golden_section_min(const std::function<double(double)>& f, double lo,
                          double hi, double tol) {
  const double gr = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

namespace {

// Scan-based minimizer of a smooth single-variable objective: golden-section
// on the bracket, then one parabolic polish through three probes. Pure
// function evaluations; the parabolic step lifts the argmin past the sqrt(eps)
// flatness floor of comparison-only search.
double scan_minimize(const std::function<double(double)>& f, double lo,
                     double hi) {
  double c = golden_section_min(f, lo, hi, 1e-8 * (hi - lo));
  const double h = 1e-2 * (1.0 + std::abs(c));
  const double fm = f(c - h), f0 = f(c), fp = f(c + h);
  const double den = fm - 2.0 * f0 + fp;
  if (den > 0.0) {
    const double step = 0.5 * h * (fm - fp) / den;
    if (std::abs(step) <= h) c += step;
  }
  return c;
}

}  // namespace

OracleResult brute_force_minimizer_grid(const OpApply& apply_a,
                                        const GridWaveFunction& psi) {
  GridWaveFunction af = apply_a(psi);
  const double vol = psi.grid.cell_volume();
  OracleResult res;
  res.argmin.assign(psi.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double a2 = std::norm(af.amp[i]);
    total += a2 * vol;  // constant part; masked cells keep |A psi|^2
    if (psi.node_mask[i]) continue;
    const double p2 = std::norm(psi.amp[i]);
    const double cross = (std::conj(psi.amp[i]) * af.amp[i]).real();
    // f-independent |A psi|^2 dropped from the scanned objective
    auto cell = [&](double f) { return f * f * p2 - 2.0 * f * cross; };
    const double bound = std::sqrt(a2 / p2);
    const double lo = -(1.0 + 7.0 * bound), hi = 1.0 + 7.0 * bound;
    const double fstar = scan_minimize(cell, lo, hi);
    res.argmin[i] = fstar;
    total += cell(fstar) * vol;
  }
  res.minimum = total;
  return res;
}

OracleResult brute_force_minimizer_discrete(const Mat& a,
                                            const SpectralDecomposition& d,
                                            const Vec& psi) {
  const Vec apsi = a * psi;
  OracleResult res;
  res.argmin.assign(d.projections.size(), 0.0);
  double total = apsi.squaredNorm();
  // || (A - sum f_nu Pi_nu) psi ||^2 splits into independent per-block pieces
  for (std::size_t nu = 0; nu < d.projections.size(); ++nu) {
    const Vec pv = d.projections[nu] * psi;
    const double den = pv.squaredNorm();
    if (den < 1e-28) continue;
    const Vec pa = d.projections[nu] * apsi;
    const double cross = (pv.adjoint() * apsi)(0).real();
    auto block = [&](double f) { return -2.0 * f * cross + f * f * den; };
    const double bound = pa.norm() / pv.norm();
    const double lo = -(1.0 + 7.0 * bound), hi = 1.0 + 7.0 * bound;
    const double fstar = scan_minimize(block, lo, hi);
    res.argmin[nu] = fstar;
    total += block(fstar);
  }
  res.minimum = total;
  return res;
}

double objective_grid(const OpApply& apply_a, const GridWaveFunction& psi,
                      const RealField& f) {
  GridWaveFunction af = apply_a(psi);
  double s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    s += std::norm(af.amp[i] - f[i] * psi.amp[i]);
  return s * psi.grid.cell_volume();
}

double objective_discrete(const Mat& a, const SpectralDecomposition& d,
                          const Vec& psi, const std::vector<double>& coeff) {
  Mat fb = Mat::Zero(d.dim(), d.dim());
  for (std::size_t nu = 0; nu < d.projections.size(); ++nu)
    fb += coeff[nu] * d.projections[nu];
  return (a * psi - fb * psi).squaredNorm();
}

}  // namespace qcx
