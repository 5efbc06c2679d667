#include "qcx/spin_beable.hpp"

#include <algorithm>
#include <cmath>

#include "qcx/rng.hpp"

namespace qcx {

namespace {
constexpr double kChartEps = 1e-14;  // |psi_pm| below this: other chart only

inline std::array<double, 3> cross(const std::array<double, 3>& a,
                                   const std::array<double, 3>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}
inline double norm2(const std::array<double, 3>& a) {
  return a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
}
}  // namespace

double ConditionalSpinState::constraint_residual() const {
  // residuals measured relative to the natural scale of each identity so a
  // diverging chart (||S'|| large near a pole) is judged fairly
  double worst = std::abs(rho_plus + rho_minus - 1.0);
  if (plus_valid) {
    const double lhs = 4.0 * norm2(s_plus);
    worst = std::max(worst, std::abs(lhs - 1.0 / rho_plus) / (1.0 + lhs));
  }
  if (minus_valid) {
    const double lhs = 4.0 * norm2(s_minus);
    worst = std::max(worst, std::abs(lhs - 1.0 / rho_minus) / (1.0 + lhs));
  }
  if (plus_valid && minus_valid) {
    const double sp2 = s_plus[0] * s_plus[0] + s_plus[1] * s_plus[1];
    for (int j = 0; j < 2; ++j)
      worst = std::max(worst, std::abs(s_minus[j] - 0.25 * s_plus[j] / sp2) /
                                  (1.0 + std::abs(s_minus[j])));
    worst = std::max(worst, std::abs(s_plus[0] * s_minus[0] +
                                     s_plus[1] * s_minus[1] - 0.25));
    worst = std::max(
        worst, std::abs(s_plus[0] * s_minus[1] - s_plus[1] * s_minus[0]));
  }
  return worst;
}

ConditionalSpinState conditional_spin(const TwoLevelState& psi) {
  ConditionalSpinState s;
  s.rho_plus = std::norm(psi.plus);
  s.rho_minus = std::norm(psi.minus);
  s.plus_valid = std::abs(psi.plus) > kChartEps;
  s.minus_valid = std::abs(psi.minus) > kChartEps;
  if (s.plus_valid) {
    const cplx z = psi.minus / (2.0 * psi.plus);  // s1+ + i s2+
    s.s_plus = {z.real(), z.imag(), 0.5};
  }
  if (s.minus_valid) {
    const cplx w = psi.plus / (2.0 * psi.minus);  // s1- - i s2-
    s.s_minus = {w.real(), -w.imag(), -0.5};
  }
  return s;
}

TwoLevelState reconstruct_state(const ConditionalSpinState& s) {
  TwoLevelState psi;
  if (s.plus_valid) {
    const cplx z(2.0 * s.s_plus[0], 2.0 * s.s_plus[1]);  // psi_-/psi_+
    const double rp = 1.0 / (1.0 + std::norm(z));
    psi.plus = cplx(std::sqrt(rp), 0.0);
    psi.minus = z * psi.plus;
  } else {
    psi.plus = cplx(0.0, 0.0);
    psi.minus = cplx(1.0, 0.0);
  }
  return psi;
}

std::array<double, 3> spin_ode_rhs(int sign, const std::array<double, 3>& s,
                                   const std::array<double, 3>& b) {
  const auto bxs = cross(b, s);
  const double n2 = norm2(s);
  const std::array<double, 3> e3xb{-b[1], b[0], 0.0};
  std::array<double, 3> d{};
  for (int j = 0; j < 3; ++j)
    d[j] = -sign * 2.0 * bxs[2] * s[j] + bxs[j] + sign * e3xb[j] * n2;
  return d;
}

SpinOdeTrace integrate_spin_ode(const ConditionalSpinState& s0,
                                const BFieldOfTime& b, double dt, int steps,
                                int stride) {
  // active chart: the better-conditioned one
  int sign;
  std::array<double, 3> s{};
  if (s0.plus_valid &&
      (!s0.minus_valid || norm2(s0.s_plus) <= norm2(s0.s_minus))) {
    sign = +1;
    s = s0.s_plus;
  } else {
    sign = -1;
    s = s0.s_minus;
  }

  auto rebuild = [&](int sg, const std::array<double, 3>& v) {
    ConditionalSpinState st;
    const double sp2 = v[0] * v[0] + v[1] * v[1];
    // 1/rho = 4||S||^2: both occupations written cancellation-free
    const double rho = 1.0 / (4.0 * sp2 + 1.0);
    const double rho_other = 4.0 * sp2 / (4.0 * sp2 + 1.0);
    if (sg > 0) {
      st.s_plus = v;
      st.rho_plus = rho;
      st.rho_minus = rho_other;
      st.s_minus = {0.25 * v[0] / sp2, 0.25 * v[1] / sp2, -0.5};
      st.minus_valid = sp2 > 0.0;
    } else {
      st.s_minus = v;
      st.rho_minus = rho;
      st.rho_plus = rho_other;
      st.s_plus = {0.25 * v[0] / sp2, 0.25 * v[1] / sp2, 0.5};
      st.plus_valid = sp2 > 0.0;
    }
    return st;
  };

  SpinOdeTrace tr;
  tr.times.push_back(0.0);
  tr.states.push_back(rebuild(sign, s));

  for (int k = 1; k <= steps; ++k) {
    const double t0 = (k - 1) * dt;
    const auto f = [&](const std::array<double, 3>& v, double t) {
      return spin_ode_rhs(sign, v, b(t));
    };
    const auto k1 = f(s, t0);
    std::array<double, 3> s2{}, s3{}, s4{};
    for (int j = 0; j < 3; ++j) s2[j] = s[j] + 0.5 * dt * k1[j];
    const auto k2 = f(s2, t0 + 0.5 * dt);
    for (int j = 0; j < 3; ++j) s3[j] = s[j] + 0.5 * dt * k2[j];
    const auto k3 = f(s3, t0 + 0.5 * dt);
    for (int j = 0; j < 3; ++j) s4[j] = s[j] + dt * k3[j];
    const auto k4 = f(s4, t0 + dt);
    for (int j = 0; j < 3; ++j)
      s[j] += dt / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);

    const double sp2 = s[0] * s[0] + s[1] * s[1];
    if (sp2 + 0.25 > 100.0) {  // ||S'_active|| > 10: switch chart
      const std::array<double, 3> other{0.25 * s[0] / sp2, 0.25 * s[1] / sp2,
                                        sign > 0 ? -0.5 : 0.5};
      s = other;
      sign = -sign;
      ++tr.chart_switches;
      const double osp2 = s[0] * s[0] + s[1] * s[1];
      if (osp2 + 0.25 > 100.0)
        throw std::runtime_error(
            "integrate_spin_ode: both charts out of range within one step");
    }
    if (k % stride == 0 || k == steps) {
      tr.times.push_back(k * dt);
      tr.states.push_back(rebuild(sign, s));
    }
  }
  return tr;
}

RiccatiTrace riccati_evolve(cplx z0, int chart0, const BFieldOfTime& b, double dt,
                            int steps, int stride) {
  cplx z = z0;
  int chart = chart0;  // 0: z = psi_-/psi_+, 1: w = 1/z
  auto rhs = [&](cplx v, int ch, const std::array<double, 3>& bb) {
    const cplx c_m(bb[1], -bb[0]);  // B2 - i B1
    const cplx c_p(bb[1], bb[0]);   // B2 + i B1
    if (ch == 0) return 0.5 * c_m + cplx(0.0, bb[2]) * v + 0.5 * c_p * v * v;
    return -0.5 * c_p - cplx(0.0, bb[2]) * v - 0.5 * c_m * v * v;
  };
  RiccatiTrace tr;
  tr.times.push_back(0.0);
  tr.value.push_back(z);
  tr.chart.push_back(chart);
  for (int k = 1; k <= steps; ++k) {
    const double t0 = (k - 1) * dt;
    const cplx k1 = rhs(z, chart, b(t0));
    const cplx k2 = rhs(z + 0.5 * dt * k1, chart, b(t0 + 0.5 * dt));
    const cplx k3 = rhs(z + 0.5 * dt * k2, chart, b(t0 + 0.5 * dt));
    const cplx k4 = rhs(z + dt * k3, chart, b(t0 + dt));
    z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (std::abs(z) > 10.0) {
      z = 1.0 / z;
      chart = 1 - chart;
      ++tr.chart_switches;
    }
    if (k % stride == 0 || k == steps) {
      tr.times.push_back(k * dt);
      tr.value.push_back(z);
      tr.chart.push_back(chart);
    }
  }
  return tr;
}

JumpGenerator jump_generator(const TwoLevelState& psi,
                             const std::array<double, 3>& b, const APolicy& pol) {
  JumpGenerator gen;
  const cplx h_pm = 0.5 * cplx(b[0], -b[1]);  // H_{+-}
  gen.flux = 2.0 * (std::conj(psi.plus) * h_pm * psi.minus).imag();
  switch (pol.kind) {
    case APolicy::Kind::bell_minimal:
      gen.a = std::abs(gen.flux);
      break;
    case APolicy::Kind::offset:
      if (pol.value < 0.0)
        throw std::invalid_argument("a offset must be nonnegative");
      gen.a = std::abs(gen.flux) + pol.value;
      break;
    case APolicy::Kind::fixed:
      if (pol.value < std::abs(gen.flux))
        throw std::invalid_argument("fixed a must satisfy a >= |J_{+-}|");
      gen.a = pol.value;
      break;
  }
  const double rho_p = std::norm(psi.plus), rho_m = std::norm(psi.minus);
  gen.q_minus_plus = rho_p > 0.0 ? (gen.a - gen.flux) / (2.0 * rho_p) : 0.0;
  gen.q_plus_minus = rho_m > 0.0 ? (gen.a + gen.flux) / (2.0 * rho_m) : 0.0;
  // clamp tiny negative round-off
  gen.q_minus_plus = std::max(gen.q_minus_plus, 0.0);
  gen.q_plus_minus = std::max(gen.q_plus_minus, 0.0);
  return gen;
}

double kolmogorov_residual(const TwoLevelState& psi, const JumpGenerator& gen) {
  const double rho_p = std::norm(psi.plus), rho_m = std::norm(psi.minus);
  return std::abs(gen.flux -
                  (-gen.q_minus_plus * rho_p + gen.q_plus_minus * rho_m));
}

namespace {

struct RateTable {
  std::vector<double> q_pm;  // - -> +
  std::vector<double> q_mp;  // + -> -
  bool capped = false;
};

RateTable build_rates(const TwoLevelTrace& trace, const BFieldOfTime& b,
                      const APolicy& pol) {
  RateTable rt;
  const std::size_t n = trace.states.size();
  rt.q_pm.resize(n);
  rt.q_mp.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    JumpGenerator gen = jump_generator(trace.states[s], b(trace.times[s]), pol);
    rt.q_pm[s] = gen.q_plus_minus;
    rt.q_mp[s] = gen.q_minus_plus;
  }
  return rt;
}

}  // namespace

JumpPathStats simulate_jump_paths(const TwoLevelTrace& trace, const APolicy& pol,
                                  int n_paths, std::uint64_t seed, int n_out) {
  if (trace.states.size() < 2)
    throw std::invalid_argument("simulate_jump_paths: trace too short");
  const std::size_t n_steps = trace.states.size() - 1;
  const double dt = trace.times[1] - trace.times[0];

  // per-step rates from the trace states; B enters only through the stored
  // amplitudes and the generator fluxes, so rebuild them from finite
  // differences of rho_+ (exact for the Kolmogorov identity):
  // J_{+-}(t) = d rho_+/dt
  std::vector<double> q_pm(n_steps), q_mp(n_steps);
  bool capped = false;
  for (std::size_t s = 0; s < n_steps; ++s) {
    // midpoint densities and the step-consistent flux J = d rho_+/dt, so the
    // thinned chain satisfies the trace's own Kolmogorov equation to O(dt^2)
    const double rho_p = 0.5 * (std::norm(trace.states[s].plus) +
                                std::norm(trace.states[s + 1].plus));
    const double rho_m = 0.5 * (std::norm(trace.states[s].minus) +
                                std::norm(trace.states[s + 1].minus));
    const double flux =
        (std::norm(trace.states[s + 1].plus) - std::norm(trace.states[s].plus)) /
        dt;
    double a = std::abs(flux);
    switch (pol.kind) {
      case APolicy::Kind::bell_minimal:
        a = std::abs(flux);
        break;
      case APolicy::Kind::offset:
        a = std::abs(flux) + pol.value;
        break;
      case APolicy::Kind::fixed:
        a = std::max(pol.value, std::abs(flux));
        break;
    }
    q_mp[s] = rho_p > 1e-300 ? std::max((a - flux) / (2.0 * rho_p), 0.0) : 0.0;
    q_pm[s] = rho_m > 1e-300 ? std::max((a + flux) / (2.0 * rho_m), 0.0) : 0.0;
  }

  JumpPathStats out;
  out.times.resize(n_out);
  out.expected.resize(n_out);
  std::vector<std::size_t> out_idx(n_out);
  for (int o = 0; o < n_out; ++o) {
    out_idx[o] = (n_steps * std::size_t(o)) / std::size_t(n_out - 1);
    out.times[o] = trace.times[out_idx[o]];
    out.expected[o] = std::norm(trace.states[out_idx[o]].plus);
  }
  std::vector<long> plus_count(n_out, 0);

  const int max_sub = 64;
  long total_jumps = 0;
  for (int p = 0; p < n_paths; ++p) {
    Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(p));
    int state = rng.uniform() < std::norm(trace.states[0].plus) ? 0 : 1;
    std::size_t next_out = 0;
    for (std::size_t s = 0; s < n_steps; ++s) {
      while (next_out < out_idx.size() && out_idx[next_out] == s) {
        if (state == 0) ++plus_count[next_out];
        ++next_out;
      }
      const double rate_max = std::max(q_mp[s], q_pm[s]);
      if (rate_max <= 0.0) continue;
      int nsub = 1;
      if (rate_max * dt > 0.1) {
        nsub = std::min(max_sub, int(rate_max * dt / 0.1) + 1);
        if (rate_max * dt / nsub > 0.5) capped = true;
      }
      const double step = dt / nsub;
      for (int u = 0; u < nsub; ++u) {
        const double rate = state == 0 ? q_mp[s] : q_pm[s];
        if (rate <= 0.0) continue;
        if (rng.uniform() < 1.0 - std::exp(-rate * step)) {
          state = 1 - state;
          ++total_jumps;
        }
      }
    }
    while (next_out < out_idx.size()) {
      if (out_idx[next_out] == n_steps && state == 0) ++plus_count[next_out];
      ++next_out;
    }
  }

  out.occupation.resize(n_out);
  for (int o = 0; o < n_out; ++o) {
    out.occupation[o] = double(plus_count[o]) / n_paths;
    out.max_abs_err =
        std::max(out.max_abs_err, std::abs(out.occupation[o] - out.expected[o]));
  }
  out.mean_jumps = double(total_jumps) / n_paths;
  out.rate_capped = capped;
  return out;
}

BohmBellReport bohm_bell_residual(const TwoLevelTrace& trace,
                                  const BFieldOfTime& b, const APolicy& pol) {
  BohmBellReport rep;
  const double dt = trace.times[1] - trace.times[0];
  for (std::size_t s = 1; s + 1 < trace.states.size(); ++s) {
    const double t = trace.times[s];
    const auto bb = b(t);
    ConditionalSpinState cm = conditional_spin(trace.states[s - 1]);
    ConditionalSpinState c0 = conditional_spin(trace.states[s]);
    ConditionalSpinState cp = conditional_spin(trace.states[s + 1]);
    if (!(c0.plus_valid && c0.minus_valid)) continue;

    JumpGenerator gen = jump_generator(trace.states[s], bb, pol);
    const double rho_p = c0.rho_plus, rho_m = c0.rho_minus;

    // S is 2x3: rows (+,-), columns j = 1..3
    double S[2][3] = {{c0.s_plus[0], c0.s_plus[1], c0.s_plus[2]},
                      {c0.s_minus[0], c0.s_minus[1], c0.s_minus[2]}};
    double dS[2][3] = {
        {(cp.s_plus[0] - cm.s_plus[0]) / (2 * dt),
         (cp.s_plus[1] - cm.s_plus[1]) / (2 * dt),
         (cp.s_plus[2] - cm.s_plus[2]) / (2 * dt)},
        {(cp.s_minus[0] - cm.s_minus[0]) / (2 * dt),
         (cp.s_minus[1] - cm.s_minus[1]) / (2 * dt),
         (cp.s_minus[2] - cm.s_minus[2]) / (2 * dt)}};

    const double J = gen.flux, a = gen.a;
    // F(a) = -1/2 (J [[1,-1],[1,-1]] + a [[1,-1],[-1,1]]) diag(1/rho+, 1/rho-)
    double F[2][2] = {
        {-0.5 * (J + a) / rho_p, 0.5 * (J + a) / rho_m},
        {-0.5 * (J - a) / rho_p, 0.5 * (J - a) / rho_m}};
    // Q(a) = [[-q_-+, q_+-], [q_-+, -q_+-]]
    double Q[2][2] = {{-gen.q_minus_plus, gen.q_plus_minus},
                      {gen.q_minus_plus, -gen.q_plus_minus}};
    // B matrix: columns e_j x B
    double Bm[3][3] = {{0, bb[2], -bb[1]}, {-bb[2], 0, bb[0]}, {bb[1], -bb[0], 0}};
    double Bp[2][3] = {{-bb[1], bb[0], 0}, {bb[1], -bb[0], 0}};

    // S S^T is diagonal(||S+||^2, ||S-||^2) given the constraints
    double SSt[2][2] = {};
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        SSt[r][c] = S[r][0] * S[c][0] + S[r][1] * S[c][1] + S[r][2] * S[c][2];

    for (int r = 0; r < 2; ++r)
      for (int j = 0; j < 3; ++j) {
        double lhs = dS[r][j];
        for (int c = 0; c < 2; ++c) lhs += Q[r][c] * S[c][j];
        double rhs = 0.0;
        for (int k = 0; k < 3; ++k) rhs += S[r][k] * Bm[k][j];
        for (int c = 0; c < 2; ++c) rhs += F[r][c] * S[c][j];
        for (int c = 0; c < 2; ++c) rhs += SSt[r][c] * Bp[c][j];
        rep.max_residual = std::max(rep.max_residual, std::abs(lhs - rhs));
      }

    // dual assembly of F(a) in terms of (B x S)_3 and ||S||^2
    const auto bxs_p = cross(bb, c0.s_plus);
    const auto bxs_m = cross(bb, c0.s_minus);
    const double u = norm2(c0.s_plus), v = norm2(c0.s_minus);
    double F2[2][2] = {{-(bxs_p[2] + 2 * a * u), bxs_m[2] + 2 * a * v},
                       {-(bxs_p[2] - 2 * a * u), bxs_m[2] - 2 * a * v}};
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        rep.f_dual_residual =
            std::max(rep.f_dual_residual, std::abs(F[r][c] - F2[r][c]));
  }
  return rep;
}

SdeDriftReport sde_drift_check(const TwoLevelTrace& trace, const BFieldOfTime& b,
                               const APolicy& pol, int n_paths,
                               std::uint64_t seed, int n_samples,
                               int increment_steps) {
  const std::size_t n_steps = trace.states.size() - 1;
  const double dt = trace.times[1] - trace.times[0];
  RateTable rt = build_rates(trace, b, pol);

  // spin vectors per step
  std::vector<ConditionalSpinState> spins(trace.states.size());
  for (std::size_t s = 0; s < trace.states.size(); ++s)
    spins[s] = conditional_spin(trace.states[s]);

  // sample times away from the ends
  std::vector<std::size_t> samples;
  for (int k = 0; k < n_samples; ++k)
    samples.push_back(n_steps / 8 + (k * 3 * n_steps / 4) / n_samples);

  // accumulators: [sample][state 0:+ 1:-][component] sums and counts
  struct Acc {
    double sum[2][3] = {};
    double sum2[2][3] = {};
    long count[2] = {0, 0};
  };
  std::vector<Acc> acc(samples.size());

  const int max_sub = 64;
  bool capped = false;
  for (int p = 0; p < n_paths; ++p) {
    Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(p));
    int state = rng.uniform() < std::norm(trace.states[0].plus) ? 0 : 1;
    std::size_t next_sample = 0;
    std::array<double, 3> sigma_before{};
    std::vector<std::pair<std::size_t, int>> pending;  // sample idx, state at t
    std::vector<std::array<double, 3>> pending_sigma;
    for (std::size_t s = 0; s < n_steps; ++s) {
      if (next_sample < samples.size() && s == samples[next_sample]) {
        const auto& sp = spins[s];
        sigma_before = state == 0 ? sp.s_plus : sp.s_minus;
        pending.emplace_back(next_sample, state);
        pending_sigma.push_back(sigma_before);
        ++next_sample;
      }
      const double rate_max = std::max(rt.q_mp[s], rt.q_pm[s]);
      int nsub = 1;
      if (rate_max * dt > 0.1) {
        nsub = std::min(max_sub, int(rate_max * dt / 0.1) + 1);
        if (rate_max * dt / nsub > 0.5) capped = true;
      }
      const double step = dt / nsub;
      for (int u = 0; u < nsub; ++u) {
        const double rate = state == 0 ? rt.q_mp[s] : rt.q_pm[s];
        if (rate <= 0.0) continue;
        if (rng.uniform() < 1.0 - std::exp(-rate * step)) state = 1 - state;
      }
      // close any pending increments
      for (std::size_t q = 0; q < pending.size();) {
        const std::size_t s_at = samples[pending[q].first];
        if (s + 1 == s_at + static_cast<std::size_t>(increment_steps)) {
          const auto& sp = spins[s + 1];
          const auto sig = state == 0 ? sp.s_plus : sp.s_minus;
          Acc& a2 = acc[pending[q].first];
          const int st0 = pending[q].second;
          for (int j = 0; j < 3; ++j) {
            const double inc =
                (sig[j] - pending_sigma[q][j]) / (increment_steps * dt);
            a2.sum[st0][j] += inc;
            a2.sum2[st0][j] += inc * inc;
          }
          a2.count[st0] += 1;
          pending.erase(pending.begin() + q);
          pending_sigma.erase(pending_sigma.begin() + q);
        } else {
          ++q;
        }
      }
    }
  }

  SdeDriftReport rep;
  rep.rate_capped = capped;
  for (std::size_t q = 0; q < samples.size(); ++q) {
    // drift evaluated at the increment midpoint: the centered estimate of the
    // conditional rate of change over [t, t + increment_steps dt]
    const std::size_t s = samples[q] + static_cast<std::size_t>(increment_steps) / 2;
    const double t = trace.times[s];
    const auto bb = b(t);
    JumpGenerator gen = jump_generator(trace.states[s], bb, pol);
    const ConditionalSpinState& sp = spins[s];
    const double rho_p = sp.rho_plus, rho_m = sp.rho_minus;
    const double J = gen.flux, a = gen.a;
    double F[2][2] = {{-0.5 * (J + a) / rho_p, 0.5 * (J + a) / rho_m},
                      {-0.5 * (J - a) / rho_p, 0.5 * (J - a) / rho_m}};
    for (int st = 0; st < 2; ++st) {
      if (acc[q].count[st] < 100) continue;
      const auto& sigma = st == 0 ? sp.s_plus : sp.s_minus;
      const auto bxs = cross(bb, sigma);
      const double sgn = st == 0 ? 1.0 : -1.0;
      const std::array<double, 3> e3xb{-bb[1], bb[0], 0.0};
      for (int j = 0; j < 3; ++j) {
        // Phi_j = sum_nu s_{j,nu} F_{nu, X_t}
        const double phi =
            sp.s_plus[j] * F[0][st] + sp.s_minus[j] * F[1][st];
        const double drift = bxs[j] + sgn * norm2(sigma) * e3xb[j] + phi;
        const long n = acc[q].count[st];
        const double mean = acc[q].sum[st][j] / n;
        const double var =
            std::max(acc[q].sum2[st][j] / n - mean * mean, 0.0);
        const double se = std::sqrt(var / n) + 1e-12;
        rep.max_sigma_dev =
            std::max(rep.max_sigma_dev, std::abs(mean - drift) / se);
        rep.max_abs_dev = std::max(rep.max_abs_dev, std::abs(mean - drift));
      }
    }
  }
  return rep;
}

}  // namespace qcx
