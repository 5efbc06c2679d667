#include "qcx/scenario.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "qcx/bohm_flow.hpp"
#include "qcx/cond_expect.hpp"
#include "qcx/evolution.hpp"
#include "qcx/finite_algebra.hpp"
#include "qcx/io.hpp"
#include "qcx/pauli_channels.hpp"
#include "qcx/quasi_prob.hpp"
#include "qcx/rng.hpp"
#include "qcx/spin_beable.hpp"
#include "qcx/states.hpp"

namespace qcx {

namespace {
constexpr const char* kCodeVersion = "qcondex 1.0.0";

double jget(const Json& j, const std::string& key, double dflt) {
  return j.contains(key) ? j.at(key).get<double>() : dflt;
}
int jgeti(const Json& j, const std::string& key, int dflt) {
  return j.contains(key) ? j.at(key).get<int>() : dflt;
}
std::string jgets(const Json& j, const std::string& key,
                  const std::string& dflt) {
  return j.contains(key) ? j.at(key).get<std::string>() : dflt;
}

std::array<double, 3> jvec3(const Json& j, const std::string& key) {
  std::array<double, 3> v{0, 0, 0};
  if (!j.contains(key)) return v;
  const auto& a = j.at(key);
  for (std::size_t i = 0; i < a.size() && i < 3; ++i) v[i] = a[i].get<double>();
  return v;
}

APolicy parse_policy(const Json& params) {
  if (!params.contains("a_policy")) return {APolicy::Kind::bell_minimal, 0.0};
  const Json& p = params.at("a_policy");
  if (p.is_string()) {
    if (p.get<std::string>() == "bell") return {APolicy::Kind::bell_minimal, 0.0};
    throw ScenarioError("a_policy: expected \"bell\" or a nonnegative offset");
  }
  const double c = p.get<double>();
  if (c < 0.0)
    throw ScenarioError("a_policy: offset must be nonnegative, got " +
                        std::to_string(c));
  return {APolicy::Kind::offset, c};
}

}  // namespace

std::string config_digest(const Json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Scenario Scenario::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ScenarioError(path + ": JSON parse error: " + e.what());
  }
  return parse_json(j);
}

Scenario Scenario::parse_json(const Json& j) {
  Scenario sc;
  sc.raw = j;
  if (!j.contains("name")) throw ScenarioError("scenario: missing field 'name'");
  sc.name = j.at("name").get<std::string>();
  sc.kind = jgets(j, "kind", "");
  static const std::vector<std::string> kinds = {
      "bohm_1d",  "bohm_magnetic_2d",    "spin_static",
      "pauli_1d", "pauli_2d",            "finite_algebra_suite",
      "quasiprob_suite"};
  if (std::find(kinds.begin(), kinds.end(), sc.kind) == kinds.end())
    throw ScenarioError("scenario: unknown kind '" + sc.kind + "'");
  sc.grid = j.value("grid", Json::object());
  if (sc.grid.contains("n")) {
    const int n = sc.grid.at("n").get<int>();
    if (n < 2 || (n & (n - 1)) != 0)
      throw ScenarioError("grid.n must be a power of two, got " +
                          std::to_string(n));
  }
  sc.config = j.value("config", Json::object());
  sc.initial_state = j.value("initial_state", Json::object());
  const Json integ = j.value("integrator", Json::object());
  sc.scheme = jgets(integ, "scheme", "split_step");
  if (sc.scheme != "split_step" && sc.scheme != "crank_nicolson")
    throw ScenarioError("integrator.scheme must be split_step or crank_nicolson");
  sc.dt = jget(integ, "dt", 1e-3);
  if (!(sc.dt > 0)) throw ScenarioError("integrator.dt must be positive");
  sc.steps = jgeti(integ, "steps", 0);
  sc.snapshot_stride = jgeti(integ, "snapshot_stride", 10);
  if (sc.snapshot_stride < 1)
    throw ScenarioError("integrator.snapshot_stride must be >= 1");
  sc.seed = static_cast<std::uint64_t>(jget(j, "seed", 1.0));
  sc.output_dir = jgets(j, "output_dir", "");

  if (!j.contains("analyses") || !j.at("analyses").is_array() ||
      j.at("analyses").empty())
    throw ScenarioError("scenario: 'analyses' must be a non-empty array");
  for (const auto& a : j.at("analyses")) {
    AnalysisSpec spec;
    spec.name = a.at("name").get<std::string>();
    spec.params = a.value("params", Json::object());
    spec.gate = a.value("gate", true);
    bool known = false;
    for (const auto& entry : analysis_catalog())
      if (entry.name == spec.name) known = true;
    if (!known)
      throw ScenarioError("scenario: unknown analysis '" + spec.name + "'");
    if (spec.params.contains("a_policy")) parse_policy(spec.params);
    sc.analyses.push_back(std::move(spec));
  }
  return sc;
}

// ---------------------------------------------------------------------------
// shared per-run context with lazily built artifacts

namespace {

struct Context {
  const Scenario& sc;
  std::uint64_t seed;
  std::string out_dir;
  std::recursive_mutex mu;

  std::optional<UniformGrid> grid_;
  std::optional<FieldConfig> config_;
  std::optional<GridWaveFunction> psi0_;
  std::optional<EvolutionTrace> trace_;
  std::optional<TwoLevelState> tl0_;
  std::array<double, 3> bvec{0, 0, 0};
  std::optional<TwoLevelTrace> tl_trace_;
  std::optional<SpinorGridWaveFunction> spinor0_;
  SpinCoupling coupling;
  std::optional<SpinorTrace> sp_trace_;

  explicit Context(const Scenario& s, std::uint64_t sd, std::string out)
      : sc(s), seed(sd), out_dir(std::move(out)) {}

  const UniformGrid& grid() {
    std::lock_guard<std::recursive_mutex> lock(mu);
    if (!grid_) {
      if (!sc.grid.contains("dim"))
        throw ScenarioError("scenario kind '" + sc.kind + "' requires a grid");
      grid_.emplace(sc.grid.at("dim").get<int>(), sc.grid.at("n").get<int>(),
                    sc.grid.at("length").get<double>());
    }
    return *grid_;
  }

  const FieldConfig& config() {
    std::lock_guard<std::recursive_mutex> lock(mu);
    if (config_) return *config_;
    FieldConfig cfg;
    cfg.grid = grid();
    const Json pot = sc.config.value("potential", Json::object());
    const std::string ptype = jgets(pot, "type", "none");
    if (ptype == "harmonic") {
      const double omega = jget(pot, "omega", 1.0);
      cfg.V.resize(cfg.grid.size());
      for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        auto c = cfg.grid.unflatten(i);
        double v = 0.0;
        for (int d = 0; d < cfg.grid.dim; ++d)
          v += 0.5 * omega * omega * cfg.grid.coord(c[d]) * cfg.grid.coord(c[d]);
        cfg.V[i] = v;
      }
    } else if (ptype != "none") {
      throw ScenarioError("config.potential.type: unknown '" + ptype + "'");
    }
    const Json va = sc.config.value("vector_potential", Json::object());
    const std::string atype = jgets(va, "type", "none");
    if (atype == "constant") {
      const auto a = jvec3(va, "a");
      cfg.A.resize(cfg.grid.dim);
      for (int d = 0; d < cfg.grid.dim; ++d)
        cfg.A[d].assign(cfg.grid.size(), a[d]);
    } else if (atype == "symmetric_gauge") {
      if (cfg.grid.dim != 2)
        throw ScenarioError("symmetric_gauge needs a 2-d grid");
      const double b = jget(va, "b", 1.0);
      cfg.A.assign(2, RealField(cfg.grid.size(), 0.0));
      for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        auto c = cfg.grid.unflatten(i);
        cfg.A[0][i] = -0.5 * b * cfg.grid.coord(c[1]);
        cfg.A[1][i] = 0.5 * b * cfg.grid.coord(c[0]);
      }
      cfg.has_uniform_b3 = true;
      cfg.uniform_b3 = b;
    } else if (atype == "curl_bump") {
      if (cfg.grid.dim != 2) throw ScenarioError("curl_bump needs a 2-d grid");
      const double amp = jget(va, "amplitude", 0.4);
      const double width = jget(va, "width", 4.0);
      RealField bump(cfg.grid.size());
      for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        auto c = cfg.grid.unflatten(i);
        const double x = cfg.grid.coord(c[0]), y = cfg.grid.coord(c[1]);
        bump[i] = amp * std::exp(-(x * x + y * y) / width);
      }
      cfg.A.resize(2);
      cfg.A[0] = real_gradient(cfg.grid, bump, 1);
      RealField d1 = real_gradient(cfg.grid, bump, 0);
      cfg.A[1].resize(cfg.grid.size());
      for (std::size_t i = 0; i < cfg.grid.size(); ++i) cfg.A[1][i] = -d1[i];
    } else if (atype != "none") {
      throw ScenarioError("config.vector_potential.type: unknown '" + atype + "'");
    }
    config_ = std::move(cfg);
    return *config_;
  }

  SpinCoupling build_coupling() {
    SpinCoupling cpl;
    const Json bf = sc.config.value("b_field", Json::object());
    const std::string btype = jgets(bf, "type", "none");
    if (btype == "uniform") {
      const auto v = jvec3(bf, "value");
      cpl.uniform_b = [v](double) { return v; };
      bvec = v;
    } else if (btype == "from_curl") {
      const FieldConfig& cfg = config();
      if (!cfg.has_A()) throw ScenarioError("b_field from_curl needs A");
      if (cfg.has_uniform_b3) {
        const double b = cfg.uniform_b3;
        cpl.uniform_b = [b](double) { return std::array<double, 3>{0, 0, b}; };
        bvec = {0, 0, b};
      } else {
        RealField d1a2 = real_gradient(cfg.grid, cfg.A[1], 0);
        RealField d2a1 = real_gradient(cfg.grid, cfg.A[0], 1);
        cpl.b3.resize(cfg.grid.size());
        for (std::size_t i = 0; i < cfg.grid.size(); ++i)
          cpl.b3[i] = d1a2[i] - d2a1[i];
      }
    } else if (btype != "none") {
      throw ScenarioError("config.b_field.type: unknown '" + btype + "'");
    }
    return cpl;
  }

  // localized states must decay below 1e-10 of their peak at the domain
  // boundary; periodic spectral derivatives are only exact then
  static void check_boundary_decay(const GridWaveFunction& f,
                                   const std::string& what) {
    double peak = 0.0;
    for (const cplx& z : f.amp) peak = std::max(peak, std::abs(z));
    double edge = 0.0;
    const UniformGrid& g = f.grid;
    for (std::size_t i = 0; i < f.size(); ++i) {
      auto c = g.unflatten(i);
      bool boundary = false;
      for (int d = 0; d < g.dim; ++d)
        if (c[d] == 0) boundary = true;
      if (boundary) edge = std::max(edge, std::abs(f.amp[i]));
    }
    if (edge > 1e-10 * peak)
      throw ScenarioError(what + ": boundary amplitude " +
                          std::to_string(edge / peak) +
                          " of peak exceeds 1e-10; enlarge the domain");
  }

  GridWaveFunction build_scalar_state(const Json& st) {
    const std::string type = jgets(st, "type", "");
    const UniformGrid& g = grid();
    if (type == "gaussian") {
      GridWaveFunction f = gaussian_state(g, jvec3(st, "center"),
                                          jget(st, "sigma", 1.0), jvec3(st, "k"));
      check_boundary_decay(f, "gaussian state");
      return f;
    }
    if (type == "gaussian_2d")
      return gaussian_state_2d(g, jget(st, "sigma1", 1.0),
                               jget(st, "sigma2", 1.0), jget(st, "angle", 0.0));
    if (type == "coherent") {
      GridWaveFunction f = coherent_state(g, jget(st, "x0", 1.0));
      check_boundary_decay(f, "coherent state");
      return f;
    }
    if (type == "plane_wave") {
      const auto kv = jvec3(st, "k_int");
      return plane_wave_state(
          g, {int(kv[0]), int(kv[1]), int(kv[2])});
    }
    if (type == "oscillator_eigenstate")
      return oscillator_eigenstate(g, jgeti(st, "level", 0));
    if (type == "random")
      return random_bandlimited_state(
          g, static_cast<std::uint64_t>(jget(st, "seed", 1.0)),
          jgeti(st, "band_limit", 8));
    throw ScenarioError("initial_state.type: unknown '" + type + "'");
  }

  const GridWaveFunction& psi0() {
    std::lock_guard<std::recursive_mutex> lock(mu);
    if (!psi0_) psi0_ = build_scalar_state(sc.initial_state);
    return *psi0_;
  }

  const EvolutionTrace& trace() {
    std::lock_guard<std::recursive_mutex> lock(mu);
    if (!trace_) {
      if (sc.steps <= 0) throw ScenarioError("integrator.steps must be > 0");
      const Scheme scheme = sc.scheme == "crank_nicolson"
                                ? Scheme::crank_nicolson
                                : Scheme::split_step;
      trace_ = schrodinger_evolve(psi0(), config(), sc.dt, sc.steps, scheme,
                                  sc.snapshot_stride);
    }
    return *trace_;
  }

  const TwoLevelState& two_level0() {
    std::lock_guard<std::recursive_mutex> lock(mu);
    if (!tl0_) {
      const Json st = sc.initial_state;
      if (jgets(st, "type", "") != "two_level")
        throw ScenarioError("spin_static scenarios need a two_level state");
      const auto& amps = st.at("amplitudes");
      TwoLevelState s{cplx(amps[0][0].get<double>(), amps[0][1].get<double>()),
                      cplx(amps[1][0].get<double>(), amps[1][1].get<double>())};
      s.normalize();
      tl0_ = s;
      const Json bf = sc.config.value("b_field", Json::object());
      bvec = jvec3(bf, "value");
    }
    return *tl0_;
  }

  BFieldOfTime bfield() {
    two_level0();
    const auto v = bvec;
    return [v](double) { return v; };
  }

  const TwoLevelTrace& tl_trace() {
    std::lock_guard<std::recursive_mutex> lock(mu);
    if (!tl_trace_) {
      if (sc.steps <= 0) throw ScenarioError("integrator.steps must be > 0");
      tl_trace_ = two_level_evolve(two_level0(), bfield(), sc.dt, sc.steps, 1);
    }
    return *tl_trace_;
  }

  const SpinorGridWaveFunction& spinor0() {
    std::lock_guard<std::recursive_mutex> lock(mu);
    if (!spinor0_) {
      const Json st = sc.initial_state;
      const std::string type = jgets(st, "type", "");
      if (type == "spinor_product") {
        GridWaveFunction spatial = build_scalar_state(st.at("spatial"));
        const auto& amps = st.at("chi");
        TwoLevelState chi{cplx(amps[0][0].get<double>(), amps[0][1].get<double>()),
                          cplx(amps[1][0].get<double>(), amps[1][1].get<double>())};
        chi.normalize();
        spinor0_ = spinor_product_state(spatial, chi);
      } else if (type == "spinor_two_packets") {
        spinor0_ = spinor_two_packet_state(
            grid(), jget(st, "w_plus", 1.0), jvec3(st, "center_plus"),
            jget(st, "sigma_plus", 1.0), jvec3(st, "k_plus"),
            jget(st, "w_minus", 1.0), jvec3(st, "center_minus"),
            jget(st, "sigma_minus", 1.0), jvec3(st, "k_minus"));
      } else if (type == "spinor_modulated") {
        // shared Gaussian envelope with low-order trigonometric modulation;
        // the component ratio stays smooth and bounded
        const UniformGrid& g = grid();
        GridWaveFunction env = gaussian_state(g, jvec3(st, "center"),
                                              jget(st, "sigma", 1.0),
                                              jvec3(st, "k"));
        SpinorGridWaveFunction s{env, env};
        const double dp = jget(st, "depth_plus", 0.25);
        const double dm = jget(st, "depth_minus", 0.2);
        for (std::size_t i = 0; i < g.size(); ++i) {
          auto c = g.unflatten(i);
          double th1 = 0.0, th2 = 0.0;
          for (int d = 0; d < g.dim; ++d) {
            th1 += 2.0 * kPi * g.coord(c[d]) / g.length;
            th2 += 4.0 * kPi * g.coord(c[d]) / g.length;
          }
          s.plus.amp[i] *= 1.0 + dp * cplx(std::cos(th1), std::sin(th1));
          s.minus.amp[i] *=
              cplx(0.65, 0.1) + dm * cplx(std::cos(th2), -std::sin(th2));
        }
        normalize(s);
        spinor0_ = s;
      } else {
        throw ScenarioError("initial_state.type '" + type +
                            "' is not a spinor state");
      }
    }
    return *spinor0_;
  }

  const SpinorTrace& sp_trace() {
    std::lock_guard<std::recursive_mutex> lock(mu);
    if (!sp_trace_) {
      if (sc.steps <= 0) throw ScenarioError("integrator.steps must be > 0");
      coupling = build_coupling();
      sp_trace_ = pauli_evolve(spinor0(), config(), coupling, sc.dt, sc.steps,
                               sc.snapshot_stride);
    }
    return *sp_trace_;
  }
};

struct ResultBuilder {
  AnalysisResult r;
  explicit ResultBuilder(std::string name) { r.name = std::move(name); }
  void bound(const std::string& key, double value, double tol) {
    r.values[key] = value;
    r.tolerances[key] = tol;
    if (!(value <= tol)) r.pass = false;
  }
  void range(const std::string& key, double value, double lo, double hi) {
    r.values[key] = value;
    r.tolerances[key] = hi;
    if (!(value >= lo && value <= hi)) r.pass = false;
  }
  void info(const std::string& key, double value) { r.values[key] = value; }
};

using Handler = std::function<AnalysisResult(Context&, const Json&)>;

OpApply named_operator(const std::string& name, Context& ctx) {
  if (name == "momentum") return momentum_op(0);
  if (name == "kinetic") return kinetic_op();
  if (name == "position") return position_op(0);
  if (name == "position_squared")
    return [](const GridWaveFunction& f) {
      return position_op(0)(position_op(0)(f));
    };
  if (name == "hamiltonian") {
    const FieldConfig& cfg = ctx.config();
    RealField v = cfg.V.empty() ? RealField(cfg.grid.size(), 0.0) : cfg.V;
    return schrodinger_op(v);
  }
  throw ScenarioError("unknown operator name '" + name + "'");
}

// --- analysis handlers -------------------------------------------------------

AnalysisResult a_minimizer_oracle_grid(Context& ctx, const Json& p) {
  ResultBuilder rb("minimizer_oracle_grid");
  const OpApply op = named_operator(jgets(p, "operator", "momentum"), ctx);
  const GridWaveFunction& psi = ctx.psi0();
  OracleResult orc = brute_force_minimizer_grid(op, psi);
  RealField closed = cond_exp_position(op, psi);
  double max_amp = 0.0;
  for (const auto& z : psi.amp) max_amp = std::max(max_amp, std::abs(z));
  double argmin_dev = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    if (std::abs(psi.amp[i]) >= 1e-4 * max_amp)
      argmin_dev = std::max(argmin_dev, std::abs(orc.argmin[i] - closed[i]));
  rb.bound("argmin_dev", argmin_dev, jget(p, "tol_argmin", 1e-8));
  rb.bound("objective_dev",
           std::abs(orc.minimum - prediction_error(op, psi)),
           jget(p, "tol_value", 1e-10));
  return rb.r;
}

AnalysisResult a_minimizer_oracle_discrete(Context& ctx, const Json& p) {
  ResultBuilder rb("minimizer_oracle_discrete");
  const int trials = jgeti(p, "trials", 10);
  double worst_arg = 0.0, worst_val = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng::for_stream(ctx.seed, 1000 + t);
    const int dim = 4 + int(rng.uniform() * 5);  // <= 8
    std::vector<int> ranks;
    int left = dim;
    while (left > 0) {
      const int rk = 1 + int(rng.uniform() * std::min(3, left));
      ranks.push_back(std::min(rk, left));
      left -= ranks.back();
    }
    SpectralDecomposition d = SpectralDecomposition::from_rank_pattern(ranks);
    Mat a = random_hermitian(dim, rng);
    Vec psi = random_state_all_blocks(d, rng);
    OracleResult orc = brute_force_minimizer_discrete(a, d, psi);
    DiscreteCondExp ce = cond_exp_discrete(a, d, psi);
    for (std::size_t nu = 0; nu < ce.coeff.size(); ++nu)
      if (ce.valid[nu])
        worst_arg = std::max(worst_arg, std::abs(orc.argmin[nu] - ce.coeff[nu]));
    worst_val = std::max(
        worst_val, std::abs(orc.minimum - prediction_error_discrete(a, d, psi)));
  }
  rb.bound("argmin_dev", worst_arg, jget(p, "tol_argmin", 1e-8));
  rb.bound("objective_dev", worst_val, jget(p, "tol_value", 1e-10));
  return rb.r;
}

AnalysisResult a_fisher_identities(Context& ctx, const Json& p) {
  ResultBuilder rb("fisher_identities");
  const UniformGrid& g = ctx.grid();
  double worst_pred = 0.0, worst_q = 0.0, worst_cov = 0.0;
  for (const auto& sj : p.value("sigmas", Json::array({0.5, 1.0, 2.0}))) {
    const double s = sj.get<double>();
    GridWaveFunction psi = gaussian_state(g, {0, 0, 0}, s, {0, 0, 0});
    worst_pred = std::max(worst_pred,
                          std::abs(prediction_error(momentum_op(0), psi) -
                                   0.25 / (s * s)));
    FisherReport rep = fisher_checks(psi);
    worst_q = std::max(worst_q, rep.q_residual);
    worst_q = std::max(worst_q,
                       std::abs(rep.expected_q - 0.125 / (s * s)));
    worst_cov = std::max(worst_cov, rep.cov_residual);
  }
  rb.bound("prediction_error_dev", worst_pred, jget(p, "tol", 1e-8));
  rb.bound("q_identity_dev", worst_q, jget(p, "tol", 1e-8));
  rb.bound("cov_identity_dev_1d", worst_cov, jget(p, "tol", 1e-8));
  if (p.value("anisotropic_2d", false)) {
    UniformGrid g2(2, jgeti(p, "n_2d", 128), jget(p, "length_2d", 24.0));
    GridWaveFunction psi2 =
        gaussian_state_2d(g2, jget(p, "sigma1", 0.8), jget(p, "sigma2", 1.3),
                          jget(p, "angle", 0.5));
    FisherReport rep2 = fisher_checks(psi2);
    rb.bound("cov_identity_dev_2d", rep2.cov_residual, jget(p, "tol", 1e-8));
    rb.bound("q_identity_dev_2d", rep2.q_residual, jget(p, "tol", 1e-8));
  }
  return rb.r;
}

AnalysisResult a_conditional_variance_identity(Context& ctx, const Json& p) {
  ResultBuilder rb("conditional_variance_identity");
  const UniformGrid& g = ctx.grid();
  rb.bound("gaussian",
           conditional_variance_identity_check(
               gaussian_state(g, {0, 0, 0}, 1.0, {0.5, 0, 0})),
           jget(p, "tol", 1e-6));
  rb.bound("plane_wave",
           conditional_variance_identity_check(plane_wave_state(g, {3, 0, 0})),
           jget(p, "tol_plane", 1e-10));
  rb.bound("random_bandlimited",
           conditional_variance_identity_check(random_bandlimited_state(
               g, ctx.seed + 7, jgeti(p, "band_limit", 12))),
           jget(p, "tol_random", 1e-5));
  return rb.r;
}

AnalysisResult a_eigenstate_flatness(Context& ctx, const Json& p) {
  ResultBuilder rb("eigenstate_flatness");
  const UniformGrid& g = ctx.grid();
  GridWaveFunction psi = oscillator_eigenstate(g, jgeti(p, "level", 0));
  const OpApply h = named_operator("hamiltonian", ctx);
  RealField f = cond_exp_position(h, psi);
  const double expected = jget(p, "expected", 0.5);
  double max_amp = 0.0;
  for (const auto& z : psi.amp) max_amp = std::max(max_amp, std::abs(z));
  double worst = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    if (std::abs(psi.amp[i]) >= 1e-4 * max_amp)
      worst = std::max(worst, std::abs(f[i] - expected));
  rb.bound("flatness_dev", worst, jget(p, "tol", 1e-4));
  rb.bound("prediction_error", std::abs(prediction_error(h, psi)),
           jget(p, "tol_pred", 1e-10));
  return rb.r;
}

AnalysisResult a_weak_value_checks(Context& ctx, const Json& p) {
  ResultBuilder rb("weak_value_checks");
  const UniformGrid& g = ctx.grid();
  GridWaveFunction psi = gaussian_state(g, {0, 0, 0}, 1.0, {0, 0, 0});
  WeakValueField w = weak_value(momentum_op(0), psi);
  double max_amp = 0.0;
  for (const auto& z : psi.amp) max_amp = std::max(max_amp, std::abs(z));
  double dev = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    if (std::abs(psi.amp[i]) >= 1e-4 * max_amp)
      dev = std::max(dev, std::abs(w.values[i].imag() - g.coord(int(i)) / 2.0));
  rb.bound("osmotic_dev", dev, jget(p, "tol", 1e-6));

  GridWaveFunction gen = gaussian_state(g, {0.4, 0, 0}, 1.2, {0.9, 0, 0});
  WeakValueField wh = weak_value(kinetic_op(), gen);
  RealField rho = density(gen);
  double s = 0.0;
  for (std::size_t i = 0; i < gen.size(); ++i) s += wh.values[i].imag() * rho[i];
  rb.bound("divergence_integral", std::abs(s * g.cell_volume()),
           jget(p, "tol_integral", 1e-10));
  return rb.r;
}

AnalysisResult a_quasi_marginals(Context& ctx, const Json& p) {
  ResultBuilder rb("quasi_marginals");
  const GridWaveFunction& psi = ctx.psi0();
  PhaseSpaceDensity f = quasi_density_f(psi);
  PhaseSpaceDensity w = wigner(psi);
  GridWaveFunction psihat = fourier_transform(psi);
  RealField rho = density(psi);
  double dev_f = 0.0, dev_w = 0.0;
  RealField mfx = f.marginal_position(), mwx = w.marginal_position();
  RealField mfp = f.marginal_momentum(), mwp = w.marginal_momentum();
  const int n = psi.grid.n;
  for (int i = 0; i < n; ++i) {
    dev_f = std::max(dev_f, std::abs(mfx[i] - rho[i]));
    dev_w = std::max(dev_w, std::abs(mwx[i] - rho[i]));
    const double pm = std::norm(psihat.amp[i]) / (2.0 * kPi);
    dev_f = std::max(dev_f, std::abs(mfp[i] - pm));
    dev_w = std::max(dev_w, std::abs(mwp[i] - pm));
  }
  rb.bound("f_marginals_dev", dev_f, jget(p, "tol", 1e-8));
  rb.bound("wigner_marginals_dev", dev_w, jget(p, "tol", 1e-8));
  rb.bound("f_mass_dev", std::abs(f.total_mass() - 1.0), jget(p, "tol", 1e-8));

  // classical momentum average under F reproduces the Bohm momentum
  BohmFields bf = bohm_fields(psi);
  double max_amp = 0.0;
  for (const auto& z : psi.amp) max_amp = std::max(max_amp, std::abs(z));
  double dev_pb = 0.0;
  for (int i = 0; i < n; ++i) {
    if (std::abs(psi.amp[i]) < 1e-4 * max_amp) continue;
    double num = 0.0, den = 0.0;
    for (int k = 0; k < n; ++k) {
      const double v = f.values[std::size_t(i) * n + k];
      num += psi.grid.momentum(k) * v;
      den += v;
    }
    dev_pb = std::max(dev_pb, std::abs(num / den - bf.p_B[0][i]));
  }
  rb.bound("f_momentum_average_dev", dev_pb, jget(p, "tol", 1e-8));
  return rb.r;
}

AnalysisResult a_moyal_identity(Context& ctx, const Json& p) {
  ResultBuilder rb("moyal_identity");
  const GridWaveFunction& psi = ctx.psi0();
  rb.bound("second_moment_identity", moyal_vs_condexp_identity(psi),
           jget(p, "tol", 1e-6));
  RealField m1 = moyal_conditional_moment(psi, 1);
  BohmFields bf = bohm_fields(psi);
  double dev = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    if (!psi.node_mask[i]) dev = std::max(dev, std::abs(m1[i] - bf.p_B[0][i]));
  rb.bound("first_moment_dev", dev, jget(p, "tol_first", 1e-10));
  rb.bound("random_state_identity",
           moyal_vs_condexp_identity(random_bandlimited_state(
               ctx.grid(), ctx.seed + 19, jgeti(p, "band_limit", 10))),
           jget(p, "tol_random", 1e-5));
  return rb.r;
}

AnalysisResult a_joint_quasi_boxes(Context& ctx, const Json& p) {
  ResultBuilder rb("joint_quasi_probability");
  const GridWaveFunction& psi = ctx.psi0();
  PhaseSpaceDensity f = quasi_density_f(psi);
  const double big = 1e9;
  rb.bound("full_plane_dev",
           std::abs(joint_quasi_probability(-big, big, -big, big, psi) - 1.0),
           jget(p, "tol_full", 1e-10));
  double worst = 0.0;
  for (auto box : {std::array<double, 4>{-1, 0.5, -2, 1},
                   std::array<double, 4>{0, 3, 0.2, 2.5},
                   std::array<double, 4>{-4, -0.5, -1.5, -0.1}}) {
    const double a = joint_quasi_probability(box[0], box[1], box[2], box[3], psi);
    const double b = box_integral(f, box[0], box[1], box[2], box[3]);
    worst = std::max(worst, std::abs(a - b));
  }
  rb.bound("box_agreement", worst, jget(p, "tol", 1e-6));

  // a negative joint quasi-probability exists for the first excited state
  GridWaveFunction e1 = oscillator_eigenstate(ctx.grid(), 1);
  const double neg = joint_quasi_probability(1.5, 3.5, 1.5, 3.5, e1);
  rb.bound("negative_box_value", neg, -0.005);
  return rb.r;
}

AnalysisResult a_coherent_center(Context& ctx, const Json& p) {
  ResultBuilder rb("coherent_center");
  const EvolutionTrace& tr = ctx.trace();
  double worst = 0.0;
  for (std::size_t s = 0; s < tr.times.size(); ++s) {
    RealField rho = density(tr.snapshots[s]);
    double mean = 0.0;
    for (int i = 0; i < tr.snapshots[s].grid.n; ++i)
      mean += tr.snapshots[s].grid.coord(i) * rho[i];
    mean *= tr.snapshots[s].grid.cell_volume();
    worst = std::max(worst, std::abs(mean - std::cos(tr.times[s])));
  }
  rb.bound("center_dev", worst, jget(p, "tol", 1e-4));
  double norm_drift = 0.0;
  for (const auto& snap : tr.snapshots)
    norm_drift = std::max(norm_drift, std::abs(norm_squared(snap) - 1.0));
  rb.bound("norm_drift", norm_drift, jget(p, "tol_norm", 1e-10));
  return rb.r;
}

AnalysisResult a_guidance_closed_form(Context& ctx, const Json& p) {
  ResultBuilder rb("guidance_closed_form");
  const EvolutionTrace& tr = ctx.trace();
  const double x0 = jget(p, "x0", 0.4);
  Trajectory t = guidance_trajectory(tr, {x0, 0, 0}, false,
                                     jgeti(p, "substeps", 5));
  double worst = 0.0;
  for (std::size_t s = 0; s < t.times.size(); ++s)
    worst = std::max(worst,
                     std::abs(t.x[s][0] - (x0 + (std::cos(t.times[s]) - 1.0))));
  rb.bound("trajectory_dev", worst, jget(p, "tol", 1e-3));
  rb.bound("hamilton_residual", hamilton_residual(tr, t),
           jget(p, "tol_hamilton", 1e-3));
  return rb.r;
}

AnalysisResult a_constraint_transport(Context& ctx, const Json& p) {
  ResultBuilder rb("constraint_transport");
  const EvolutionTrace& tr = ctx.trace();
  const double x0 = jget(p, "x0", 0.3);
  DeviationRun on = constraint_deviation_run(tr, {x0, 0, 0}, {0, 0, 0},
                                             jgeti(p, "substeps", 5));
  rb.bound("onshell_drift", on.max_actual, jget(p, "tol_onshell", 1e-6));
  const double dpi0 = jget(p, "dpi0", 1e-3);
  DeviationRun off = constraint_deviation_run(tr, {x0, 0, 0}, {dpi0, 0, 0},
                                              jgeti(p, "substeps", 5));
  rb.bound("linearization_dev", off.max_mismatch, jget(p, "tol_linear", 1e-5));
  return rb.r;
}

AnalysisResult a_poisson_brackets(Context& ctx, const Json& p) {
  ResultBuilder rb("poisson_brackets");
  const EvolutionTrace& tr = ctx.trace();
  const Json pot = ctx.sc.config.value("potential", Json::object());
  const double omega = jget(pot, "omega", 1.0);
  const bool harmonic = jgets(pot, "type", "none") == "harmonic";
  ScalarFn V = [harmonic, omega](const double* x) {
    return harmonic ? 0.5 * omega * omega * x[0] * x[0] : 0.0;
  };
  VectorFn A = [](const double*) { return std::array<double, 3>{0, 0, 0}; };
  PoissonCheckReport rep = poisson_constraint_check(
      tr, V, A, jgeti(p, "n_samples", 100), ctx.seed + 31);
  rb.bound("on_shell", rep.max_on_shell, jget(p, "tol_onshell", 1e-5));
  rb.bound("formula_dev", rep.max_formula_dev, jget(p, "tol_formula", 1e-5));
  rb.bound("involution", rep.max_involution, jget(p, "tol_involution", 1e-6));
  return rb.r;
}

AnalysisResult a_alternative_guidance(Context& ctx, const Json& p) {
  ResultBuilder rb("alternative_guidance");
  const EvolutionTrace& tr = ctx.trace();
  const UniformGrid& g = tr.snapshots.front().grid;
  if (g.dim != 2) throw ScenarioError("alternative_guidance needs a 2-d run");
  RealField bump(g.size());
  const double amp = jget(p, "amplitude", 0.05);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto c = g.unflatten(i);
    const double x = g.coord(c[0]), y = g.coord(c[1]);
    bump[i] = amp * std::exp(-(x * x + y * y) / 2.0);
  }
  std::vector<RealField> calv(2);
  calv[0] = real_gradient(g, bump, 1);
  RealField d1 = real_gradient(g, bump, 0);
  calv[1].resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) calv[1][i] = -d1[i];
  AlternativeGuidanceReport rep = alternative_guidance_check(
      tr, calv, {jget(p, "x0", 0.5), jget(p, "y0", -0.3), 0},
      jgeti(p, "substeps", 4));
  rb.bound("divergence", rep.div_v_max, jget(p, "tol_div", 1e-8));
  rb.bound("continuity_residual", rep.continuity_residual,
           jget(p, "tol_continuity", 1e-4));
  rb.range("trajectory_separation", rep.trajectory_separation,
           jget(p, "min_separation", 1e-2), 1e9);
  return rb.r;
}

AnalysisResult a_equivariance(Context& ctx, const Json& p) {
  ResultBuilder rb("equivariance");
  const double ks = equivariance_ks(ctx.trace(), jgeti(p, "n_paths", 10000),
                                    ctx.seed + 77, jgeti(p, "substeps", 5));
  rb.bound("ks_distance", ks, jget(p, "tol", 0.02));
  return rb.r;
}

AnalysisResult a_cyclotron(Context& ctx, const Json& p) {
  ResultBuilder rb("cyclotron_frequency");
  const EvolutionTrace& tr = ctx.trace();
  const FieldConfig& cfg = ctx.config();
  if (!cfg.has_uniform_b3)
    throw ScenarioError("cyclotron_frequency needs a symmetric_gauge config");
  const double bz = cfg.uniform_b3;
  const UniformGrid& g = tr.snapshots.front().grid;
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
  const auto v0 = mean_v(tr.snapshots.front());
  const auto v1 = mean_v(tr.snapshots.back());
  const double T = tr.times.back() - tr.times.front();
  double dphi = std::atan2(v1[1], v1[0]) - std::atan2(v0[1], v0[0]);
  while (dphi > kPi) dphi -= 2 * kPi;
  while (dphi < -kPi) dphi += 2 * kPi;
  rb.bound("frequency_dev", std::abs(std::abs(dphi) / T - std::abs(bz)),
           jget(p, "tol", 1e-3));
  double norm_drift = 0.0;
  for (const auto& snap : tr.snapshots)
    norm_drift = std::max(norm_drift, std::abs(norm_squared(snap) - 1.0));
  rb.bound("norm_drift", norm_drift, 1e-10);
  return rb.r;
}

AnalysisResult a_spin_ode_vs_exact(Context& ctx, const Json& p) {
  ResultBuilder rb("spin_ode_vs_exact");
  const TwoLevelTrace& exact = ctx.tl_trace();
  BFieldOfTime b = ctx.bfield();
  SpinOdeTrace ode = integrate_spin_ode(conditional_spin(exact.states[0]), b,
                                        ctx.sc.dt, ctx.sc.steps, 1);
  double worst = 0.0, worst_constraint = 0.0;
  for (std::size_t s = 0; s < exact.states.size(); ++s) {
    ConditionalSpinState ref = conditional_spin(exact.states[s]);
    const ConditionalSpinState& got = ode.states[s];
    if (ref.plus_valid && std::hypot(ref.s_plus[0], ref.s_plus[1]) < 5.0)
      for (int j = 0; j < 2; ++j)
        worst = std::max(worst, std::abs(got.s_plus[j] - ref.s_plus[j]));
    if (ref.minus_valid && std::hypot(ref.s_minus[0], ref.s_minus[1]) < 5.0)
      for (int j = 0; j < 2; ++j)
        worst = std::max(worst, std::abs(got.s_minus[j] - ref.s_minus[j]));
    worst_constraint = std::max(worst_constraint, got.constraint_residual());
  }
  rb.bound("ode_dev", worst, jget(p, "tol", 1e-7));
  rb.bound("constraint_drift", worst_constraint, jget(p, "tol_constraint", 1e-8));

  // Riccati cross-check
  ConditionalSpinState c0 = conditional_spin(exact.states[0]);
  RiccatiTrace rz = riccati_evolve(cplx(2 * c0.s_plus[0], 2 * c0.s_plus[1]), 0,
                                   b, ctx.sc.dt, ctx.sc.steps, 1);
  double worst_z = 0.0;
  for (std::size_t s = 0; s < rz.times.size(); ++s) {
    cplx z = rz.value[s];
    if (rz.chart[s] == 1) z = 1.0 / z;
    const cplx zs(2 * ode.states[s].s_plus[0], 2 * ode.states[s].s_plus[1]);
    if (std::abs(zs) < 10.0) worst_z = std::max(worst_z, std::abs(z - zs));
  }
  rb.bound("riccati_dev", worst_z, jget(p, "tol_riccati", 1e-8));
  return rb.r;
}

AnalysisResult a_kolmogorov_identity(Context& ctx, const Json& p) {
  ResultBuilder rb("kolmogorov_identity");
  const TwoLevelTrace& tr = ctx.tl_trace();
  const APolicy pol = parse_policy(p);
  double worst = 0.0;
  for (std::size_t s = 0; s < tr.states.size(); s += 16) {
    // a two-state generator with a > |J| needs both occupations positive
    if (std::norm(tr.states[s].plus) < 1e-12 ||
        std::norm(tr.states[s].minus) < 1e-12)
      continue;
    JumpGenerator gen =
        jump_generator(tr.states[s], ctx.bvec, pol);
    worst = std::max(worst, kolmogorov_residual(tr.states[s], gen));
  }
  rb.bound("identity_dev", worst, jget(p, "tol", 1e-10));
  return rb.r;
}

AnalysisResult a_jump_occupation(Context& ctx, const Json& p) {
  ResultBuilder rb("jump_occupation");
  const TwoLevelTrace& tr = ctx.tl_trace();
  const int n_paths = jgeti(p, "n_paths", 100000);
  JumpPathStats bell = simulate_jump_paths(
      tr, {APolicy::Kind::bell_minimal, 0.0}, n_paths, ctx.seed + 91);
  rb.bound("occupation_err_bell", bell.max_abs_err, jget(p, "tol", 0.005));
  JumpPathStats wide = simulate_jump_paths(
      tr, {APolicy::Kind::offset, jget(p, "offset", 1.0)}, n_paths,
      ctx.seed + 91);
  rb.bound("occupation_err_offset", wide.max_abs_err, jget(p, "tol", 0.005));
  rb.range("jump_count_gap", wide.mean_jumps - bell.mean_jumps, 1e-6, 1e18);
  rb.info("mean_jumps_bell", bell.mean_jumps);
  rb.info("mean_jumps_offset", wide.mean_jumps);
  if (!ctx.out_dir.empty()) {
    std::vector<std::vector<double>> rows;
    for (std::size_t o = 0; o < bell.times.size(); ++o)
      rows.push_back({bell.times[o], bell.occupation[o], bell.expected[o]});
    write_csv(ctx.out_dir + "/jump_occupation.csv", "t,occupation_freq,expected",
              rows);
  }
  return rb.r;
}

AnalysisResult a_bohm_bell_matrix(Context& ctx, const Json& p) {
  ResultBuilder rb("bohm_bell_matrix");
  const TwoLevelTrace& tr = ctx.tl_trace();
  BFieldOfTime b = ctx.bfield();
  BohmBellReport r0 = bohm_bell_residual(tr, b, {APolicy::Kind::bell_minimal, 0});
  BohmBellReport r1 = bohm_bell_residual(
      tr, b, {APolicy::Kind::offset, jget(p, "offset", 1.0)});
  rb.bound("residual_bell", r0.max_residual, jget(p, "tol", 1e-5));
  rb.bound("residual_offset", r1.max_residual, jget(p, "tol", 1e-5));
  rb.bound("f_dual_dev", std::max(r0.f_dual_residual, r1.f_dual_residual),
           jget(p, "tol_dual", 1e-10));
  return rb.r;
}

AnalysisResult a_sde_drift(Context& ctx, const Json& p) {
  ResultBuilder rb("sde_drift");
  SdeDriftReport rep = sde_drift_check(
      ctx.tl_trace(), ctx.bfield(), parse_policy(p),
      jgeti(p, "n_paths", 100000), ctx.seed + 101,
      jgeti(p, "n_samples", 6), jgeti(p, "increment_steps", 10));
  rb.bound("max_sigma_dev", rep.max_sigma_dev, jget(p, "tol_sigma", 3.0));
  rb.info("max_abs_dev", rep.max_abs_dev);
  return rb.r;
}

AnalysisResult a_spin_trace_dump(Context& ctx, const Json& p) {
  ResultBuilder rb("spin_trace_dump");
  const TwoLevelTrace& tr = ctx.tl_trace();
  const APolicy pol = parse_policy(p);
  std::vector<std::vector<double>> rows;
  const int stride = jgeti(p, "stride", 10);
  for (std::size_t s = 0; s < tr.states.size(); s += stride) {
    ConditionalSpinState cs = conditional_spin(tr.states[s]);
    JumpGenerator gen = jump_generator(tr.states[s], ctx.bvec, pol);
    rows.push_back({tr.times[s], cs.s_plus[0], cs.s_plus[1], cs.s_minus[0],
                    cs.s_minus[1], cs.rho_plus, gen.flux, gen.q_plus_minus,
                    gen.q_minus_plus});
  }
  if (!ctx.out_dir.empty())
    write_csv(ctx.out_dir + "/spin_trace.csv",
              "t,s1p,s2p,s1m,s2m,rho_p,J,q_pm,q_mp", rows);
  rb.info("rows", double(rows.size()));
  return rb.r;
}

AnalysisResult a_first_order_system(Context& ctx, const Json& p) {
  ResultBuilder rb("first_order_system");
  const SpinorTrace& tr = ctx.sp_trace();
  const std::size_t s_idx = std::size_t(jgeti(p, "snapshot", 1));
  ResidualReport rep = first_order_system_residual(tr, s_idx);
  rb.bound("max_residual", rep.max_residual, jget(p, "tol", 1e-4));
  rb.info("s1_residual", rep.by_equation[0]);
  rb.info("s2_residual", rep.by_equation[1]);
  rb.info("momentum_residual", rep.by_equation[2]);
  rb.info("density_residual", rep.by_equation[3]);
  return rb.r;
}

AnalysisResult a_channel_dynamics(Context& ctx, const Json& p) {
  ResultBuilder rb("channel_dynamics");
  const SpinorTrace& tr = ctx.sp_trace();
  const std::size_t s_idx = std::size_t(jgeti(p, "snapshot", 1));
  ResidualReport rp = channel_dynamics_residual(tr, s_idx, 0);
  ResidualReport rm = channel_dynamics_residual(tr, s_idx, 1);
  rb.bound("plus_channel", rp.max_residual, jget(p, "tol", 1e-4));
  rb.bound("minus_channel", rm.max_residual, jget(p, "tol", 1e-4));
  return rb.r;
}

AnalysisResult a_pauli_convergence(Context& ctx, const Json& p) {
  ResultBuilder rb("pauli_convergence");
  const SpinorTrace& tr = ctx.sp_trace();
  ResidualReport fine = first_order_system_residual(tr, 1);
  // coarsened run: half the resolution, doubled step, same analytic data
  Json coarse_grid = ctx.sc.grid;
  coarse_grid["n"] = ctx.sc.grid.at("n").get<int>() / 2;
  Json j = ctx.sc.raw;
  j["grid"] = coarse_grid;
  j["integrator"]["dt"] = ctx.sc.dt * 2.0;
  j["integrator"]["steps"] = 2;
  j["integrator"]["snapshot_stride"] = 1;
  Scenario coarse_sc = Scenario::parse_json(j);
  Context coarse_ctx(coarse_sc, ctx.seed, "");
  ResidualReport coarse = first_order_system_residual(coarse_ctx.sp_trace(), 1);
  const double ratio = coarse.max_residual / fine.max_residual;
  rb.range("residual_ratio", ratio, jget(p, "ratio_lo", 3.2),
           jget(p, "ratio_hi", 4.8));
  rb.info("coarse_residual", coarse.max_residual);
  rb.info("fine_residual", fine.max_residual);
  return rb.r;
}

AnalysisResult a_gradient_relations(Context& ctx, const Json& p) {
  ResultBuilder rb("gradient_relations");
  ChannelFields cf = pauli_cond_fields(ctx.sp_trace().snapshots.front(),
                                       ctx.config());
  GradientRelationsReport rep = gradient_relations_check(cf);
  const double tol = jget(p, "tol", 1e-6);
  rb.bound("x_residual", rep.x_residual, tol);
  rb.bound("y_residual", rep.y_residual, tol);
  rb.bound("presolved_residual", rep.presolved_residual, tol);
  rb.bound("solve_residual", rep.solve_residual, tol);
  rb.bound("spin_constraints", cf.spin_constraint_residual(),
           jget(p, "tol_constraints", 1e-8));
  return rb.r;
}

AnalysisResult a_stationary_derivatives(Context& ctx, const Json& p) {
  ResultBuilder rb("stationary_derivatives");
  const SpinorTrace& tr = ctx.sp_trace();
  ChannelFields fm = pauli_cond_fields(tr.snapshots.front(), ctx.config());
  ChannelFields fp = pauli_cond_fields(tr.snapshots.back(), ctx.config());
  const double dt2 = tr.times.back() - tr.times.front();
  double worst = 0.0;
  for (std::size_t i = 0; i < fm.well.size(); ++i) {
    if (!fm.well[i] || !fp.well[i]) continue;
    for (int c = 0; c < 2; ++c) {
      worst = std::max(worst, std::abs(fp.s1[c][i] - fm.s1[c][i]) / dt2);
      worst = std::max(worst, std::abs(fp.s2[c][i] - fm.s2[c][i]) / dt2);
      worst = std::max(worst, std::abs(fp.rho[c][i] - fm.rho[c][i]) / dt2);
      worst = std::max(worst, std::abs(fp.p[c][0][i] - fm.p[c][0][i]) / dt2);
    }
  }
  rb.bound("max_time_derivative", worst, jget(p, "tol", 1e-6));
  return rb.r;
}

AnalysisResult a_two_fluid(Context& ctx, const Json& p) {
  ResultBuilder rb("two_fluid");
  TwoFluidDiagnostics d = two_fluid_diagnostics(ctx.sp_trace(),
                                                std::size_t(jgeti(p, "snapshot", 1)));
  rb.bound("mass_sum_rule", d.mass_sum_rule, jget(p, "tol_sum", 1e-10));
  rb.bound("momentum_sum_rule", d.momentum_sum_rule, jget(p, "tol_sum", 1e-10));
  rb.bound("torque_sum_rule", d.torque_sum_rule, jget(p, "tol_sum", 1e-10));
  rb.bound("takabayasi", d.takabayasi_residual, jget(p, "tol_stress", 1e-5));
  rb.bound("mass_balance", d.mass_balance, jget(p, "tol_mass", 1e-4));
  rb.bound("momentum_balance", d.momentum_balance, jget(p, "tol_momentum", 1e-3));
  rb.bound("spin_balance", d.spin_balance, jget(p, "tol_spin", 1e-4));
  rb.bound("transfer_decomposition", d.decomposition_residual,
           jget(p, "tol_decomp", 1e-8));
  auto book = probability_bookkeeping(ctx.sp_trace(),
                                      std::size_t(jgeti(p, "snapshot", 1)));
  rb.bound("total_probability_dev", book[0], jget(p, "tol_prob", 1e-10));
  rb.bound("mass_transfer_rate_dev", book[1], jget(p, "tol_rate", 1e-6));
  if (!ctx.out_dir.empty()) {
    const double t = ctx.sp_trace().times[std::size_t(jgeti(p, "snapshot", 1))];
    write_csv(ctx.out_dir + "/diagnostics.csv",
              "t,mass_balance,momentum_balance,spin_balance,mass_sum,"
              "momentum_sum,torque_sum,takabayasi",
              {{t, d.mass_balance, d.momentum_balance, d.spin_balance,
                d.mass_sum_rule, d.momentum_sum_rule, d.torque_sum_rule,
                d.takabayasi_residual}});
  }
  return rb.r;
}

AnalysisResult a_beable_flow_jump(Context& ctx, const Json& p) {
  ResultBuilder rb("beable_flow_jump");
  BeableSimStats st = beable_flow_jump_sim(
      ctx.sp_trace(), parse_policy(p), jgeti(p, "n_paths", 100000),
      ctx.seed + 131, jgeti(p, "substeps", 2));
  rb.bound("ks_plus", st.ks_plus, jget(p, "tol_ks", 0.03));
  rb.bound("ks_minus", st.ks_minus, jget(p, "tol_ks", 0.03));
  rb.bound("population_dev", st.pop_plus_err, jget(p, "tol_pop", 0.01));
  rb.info("mean_jumps", st.mean_jumps);
  return rb.r;
}

AnalysisResult a_mixing_identity(Context& ctx, const Json& p) {
  ResultBuilder rb("mixing_identity");
  rb.bound("residual",
           mixing_identity_residual(ctx.spinor0(), ctx.config()),
           jget(p, "tol", 1e-10));
  return rb.r;
}

AnalysisResult a_bridge_identity(Context& ctx, const Json& p) {
  ResultBuilder rb("bridge_identity");
  const int trials = jgeti(p, "trials", 20);
  double worst = 0.0;
  std::vector<std::vector<double>> rows;
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng::for_stream(ctx.seed, 2000 + t);
    const int dim = 4 + int(rng.uniform() * 5);
    std::vector<int> ranks;
    int left = dim;
    while (left > 0) {
      const int rk = 1 + int(rng.uniform() * std::min(3, left));
      ranks.push_back(std::min(rk, left));
      left -= ranks.back();
    }
    SpectralDecomposition d = SpectralDecomposition::from_rank_pattern(ranks);
    Mat a = random_hermitian(dim, rng);
    Vec psi = random_state_all_blocks(d, rng);
    const double r = bridge_identity_residual(a, d, psi);
    worst = std::max(worst, r);
    rows.push_back({double(t), double(dim), double(ranks.size()), r});
  }
  rb.bound("max_residual", worst, jget(p, "tol", 1e-12));
  if (!ctx.out_dir.empty())
    write_csv(ctx.out_dir + "/bridge_trials.csv", "seed,dim,blocks,residual",
              rows);
  return rb.r;
}

AnalysisResult a_ce_dynamics(Context& ctx, const Json& p) {
  ResultBuilder rb("ce_dynamics");
  const double dt = jget(p, "dt", 1e-4);
  double worst = 0.0, worst_energy = 0.0, worst_cons = 0.0;
  double worst_ratio_lo = 1e18, worst_ratio_hi = 0.0;
  const int trials = jgeti(p, "trials", 5);
  std::vector<std::vector<double>> rows;
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng::for_stream(ctx.seed, 3000 + t);
    SpectralDecomposition d = SpectralDecomposition::from_rank_pattern(
        t % 2 == 0 ? std::vector<int>{1, 3} : std::vector<int>{2, 2});
    Mat h = random_hermitian(4, rng);
    Eigen::JacobiSVD<Mat> svd(h);
    h /= svd.singularValues()[0];
    Mat a = random_hermitian(4, rng);
    Vec psi0 = random_state_all_blocks(d, rng, 0.05);
    const double r1 = ce_dynamics_residual(h, a, d, psi0, dt, 4);
    const double r2 = ce_dynamics_residual(h, a, d, psi0, 2 * dt, 4);
    const double re = energy_ce_dynamics_residual(h, d, psi0, dt, 4);
    const double rc = consistency_expectation_residual(h, a, d, psi0);
    const double rbr = bridge_identity_residual(a, d, psi0);
    worst = std::max(worst, r1);
    worst_energy = std::max(worst_energy, re);
    worst_cons = std::max(worst_cons, rc);
    worst_ratio_lo = std::min(worst_ratio_lo, r2 / r1);
    worst_ratio_hi = std::max(worst_ratio_hi, r2 / r1);
    rows.push_back({double(t), 4.0, double(d.projections.size()), rbr, r1, re, rc});
  }
  if (!ctx.out_dir.empty())
    write_csv(ctx.out_dir + "/trial_report.csv",
              "seed,dim,ranks,residual_bridge,residual_dynamics,"
              "residual_energy,residual_consistency",
              rows);
  rb.bound("dynamics_residual", worst, jget(p, "tol", 1e-6));
  rb.bound("energy_residual", worst_energy, jget(p, "tol", 1e-6));
  rb.bound("consistency_residual", worst_cons, jget(p, "tol_consistency", 1e-10));
  rb.range("convergence_ratio_min", worst_ratio_lo, 3.0, 5.0);
  rb.range("convergence_ratio_max", worst_ratio_hi, 3.0, 5.0);
  return rb.r;
}

AnalysisResult a_algebra_properties(Context& ctx, const Json& p) {
  ResultBuilder rb("algebra_properties");
  double worst_module = 0.0, worst_trace = 0.0, worst_pos = 0.0,
         worst_tomiyama = 0.0, worst_unitary = 0.0, worst_wv = 0.0;
  const int trials = jgeti(p, "trials", 10);
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng::for_stream(ctx.seed, 4000 + t);
    SpectralDecomposition d = SpectralDecomposition::from_rank_pattern({2, 3, 3});
    Mat x(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) x(i, j) = rng.cnormal();
    std::vector<cplx> b1, b2;
    for (int nu = 0; nu < 3; ++nu) {
      b1.push_back(rng.cnormal());
      b2.push_back(rng.cnormal());
    }
    worst_module = std::max(worst_module, module_property_residual(x, d, b1, b2));
    worst_trace = std::max(worst_trace, trace_preservation_residual(x, d));
    worst_pos = std::max(worst_pos, std::max(0.0, -positivity_floor(x, d)));
    worst_tomiyama = std::max(worst_tomiyama, tomiyama_norm_gap(x, d));
    Mat a = random_hermitian(8, rng);
    Mat u = random_unitary(8, rng);
    Vec psi = random_state_all_blocks(d, rng);
    worst_unitary = std::max(worst_unitary,
                             unitary_covariance_check(a, d, u, psi));
    worst_wv = std::max(worst_wv, weak_value_projection_residual(a, psi));
  }
  const double tol = jget(p, "tol", 1e-12);
  rb.bound("module_property", worst_module, tol);
  rb.bound("trace_preservation", worst_trace, tol);
  rb.bound("positivity", worst_pos, tol);
  rb.bound("tomiyama_norm", worst_tomiyama, tol);
  rb.bound("unitary_covariance", worst_unitary, tol);
  rb.bound("weak_value_projection", worst_wv, tol);
  return rb.r;
}

AnalysisResult a_field_dump(Context& ctx, const Json& p) {
  ResultBuilder rb("field_dump");
  if (ctx.out_dir.empty()) {
    rb.r.note = "no output directory; nothing written";
    return rb.r;
  }
  const std::string fmt = jgets(p, "format", "csv");
  const GridWaveFunction& psi = ctx.psi0();
  const std::string path = ctx.out_dir + "/field_0." + (fmt == "binary" ? "qcxf" : "csv");
  if (fmt == "binary")
    write_field_binary(path, psi);
  else
    write_field_csv(path, psi);
  // round-trip integrity
  GridWaveFunction back =
      fmt == "binary" ? read_field_binary(path) : read_field_csv(path);
  double dev = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    dev = std::max(dev, std::abs(back.amp[i] - psi.amp[i]));
  rb.bound("roundtrip_dev", dev, fmt == "binary" ? 0.0 : 1e-15);
  return rb.r;
}

AnalysisResult a_trajectory_dump(Context& ctx, const Json& p) {
  ResultBuilder rb("trajectory_dump");
  const EvolutionTrace& tr = ctx.trace();
  const int dim = tr.snapshots.front().grid.dim;
  DeviationRun dev = constraint_deviation_run(tr, {jget(p, "x0", 0.4), 0, 0},
                                              {0, 0, 0}, jgeti(p, "substeps", 5));
  if (!ctx.out_dir.empty()) {
    std::vector<std::vector<double>> rows;
    std::string header = "t";
    for (int d = 0; d < dim; ++d) header += ",x" + std::to_string(d + 1);
    for (int d = 0; d < dim; ++d) header += ",pi" + std::to_string(d + 1);
    header += ",deviation_norm";
    for (std::size_t s = 0; s < dev.times.size(); ++s) {
      std::vector<double> row{dev.times[s]};
      for (int d = 0; d < dim; ++d) row.push_back(dev.x[s][d]);
      for (int d = 0; d < dim; ++d) row.push_back(dev.pi[s][d]);
      double dn = 0.0;
      for (int j = 0; j < 3; ++j) dn += dev.actual[s][j] * dev.actual[s][j];
      row.push_back(std::sqrt(dn));
      rows.push_back(std::move(row));
    }
    write_csv(ctx.out_dir + "/trajectory.csv", header, rows);
  }
  rb.info("rows", double(dev.times.size()));
  return rb.r;
}

AnalysisResult a_trace_dump(Context& ctx, const Json& p) {
  ResultBuilder rb("trace_dump");
  const EvolutionTrace& tr = ctx.trace();
  if (ctx.out_dir.empty()) {
    rb.r.note = "no output directory; nothing written";
    return rb.r;
  }
  const int stride = std::max(1, jgeti(p, "stride", 1));
  std::vector<std::vector<double>> manifest;
  int written = 0;
  for (std::size_t s = 0; s < tr.snapshots.size(); s += stride) {
    char name[64];
    std::snprintf(name, sizeof(name), "trace_%05zu.csv", s);
    write_field_csv(ctx.out_dir + "/" + name, tr.snapshots[s]);
    manifest.push_back({double(s), tr.times[s], double(written)});
    ++written;
  }
  write_csv(ctx.out_dir + "/trace_manifest.csv", "snapshot,t,file_index",
            manifest);
  rb.info("snapshots_written", double(written));
  return rb.r;
}

AnalysisResult a_pauli_field_dump(Context& ctx, const Json& p) {
  ResultBuilder rb("pauli_field_dump");
  const SpinorTrace& tr = ctx.sp_trace();
  const std::size_t s_idx = std::size_t(jgeti(p, "snapshot", 0));
  ChannelFields cf = pauli_cond_fields(tr.snapshots[s_idx], ctx.config());
  if (ctx.out_dir.empty()) {
    rb.r.note = "no output directory; nothing written";
    return rb.r;
  }
  const UniformGrid& g = cf.grid;
  std::string header;
  for (int d = 0; d < g.dim; ++d) header += "x" + std::to_string(d + 1) + ",";
  header += "channel,s1,s2,";
  for (int d = 0; d < g.dim; ++d) header += "p" + std::to_string(d + 1) + ",";
  header += "rho,Q,h,F";
  std::vector<std::vector<double>> rows;
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto cc = g.unflatten(i);
      std::vector<double> row;
      for (int d = 0; d < g.dim; ++d) row.push_back(g.coord(cc[d]));
      row.push_back(c == 0 ? 1.0 : -1.0);
      row.push_back(cf.s1[c][i]);
      row.push_back(cf.s2[c][i]);
      for (int d = 0; d < g.dim; ++d) row.push_back(cf.p[c][d][i]);
      row.push_back(cf.rho[c][i]);
      row.push_back(cf.q_pot[c][i]);
      row.push_back(cf.h[c][i]);
      row.push_back(cf.f_div[c][i]);
      rows.push_back(std::move(row));
    }
  write_csv(ctx.out_dir + "/pauli_fields.csv", header, rows);
  rb.info("rows", double(rows.size()));
  return rb.r;
}

AnalysisResult a_density_dump(Context& ctx, const Json& p) {
  ResultBuilder rb("density_dump");
  const GridWaveFunction& psi = ctx.psi0();
  PhaseSpaceDensity d = jgets(p, "kind", "f") == "wigner" ? wigner(psi)
                                                          : quasi_density_f(psi);
  if (!ctx.out_dir.empty()) {
    std::vector<std::vector<double>> rows;
    const int n = psi.grid.n;
    const int stride = jgeti(p, "stride", 1);
    for (int i = 0; i < n; i += stride)
      for (int k = 0; k < n; k += stride)
        rows.push_back({double(i), double(k), d.values[std::size_t(i) * n + k]});
    write_csv(ctx.out_dir + "/density.csv", "x_index,p_index,value", rows);
  }
  rb.info("total_mass", d.total_mass());
  return rb.r;
}

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h = {
      {"minimizer_oracle_grid", a_minimizer_oracle_grid},
      {"minimizer_oracle_discrete", a_minimizer_oracle_discrete},
      {"fisher_identities", a_fisher_identities},
      {"conditional_variance_identity", a_conditional_variance_identity},
      {"eigenstate_flatness", a_eigenstate_flatness},
      {"weak_value_checks", a_weak_value_checks},
      {"quasi_marginals", a_quasi_marginals},
      {"moyal_identity", a_moyal_identity},
      {"joint_quasi_probability", a_joint_quasi_boxes},
      {"coherent_center", a_coherent_center},
      {"guidance_closed_form", a_guidance_closed_form},
      {"constraint_transport", a_constraint_transport},
      {"poisson_brackets", a_poisson_brackets},
      {"alternative_guidance", a_alternative_guidance},
      {"equivariance", a_equivariance},
      {"cyclotron_frequency", a_cyclotron},
      {"spin_ode_vs_exact", a_spin_ode_vs_exact},
      {"kolmogorov_identity", a_kolmogorov_identity},
      {"jump_occupation", a_jump_occupation},
      {"bohm_bell_matrix", a_bohm_bell_matrix},
      {"sde_drift", a_sde_drift},
      {"spin_trace_dump", a_spin_trace_dump},
      {"first_order_system", a_first_order_system},
      {"channel_dynamics", a_channel_dynamics},
      {"pauli_convergence", a_pauli_convergence},
      {"gradient_relations", a_gradient_relations},
      {"stationary_derivatives", a_stationary_derivatives},
      {"two_fluid", a_two_fluid},
      {"beable_flow_jump", a_beable_flow_jump},
      {"mixing_identity", a_mixing_identity},
      {"bridge_identity", a_bridge_identity},
      {"ce_dynamics", a_ce_dynamics},
      {"algebra_properties", a_algebra_properties},
      {"field_dump", a_field_dump},
      {"trace_dump", a_trace_dump},
      {"pauli_field_dump", a_pauli_field_dump},
      {"trajectory_dump", a_trajectory_dump},
      {"density_dump", a_density_dump},
  };
  return h;
}

}  // namespace

const std::vector<CatalogEntry>& analysis_catalog() {
  static const std::vector<CatalogEntry> cat = {
      {"minimizer_oracle_grid",
       "closed-form conditional expectation matches a per-cell golden-section "
       "scan of ||(A - f(X)) psi||^2 in argmin and attained minimum",
       "operator, tol_argmin, tol_value"},
      {"minimizer_oracle_discrete",
       "projection-coefficient conditional expectation matches the scanned "
       "block minimizer on random finite instances",
       "trials, tol_argmin, tol_value"},
      {"fisher_identities",
       "momentum prediction error = Fisher/4 and E(Q) = tr Fisher / 8; "
       "conditional covariance of momenta integrates to Fisher/4",
       "sigmas[], anisotropic_2d, tol"},
      {"conditional_variance_identity",
       "quantum potential equals half the conditional variance of momentum "
       "given position, pointwise",
       "band_limit, tol, tol_plane, tol_random"},
      {"eigenstate_flatness",
       "conditional expectation of the Hamiltonian on an eigenstate is the "
       "flat eigenvalue with vanishing prediction error",
       "level, expected, tol"},
      {"weak_value_checks",
       "imaginary part of the momentum weak value is minus the osmotic "
       "momentum; the free-energy weak value's imaginary part integrates to 0",
       "tol, tol_integral"},
      {"quasi_marginals",
       "both phase-space quasi-densities have the position/momentum marginals "
       "of the state, and the p-average under F returns the Bohm momentum",
       "tol"},
      {"moyal_identity",
       "space-conditional second moment differs from the conditional "
       "expectation of P^2 by p_O^2 + div(p_O)/2; first moment is p_B",
       "tol, tol_first, tol_random"},
      {"joint_quasi_probability",
       "operator route E({1_I(X), 1_J(P)}) equals the F-density box integral; "
       "a negative box exists for an odd superposition",
       "tol, tol_full"},
      {"coherent_center",
       "harmonic coherent state: <X>(t) = cos(t), unit norm preserved",
       "tol, tol_norm"},
      {"guidance_closed_form",
       "guided trajectory follows the coherent-state closed form; the pair "
       "(x, p_B(x,t)) satisfies Hamilton's equations with V + Q",
       "x0, substeps, tol, tol_hamilton"},
      {"constraint_transport",
       "pi = p_B is conserved along the Hamiltonian flow; small deviations "
       "follow the linear system d(dpi)/dt = -grad(p_B - A)^T dpi",
       "x0, dpi0, tol_onshell, tol_linear"},
      {"poisson_brackets",
       "extended-phase-space brackets of h - eps with pi - p_B vanish on the "
       "constraint surface; constraints are in involution",
       "n_samples, tol_onshell, tol_formula, tol_involution"},
      {"alternative_guidance",
       "adding a divergence-free field over the density keeps the continuity "
       "equation but moves the trajectories",
       "amplitude, x0, y0, min_separation"},
      {"equivariance",
       "a Born-sampled trajectory ensemble stays Born-distributed "
       "(Kolmogorov-Smirnov distance at the final time)",
       "n_paths, substeps, tol"},
      {"cyclotron_frequency",
       "velocity expectation rotates at rate |B| in a uniform magnetic field",
       "tol"},
      {"spin_ode_vs_exact",
       "chart-switching integration of the conditional-spin system matches "
       "the exact two-level solution; constraints transported; Riccati chart "
       "agrees",
       "tol, tol_constraint, tol_riccati"},
      {"kolmogorov_identity",
       "jump rates satisfy d rho/dt = Q rho exactly for every admissible a",
       "a_policy, tol"},
      {"jump_occupation",
       "thinned jump-path ensemble reproduces the Born occupation; the "
       "minimal choice of a yields the fewest jumps",
       "n_paths, offset, tol"},
      {"bohm_bell_matrix",
       "the 2x3 spin matrix satisfies dS/dt + Q(a) S = S B + F(a) S + S S^T "
       "B' for every admissible a; both assemblies of F agree",
       "offset, tol, tol_dual"},
      {"sde_drift",
       "Monte Carlo conditional increments of the spin process match the "
       "drift B x Sigma + X ||Sigma||^2 (e3 x B) + Phi",
       "a_policy, n_paths, tol_sigma"},
      {"spin_trace_dump",
       "writes the conditional-spin trace (s-components, occupations, flux, "
       "rates) as CSV",
       "stride, a_policy"},
      {"first_order_system",
       "first-order system for (s1, s2, p, rho): time derivatives against "
       "flux/energy-difference couplings on the carrying support",
       "snapshot, tol"},
      {"channel_dynamics",
       "per-channel material-derivative systems with the sign-flipped "
       "diffusion and field terms",
       "snapshot, tol"},
      {"pauli_convergence",
       "halving dx and dt reduces the first-order-system residual fourfold",
       "ratio_lo, ratio_hi"},
      {"gradient_relations",
       "momentum and osmotic differences between channels equal the "
       "spin-gradient quotients; the pre-solved linear system holds",
       "tol, tol_constraints"},
      {"stationary_derivatives",
       "a stationary two-channel eigenstate has vanishing time derivatives "
       "of all conditional fields",
       "tol"},
      {"two_fluid",
       "two-component fluid bookkeeping: transfer sum rules, Korteweg stress "
       "identity, and mass/momentum/spin balance laws",
       "snapshot, tol_sum, tol_stress, tol_mass, tol_momentum, tol_spin"},
      {"beable_flow_jump",
       "sheet-advection plus position-dependent jumps reproduce per-sheet "
       "densities and populations",
       "a_policy, n_paths, substeps, tol_ks, tol_pop"},
      {"mixing_identity",
       "position-only conditional momentum is the occupation-weighted mixture "
       "of the channel momenta",
       "tol"},
      {"bridge_identity",
       "state-conditional expectation equals the algebra conditional "
       "expectation bridge (1/2) E(A Pi + Pi A) E(Pi)^{-1}",
       "trials, tol"},
      {"ce_dynamics",
       "time derivative of the conditional expectation matches its evolution "
       "identity at second order, including the energy special case and the "
       "expectation consistency check",
       "dt, trials, tol, tol_consistency"},
      {"algebra_properties",
       "module property, trace preservation, positivity, norm bound, unitary "
       "covariance, and the weak-value projection identity",
       "trials, tol"},
      {"field_dump", "writes a field snapshot (csv or binary) and verifies the "
                     "round trip",
       "format"},
      {"trace_dump", "writes stored trace snapshots with a timestamp manifest",
       "stride"},
      {"pauli_field_dump",
       "writes per-channel conditional fields of one snapshot as "
       "(x..., channel, s1, s2, p..., rho, Q, h, F) rows",
       "snapshot"},
      {"trajectory_dump", "writes a guided trajectory with deviation norms",
       "x0, substeps"},
      {"density_dump", "writes a phase-space density as (x_index, p_index, "
                       "value) rows",
       "kind, stride"},
  };
  return cat;
}

Json RunReport::to_json() const {
  Json j;
  j["scenario"] = scenario_name;
  j["code_version"] = code_version;
  j["config_digest"] = config_digest;
  j["wall_seconds"] = wall_seconds;
  j["pass"] = all_pass();
  Json arr = Json::array();
  for (const auto& r : results) {
    Json e;
    e["name"] = r.name;
    e["pass"] = r.pass;
    for (const auto& [k, v] : r.values) e["values"][k] = v;
    for (const auto& [k, v] : r.tolerances) e["tolerances"][k] = v;
    if (!r.note.empty()) e["note"] = r.note;
    arr.push_back(e);
  }
  j["analyses"] = arr;
  return j;
}

RunReport run_scenario(const Scenario& sc, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.scenario_name = sc.name;
  rep.code_version = kCodeVersion;
  rep.config_digest = qcx::config_digest(sc.raw);

  std::string out_dir = !opt.out_dir_override.empty() ? opt.out_dir_override
                                                      : sc.output_dir;
  if (const char* env = std::getenv("QCONDEX_OUT"); env && out_dir.empty())
    out_dir = env;
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  const std::uint64_t seed = opt.seed_override.value_or(sc.seed);
  Context ctx(sc, seed, out_dir);

  rep.results.resize(sc.analyses.size());
  auto run_one = [&](std::size_t idx) {
    const AnalysisSpec& spec = sc.analyses[idx];
    try {
      AnalysisResult r = handlers().at(spec.name)(ctx, spec.params);
      if (!spec.gate && !opt.strict && !r.pass) {
        r.note += (r.note.empty() ? "" : "; ") + std::string("not gating");
        r.pass = true;
      }
      rep.results[idx] = std::move(r);
    } catch (const std::exception& e) {
      AnalysisResult r;
      r.name = spec.name;
      r.pass = false;
      r.note = e.what();
      rep.results[idx] = std::move(r);
    }
  };

  int threads = opt.threads;
  if (const char* env = std::getenv("QCONDEX_THREADS"); env && threads <= 1)
    threads = std::max(1, std::atoi(env));
  if (threads > 1 && sc.analyses.size() > 1) {
    // shared artifacts are built up front so the workers only read
    try {
      if (sc.kind == "spin_static")
        ctx.tl_trace();
      else if (sc.kind == "pauli_1d" || sc.kind == "pauli_2d")
        ctx.sp_trace();
      else if (sc.steps > 0 && sc.grid.contains("dim"))
        ctx.trace();
    } catch (const std::exception&) {
      // analyses that need the artifact will report the failure themselves
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    const int workers = std::min<std::size_t>(threads, sc.analyses.size());
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t idx = next.fetch_add(1);
          if (idx >= sc.analyses.size()) return;
          run_one(idx);
        }
      });
    for (auto& th : pool) th.join();
  } else {
    for (std::size_t i = 0; i < sc.analyses.size(); ++i) run_one(i);
  }

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (!out_dir.empty()) {
    std::ofstream out(out_dir + "/report.json");
    out << rep.to_json().dump(2) << '\n';
  }
  return rep;
}

}  // namespace qcx
