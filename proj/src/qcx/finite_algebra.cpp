#include "qcx/finite_algebra.hpp"

#include <cmath>

namespace qcx {

Mat ce_commutant(const Mat& a, const SpectralDecomposition& d) {
  Mat out = Mat::Zero(d.dim(), d.dim());
  for (const Mat& p : d.projections) out += p * a * p;
  return out;
}

AlgebraCE ce_algebra(const Mat& a, const SpectralDecomposition& d) {
  AlgebraCE out;
  out.as_matrix = Mat::Zero(d.dim(), d.dim());
  for (std::size_t nu = 0; nu < d.projections.size(); ++nu) {
    const cplx c = (d.projections[nu] * a * d.projections[nu]).trace() /
                   double(d.ranks[nu]);
    out.coeff.push_back(c);
    out.as_matrix += c * d.projections[nu];
  }
  return out;
}

Mat ce_projector_inverse(const SpectralDecomposition& d, const Vec& psi) {
  Mat out = Mat::Zero(d.dim(), d.dim());
  for (std::size_t nu = 0; nu < d.projections.size(); ++nu) {
    const double w = (d.projections[nu] * psi).squaredNorm();
    if (w < 1e-28)
      throw std::invalid_argument(
          "ce_projector_inverse: a block carries no amplitude");
    out += (double(d.ranks[nu]) / w) * d.projections[nu];
  }
  return out;
}

double bridge_identity_residual(const Mat& a, const SpectralDecomposition& d,
                             const Vec& psi) {
  DiscreteCondExp lhs = cond_exp_discrete(a, d, psi);
  const Mat pi = psi * psi.adjoint();
  const Mat bridge =
      0.5 * ce_algebra(a * pi + pi * a, d).as_matrix * ce_projector_inverse(d, psi);
  return (lhs.as_matrix - bridge).norm();
}

namespace {
inline Mat jordan(const Mat& x, const Mat& y) { return 0.5 * (x * y + y * x); }
inline Mat comm_i(const Mat& h, const Mat& x) {
  return cplx(0, 1) * (h * x - x * h);
}
}  // namespace

Mat ce_dynamics_rhs(const Mat& h, const Mat& a, const SpectralDecomposition& d,
                    const Vec& psi) {
  const Mat pi = psi * psi.adjoint();
  const Mat e_comm = cond_exp_discrete(comm_i(h, a), d, psi).as_matrix;
  const Mat e_pi = cond_exp_discrete(comm_i(h, pi), d, psi).as_matrix;
  const Mat e_a = cond_exp_discrete(a, d, psi).as_matrix;
  const Mat last = 0.5 * ce_algebra(comm_i(h, 2.0 * jordan(a, pi)), d).as_matrix *
                   ce_projector_inverse(d, psi);
  return e_comm + 2.0 * e_pi * e_a - last;
}

namespace {

// exact state at time t from the eigendecomposition of h
struct ExactFlow {
  Eigen::SelfAdjointEigenSolver<Mat> es;
  Vec coeffs;
  explicit ExactFlow(const Mat& h, const Vec& psi0) : es(h) {
    coeffs = es.eigenvectors().adjoint() * psi0;
  }
  Vec at(double t) const {
    Vec ph(coeffs.size());
    for (int k = 0; k < coeffs.size(); ++k) {
      const double a = -es.eigenvalues()[k] * t;
      ph[k] = coeffs[k] * cplx(std::cos(a), std::sin(a));
    }
    return es.eigenvectors() * ph;
  }
};

}  // namespace

double ce_dynamics_residual(const Mat& h, const Mat& a,
                            const SpectralDecomposition& d, const Vec& psi0,
                            double dt, int steps) {
  ExactFlow flow(h, psi0);
  double worst = 0.0;
  for (int s = 1; s + 1 <= steps; ++s) {
    const double t = s * dt;
    const Mat em = cond_exp_discrete(a, d, flow.at(t - dt)).as_matrix;
    const Mat ep = cond_exp_discrete(a, d, flow.at(t + dt)).as_matrix;
    const Mat lhs = (ep - em) / (2.0 * dt);
    const Mat rhs = ce_dynamics_rhs(h, a, d, flow.at(t));
    worst = std::max(worst, (lhs - rhs).norm());
  }
  return worst;
}

Mat energy_ce_dynamics_rhs(const Mat& h, const SpectralDecomposition& d,
                           const Vec& psi) {
  const Mat pi = psi * psi.adjoint();
  const Mat e_h2 = cond_exp_discrete(comm_i(h * h, pi), d, psi).as_matrix;
  const Mat e_h = cond_exp_discrete(h, d, psi).as_matrix;
  const Mat e_pi = cond_exp_discrete(comm_i(h, pi), d, psi).as_matrix;
  return -e_h2 + 2.0 * e_h * e_pi;
}

double energy_ce_dynamics_residual(const Mat& h, const SpectralDecomposition& d,
                                   const Vec& psi0, double dt, int steps) {
  ExactFlow flow(h, psi0);
  double worst = 0.0;
  for (int s = 1; s + 1 <= steps; ++s) {
    const double t = s * dt;
    const Mat em = cond_exp_discrete(h, d, flow.at(t - dt)).as_matrix;
    const Mat ep = cond_exp_discrete(h, d, flow.at(t + dt)).as_matrix;
    const Mat lhs = (ep - em) / (2.0 * dt);
    const Mat rhs = energy_ce_dynamics_rhs(h, d, flow.at(t));
    worst = std::max(worst, (lhs - rhs).norm());
  }
  return worst;
}

double consistency_expectation_residual(const Mat& h, const Mat& a,
                                        const SpectralDecomposition& d,
                                        const Vec& psi) {
  const Mat rhs83 = ce_dynamics_rhs(h, a, d, psi);
  const cplx lhs = (psi.adjoint() * (rhs83 * psi))(0);
  const Mat e_a = cond_exp_discrete(a, d, psi).as_matrix;
  const cplx rhs = (psi.adjoint() * (comm_i(h, a - e_a) * psi))(0);
  return std::abs(lhs - rhs);
}

double weak_value_projection_residual(const Mat& a, const Vec& psi) {
  const int n = static_cast<int>(psi.size());
  SpectralDecomposition d = SpectralDecomposition::from_rank_pattern(
      std::vector<int>(static_cast<std::size_t>(n), 1));
  const Mat pi = psi * psi.adjoint();
  DiscreteCondExp ce = cond_exp_discrete(comm_i(a, pi), d, psi);
  const Vec apsi = a * psi;
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    if (!ce.valid[static_cast<std::size_t>(k)]) continue;
    const double im_wv = (apsi[k] / psi[k]).imag();
    worst = std::max(worst,
                     std::abs(im_wv + ce.coeff[static_cast<std::size_t>(k)]));
  }
  return worst;
}

double module_property_residual(const Mat& a, const SpectralDecomposition& d,
                                const std::vector<cplx>& b1,
                                const std::vector<cplx>& b2) {
  Mat m1 = Mat::Zero(d.dim(), d.dim());
  Mat m2 = Mat::Zero(d.dim(), d.dim());
  for (std::size_t nu = 0; nu < d.projections.size(); ++nu) {
    m1 += b1[nu] * d.projections[nu];
    m2 += b2[nu] * d.projections[nu];
  }
  const Mat lhs = ce_algebra(m1 * a * m2, d).as_matrix;
  const Mat rhs = m1 * ce_algebra(a, d).as_matrix * m2;
  return (lhs - rhs).norm();
}

double tomiyama_norm_gap(const Mat& a, const SpectralDecomposition& d) {
  const Mat e = ce_commutant(a, d);
  Eigen::JacobiSVD<Mat> sa(a);
  Eigen::JacobiSVD<Mat> se(e);
  return std::max(0.0, se.singularValues()[0] - sa.singularValues()[0]);
}

double trace_preservation_residual(const Mat& a, const SpectralDecomposition& d) {
  return std::abs(ce_algebra(a, d).as_matrix.trace() - a.trace());
}

double positivity_floor(const Mat& g_factor, const SpectralDecomposition& d) {
  const Mat a = g_factor.adjoint() * g_factor;
  AlgebraCE ce = ce_algebra(a, d);
  double floor = 1e300;
  for (const cplx& c : ce.coeff) floor = std::min(floor, c.real());
  return floor;
}

}  // namespace qcx
