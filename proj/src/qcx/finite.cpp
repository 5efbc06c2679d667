#include "qcx/finite.hpp"

#include <stdexcept>

namespace qcx {

void SpectralDecomposition::validate(double tol) const {
  const int n = dim();
  if (n == 0) throw std::invalid_argument("decomposition: empty");
  if (n > 64)
    throw std::invalid_argument("decomposition: dimension capped at 64");
  Mat sum = Mat::Zero(n, n);
  for (std::size_t j = 0; j < projections.size(); ++j) {
    const Mat& p = projections[j];
    if (p.rows() != n || p.cols() != n)
      throw std::invalid_argument("decomposition: shape mismatch");
    if ((p - p.adjoint()).norm() > tol)
      throw std::invalid_argument("decomposition: projection not Hermitian");
    if ((p * p - p).norm() > tol)
      throw std::invalid_argument("decomposition: projection not idempotent");
    const double r = p.trace().real();
    if (std::abs(r - ranks[j]) > tol * n)
      throw std::invalid_argument("decomposition: rank mismatch");
    for (std::size_t k = 0; k < j; ++k)
      if ((p * projections[k]).norm() > tol)
        throw std::invalid_argument("decomposition: projections not orthogonal");
    sum += p;
  }
  if ((sum - Mat::Identity(n, n)).norm() > tol)
    throw std::invalid_argument("decomposition: not complete");
}

SpectralDecomposition SpectralDecomposition::from_hermitian(
    const Mat& b, double degeneracy_tol) {
  Eigen::SelfAdjointEigenSolver<Mat> es(b);
  const auto& vals = es.eigenvalues();
  const Mat& vecs = es.eigenvectors();
  SpectralDecomposition d;
  int i = 0;
  const int n = static_cast<int>(b.rows());
  while (i < n) {
    int j = i + 1;
    while (j < n && std::abs(vals[j] - vals[i]) < degeneracy_tol) ++j;
    Mat p = Mat::Zero(n, n);
    for (int k = i; k < j; ++k) p += vecs.col(k) * vecs.col(k).adjoint();
    d.projections.push_back(p);
    d.ranks.push_back(j - i);
    d.labels.push_back(vals.segment(i, j - i).mean());
    i = j;
  }
  return d;
}

SpectralDecomposition SpectralDecomposition::from_rank_pattern(
    const std::vector<int>& ranks) {
  int n = 0;
  for (int r : ranks) n += r;
  SpectralDecomposition d;
  int at = 0;
  for (std::size_t j = 0; j < ranks.size(); ++j) {
    Mat p = Mat::Zero(n, n);
    for (int k = 0; k < ranks[j]; ++k) p(at + k, at + k) = 1.0;
    d.projections.push_back(p);
    d.ranks.push_back(ranks[j]);
    d.labels.push_back(static_cast<double>(j));
    at += ranks[j];
  }
  return d;
}

Mat random_hermitian(int dim, Rng& rng) {
  Mat a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = rng.cnormal();
  return 0.5 * (a + Mat(a.adjoint()));
}

Mat random_unitary(int dim, Rng& rng) {
  Mat a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = rng.cnormal();
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  // fix the phase convention so Q is uniquely determined
  for (int j = 0; j < dim; ++j) {
    std::complex<double> d = r(j, j);
    if (std::abs(d) > 0) q.col(j) *= d / std::abs(d);
  }
  return q;
}

Vec random_state(int dim, Rng& rng) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.cnormal();
  v.normalize();
  return v;
}

Vec random_state_all_blocks(const SpectralDecomposition& d, Rng& rng,
                            double min_block_weight) {
  const int n = d.dim();
  for (int attempt = 0; attempt < 256; ++attempt) {
    Vec v = random_state(n, rng);
    bool ok = true;
    for (const Mat& p : d.projections)
      if ((p * v).squaredNorm() < min_block_weight) ok = false;
    if (ok) return v;
  }
  throw std::runtime_error("failed to sample a state charging every block");
}

}  // namespace qcx
