#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "qcx/rng.hpp"

namespace qcx {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// Finite list of orthogonal projections representing a discrete-spectrum
// conditioning operator B = sum_nu lambda_nu Pi_nu.
struct SpectralDecomposition {
  std::vector<Mat> projections;
  std::vector<int> ranks;
  std::vector<double> labels;

  int dim() const {
    return projections.empty() ? 0 : static_cast<int>(projections[0].rows());
  }
  // Hermitian, idempotent, mutually orthogonal, complete; throws on violation.
  void validate(double tol = 1e-12) const;

  // eigenspace projections of a Hermitian matrix (degenerate eigenvalues
  // merged with tolerance `degeneracy_tol`)
  static SpectralDecomposition from_hermitian(const Mat& b,
                                              double degeneracy_tol = 1e-9);
  // orthonormal-basis blocks of the given sizes (labels 0,1,...)
  static SpectralDecomposition from_rank_pattern(const std::vector<int>& ranks);
};

Mat random_hermitian(int dim, Rng& rng);
Mat random_unitary(int dim, Rng& rng);
Vec random_state(int dim, Rng& rng);
// random normalized state with Pi_nu psi != 0 for every block
Vec random_state_all_blocks(const SpectralDecomposition& d, Rng& rng,
                            double min_block_weight = 1e-3);

}  // namespace qcx
