#pragma once

#include <complex>
#include <vector>

namespace qcx::fft {

// Unnormalized DFT / inverse DFT over a dim-dimensional cube of side n,
// row-major, in place. Plans are cached per (dim, n, sign).
void dft(int dim, int n, std::complex<double>* data, int sign);

inline void forward(int dim, int n, std::vector<std::complex<double>>& v) {
  dft(dim, n, v.data(), -1);
}
inline void backward(int dim, int n, std::vector<std::complex<double>>& v) {
  dft(dim, n, v.data(), +1);
}

}  // namespace qcx::fft
