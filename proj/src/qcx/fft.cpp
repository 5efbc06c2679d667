#include "qcx/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace qcx::fft {
namespace {

std::mutex g_plan_mutex;

fftw_plan get_plan(int dim, int n, int sign) {
  static std::map<std::tuple<int, int, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto key = std::make_tuple(dim, n, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  std::size_t total = 1;
  int dims[3] = {n, n, n};
  for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(n);
  std::vector<std::complex<double>> scratch(total);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  fftw_plan p = fftw_plan_dft(dim, dims, buf, buf, sign,
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw std::runtime_error("fftw plan creation failed");
  cache.emplace(key, p);
  return p;
}

}  // namespace

void dft(int dim, int n, std::complex<double>* data, int sign) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("fft: dim must be 1..3");
  fftw_plan p = get_plan(dim, n, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(p, buf, buf);
}

}  // namespace qcx::fft
