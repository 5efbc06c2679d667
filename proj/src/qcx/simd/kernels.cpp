#include "qcx/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace qcx::simd {

namespace {
std::atomic<bool> g_force_scalar{false};

bool env_disables_simd() {
  const char* v = std::getenv("QCONDEX_NO_SIMD");
  return v != nullptr && v[0] != '\0' && v[0] != '0';
}
}  // namespace

void force_scalar(bool on) { g_force_scalar.store(on); }

const KernelTable& active() {
  if (g_force_scalar.load()) return scalar_table();
  static const KernelTable* best = [] {
    if (env_disables_simd()) return &scalar_table();
    if (const KernelTable* t = avx2_table()) return t;
    return &scalar_table();
  }();
  return *best;
}

}  // namespace qcx::simd
