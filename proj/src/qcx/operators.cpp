#include "qcx/operators.hpp"

#include <cmath>
#include <utility>

#include "qcx/fft.hpp"

namespace qcx {

OpApply identity_op() {
  return [](const GridWaveFunction& f) { return f; };
}

OpApply position_op(int axis) {
  return [axis](const GridWaveFunction& f) {
    if (axis >= f.grid.dim) throw std::invalid_argument("position_op: axis");
    GridWaveFunction out = f;
    for (std::size_t i = 0; i < f.size(); ++i) {
      auto c = f.grid.unflatten(i);
      out.amp[i] *= f.grid.coord(c[axis]);
    }
    return out;
  };
}

OpApply momentum_op(int axis) {
  return [axis](const GridWaveFunction& f) {
    GridWaveFunction g = gradient(f, axis, DerivMethod::spectral);
    for (cplx& z : g.amp) z *= cplx(0.0, -1.0);
    return g;
  };
}

OpApply momentum_squared_op() {
  return [](const GridWaveFunction& f) {
    GridWaveFunction g = laplacian(f);
    simd::active().scale_real(-1.0, g.amp.data(), g.size());
    return g;
  };
}

OpApply kinetic_op() {
  return [](const GridWaveFunction& f) {
    GridWaveFunction g = laplacian(f);
    simd::active().scale_real(-0.5, g.amp.data(), g.size());
    return g;
  };
}

OpApply multiply_op(RealField v) {
  return [v = std::move(v)](const GridWaveFunction& f) {
    if (v.size() != f.size()) throw std::invalid_argument("multiply_op: size");
    GridWaveFunction out = f;
    for (std::size_t i = 0; i < f.size(); ++i) out.amp[i] *= v[i];
    return out;
  };
}

OpApply schrodinger_op(RealField v) {
  return [v = std::move(v)](const GridWaveFunction& f) {
    GridWaveFunction out = laplacian(f);
    for (std::size_t i = 0; i < f.size(); ++i)
      out.amp[i] = -0.5 * out.amp[i] + v[i] * f.amp[i];
    return out;
  };
}

OpApply magnetic_hamiltonian_op(FieldConfig cfg) {
  // (P-A)^2/2 + V = P^2/2 - A.P + (i/2)(div A) + A^2/2 + V
  return [cfg = std::move(cfg)](const GridWaveFunction& f) {
    check_same_grid(cfg.grid, f.grid);
    GridWaveFunction out = laplacian(f);
    simd::active().scale_real(-0.5, out.amp.data(), out.size());
    if (cfg.has_A()) {
      for (int ax = 0; ax < f.grid.dim; ++ax) {
        GridWaveFunction pf = gradient(f, ax, DerivMethod::spectral);
        // -A_ax * P_ax psi = -A_ax * (-i d_ax psi)
        for (std::size_t i = 0; i < f.size(); ++i)
          out.amp[i] -= cfg.A[ax][i] * cplx(0.0, -1.0) * pf.amp[i];
      }
      // (i/2)(div A) psi + A^2/2 psi, with div A from spectral derivatives
      RealField divA(f.size(), 0.0);
      for (int ax = 0; ax < f.grid.dim; ++ax) {
        RealField d = real_gradient(f.grid, cfg.A[ax], ax);
        for (std::size_t i = 0; i < f.size(); ++i) divA[i] += d[i];
      }
      for (std::size_t i = 0; i < f.size(); ++i) {
        double a2 = 0.0;
        for (int ax = 0; ax < f.grid.dim; ++ax) a2 += cfg.A[ax][i] * cfg.A[ax][i];
        out.amp[i] += cplx(0.0, 0.5) * divA[i] * f.amp[i] + 0.5 * a2 * f.amp[i];
      }
    }
    if (!cfg.V.empty())
      for (std::size_t i = 0; i < f.size(); ++i) out.amp[i] += cfg.V[i] * f.amp[i];
    out.refresh_mask();
    return out;
  };
}

OpApply add_ops(OpApply a, OpApply b) {
  return [a = std::move(a), b = std::move(b)](const GridWaveFunction& f) {
    GridWaveFunction x = a(f);
    GridWaveFunction y = b(f);
    simd::active().caxpy(cplx(1.0, 0.0), y.amp.data(), x.amp.data(), x.size());
    return x;
  };
}

OpApply scale_op(cplx s, OpApply a) {
  return [s, a = std::move(a)](const GridWaveFunction& f) {
    GridWaveFunction x = a(f);
    for (cplx& z : x.amp) z *= s;
    return x;
  };
}

OpApply momentum_indicator_op(std::vector<double> lo, std::vector<double> hi) {
  return [lo = std::move(lo), hi = std::move(hi)](const GridWaveFunction& f) {
    GridWaveFunction out = f;
    fft::forward(f.grid.dim, f.grid.n, out.amp);
    for (std::size_t i = 0; i < f.size(); ++i) {
      auto c = f.grid.unflatten(i);
      bool in = true;
      for (int d = 0; d < f.grid.dim; ++d) {
        const double p = f.grid.momentum(c[d]);
        if (p < lo[d] || p >= hi[d]) in = false;
      }
      if (!in) out.amp[i] = cplx(0.0, 0.0);
    }
    fft::backward(f.grid.dim, f.grid.n, out.amp);
    simd::active().scale_real(1.0 / static_cast<double>(f.grid.size()),
                              out.amp.data(), out.size());
    out.refresh_mask();
    return out;
  };
}

OpApply position_indicator_op(std::vector<double> lo, std::vector<double> hi) {
  return [lo = std::move(lo), hi = std::move(hi)](const GridWaveFunction& f) {
    GridWaveFunction out = f;
    for (std::size_t i = 0; i < f.size(); ++i) {
      auto c = f.grid.unflatten(i);
      for (int d = 0; d < f.grid.dim; ++d) {
        const double x = f.grid.coord(c[d]);
        if (x < lo[d] || x >= hi[d]) {
          out.amp[i] = cplx(0.0, 0.0);
          break;
        }
      }
    }
    out.refresh_mask();
    return out;
  };
}

double expectation(const OpApply& apply, const GridWaveFunction& psi) {
  GridWaveFunction af = apply(psi);
  return inner_product(af, psi).real();
}

}  // namespace qcx
