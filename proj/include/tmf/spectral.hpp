#pragma once

// Differential operators, dealiased products, the Leray projector and L2
// quadrature on the periodic grid. Every operator has a spectral-level form
// (used by the time steppers, which keep their state in Fourier space) and a
// sample-level wrapper with the same name.

#include <algorithm>
#include <cmath>
#include <string>

#include "tmf/fft.hpp"
#include "tmf/grid.hpp"

namespace tmf {

// ---------------------------------------------------------------------------
// Spectral-level primitives
// ---------------------------------------------------------------------------

/// Zeroes every mode outside the 2/3 band |k_j| <= floor(m/3).
inline void dealias(SpectralField& s) {
  const auto& g = s.grid;
  for (std::size_t slot = 0; slot < g.modes(); ++slot) {
    if (g.in_dealias_band(g.mode_wavevector(slot))) continue;
    for (int c = 0; c < s.ncomp; ++c) s.component(c)[slot] = 0.0;
  }
}

/// i*k_axis multiplier applied to one component; the Nyquist row is dropped.
inline void derivative_into(const GridSpec& g, std::span<const Complex> in, int axis,
                            std::span<Complex> out) {
  const int nyq = g.m() / 2;
  for (std::size_t slot = 0; slot < g.modes(); ++slot) {
    const int k = g.mode_wavevector(slot)[axis];
    out[slot] = (k == nyq || k == -nyq) ? Complex{} : Complex(0.0, k) * in[slot];
  }
}

inline SpectralField spectral_gradient(const SpectralField& f) {
  if (f.ncomp != 1) throw Error("gradient: expected a scalar spectrum");
  SpectralField out(f.grid, f.grid.dim());
  for (int j = 0; j < f.grid.dim(); ++j) derivative_into(f.grid, f.component(0), j, out.component(j));
  return out;
}

inline SpectralField spectral_divergence(const SpectralField& v) {
  const auto& g = v.grid;
  SpectralField out(g, 1);
  auto o = out.component(0);
  const int nyq = g.m() / 2;
  for (std::size_t slot = 0; slot < g.modes(); ++slot) {
    const auto k = g.mode_wavevector(slot);
    Complex acc{};
    for (int j = 0; j < g.dim(); ++j) {
      if (k[j] == nyq || k[j] == -nyq) continue;
      acc += Complex(0.0, k[j]) * v.component(j)[slot];
    }
    o[slot] = acc;
  }
  return out;
}

inline void spectral_laplacian_inplace(SpectralField& v, double scale = 1.0) {
  const auto& g = v.grid;
  for (std::size_t slot = 0; slot < g.modes(); ++slot) {
    const double k2 = norm_squared(g.mode_wavevector(slot), g.dim());
    for (int c = 0; c < v.ncomp; ++c) v.component(c)[slot] *= -k2 * scale;
  }
}

inline SpectralField spectral_laplacian(SpectralField v) {
  spectral_laplacian_inplace(v);
  return v;
}

/// Leray-Hodge projection per mode: v -> v - k <k,v> / |k|^2; k = 0 passes.
inline void leray_project_inplace(SpectralField& v) {
  const auto& g = v.grid;
  if (v.ncomp != g.dim()) throw Error("leray_project: expected a vector spectrum");
  const int n = g.dim();
  for (std::size_t slot = 1; slot < g.modes(); ++slot) {
    const auto k = g.mode_wavevector(slot);
    const double k2 = norm_squared(k, n);
    Complex kv{};
    for (int j = 0; j < n; ++j) kv += static_cast<double>(k[j]) * v.component(j)[slot];
    kv /= k2;
    for (int j = 0; j < n; ++j) v.component(j)[slot] -= static_cast<double>(k[j]) * kv;
  }
}

inline SpectralField leray_project(SpectralField v) {
  leray_project_inplace(v);
  return v;
}

/// Inverse Laplacian on a mean-zero scalar spectrum.
inline SpectralField spectral_solve_poisson(const SpectralField& g_hat, double mean_tol_rel = 1e-10) {
  const auto& g = g_hat.grid;
  if (g_hat.ncomp != 1) throw Error("solve_poisson: expected a scalar spectrum");
  auto in = g_hat.component(0);
  double norm2 = 0.0;
  for (std::size_t slot = 0; slot < g.modes(); ++slot) {
    const double w = (g.mode_wavevector(slot)[g.dim() - 1] == 0) ? 1.0 : 2.0;
    norm2 += w * std::norm(in[slot]);
  }
  const double mean = in[0].real();
  if (std::abs(mean) > mean_tol_rel * std::sqrt(norm2) && std::abs(mean) > 0.0) {
    throw Error("solve_poisson: right-hand side has nonzero mean " + std::to_string(mean));
  }
  SpectralField out(g, 1);
  auto o = out.component(0);
  for (std::size_t slot = 1; slot < g.modes(); ++slot) {
    o[slot] = -in[slot] / norm_squared(g.mode_wavevector(slot), g.dim());
  }
  return out;
}

/// <<a,b>> = integral of <a(x),b(x)> over the torus, from spectra (Parseval).
inline double spectral_inner(const SpectralField& a, const SpectralField& b) {
  require_same_grid(a.grid, b.grid, "inner_product_l2");
  if (a.ncomp != b.ncomp) throw Error("inner_product_l2: component mismatch");
  const auto& g = a.grid;
  const int m = g.m();
  double acc = 0.0;
  for (std::size_t slot = 0; slot < g.modes(); ++slot) {
    const int kl = g.mode_wavevector(slot)[g.dim() - 1];
    const double w = (kl == 0 || kl == m / 2) ? 1.0 : 2.0;
    double s = 0.0;
    for (int c = 0; c < a.ncomp; ++c) {
      s += (a.component(c)[slot] * std::conj(b.component(c)[slot])).real();
    }
    acc += w * s;
  }
  return acc * g.volume();
}

inline double spectral_norm(const SpectralField& a) { return std::sqrt(spectral_inner(a, a)); }

/// Sum over components j of <<d_j a, d_j b>> (the H1 seminorm pairing).
inline double spectral_gradient_inner(const SpectralField& a, const SpectralField& b) {
  SpectralField la = a;
  spectral_laplacian_inplace(la, -1.0);
  return spectral_inner(la, b);
}

/// Sample-space gradients of every component: result[c * n + j] = d_j a_c.
inline std::vector<std::vector<double>> physical_jacobian(const SpectralField& s) {
  const auto& g = s.grid;
  const int n = g.dim();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(s.ncomp) * n,
                                       std::vector<double>(g.points()));
  std::vector<Complex> work(g.modes());
  for (int c = 0; c < s.ncomp; ++c) {
    for (int j = 0; j < n; ++j) {
      derivative_into(g, s.component(c), j, work);
      inverse_component(g, work, out[static_cast<std::size_t>(c) * n + j]);
    }
  }
  return out;
}

inline std::vector<std::vector<double>> physical_components(const SpectralField& s) {
  std::vector<std::vector<double>> out(s.ncomp, std::vector<double>(s.grid.points()));
  for (int c = 0; c < s.ncomp; ++c) inverse_component(s.grid, s.component(c), out[c]);
  return out;
}

/// Which of the two transport products to form.
struct TransportTerms {
  bool advection = true;   // grad_V xi = <V, grad> xi
  bool stretching = true;  // V' (x) xi = (grad V)^T xi
};

/// Dealiased grad_V xi and/or V'(x)xi for spectral V and xi, summed.
/// Inputs are truncated to the 2/3 band, the product formed on the grid and the
/// result truncated again.
inline SpectralField spectral_transport(const SpectralField& v_in, const SpectralField& xi_in,
                                        TransportTerms terms) {
  require_same_grid(v_in.grid, xi_in.grid, "transport product");
  const auto& g = v_in.grid;
  const int n = g.dim();
  SpectralField v = v_in;
  SpectralField xi = xi_in;
  dealias(v);
  dealias(xi);

  std::vector<std::vector<double>> acc(n, std::vector<double>(g.points(), 0.0));
  if (terms.advection) {
    auto vp = physical_components(v);
    auto dxi = physical_jacobian(xi);
    for (int i = 0; i < n; ++i) {
      auto& a = acc[i];
      for (int j = 0; j < n; ++j) {
        const auto& vj = vp[j];
        const auto& d = dxi[static_cast<std::size_t>(i) * n + j];
        for (std::size_t p = 0; p < g.points(); ++p) a[p] += vj[p] * d[p];
      }
    }
  }
  if (terms.stretching) {
    auto xp = physical_components(xi);
    auto dv = physical_jacobian(v);
    for (int i = 0; i < n; ++i) {
      auto& a = acc[i];
      for (int j = 0; j < n; ++j) {
        const auto& xj = xp[j];
        const auto& d = dv[static_cast<std::size_t>(j) * n + i];  // d_i V_j
        for (std::size_t p = 0; p < g.points(); ++p) a[p] += d[p] * xj[p];
      }
    }
  }
  SpectralField out(g, n);
  for (int i = 0; i < n; ++i) forward_component(g, acc[i], out.component(i));
  dealias(out);
  return out;
}

// ---------------------------------------------------------------------------
// Sample-level operators
// ---------------------------------------------------------------------------

inline VectorField gradient(const ScalarField& f) { return dft_inverse(spectral_gradient(dft_forward(f))); }

inline ScalarField divergence(const VectorField& v) {
  return dft_inverse_scalar(spectral_divergence(dft_forward(v)));
}

inline VectorField vector_laplacian(const VectorField& v) {
  return dft_inverse(spectral_laplacian(dft_forward(v)));
}

/// grad_u xi = <u, grad> xi, dealiased.
inline VectorField directional_derivative(const VectorField& u, const VectorField& xi) {
  require_same_grid(u.grid, xi.grid, "directional_derivative");
  return dft_inverse(spectral_transport(dft_forward(u), dft_forward(xi), {true, false}));
}

/// u' (x) xi, component i = sum_j (d_i u_j) xi_j, dealiased.
inline VectorField transpose_gradient_product(const VectorField& u, const VectorField& xi) {
  require_same_grid(u.grid, xi.grid, "transpose_gradient_product");
  return dft_inverse(spectral_transport(dft_forward(u), dft_forward(xi), {false, true}));
}

inline VectorField leray_project(const VectorField& v) { return dft_inverse(leray_project(dft_forward(v))); }

inline ScalarField solve_poisson(const ScalarField& rhs) {
  return dft_inverse_scalar(spectral_solve_poisson(dft_forward(rhs)));
}

/// Rectangle-rule quadrature of <a,b> with cell volume (2*pi/m)^n.
inline double inner_product_l2(std::span<const double> a, std::span<const double> b, const GridSpec& g) {
  if (a.size() != b.size()) throw Error("inner_product_l2: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc * g.volume() / static_cast<double>(g.points());
}

inline double inner_product_l2(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid, b.grid, "inner_product_l2");
  return inner_product_l2(a.data, b.data, a.grid);
}

inline double inner_product_l2(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid, "inner_product_l2");
  return inner_product_l2(a.samples, b.samples, a.grid);
}

inline double l2_norm(const VectorField& a) { return std::sqrt(inner_product_l2(a, a)); }
inline double l2_norm(const ScalarField& a) { return std::sqrt(inner_product_l2(a, a)); }

// ---------------------------------------------------------------------------
// Off-grid evaluation
// ---------------------------------------------------------------------------

/// Exact trigonometric interpolation of a band-limited spectrum at arbitrary
/// points. Modes on the Nyquist planes are ignored.
class SpectralInterpolator {
 public:
  explicit SpectralInterpolator(const SpectralField& s) : grid_(s.grid), ncomp_(s.ncomp) {
    const auto& g = s.grid;
    const int n = g.dim();
    band_ = 0;
    for (std::size_t slot = 0; slot < g.modes(); ++slot) {
      const auto k = g.mode_wavevector(slot);
      bool nyquist = false;
      for (int d = 0; d < n; ++d) nyquist |= (std::abs(k[d]) == g.m() / 2);
      if (nyquist) continue;
      bool nonzero = false;
      for (int c = 0; c < s.ncomp; ++c) nonzero |= (s.component(c)[slot] != Complex{});
      if (!nonzero) continue;
      for (int d = 0; d < n; ++d) band_ = std::max(band_, std::abs(k[d]));
    }
    const int w = 2 * band_ + 1;
    const int h = band_ + 1;
    // Dense box [-b,b]^(n-1) x [0,b], doubled weights folded in for k_last > 0.
    std::size_t box = static_cast<std::size_t>(h);
    for (int d = 0; d < n - 1; ++d) box *= static_cast<std::size_t>(w);
    coeffs_.assign(static_cast<std::size_t>(ncomp_) * box, Complex{});
    box_ = box;
    for (std::size_t slot = 0; slot < g.modes(); ++slot) {
      const auto k = g.mode_wavevector(slot);
      bool inside = true;
      for (int d = 0; d < n; ++d) inside &= (std::abs(k[d]) <= band_ && std::abs(k[d]) < g.m() / 2);
      if (!inside) continue;
      std::size_t idx = 0;
      for (int d = 0; d < n - 1; ++d) idx = idx * w + static_cast<std::size_t>(k[d] + band_);
      idx = idx * h + static_cast<std::size_t>(k[n - 1]);
      const double weight = k[n - 1] == 0 ? 1.0 : 2.0;
      for (int c = 0; c < ncomp_; ++c) coeffs_[c * box + idx] = weight * s.component(c)[slot];
    }
  }

  int components() const { return ncomp_; }
  int band() const { return band_; }

  /// Value of every component at x.
  Point operator()(const Point& x) const {
    const int n = grid_.dim();
    const int w = 2 * band_ + 1;
    const int h = band_ + 1;
    std::array<std::vector<Complex>, 3> e;
    for (int d = 0; d < n; ++d) {
      e[d].resize(w);
      for (int k = -band_; k <= band_; ++k) e[d][k + band_] = std::polar(1.0, k * x[d]);
    }
    Point out{0.0, 0.0, 0.0};
    for (int c = 0; c < ncomp_; ++c) {
      const Complex* base = coeffs_.data() + c * box_;
      double total = 0.0;
      if (n == 2) {
        for (int a = 0; a < w; ++a) {
          Complex inner{};
          const Complex* row = base + static_cast<std::size_t>(a) * h;
          for (int b = 0; b < h; ++b) inner += row[b] * e[1][b + band_];
          total += (inner * e[0][a]).real();
        }
      } else {
        for (int a = 0; a < w; ++a) {
          Complex mid{};
          for (int b = 0; b < w; ++b) {
            Complex inner{};
            const Complex* row = base + (static_cast<std::size_t>(a) * w + b) * h;
            for (int q = 0; q < h; ++q) inner += row[q] * e[2][q + band_];
            mid += inner * e[1][b];
          }
          total += (mid * e[0][a]).real();
        }
      }
      out[c] = total;
    }
    return out;
  }

 private:
  GridSpec grid_;
  int ncomp_ = 0;
  int band_ = 0;
  std::size_t box_ = 0;
  std::vector<Complex> coeffs_;
};

/// Wraps x into [0, 2*pi) per axis.
inline Point wrap_point(Point x, int dim) {
  for (int d = 0; d < dim; ++d) {
    x[d] = std::fmod(x[d], two_pi);
    if (x[d] < 0.0) x[d] += two_pi;
    if (x[d] >= two_pi) x[d] -= two_pi;
  }
  return x;
}

}  // namespace tmf
