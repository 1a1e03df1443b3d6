#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmf {

using Complex = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Raised for every contract violation in the library (bad grids, mismatched
/// fields, non-finite states, invalid configs).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integer wavevector; only the first `dim` entries are meaningful.
using Wavevector = std::array<int, 3>;
/// Point or direction in R^n; only the first `dim` entries are meaningful.
using Point = std::array<double, 3>;

/// Uniform periodic grid on [0, 2*pi)^n with m points per axis.
class GridSpec {
 public:
  GridSpec() = default;
  GridSpec(int dim, int m) : dim_(dim), m_(m) {
    if (dim != 2 && dim != 3) {
      throw Error("GridSpec: dimension must be 2 or 3, got " + std::to_string(dim));
    }
    if (m < 8 || (m & (m - 1)) != 0) {
      throw Error("GridSpec: points per axis must be a power of two >= 8, got " +
                  std::to_string(m));
    }
  }

  int dim() const { return dim_; }
  int m() const { return m_; }
  double period() const { return two_pi; }
  double spacing() const { return two_pi / m_; }

  /// Number of real samples per component (m^n).
  std::size_t points() const {
    std::size_t p = 1;
    for (int d = 0; d < dim_; ++d) p *= static_cast<std::size_t>(m_);
    return p;
  }
  /// Number of stored half-spectrum coefficients per component.
  std::size_t modes() const { return points() / m_ * (m_ / 2 + 1); }
  /// Volume of the torus, (2*pi)^n.
  double volume() const { return std::pow(two_pi, dim_); }
  /// Largest retained wavenumber per axis under the 2/3 rule.
  int dealias_cutoff() const { return m_ / 3; }

  /// Signed wavenumber of FFT index i along a full axis.
  int wavenumber(int i) const { return i <= m_ / 2 ? i : i - m_; }

  /// Multi-index of a real sample (row-major, last axis fastest).
  std::array<int, 3> point_index(std::size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int d = dim_ - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(flat % m_);
      flat /= m_;
    }
    return idx;
  }
  Point coordinate(std::size_t flat) const {
    auto idx = point_index(flat);
    Point x{0.0, 0.0, 0.0};
    for (int d = 0; d < dim_; ++d) x[d] = idx[d] * spacing();
    return x;
  }

  /// Wavevector of a half-spectrum slot (row-major over m^(n-1) x (m/2+1)).
  Wavevector mode_wavevector(std::size_t flat) const {
    const int half = m_ / 2 + 1;
    Wavevector k{0, 0, 0};
    k[dim_ - 1] = static_cast<int>(flat % half);
    flat /= half;
    for (int d = dim_ - 2; d >= 0; --d) {
      k[d] = wavenumber(static_cast<int>(flat % m_));
      flat /= m_;
    }
    return k;
  }

  /// Half-spectrum slot of wavevector k, which must satisfy k[last] in [0, m/2]
  /// and |k_j| <= m/2 elsewhere.
  std::size_t mode_slot(const Wavevector& k) const {
    const int half = m_ / 2 + 1;
    std::size_t flat = 0;
    for (int d = 0; d < dim_ - 1; ++d) {
      const int i = k[d] < 0 ? k[d] + m_ : k[d];
      flat = flat * m_ + static_cast<std::size_t>(i);
    }
    return flat * half + static_cast<std::size_t>(k[dim_ - 1]);
  }

  /// True when every component lies inside the representable range (-m/2, m/2).
  bool resolvable(const Wavevector& k) const {
    for (int d = 0; d < dim_; ++d) {
      if (k[d] <= -m_ / 2 || k[d] >= m_ / 2) return false;
    }
    return true;
  }
  bool in_dealias_band(const Wavevector& k) const {
    const int kc = dealias_cutoff();
    for (int d = 0; d < dim_; ++d) {
      if (k[d] > kc || k[d] < -kc) return false;
    }
    return true;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  int dim_ = 2;
  int m_ = 8;
};

inline double norm_squared(const Wavevector& k, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += static_cast<double>(k[d]) * k[d];
  return s;
}

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) {
    throw Error(std::string(what) + ": grid mismatch (" + std::to_string(a.dim()) + "D m=" +
                std::to_string(a.m()) + " vs " + std::to_string(b.dim()) +
                "D m=" + std::to_string(b.m()) + ")");
  }
}

/// Real samples of a scalar on the grid, row-major.
struct ScalarField {
  GridSpec grid;
  std::vector<double> samples;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g) : grid(g), samples(g.points(), 0.0) {}

  template <class F>
  static ScalarField sample(const GridSpec& g, F&& f) {
    ScalarField s(g);
    for (std::size_t p = 0; p < g.points(); ++p) s.samples[p] = f(g.coordinate(p));
    return s;
  }
};

/// n real components on a shared grid, stored component-major then row-major.
struct VectorField {
  GridSpec grid;
  std::vector<double> data;

  VectorField() = default;
  explicit VectorField(const GridSpec& g)
      : grid(g), data(static_cast<std::size_t>(g.dim()) * g.points(), 0.0) {}

  int components() const { return grid.dim(); }
  std::span<double> component(int c) {
    return {data.data() + static_cast<std::size_t>(c) * grid.points(), grid.points()};
  }
  std::span<const double> component(int c) const {
    return {data.data() + static_cast<std::size_t>(c) * grid.points(), grid.points()};
  }
  Point at(std::size_t p) const {
    Point v{0.0, 0.0, 0.0};
    for (int c = 0; c < components(); ++c) v[c] = component(c)[p];
    return v;
  }

  /// Samples a callable x -> Point at every node.
  template <class F>
  static VectorField sample(const GridSpec& g, F&& f) {
    VectorField v(g);
    for (std::size_t p = 0; p < g.points(); ++p) {
      const Point val = f(g.coordinate(p));
      for (int c = 0; c < g.dim(); ++c) v.component(c)[p] = val[c];
    }
    return v;
  }

  VectorField& operator+=(const VectorField& o) {
    require_same_grid(grid, o.grid, "VectorField +=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
  VectorField& operator-=(const VectorField& o) {
    require_same_grid(grid, o.grid, "VectorField -=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
    return *this;
  }
  VectorField& operator*=(double a) {
    for (double& x : data) x *= a;
    return *this;
  }
  friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
  friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
  friend VectorField operator*(double a, VectorField v) { return v *= a; }
};

/// Half-spectrum Fourier coefficients, normalized so that a constant field c has
/// coefficient c at k = 0 and cos(k.x) contributes 1/2 at +k and -k. Stored
/// component-major; only k_last >= 0 is kept (conjugate symmetry supplies the rest).
struct SpectralField {
  GridSpec grid;
  int ncomp = 0;
  std::vector<Complex> coeffs;

  SpectralField() = default;
  SpectralField(const GridSpec& g, int components)
      : grid(g), ncomp(components), coeffs(static_cast<std::size_t>(components) * g.modes()) {}

  std::span<Complex> component(int c) {
    return {coeffs.data() + static_cast<std::size_t>(c) * grid.modes(), grid.modes()};
  }
  std::span<const Complex> component(int c) const {
    return {coeffs.data() + static_cast<std::size_t>(c) * grid.modes(), grid.modes()};
  }

  /// Coefficient of an arbitrary wavevector of the full lattice, using conjugate
  /// symmetry for k_last < 0. Wavevectors outside the resolvable range read as 0.
  Complex at(int c, const Wavevector& k) const {
    const int last = grid.dim() - 1;
    if (!grid.resolvable(k)) return {0.0, 0.0};
    if (k[last] >= 0) return component(c)[grid.mode_slot(k)];
    Wavevector q{-k[0], -k[1], -k[2]};
    return std::conj(component(c)[grid.mode_slot(q)]);
  }

  SpectralField& operator+=(const SpectralField& o) {
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += o.coeffs[i];
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] -= o.coeffs[i];
    return *this;
  }
  SpectralField& operator*=(double a) {
    for (auto& x : coeffs) x *= a;
    return *this;
  }
  /// this += a * o
  void axpy(double a, const SpectralField& o) {
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += a * o.coeffs[i];
  }
};

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline bool all_finite(const SpectralField& f) {
  for (const auto& z : f.coeffs) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

}  // namespace tmf
