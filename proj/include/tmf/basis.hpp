#pragma once

// The trigonometric noise system X_alpha on the torus:
//   A_(k,i) = |k|^-(s+1) cos<k,x> k_i^perp,  B_(k,i) = |k|^-(s+1) sin<k,x> k_i^perp,
//   A_(0,j) = e_j,
// truncated to |k| <= K, together with the diffusion tensor it generates.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "tmf/grid.hpp"
#include "tmf/spectral.hpp"

namespace tmf {

enum class BasisKind : int { constant = 0, cosine = 1, sine = 2 };

struct BasisIndex {
  BasisKind kind = BasisKind::constant;
  Wavevector k{0, 0, 0};
  int i = 1;  // 1..n for constants, 1..n-1 for waves

  friend bool operator==(const BasisIndex&, const BasisIndex&) = default;
};

/// k in Z_n^+: the first nonzero component is positive.
inline bool in_positive_half_lattice(const Wavevector& k, int dim) {
  for (int d = 0; d < dim; ++d) {
    if (k[d] > 0) return true;
    if (k[d] < 0) return false;
  }
  return false;
}

/// n-1 mutually orthogonal vectors, each orthogonal to k with norm |k|.
/// 2D: (-k2, k1). 3D: p1 = k x e_j rescaled to |k| (e_j the first axis not
/// parallel to k), p2 = k x p1 / |k|.
inline std::vector<Point> perp_frame(const Wavevector& k, int dim) {
  const double knorm = std::sqrt(norm_squared(k, dim));
  if (knorm == 0.0) throw Error("perp_frame: k must be nonzero");
  if (dim == 2) return {Point{-static_cast<double>(k[1]), static_cast<double>(k[0]), 0.0}};

  const Point kv{static_cast<double>(k[0]), static_cast<double>(k[1]), static_cast<double>(k[2])};
  auto cross = [](const Point& a, const Point& b) {
    return Point{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
  };
  auto norm = [](const Point& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); };
  Point p1{};
  for (int j = 0; j < 3; ++j) {
    Point e{0.0, 0.0, 0.0};
    e[j] = 1.0;
    p1 = cross(kv, e);
    if (norm(p1) > 0.0) break;
  }
  const double s1 = knorm / norm(p1);
  for (double& x : p1) x *= s1;
  Point p2 = cross(kv, p1);
  for (double& x : p2) x /= knorm;
  return {p1, p2};
}

/// Enumerates the truncated index set: n constants, then wave indices with
/// 0 < |k| <= K in Z_n^+, sorted by (|k|^2, k lexicographic, kind, i).
inline std::vector<BasisIndex> enumerate_indices(int dim, int K) {
  if (dim != 2 && dim != 3) throw Error("enumerate_indices: dimension must be 2 or 3");
  if (K < 1) throw Error("enumerate_indices: cutoff K must be >= 1, got " + std::to_string(K));
  std::vector<BasisIndex> out;
  for (int j = 1; j <= dim; ++j) out.push_back({BasisKind::constant, {0, 0, 0}, j});

  std::vector<Wavevector> ks;
  const int k3max = dim == 3 ? K : 0;
  for (int a = -K; a <= K; ++a)
    for (int b = -K; b <= K; ++b)
      for (int c = -k3max; c <= k3max; ++c) {
        const Wavevector k{a, b, c};
        if (!in_positive_half_lattice(k, dim)) continue;
        if (norm_squared(k, dim) > static_cast<double>(K) * K) continue;
        ks.push_back(k);
      }
  std::sort(ks.begin(), ks.end(), [dim](const Wavevector& x, const Wavevector& y) {
    const double nx = norm_squared(x, dim), ny = norm_squared(y, dim);
    if (nx != ny) return nx < ny;
    return x < y;
  });
  for (const auto& k : ks) {
    for (auto kind : {BasisKind::cosine, BasisKind::sine}) {
      for (int i = 1; i <= dim - 1; ++i) out.push_back({kind, k, i});
    }
  }
  return out;
}

inline std::string to_string(const BasisIndex& a, int dim) {
  std::string s = a.kind == BasisKind::constant ? "A0" : (a.kind == BasisKind::cosine ? "A" : "B");
  s += "((";
  for (int d = 0; d < dim; ++d) s += (d ? "," : "") + std::to_string(a.k[d]);
  s += ")," + std::to_string(a.i) + ")";
  return s;
}

/// The enumerated basis with its Sobolev weight and generated diffusion tensor.
class BasisTruncation {
 public:
  BasisTruncation() = default;
  BasisTruncation(int dim, int K, double s) : dim_(dim), K_(K), s_(s) {
    if (!(s > 1.0 + dim / 2.0)) {
      throw Error("BasisTruncation: Sobolev weight s must exceed 1 + n/2, got " + std::to_string(s));
    }
    indices_ = enumerate_indices(dim, K);
    frames_.reserve(indices_.size());
    for (const auto& a : indices_) {
      if (a.kind == BasisKind::constant) {
        frames_.push_back({});
        continue;
      }
      frames_.push_back({weight(a.k), perp_frame(a.k, dim)[a.i - 1]});
    }
    compute_diffusion_tensor();
  }

  /// Constant-modes-only tensor (D = I).
  static BasisTruncation constants_only(int dim, double s) {
    BasisTruncation t(dim, 1, s);
    std::erase_if(t.indices_, [](const BasisIndex& a) { return a.kind != BasisKind::constant; });
    t.frames_.resize(t.indices_.size());
    t.compute_diffusion_tensor();
    return t;
  }

  int dim() const { return dim_; }
  int cutoff() const { return K_; }
  double sobolev() const { return s_; }
  const std::vector<BasisIndex>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  const BasisIndex& operator[](std::size_t a) const { return indices_[a]; }

  /// |k|^-(s+1)
  double weight(const Wavevector& k) const { return std::pow(std::sqrt(norm_squared(k, dim_)), -(s_ + 1.0)); }
  /// Amplitude and direction of a wave index (unused for constants).
  double amplitude(std::size_t a) const { return frames_[a].amplitude; }
  const Point& direction(std::size_t a) const { return frames_[a].direction; }

  const std::array<std::array<double, 3>, 3>& diffusion_tensor() const { return D_; }
  double effective_constant() const { return c_; }
  double anisotropy() const { return eps_; }

  /// X_alpha evaluated at an arbitrary point.
  Point evaluate(std::size_t a, const Point& x) const {
    const auto& idx = indices_[a];
    Point out{0.0, 0.0, 0.0};
    if (idx.kind == BasisKind::constant) {
      out[idx.i - 1] = 1.0;
      return out;
    }
    double phase = 0.0;
    for (int d = 0; d < dim_; ++d) phase += idx.k[d] * x[d];
    const double f = amplitude(a) * (idx.kind == BasisKind::cosine ? std::cos(phase) : std::sin(phase));
    for (int d = 0; d < dim_; ++d) out[d] = f * direction(a)[d];
    return out;
  }

  /// sum_alpha coeff[alpha] X_alpha(x)
  Point evaluate_sum(std::span<const double> coeff, const Point& x) const {
    Point out{0.0, 0.0, 0.0};
    for (std::size_t a = 0; a < indices_.size(); ++a) {
      if (coeff[a] == 0.0) continue;
      const Point v = evaluate(a, x);
      for (int d = 0; d < dim_; ++d) out[d] += coeff[a] * v[d];
    }
    return out;
  }

  /// Spectrum of sum_alpha coeff[alpha] X_alpha on grid g. The sum is exact:
  /// each X_alpha occupies the modes +-k only.
  SpectralField spectral_sum(const GridSpec& g, std::span<const double> coeff) const {
    if (g.dim() != dim_) throw Error("basis spectrum: grid dimension mismatch");
    SpectralField out(g, dim_);
    for (std::size_t a = 0; a < indices_.size(); ++a) {
      if (coeff[a] == 0.0) continue;
      const auto& idx = indices_[a];
      if (idx.kind == BasisKind::constant) {
        out.component(idx.i - 1)[0] += coeff[a];
        continue;
      }
      if (!g.resolvable(idx.k)) throw Error("basis spectrum: wavevector not resolvable on grid");
      // cos -> (e^{ikx} + e^{-ikx})/2, sin -> (e^{ikx} - e^{-ikx})/(2i)
      const Complex plus = idx.kind == BasisKind::cosine ? Complex(0.5, 0.0) : Complex(0.0, -0.5);
      for (int d = 0; d < dim_; ++d) {
        const Complex v = coeff[a] * amplitude(a) * direction(a)[d] * plus;
        add_mode(out, d, idx.k, v);
      }
    }
    return out;
  }

  SpectralField spectral_field(const GridSpec& g, std::size_t a) const {
    std::vector<double> coeff(indices_.size(), 0.0);
    coeff[a] = 1.0;
    return spectral_sum(g, coeff);
  }

 private:
  struct Frame {
    double amplitude = 1.0;
    Point direction{0.0, 0.0, 0.0};
  };

  // Adds v e^{ikx} + conj(v) e^{-ikx} into the half spectrum.
  void add_mode(SpectralField& s, int c, const Wavevector& k, Complex v) const {
    const auto& g = s.grid;
    const int last = dim_ - 1;
    const Wavevector neg{-k[0], -k[1], -k[2]};
    if (k[last] > 0) {
      s.component(c)[g.mode_slot(k)] += v;
    } else if (k[last] < 0) {
      s.component(c)[g.mode_slot(neg)] += std::conj(v);
    } else {
      s.component(c)[g.mode_slot(k)] += v;
      s.component(c)[g.mode_slot(neg)] += std::conj(v);
    }
  }

  void compute_diffusion_tensor() {
    for (auto& row : D_) row = {0.0, 0.0, 0.0};
    // cos^2 + sin^2 = 1 makes the sum of X_alpha X_alpha^T spatially constant.
    for (std::size_t a = 0; a < indices_.size(); ++a) {
      const auto& idx = indices_[a];
      if (idx.kind == BasisKind::constant) {
        D_[idx.i - 1][idx.i - 1] += 1.0;
        continue;
      }
      if (idx.kind != BasisKind::cosine) continue;  // pair (A,B) counted once
      const double w2 = amplitude(a) * amplitude(a);
      for (int p = 0; p < dim_; ++p)
        for (int q = 0; q < dim_; ++q) D_[p][q] += w2 * direction(a)[p] * direction(a)[q];
    }
    double tr = 0.0;
    for (int d = 0; d < dim_; ++d) tr += D_[d][d];
    c_ = tr / dim_;
    // Operator norm of the symmetric defect D - cI via its eigenvalues.
    std::array<std::array<double, 3>, 3> E = D_;
    for (int d = 0; d < dim_; ++d) E[d][d] -= c_;
    eps_ = symmetric_spectral_radius(E, dim_) / c_;
  }

  static double symmetric_spectral_radius(const std::array<std::array<double, 3>, 3>& a, int n) {
    if (n == 2) {
      const double tr = a[0][0] + a[1][1];
      const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
      const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
      return std::max(std::abs(tr / 2.0 + disc), std::abs(tr / 2.0 - disc));
    }
    // Power iteration on A^2 (positive semidefinite), enough for a 3x3.
    std::array<double, 3> v{1.0, 0.7, 0.3};
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
      std::array<double, 3> w{0.0, 0.0, 0.0};
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) w[p] += a[p][q] * v[q];
      std::array<double, 3> w2{0.0, 0.0, 0.0};
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) w2[p] += a[p][q] * w[q];
      const double nrm = std::sqrt(w2[0] * w2[0] + w2[1] * w2[1] + w2[2] * w2[2]);
      if (nrm == 0.0) return 0.0;
      lambda = nrm / std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      for (int p = 0; p < 3; ++p) v[p] = w2[p] / nrm;
    }
    return std::sqrt(lambda);
  }

  int dim_ = 2;
  int K_ = 1;
  double s_ = 3.0;
  std::vector<BasisIndex> indices_;
  std::vector<Frame> frames_;
  std::array<std::array<double, 3>, 3> D_{};
  double c_ = 1.0;
  double eps_ = 0.0;
};

/// Samples X_alpha on the grid.
inline VectorField basis_field(const BasisTruncation& basis, std::size_t a, const GridSpec& g) {
  return VectorField::sample(g, [&](const Point& x) { return basis.evaluate(a, x); });
}

}  // namespace tmf
