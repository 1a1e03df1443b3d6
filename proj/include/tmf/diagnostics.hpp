#pragma once

// Energies and the scalar identities they obey.
//
// For an Ito trajectory of V1 the energy H0 = 1/2 <<xi, xi>> has drift
//   -<<xi, u'(x)xi>> + (nu^2/2) sum |X'(x)xi|^2 - (nu^2/2) sum |grad f_alpha|^2
// where P(grad_X xi + X'(x)xi) = grad_X xi + X'(x)xi + grad f_alpha. For V2 only
// the last kind of term survives, with q_alpha from P grad_X xi = grad_X xi + grad q.

#include <cmath>
#include <limits>
#include <vector>

#include "tmf/engine.hpp"

namespace tmf {

inline double energy(const SpectralField& xi) { return 0.5 * spectral_inner(xi, xi); }

inline double l2_error(const SpectralField& a, const SpectralField& b) {
  SpectralField d = a;
  d -= b;
  return spectral_norm(d);
}

inline double l2_error(const VectorField& a, const VectorField& b) { return l2_norm(a - b); }

inline double divergence_norm(const SpectralField& v) { return spectral_divergence_norm(v); }
inline double divergence_norm(const VectorField& v) { return l2_norm(divergence(v)); }

/// Gradient part of w: returns grad phi with w = Pw - grad phi, via
/// Lap phi = -div w.
inline SpectralField gradient_part(const SpectralField& w) {
  auto rhs = spectral_divergence(w);
  rhs *= -1.0;
  return spectral_gradient(spectral_solve_poisson(rhs));
}

/// -(nu^2/2) sum_alpha <<grad q^alpha, grad q^alpha>>
inline double v2_dissipation_rate(const SpectralField& xi, const ModelVariant& model) {
  const auto& basis = model.basis();
  double sum = 0.0;
  for (std::size_t a = 0; a < basis.size(); ++a) {
    if (basis[a].kind == BasisKind::constant) continue;  // d_j xi is solenoidal
    const auto gq = gradient_part(spectral_transport(basis.spectral_field(xi.grid, a), xi, {true, false}));
    sum += spectral_inner(gq, gq);
  }
  return -0.5 * model.nu() * model.nu() * sum;
}

struct V1Terms {
  double bracket = 0.0;     // -<<xi, u'(x)xi>>
  double stretching = 0.0;  // (nu^2/2)(n-1) sum |k|^{-2s} int <k, xi>^2
  double projection = 0.0;  // -(nu^2/2) sum |grad f_alpha|^2
  double total() const { return bracket + stretching + projection; }
};

/// sum over wave modes of |X_alpha'(x)xi|^2 in closed form:
/// (n-1) sum_{k in Z^+, |k|<=K} |k|^{-2s} int <k, xi(x)>^2 dx.
inline double stretching_norm_closed_form(const SpectralField& xi, const BasisTruncation& basis) {
  const auto& g = xi.grid;
  const int n = g.dim();
  const auto p = physical_components(xi);
  double total = 0.0;
  for (std::size_t a = 0; a < basis.size(); ++a) {
    const auto& idx = basis[a];
    if (idx.kind != BasisKind::cosine || idx.i != 1) continue;  // one entry per k
    double integral = 0.0;
    for (std::size_t q = 0; q < g.points(); ++q) {
      double kx = 0.0;
      for (int j = 0; j < n; ++j) kx += idx.k[j] * p[j][q];
      integral += kx * kx;
    }
    integral *= g.volume() / static_cast<double>(g.points());
    total += (n - 1) * std::pow(norm_squared(idx.k, n), -basis.sobolev()) * integral;
  }
  return total;
}

/// The same quantity by summing |X_alpha'(x)xi|^2 over every basis element.
inline double stretching_norm_direct(const SpectralField& xi, const BasisTruncation& basis) {
  double total = 0.0;
  for (std::size_t a = 0; a < basis.size(); ++a) {
    if (basis[a].kind == BasisKind::constant) continue;
    const auto s = spectral_transport(basis.spectral_field(xi.grid, a), xi, {false, true});
    total += spectral_inner(s, s);
  }
  return total;
}

inline double projection_defect_v1(const SpectralField& xi, const BasisTruncation& basis) {
  double total = 0.0;
  for (std::size_t a = 0; a < basis.size(); ++a) {
    if (basis[a].kind == BasisKind::constant) continue;
    const auto gf = gradient_part(hat_X(basis, a, xi));
    total += spectral_inner(gf, gf);
  }
  return total;
}

inline V1Terms v1_nondissipation_terms(const SpectralField& xi, const SpectralField& u, const ModelVariant& model) {
  const double half_nu2 = 0.5 * model.nu() * model.nu();
  V1Terms t;
  t.bracket = -spectral_inner(xi, spectral_transport(u, xi, {false, true}));
  t.stretching = half_nu2 * stretching_norm_closed_form(xi, model.basis());
  t.projection = -half_nu2 * projection_defect_v1(xi, model.basis());
  return t;
}

/// Drift of H0(u^N) for an IPS ensemble, u^N the empirical mean:
///   V1: -(eta/N^2) sum_{i!=j} <<grad xi^i, grad xi^j>>
///       + (nu^2/2N^2) sum_{alpha,i} (|X'(x)xi^i|^2 - |grad f^i_alpha|^2)
///   V2: -(eta/N^2) sum_{i!=j} <<grad xi^i, grad xi^j>> - (nu^2/2N^2) sum |grad q^i_alpha|^2
inline double ips_energy_drift(const std::vector<SpectralField>& particles, const ModelVariant& model) {
  if (model.tag() == Variant::h17_raw) throw Error("ips_energy_drift: defined for V1 and V2 only");
  const double N = static_cast<double>(particles.size());
  // sum_{i!=j} <<grad xi^i, grad xi^j>> = |grad sum xi|^2 - sum |grad xi^i|^2
  SpectralField total = particles.front();
  for (std::size_t i = 1; i < particles.size(); ++i) total += particles[i];
  double cross = spectral_gradient_inner(total, total);
  for (const auto& p : particles) cross -= spectral_gradient_inner(p, p);
  double rate = -model.eta() / (N * N) * cross;
  const double half_nu2 = 0.5 * model.nu() * model.nu();
  for (const auto& p : particles) {
    if (model.tag() == Variant::v1_hamiltonian) {
      rate += half_nu2 / (N * N) * (stretching_norm_direct(p, model.basis()) - projection_defect_v1(p, model.basis()));
    } else {
      rate += v2_dissipation_rate(p, model) / (N * N);
    }
  }
  return rate;
}

/// Sample mean and its standard error.
struct Estimate {
  double mean = 0.0;
  double stderr = 0.0;
  std::size_t count = 0;
};

inline Estimate estimate(const std::vector<double>& xs) {
  Estimate e;
  e.count = xs.size();
  if (xs.empty()) return e;
  double s = 0.0;
  for (double x : xs) s += x;
  e.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double v = 0.0;
    for (double x : xs) v += (x - e.mean) * (x - e.mean);
    v /= static_cast<double>(xs.size() - 1);
    e.stderr = std::sqrt(v / static_cast<double>(xs.size()));
  }
  return e;
}

/// L2 standard error of the sample mean of an ensemble of fields:
/// sqrt(sum |xi^i - mean|^2 / (M (M - 1))).
inline double mean_stderr(const std::vector<SpectralField>& particles, const SpectralField& mean) {
  const double M = static_cast<double>(particles.size());
  if (particles.size() < 2) return 0.0;
  double var = 0.0;
  for (const auto& p : particles) {
    SpectralField d = p;
    d -= mean;
    var += spectral_inner(d, d);
  }
  return std::sqrt(var / (M * (M - 1.0)));
}

struct EnergyReport {
  double t = 0.0;
  double E_d = 0.0;       // 1/2 <<u, u>> for the mean field (or reference)
  double E_s_hat = 0.0;   // (1/M) sum 1/2 <<xi^i, xi^i>>
  double E_s_stderr = 0.0;
  double max_divergence = 0.0;
  /// (1/2M) sum |xi^i - u^N|^2, which equals E_s_hat - E_d in exact arithmetic.
  double jensen_gap = 0.0;
  /// Empirical Jensen E_s_hat >= E_d, allowing for the rounding of the two
  /// independently summed sides when the particles coincide.
  bool jensen_holds() const {
    return E_s_hat - E_d >= -64.0 * std::numeric_limits<double>::epsilon() * std::abs(E_s_hat);
  }
};

inline EnergyReport energy_report(const std::vector<SpectralField>& particles, double t) {
  EnergyReport r;
  r.t = t;
  std::vector<double> es;
  es.reserve(particles.size());
  for (const auto& p : particles) {
    es.push_back(energy(p));
    r.max_divergence = std::max(r.max_divergence, divergence_norm(p));
  }
  const auto e = estimate(es);
  r.E_s_hat = e.mean;
  r.E_s_stderr = e.stderr;
  const auto mean = empirical_mean(particles);
  r.E_d = energy(mean);
  for (const auto& p : particles) {
    SpectralField d = p;
    d -= mean;
    r.jensen_gap += energy(d);
  }
  r.jensen_gap /= static_cast<double>(particles.size());
  return r;
}

inline EnergyReport energy_report(const SpectralField& u, double t) {
  EnergyReport r;
  r.t = t;
  r.E_d = r.E_s_hat = energy(u);
  r.max_divergence = divergence_norm(u);
  return r;
}

}  // namespace tmf
