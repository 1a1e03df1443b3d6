#pragma once

// Right-hand sides of the stochastic momentum equations and of Navier-Stokes.
//
// All fields are spectra. The three momentum models share the noise system
// X_alpha and the amplitude nu = sqrt(2 eta / c_K):
//
//   V1 (Hamiltonian, Ito):  d xi = [-P(grad_u xi + u'(x)xi) + eta Lap xi] dt
//                                  - nu sum P(grad_X xi + X'(x)xi) dW
//   V2 (projected):         d xi = [-P grad_u xi + eta Lap xi] dt - nu sum P grad_X xi dW
//   H17 raw:                d xi = [-P grad_u xi - eta grad div xi + eta Lap xi] dt
//                                  - nu sum grad_X xi dW

#include <cmath>
#include <memory>
#include <span>
#include <string>

#include "tmf/basis.hpp"
#include "tmf/spectral.hpp"

namespace tmf {

enum class Variant { v1_hamiltonian, v2_projected, h17_raw };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::v1_hamiltonian: return "V1_HAMILTONIAN";
    case Variant::v2_projected: return "V2_PROJECTED";
    case Variant::h17_raw: return "H17_RAW";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "V1_HAMILTONIAN" || s == "V1" || s == "v1") return Variant::v1_hamiltonian;
  if (s == "V2_PROJECTED" || s == "V2" || s == "v2") return Variant::v2_projected;
  if (s == "H17_RAW" || s == "H17" || s == "h17") return Variant::h17_raw;
  throw Error("unknown model variant '" + s + "'");
}

/// Model tag, viscosity and the truncated noise system. nu is always derived.
class ModelVariant {
 public:
  ModelVariant(Variant tag, double eta, std::shared_ptr<const BasisTruncation> basis)
      : tag_(tag), eta_(eta), basis_(std::move(basis)) {
    if (!(eta >= 0.0)) throw Error("ModelVariant: viscosity must be non-negative");
    if (!basis_) throw Error("ModelVariant: missing basis");
    nu_ = std::sqrt(2.0 * eta_ / basis_->effective_constant());
  }

  Variant tag() const { return tag_; }
  double eta() const { return eta_; }
  double nu() const { return noise_ ? nu_ : 0.0; }
  /// nu as derived from eta, independent of the noise switch.
  double derived_nu() const { return nu_; }
  const BasisTruncation& basis() const { return *basis_; }
  std::shared_ptr<const BasisTruncation> basis_ptr() const { return basis_; }
  bool solenoidal() const { return tag_ != Variant::h17_raw; }

  /// Diagnostic switches: noise off zeroes every diffusion column (eta stays
  /// in the drift); drift stretching off removes u'(x)xi from the V1 drift.
  bool noise_enabled() const { return noise_; }
  bool drift_stretching() const { return drift_stretching_; }
  ModelVariant with_noise(bool on) const {
    ModelVariant m = *this;
    m.noise_ = on;
    return m;
  }
  ModelVariant without_drift_stretching() const {
    ModelVariant m = *this;
    m.drift_stretching_ = false;
    return m;
  }

 private:
  Variant tag_;
  double eta_;
  double nu_ = 0.0;
  std::shared_ptr<const BasisTruncation> basis_;
  bool noise_ = true;
  bool drift_stretching_ = true;
};

/// ||div v|| in L2, from the spectrum.
inline double spectral_divergence_norm(const SpectralField& v) { return spectral_norm(spectral_divergence(v)); }

inline void require_solenoidal(const SpectralField& xi, const char* what, double tol = 1e-8) {
  const double dn = spectral_divergence_norm(xi);
  const double scale = std::max(spectral_norm(spectral_laplacian(xi)), spectral_norm(xi));
  if (dn > tol * scale && dn > 1e-300) {
    throw Error(std::string(what) + ": field is not solenoidal (||div|| = " + std::to_string(dn) + ")");
  }
}

/// ad^T(u).xi = -P(grad_u xi + u'(x)xi)
inline SpectralField ad_top(const SpectralField& u, const SpectralField& xi) {
  auto out = spectral_transport(u, xi, {true, true});
  leray_project_inplace(out);
  out *= -1.0;
  return out;
}

/// Stratonovich drift of V1; identical to ad_top.
inline SpectralField stratonovich_drift_v1(const SpectralField& u, const SpectralField& xi) {
  return ad_top(u, xi);
}

/// grad_X xi + X'(x)xi for one basis element.
inline SpectralField hat_X(const BasisTruncation& basis, std::size_t alpha, const SpectralField& xi) {
  return spectral_transport(basis.spectral_field(xi.grid, alpha), xi, {true, true});
}

/// P(grad_X xi + X'(x)xi)
inline SpectralField hat_Y(const BasisTruncation& basis, std::size_t alpha, const SpectralField& xi) {
  return leray_project(hat_X(basis, alpha, xi));
}

/// Ito drift of the chosen model at frozen mean field u.
inline SpectralField ito_drift(const ModelVariant& model, const SpectralField& u, const SpectralField& xi) {
  SpectralField out;
  switch (model.tag()) {
    case Variant::v1_hamiltonian:
      out = spectral_transport(u, xi, {true, model.drift_stretching()});
      leray_project_inplace(out);
      out *= -1.0;
      break;
    case Variant::v2_projected:
      require_solenoidal(xi, "ito_drift(V2)");
      out = spectral_transport(u, xi, {true, false});
      leray_project_inplace(out);
      out *= -1.0;
      break;
    case Variant::h17_raw: {
      out = spectral_transport(u, xi, {true, false});
      leray_project_inplace(out);
      out *= -1.0;
      // -eta grad div xi
      auto gd = spectral_gradient(spectral_divergence(xi));
      out.axpy(-model.eta(), gd);
      break;
    }
  }
  SpectralField lap = spectral_laplacian(xi);
  out.axpy(model.eta(), lap);
  return out;
}

/// Coefficient of dW^alpha.
inline SpectralField diffusion_column(const ModelVariant& model, std::size_t alpha, const SpectralField& xi) {
  const auto X = model.basis().spectral_field(xi.grid, alpha);
  SpectralField out;
  switch (model.tag()) {
    case Variant::v1_hamiltonian:
      out = spectral_transport(X, xi, {true, true});
      leray_project_inplace(out);
      break;
    case Variant::v2_projected:
      require_solenoidal(xi, "diffusion_column(V2)");
      out = spectral_transport(X, xi, {true, false});
      leray_project_inplace(out);
      break;
    case Variant::h17_raw:
      out = spectral_transport(X, xi, {true, false});
      break;
  }
  out *= -model.nu();
  return out;
}

/// Navier-Stokes right-hand side -P grad_u u + eta Lap u.
inline SpectralField ns_rhs(const SpectralField& u, double eta) {
  auto out = spectral_transport(u, u, {true, false});
  leray_project_inplace(out);
  out *= -1.0;
  SpectralField lap = spectral_laplacian(u);
  out.axpy(eta, lap);
  return out;
}

/// Euler-Maruyama increment for one particle:
///   dt * ito_drift(u, xi) + sum_alpha diffusion_column(alpha, xi) dW^alpha.
/// The diffusion sum is formed through the single random field
/// V = sum_alpha dW^alpha X_alpha, which is exact because every column is
/// linear in X_alpha.
inline SpectralField euler_maruyama_increment(const ModelVariant& model, const SpectralField& u,
                                              const SpectralField& xi, double dt,
                                              std::span<const double> dW) {
  const auto& g = xi.grid;
  SpectralField carrier = u;
  carrier *= dt;
  SpectralField noise_field(g, g.dim());
  const bool noisy = model.nu() > 0.0;
  if (noisy) {
    noise_field = model.basis().spectral_sum(g, dW);
    noise_field *= model.nu();
  }
  SpectralField out;
  switch (model.tag()) {
    case Variant::v1_hamiltonian:
      if (model.drift_stretching()) {
        if (noisy) carrier += noise_field;
        out = spectral_transport(carrier, xi, {true, true});
      } else {
        out = spectral_transport(carrier, xi, {true, false});
        if (noisy) out += spectral_transport(noise_field, xi, {true, true});
      }
      leray_project_inplace(out);
      out *= -1.0;
      break;
    case Variant::v2_projected:
      if (noisy) carrier += noise_field;
      out = spectral_transport(carrier, xi, {true, false});
      leray_project_inplace(out);
      out *= -1.0;
      break;
    case Variant::h17_raw: {
      out = spectral_transport(carrier, xi, {true, false});
      leray_project_inplace(out);
      if (noisy) out += spectral_transport(noise_field, xi, {true, false});
      out *= -1.0;
      auto gd = spectral_gradient(spectral_divergence(xi));
      out.axpy(-model.eta() * dt, gd);
      break;
    }
  }
  SpectralField lap = spectral_laplacian(xi);
  out.axpy(model.eta() * dt, lap);
  return out;
}

/// Stratonovich increment of V1 (no eta Lap term): the same transport operator
/// with carrier u dt + nu V.
inline SpectralField stratonovich_increment_v1(const ModelVariant& model, const SpectralField& u,
                                               const SpectralField& xi, double dt,
                                               std::span<const double> dW) {
  const auto& g = xi.grid;
  SpectralField carrier = u;
  carrier *= dt;
  if (model.nu() > 0.0) {
    SpectralField noise_field = model.basis().spectral_sum(g, dW);
    carrier.axpy(model.nu(), noise_field);
  }
  auto out = spectral_transport(carrier, xi, {true, true});
  leray_project_inplace(out);
  out *= -1.0;
  return out;
}

// Sample-level wrappers -------------------------------------------------------

inline VectorField ad_top(const VectorField& u, const VectorField& xi) {
  require_same_grid(u.grid, xi.grid, "ad_top");
  return dft_inverse(ad_top(dft_forward(u), dft_forward(xi)));
}

inline VectorField ns_rhs(const VectorField& u, double eta) { return dft_inverse(ns_rhs(dft_forward(u), eta)); }

}  // namespace tmf
