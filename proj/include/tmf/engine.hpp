#pragma once

// Time integration: the deterministic Navier-Stokes reference and the
// stochastic ensembles (interacting particles and prescribed mean field).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "tmf/dynamics.hpp"
#include "tmf/noise.hpp"
#include "tmf/parallel.hpp"

namespace tmf {

// ---------------------------------------------------------------------------
// Deterministic reference
// ---------------------------------------------------------------------------

struct ReferenceRun {
  GridSpec grid;
  double eta = 0.0;
  double dt = 0.0;
  int store_every = 1;
  std::vector<double> times;
  std::vector<SpectralField> states;
  double max_cfl = 0.0;

  double final_time() const { return times.empty() ? 0.0 : times.back(); }

  /// Stored state at time t, linearly interpolated between stored samples.
  SpectralField velocity_at(double t) const {
    if (states.empty()) throw Error("ReferenceRun: empty trajectory");
    const double spacing = dt * store_every;
    const double pos = t / spacing;
    const double tol = 1e-9;
    if (pos <= tol) return states.front();
    if (pos >= static_cast<double>(states.size() - 1) - tol) {
      if (pos > static_cast<double>(states.size() - 1) + 1e-6) {
        throw Error("ReferenceRun: time " + std::to_string(t) + " beyond stored horizon");
      }
      return states.back();
    }
    const double near = std::round(pos);
    if (std::abs(pos - near) < tol) return states[static_cast<std::size_t>(near)];
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double w = pos - static_cast<double>(i);
    SpectralField out = states[i];
    out *= (1.0 - w);
    out.axpy(w, states[i + 1]);
    return out;
  }
};

inline double max_abs_velocity(const SpectralField& u) {
  auto p = physical_components(u);
  double vmax = 0.0;
  for (std::size_t i = 0; i < p[0].size(); ++i) {
    double s = 0.0;
    for (const auto& c : p) s += c[i] * c[i];
    vmax = std::max(vmax, std::sqrt(s));
  }
  return vmax;
}

/// dt * max|u| / h with h = 2*pi/m.
inline double cfl_number(const SpectralField& u, double dt) {
  return dt * max_abs_velocity(u) / u.grid.spacing();
}

namespace detail {
inline void integrating_factor(SpectralField& s, double eta, double h) {
  const auto& g = s.grid;
  for (std::size_t slot = 0; slot < g.modes(); ++slot) {
    const double f = std::exp(-eta * norm_squared(g.mode_wavevector(slot), g.dim()) * h);
    for (int c = 0; c < s.ncomp; ++c) s.component(c)[slot] *= f;
  }
}

inline SpectralField euler_nonlinearity(const SpectralField& u) {
  auto out = spectral_transport(u, u, {true, false});
  leray_project_inplace(out);
  out *= -1.0;
  return out;
}
}  // namespace detail

/// One integrating-factor RK4 step of du/dt = -P grad_u u + eta Lap u.
inline SpectralField reference_step(const SpectralField& u, double eta, double h) {
  using detail::integrating_factor;
  auto ef = [&](SpectralField s, double tau) {
    integrating_factor(s, eta, tau);
    return s;
  };
  const SpectralField a = detail::euler_nonlinearity(u);
  SpectralField u1 = u;
  u1.axpy(h / 2, a);
  u1 = ef(u1, h / 2);
  const SpectralField b = detail::euler_nonlinearity(u1);
  SpectralField u2 = ef(u, h / 2);
  u2.axpy(h / 2, b);
  const SpectralField c = detail::euler_nonlinearity(u2);
  SpectralField u3 = ef(u, h);
  u3.axpy(h, ef(c, h / 2));
  const SpectralField d = detail::euler_nonlinearity(u3);

  SpectralField out = ef(u, h);
  out.axpy(h / 6, ef(a, h));
  SpectralField bc = b;
  bc += c;
  out.axpy(h / 3, ef(bc, h / 2));
  out.axpy(h / 6, d);
  dealias(out);
  return out;
}

inline ReferenceRun run_reference(const SpectralField& u0, double eta, double dt, double T, int store_every = 1) {
  if (!(dt > 0.0) || !(T >= 0.0)) throw Error("run_reference: dt must be positive and T non-negative");
  if (store_every < 1) throw Error("run_reference: store_every must be >= 1");
  require_solenoidal(u0, "run_reference");
  ReferenceRun run;
  run.grid = u0.grid;
  run.eta = eta;
  run.dt = dt;
  run.store_every = store_every;
  const auto steps = static_cast<long>(std::llround(T / dt));
  SpectralField u = u0;
  dealias(u);
  const double e0 = spectral_inner(u, u);
  run.times.push_back(0.0);
  run.states.push_back(u);
  run.max_cfl = cfl_number(u, dt);
  for (long s = 1; s <= steps; ++s) {
    u = reference_step(u, eta, dt);
    const double e = spectral_inner(u, u);
    if (!all_finite(u) || e > 1e6 * std::max(e0, 1e-300)) {
      throw Error("run_reference: blow-up at step " + std::to_string(s) + " (energy " + std::to_string(e) + ")");
    }
    if (s % store_every == 0) {
      run.times.push_back(s * dt);
      run.states.push_back(u);
      run.max_cfl = std::max(run.max_cfl, cfl_number(u, dt));
    }
  }
  return run;
}

// ---------------------------------------------------------------------------
// Stochastic ensembles
// ---------------------------------------------------------------------------

enum class Coupling { ips, prescribed };

/// Particles, clock and noise bookkeeping. `noise_ids[i]` is the NoiseStream
/// particle address used by particle i.
struct Ensemble {
  std::vector<SpectralField> particles;
  std::vector<std::uint64_t> noise_ids;
  double t = 0.0;
  std::uint64_t step = 0;
  ModelVariant model;
  NoiseStream stream;
  Coupling coupling = Coupling::ips;

  Ensemble(std::vector<SpectralField> ps, ModelVariant m, NoiseStream s, Coupling c)
      : particles(std::move(ps)), model(std::move(m)), stream(s), coupling(c) {
    if (particles.empty()) throw Error("Ensemble: needs at least one particle");
    for (const auto& p : particles) require_same_grid(p.grid, particles.front().grid, "Ensemble");
    noise_ids.resize(particles.size());
    std::iota(noise_ids.begin(), noise_ids.end(), std::uint64_t{0});
  }

  /// N copies of u0 (the deterministic initial condition).
  static Ensemble replicate(const SpectralField& u0, std::size_t count, ModelVariant m, NoiseStream s,
                            Coupling c) {
    SpectralField init = u0;
    dealias(init);
    return Ensemble(std::vector<SpectralField>(count, init), std::move(m), s, c);
  }

  const GridSpec& grid() const { return particles.front().grid; }
  std::size_t size() const { return particles.size(); }
};

namespace detail {
inline SpectralField pairwise_sum(const std::vector<const SpectralField*>& items, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return *items[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  SpectralField a = pairwise_sum(items, lo, mid);
  a += pairwise_sum(items, mid, hi);
  return a;
}

inline bool coeff_less(const SpectralField& a, const SpectralField& b) {
  return std::lexicographical_compare(a.coeffs.begin(), a.coeffs.end(), b.coeffs.begin(), b.coeffs.end(),
                                      [](const Complex& x, const Complex& y) {
                                        if (x.real() != y.real()) return x.real() < y.real();
                                        return x.imag() < y.imag();
                                      });
}
}  // namespace detail

/// (1/N) sum xi^i. Summation runs pairwise over the particles sorted by
/// content, so the result is bitwise invariant under relabelling.
inline SpectralField empirical_mean(const std::vector<SpectralField>& particles) {
  std::vector<const SpectralField*> order;
  order.reserve(particles.size());
  for (const auto& p : particles) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(),
                   [](const SpectralField* a, const SpectralField* b) { return detail::coeff_less(*a, *b); });
  SpectralField sum = detail::pairwise_sum(order, 0, order.size());
  sum *= 1.0 / static_cast<double>(particles.size());
  return sum;
}

namespace detail {
inline void finish_particle(const ModelVariant& model, SpectralField& xi, std::uint64_t step) {
  dealias(xi);
  if (model.solenoidal()) leray_project_inplace(xi);
  if (!all_finite(xi)) throw Error("stochastic step: non-finite state at step " + std::to_string(step));
}

inline void advance_particles(Ensemble& ens, const SpectralField& u, double dt, int workers) {
  if (!(dt > 0.0)) throw Error("stochastic step: dt must be positive");
  const std::size_t nalpha = ens.model.basis().size();
  parallel_for(ens.size(), workers, [&](std::size_t i) {
    const auto dW = ens.stream.increments(ens.noise_ids[i], ens.step, nalpha, dt);
    auto inc = euler_maruyama_increment(ens.model, u, ens.particles[i], dt, dW);
    ens.particles[i] += inc;
    finish_particle(ens.model, ens.particles[i], ens.step);
  });
  ens.step += 1;
  ens.t += dt;
}
}  // namespace detail

/// Euler-Maruyama step of the interacting particle system; u = empirical mean.
inline void step_ips(Ensemble& ens, double dt, int workers = 1) {
  if (ens.coupling != Coupling::ips) throw Error("step_ips: ensemble is not IPS-coupled");
  const SpectralField uN = empirical_mean(ens.particles);
  detail::advance_particles(ens, uN, dt, workers);
}

/// Euler-Maruyama step with an externally supplied mean field; particles are
/// mutually independent.
inline void step_meanfield(Ensemble& ens, const SpectralField& u_prescribed, double dt, int workers = 1) {
  if (ens.coupling != Coupling::prescribed) throw Error("step_meanfield: ensemble is not PRESCRIBED-coupled");
  detail::advance_particles(ens, u_prescribed, dt, workers);
}

/// Stratonovich Heun predictor-corrector for V1 with mean field u_now at t and
/// u_next at t + dt.
inline void step_heun_v1(Ensemble& ens, const SpectralField& u_now, const SpectralField& u_next, double dt,
                         int workers = 1) {
  if (ens.model.tag() != Variant::v1_hamiltonian) throw Error("step_heun_v1: model must be V1");
  if (!(dt > 0.0)) throw Error("step_heun_v1: dt must be positive");
  const std::size_t nalpha = ens.model.basis().size();
  parallel_for(ens.size(), workers, [&](std::size_t i) {
    const auto dW = ens.stream.increments(ens.noise_ids[i], ens.step, nalpha, dt);
    auto& xi = ens.particles[i];
    const auto k1 = stratonovich_increment_v1(ens.model, u_now, xi, dt, dW);
    SpectralField pred = xi;
    pred += k1;
    const auto k2 = stratonovich_increment_v1(ens.model, u_next, pred, dt, dW);
    xi.axpy(0.5, k1);
    xi.axpy(0.5, k2);
    detail::finish_particle(ens.model, xi, ens.step);
  });
  ens.step += 1;
  ens.t += dt;
}

}  // namespace tmf
