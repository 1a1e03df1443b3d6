#pragma once

// Subcommand runners behind the tmf executable. Every runner writes
// config.resolved.ini first, then its own tables and snapshots. Numerical
// failure leaves a BLOWUP row in the main table and raises NumericalError.

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include "tmf/config.hpp"
#include "tmf/diagnostics.hpp"
#include "tmf/io.hpp"
#include "tmf/lagrangian.hpp"

namespace tmf {

class NumericalError : public Error {
 public:
  using Error::Error;
};

struct CommandContext {
  RunConfig config;
  std::filesystem::path outdir;
  int workers = 1;
};

namespace detail {

inline long step_count(const RunConfig& c) { return static_cast<long>(std::llround(c.T / c.dt)); }

inline void prepare_outdir(const CommandContext& ctx) {
  std::filesystem::create_directories(ctx.outdir);
  write_file(ctx.outdir / "config.resolved.ini", resolved_config(ctx.config));
}

inline std::string snapshot_name(const std::string& stem, long step) { return fmt::format("{}_{:06d}.tmf", stem, step); }

/// Runs body(); a tmf::Error escaping it becomes a BLOWUP row plus NumericalError.
inline void guarded(CsvWriter& csv, const double& t, const std::function<void()>& body) {
  try {
    body();
  } catch (const ConfigError&) {
    throw;
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    csv.blowup(t, e.what());
    throw NumericalError(e.what());
  }
}

/// Energy growth beyond this factor is treated as blow-up.
constexpr double blowup_factor = 1e6;

inline void check_growth(double e, double e0, double t) {
  if (!std::isfinite(e) || e > blowup_factor * std::max(e0, 1e-300)) {
    throw Error(fmt::format("energy {} at t={} exceeds the blow-up threshold", e, t));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// Deterministic reference run: energy.csv and velocity snapshots.
inline void command_reference(const CommandContext& ctx) {
  const auto& c = ctx.config;
  detail::prepare_outdir(ctx);
  std::filesystem::create_directories(ctx.outdir / "snapshots");
  CsvWriter csv(ctx.outdir / "energy.csv", {"t", "E_d", "dissipation_rate", "max_divergence", "cfl"});
  SpectralField u = initial_condition(c);
  dealias(u);
  require_solenoidal(u, "reference");
  const double e0 = energy(u);
  auto emit = [&](long step, double t) {
    csv.row({t, energy(u), -c.eta * spectral_gradient_inner(u, u), divergence_norm(u), cfl_number(u, c.dt)});
    write_snapshot(ctx.outdir / "snapshots" / detail::snapshot_name("u", step), u, t);
  };
  double t = 0.0;
  emit(0, t);
  const long steps = detail::step_count(c);
  detail::guarded(csv, t, [&] {
    for (long s = 1; s <= steps; ++s) {
      u = reference_step(u, c.eta, c.dt);
      t = static_cast<double>(s) * c.dt;
      detail::check_growth(energy(u), e0, t);
      if (!all_finite(u)) throw Error("reference: non-finite state");
      if (s % c.output_every == 0 || s == steps) emit(s, t);
    }
  });
}

/// Interacting particle system. The identity residual is
///   E_d(t) - E_d(0) - int_0^t (drift of H0(u^N)) ds
/// with the drift evaluated at the left end of every step, so its expectation
/// is O(dt).
inline void command_ips(const CommandContext& ctx) {
  const auto& c = ctx.config;
  if (c.variant == Variant::h17_raw) throw ConfigError("model.variant", "ips supports V1 and V2 only");
  detail::prepare_outdir(ctx);
  std::filesystem::create_directories(ctx.outdir / "snapshots");
  CsvWriter csv(ctx.outdir / "energy.csv", {"t", "E_d", "E_s_hat", "stderr", "energy_drift", "identity_residual",
                                            "max_divergence", "l2_vs_reference"});
  const auto model = make_model(c);
  SpectralField u0 = initial_condition(c);
  dealias(u0);
  require_solenoidal(u0, "ips");
  auto ens = Ensemble::replicate(u0, static_cast<std::size_t>(c.particles), model, NoiseStream(c.seed), Coupling::ips);
  SpectralField ref = u0;
  const double e0 = energy(u0);
  double integral = 0.0;
  double drift = ips_energy_drift(ens.particles, model);
  auto emit = [&](long step) {
    const auto r = energy_report(ens.particles, ens.t);
    const auto uN = empirical_mean(ens.particles);
    csv.row({ens.t, r.E_d, r.E_s_hat, r.E_s_stderr, drift, r.E_d - e0 - integral, r.max_divergence,
             l2_error(uN, ref) / std::max(spectral_norm(ref), 1e-300)});
    write_snapshot(ctx.outdir / "snapshots" / detail::snapshot_name("uN", step), uN, ens.t);
  };
  emit(0);
  const long steps = detail::step_count(c);
  detail::guarded(csv, ens.t, [&] {
    for (long s = 1; s <= steps; ++s) {
      integral += drift * c.dt;
      step_ips(ens, c.dt, ctx.workers);
      ref = reference_step(ref, c.eta, c.dt);
      drift = ips_energy_drift(ens.particles, model);
      detail::check_growth(energy_report(ens.particles, ens.t).E_s_hat, e0, ens.t);
      if (s % c.output_every == 0 || s == steps) emit(s);
    }
  });
  write_checkpoint(ctx.outdir / "checkpoint", ens);
}

/// PRESCRIBED coupling: M = particles independent trajectories driven by the
/// reference velocity; error of their mean against the reference.
inline void command_meanfield(const CommandContext& ctx) {
  const auto& c = ctx.config;
  detail::prepare_outdir(ctx);
  CsvWriter csv(ctx.outdir / "meanfield.csv",
                {"t", "rel_error", "rel_stderr", "bound", "E_d", "E_s_hat", "max_divergence"});
  const auto model = make_model(c);
  SpectralField u0 = initial_condition(c);
  dealias(u0);
  require_solenoidal(u0, "meanfield");
  auto ens = Ensemble::replicate(u0, static_cast<std::size_t>(c.particles), model, NoiseStream(c.seed),
                                 Coupling::prescribed);
  SpectralField ref = u0;
  const double e0 = energy(u0);
  auto emit = [&] {
    const auto mean = empirical_mean(ens.particles);
    const double scale = std::max(spectral_norm(ref), 1e-300);
    const double rel = l2_error(mean, ref) / scale;
    const double se = mean_stderr(ens.particles, mean) / scale;
    const auto r = energy_report(ens.particles, ens.t);
    csv.row({ens.t, rel, se, 3.0 * se + 10.0 * c.dt, r.E_d, r.E_s_hat, r.max_divergence});
  };
  emit();
  const long steps = detail::step_count(c);
  detail::guarded(csv, ens.t, [&] {
    for (long s = 1; s <= steps; ++s) {
      step_meanfield(ens, ref, c.dt, ctx.workers);
      ref = reference_step(ref, c.eta, c.dt);
      detail::check_growth(energy_report(ens.particles, ens.t).E_s_hat, e0, ens.t);
      if (s % c.output_every == 0 || s == steps) emit();
    }
  });
}

/// Fixed-point iteration u = E[Ad^T(g^u) u0]; one row per sweep.
inline void command_picard(const CommandContext& ctx) {
  const auto& c = ctx.config;
  detail::prepare_outdir(ctx);
  CsvWriter csv(ctx.outdir / "residuals.csv",
                {"iteration", "residual", "mc_error", "tol_fix", "l2_vs_reference", "status"});
  const auto model = make_model(c);
  SpectralField u0 = initial_condition(c);
  dealias(u0);
  require_solenoidal(u0, "picard");
  PicardOptions opt;
  opt.M = static_cast<std::size_t>(c.particles);
  opt.dt = c.dt;
  opt.T = c.T;
  opt.max_iters = c.picard_iterations;
  opt.damping = c.picard_damping;
  opt.workers = ctx.workers;
  const double t_end = static_cast<double>(detail::step_count(c)) * c.dt;
  double t_fail = 0.0;
  PicardResult r;
  detail::guarded(csv, t_fail, [&] { r = picard_iterate(u0, model, NoiseStream(c.seed), opt); });
  const auto ref = run_reference(u0, c.eta, c.dt, t_end, static_cast<int>(detail::step_count(c))).states.back();
  const double final_err = l2_error(r.path.back(), ref) / std::max(spectral_norm(ref), 1e-300);
  for (std::size_t i = 0; i < r.residuals.size(); ++i) {
    const bool last = i + 1 == r.residuals.size();
    std::string status = "running";
    if (last) status = r.converged ? "converged" : (r.stalled ? "stalled" : "max_iterations");
    csv.row({static_cast<std::int64_t>(i + 1), r.residuals[i], r.mc_errors[i], r.tol_fix,
             last ? final_err : std::nan(""), status});
  }
  write_snapshot(ctx.outdir / "picard_final.tmf", r.path.back(), t_end);
}

/// Kelvin audit over seeds seed, seed+1, ..., one trajectory and loop each.
inline void command_circulation(const CommandContext& ctx) {
  const auto& c = ctx.config;
  detail::prepare_outdir(ctx);
  CsvWriter csv(ctx.outdir / "circulation.csv", {"t", "seed", "variant", "circulation", "relative_drift"});
  const auto model = make_model(c);
  SpectralField u0 = initial_condition(c);
  dealias(u0);
  KelvinOptions opt;
  opt.dt = c.dt;
  opt.T = c.T;
  opt.record_every = c.output_every;
  opt.workers = ctx.workers;
  const Point center{c.loop_x, c.loop_y, c.n == 3 ? c.loop_z : 0.0};
  double t_fail = 0.0;
  for (int k = 0; k < c.audit_seeds; ++k) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(k);
    KelvinAudit audit;
    detail::guarded(csv, t_fail, [&] {
      audit = kelvin_audit(u0, model, NoiseStream(seed), Loop::circle(c.n, center, c.loop_radius,
                                                                        static_cast<std::size_t>(c.loop_points)),
                           opt);
    });
    for (const auto& s : audit.samples) {
      csv.row({s.t, static_cast<std::int64_t>(seed), to_string(c.variant), s.circulation, s.relative_drift});
    }
  }
}

/// Per-alpha audit of the configured noise system.
inline void command_basis_check(const CommandContext& ctx) {
  detail::prepare_outdir(ctx);
  const auto basis = make_basis(ctx.config);
  write_basis_audit(ctx.outdir / "basis_audit.csv", *basis, GridSpec(ctx.config.n, ctx.config.m));
}

inline const std::map<std::string, std::function<void(const CommandContext&)>>& command_table() {
  static const std::map<std::string, std::function<void(const CommandContext&)>> table{
      {"reference", command_reference},     {"ips", command_ips},
      {"meanfield", command_meanfield},     {"picard", command_picard},
      {"circulation", command_circulation}, {"basis-check", command_basis_check},
  };
  return table;
}

}  // namespace tmf
