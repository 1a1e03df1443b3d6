#pragma once

// Stochastic Lagrangian flow: material loops and their circulation, the
// back-to-labels map A = g^{-1} (stored as a periodic displacement) and the
// transported momentum zeta = P[(grad A)^T (u0 o A)].
//
// A point x moves by  dx = u(x) dt + nu sum_alpha X_alpha(x) dW^alpha.  No Ito
// correction is needed because sum grad_{X_alpha} X_alpha = 0.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "tmf/engine.hpp"

namespace tmf {

/// Component-wise representative of d in [-pi, pi).
inline Point minimal_image(Point d, int dim) {
  for (int j = 0; j < dim; ++j) d[j] -= two_pi * std::floor(d[j] / two_pi + 0.5);
  return d;
}

// ---------------------------------------------------------------------------
// Loops
// ---------------------------------------------------------------------------

/// Closed polygon on the torus; the last point connects to the first.
struct Loop {
  int dim = 2;
  std::vector<Point> points;
  /// Largest segment length at creation; 0 disables the spacing contract.
  double reference_spacing = 0.0;

  std::size_t size() const { return points.size(); }

  /// Circle in the (x1, x2) plane.
  static Loop circle(int dim, const Point& center, double radius, std::size_t count) {
    if (count < 64) throw Error("Loop: at least 64 points required");
    if (!(radius > 0.0) || radius >= std::numbers::pi) throw Error("Loop: radius must lie in (0, pi)");
    Loop l;
    l.dim = dim;
    l.points.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
      const double th = two_pi * static_cast<double>(j) / static_cast<double>(count);
      Point p = center;
      p[0] += radius * std::cos(th);
      p[1] += radius * std::sin(th);
      l.points.push_back(wrap_point(p, dim));
    }
    l.reference_spacing = l.max_spacing();
    return l;
  }

  Point segment(std::size_t j) const {
    const Point& a = points[j];
    const Point& b = points[(j + 1) % points.size()];
    return minimal_image(Point{b[0] - a[0], b[1] - a[1], b[2] - a[2]}, dim);
  }

  double max_spacing() const {
    double s = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j) {
      const auto d = segment(j);
      s = std::max(s, std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]));
    }
    return s;
  }

  double length() const {
    double s = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j) {
      const auto d = segment(j);
      s += std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    }
    return s;
  }

  bool spacing_ok() const { return reference_spacing <= 0.0 || max_spacing() <= 2.0 * reference_spacing; }

  /// Inserts the midpoint of every segment longer than twice the reference
  /// spacing, repeating until none is. Returns the number of points added.
  std::size_t refine() {
    if (reference_spacing <= 0.0) return 0;
    std::size_t added = 0;
    while (!spacing_ok()) {
      std::vector<Point> next;
      next.reserve(points.size() * 2);
      for (std::size_t j = 0; j < points.size(); ++j) {
        next.push_back(points[j]);
        const auto d = segment(j);
        if (std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) > 2.0 * reference_spacing) {
          Point mid = points[j];
          for (int k = 0; k < dim; ++k) mid[k] += 0.5 * d[k];
          next.push_back(wrap_point(mid, dim));
          ++added;
        }
      }
      points = std::move(next);
    }
    return added;
  }
};

/// Midpoint-rule line integral of xi along the polygon.
inline double circulation(const Loop& loop, const SpectralInterpolator& xi) {
  if (!loop.spacing_ok()) throw Error("circulation: loop spacing exceeds twice the initial spacing; refine first");
  double total = 0.0;
  for (std::size_t j = 0; j < loop.size(); ++j) {
    const auto d = loop.segment(j);
    Point mid = loop.points[j];
    for (int k = 0; k < loop.dim; ++k) mid[k] += 0.5 * d[k];
    const auto v = xi(mid);
    for (int k = 0; k < loop.dim; ++k) total += v[k] * d[k];
  }
  return total;
}

inline double circulation(const Loop& loop, const SpectralField& xi) {
  if (loop.dim != xi.grid.dim()) throw Error("circulation: loop and field dimensions differ");
  return circulation(loop, SpectralInterpolator(xi));
}

/// dx = u(x) dt + nu sum X_alpha(x) dW^alpha at a single point; u may be null.
inline Point point_displacement(const SpectralInterpolator* u, const ModelVariant& model,
                                std::span<const double> dW, double dt, const Point& x) {
  Point d{0.0, 0.0, 0.0};
  if (u) {
    const auto v = (*u)(x);
    for (int k = 0; k < 3; ++k) d[k] = v[k] * dt;
  }
  if (model.nu() > 0.0) {
    const auto w = model.basis().evaluate_sum(dW, x);
    for (int k = 0; k < 3; ++k) d[k] += model.nu() * w[k];
  }
  return d;
}

inline void advance_points(std::vector<Point>& points, int dim, const SpectralInterpolator* u,
                           const ModelVariant& model, std::span<const double> dW, double dt, int workers = 1) {
  parallel_for(points.size(), workers, [&](std::size_t j) {
    const auto d = point_displacement(u, model, dW, dt, points[j]);
    Point x = points[j];
    for (int k = 0; k < dim; ++k) x[k] += d[k];
    points[j] = wrap_point(x, dim);
  });
}

/// Point update driven by the increments stored at (noise_id, step) of the
/// stream, i.e. the same numbers the momentum equation of that particle uses.
inline void advance_points(std::vector<Point>& points, const SpectralField& u, const ModelVariant& model,
                           const NoiseStream& stream, std::uint64_t noise_id, std::uint64_t step, double dt,
                           int workers = 1) {
  const auto dW = stream.increments(noise_id, step, model.basis().size(), dt);
  const SpectralInterpolator ui(u);
  advance_points(points, u.grid.dim(), &ui, model, dW, dt, workers);
}

// ---------------------------------------------------------------------------
// Kelvin audit
// ---------------------------------------------------------------------------

struct CirculationSample {
  double t = 0.0;
  double circulation = 0.0;
  double relative_drift = 0.0;
  std::size_t loop_points = 0;
};

struct KelvinOptions {
  double dt = 1e-3;
  double T = 0.25;
  int record_every = 1;
  std::uint64_t noise_id = 0;
  int workers = 1;
};

struct KelvinAudit {
  std::vector<CirculationSample> samples;
  double max_relative_drift = 0.0;
  double final_relative_drift() const { return samples.empty() ? 0.0 : samples.back().relative_drift; }
};

/// One momentum trajectory xi (Euler-Maruyama, mean field u prescribed by the
/// deterministic reference advanced in lockstep) and one material loop, both
/// driven by the same increments. Records the circulation of xi along the loop.
inline KelvinAudit kelvin_audit(const SpectralField& u0, const ModelVariant& model, const NoiseStream& stream,
                                Loop loop, const KelvinOptions& opt) {
  if (!(opt.dt > 0.0)) throw Error("kelvin_audit: dt must be positive");
  if (opt.record_every < 1) throw Error("kelvin_audit: record_every must be >= 1");
  require_solenoidal(u0, "kelvin_audit");
  const auto steps = static_cast<long>(std::llround(opt.T / opt.dt));
  SpectralField u = u0;
  dealias(u);
  SpectralField xi = u;
  KelvinAudit out;
  const double c0 = circulation(loop, xi);
  auto record = [&](double t) {
    const double c = circulation(loop, xi);
    const double rel = std::abs(c - c0) / std::max(std::abs(c0), 1e-300);
    out.samples.push_back({t, c, rel, loop.size()});
    out.max_relative_drift = std::max(out.max_relative_drift, rel);
  };
  out.samples.push_back({0.0, c0, 0.0, loop.size()});
  const std::size_t nalpha = model.basis().size();
  for (long s = 0; s < steps; ++s) {
    const auto step = static_cast<std::uint64_t>(s);
    const auto dW = stream.increments(opt.noise_id, step, nalpha, opt.dt);
    {
      const SpectralInterpolator ui(u);
      advance_points(loop.points, loop.dim, &ui, model, dW, opt.dt, opt.workers);
    }
    xi += euler_maruyama_increment(model, u, xi, opt.dt, dW);
    dealias(xi);
    if (model.solenoidal()) leray_project_inplace(xi);
    if (!all_finite(xi)) throw Error("kelvin_audit: non-finite state at step " + std::to_string(s));
    u = reference_step(u, model.eta(), opt.dt);
    loop.refine();
    if ((s + 1) % opt.record_every == 0 || s + 1 == steps) record(static_cast<double>(s + 1) * opt.dt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Back-to-labels map
// ---------------------------------------------------------------------------

/// A(x) = x + a(x) with a periodic, sampled on the grid.
struct LabelMap {
  VectorField displacement;

  explicit LabelMap(const GridSpec& g) : displacement(g) {}
  static LabelMap identity(const GridSpec& g) { return LabelMap(g); }
  const GridSpec& grid() const { return displacement.grid; }

  Point label(std::size_t p) const {
    Point x = grid().coordinate(p);
    const auto a = displacement.at(p);
    for (int k = 0; k < grid().dim(); ++k) x[k] += a[k];
    return x;
  }
};

/// Semi-Lagrangian transport: A_new(x) = A_old(x - dx(x)), i.e.
/// a_new(x) = a_old(x - dx(x)) - dx(x), with dx the point displacement.
inline void advance_label_map(LabelMap& map, const SpectralField& u, const ModelVariant& model,
                              std::span<const double> dW, double dt, int workers = 1) {
  const auto& g = map.grid();
  require_same_grid(g, u.grid, "advance_label_map");
  SpectralField carrier = u;
  dealias(carrier);
  carrier *= dt;
  if (model.nu() > 0.0) carrier.axpy(model.nu(), model.basis().spectral_sum(g, dW));
  const VectorField dx = dft_inverse(carrier);

  const SpectralInterpolator a_old(dft_forward(map.displacement));
  const int n = g.dim();
  VectorField next(g);
  parallel_for(g.points(), workers, [&](std::size_t p) {
    Point y = g.coordinate(p);
    for (int k = 0; k < n; ++k) y[k] -= dx.component(k)[p];
    const auto a = a_old(y);
    for (int k = 0; k < n; ++k) next.component(k)[p] = a[k] - dx.component(k)[p];
  });
  map.displacement = std::move(next);
}

inline void advance_label_map(LabelMap& map, const SpectralField& u, const ModelVariant& model,
                              const NoiseStream& stream, std::uint64_t noise_id, std::uint64_t step, double dt,
                              int workers = 1) {
  const auto dW = stream.increments(noise_id, step, model.basis().size(), dt);
  advance_label_map(map, u, model, dW, dt, workers);
}

/// zeta = P[(I + grad a)^T (u0 o A)], truncated to the 2/3 band.
inline SpectralField ad_top_transport(const LabelMap& map, const SpectralField& u0, int workers = 1) {
  const auto& g = map.grid();
  require_same_grid(g, u0.grid, "ad_top_transport");
  require_solenoidal(u0, "ad_top_transport");
  const int n = g.dim();
  const SpectralInterpolator u0i(u0);
  VectorField v(g);
  parallel_for(g.points(), workers, [&](std::size_t p) {
    const auto w = u0i(map.label(p));
    for (int k = 0; k < n; ++k) v.component(k)[p] = w[k];
  });
  const auto da = physical_jacobian(dft_forward(map.displacement));  // da[c*n+j] = d_j a_c
  VectorField w = v;
  for (int i = 0; i < n; ++i) {
    auto wi = w.component(i);
    for (int j = 0; j < n; ++j) {
      const auto& d = da[static_cast<std::size_t>(j) * n + i];  // d_i a_j
      const auto vj = v.component(j);
      for (std::size_t p = 0; p < g.points(); ++p) wi[p] += d[p] * vj[p];
    }
  }
  auto zeta = dft_forward(w);
  dealias(zeta);
  leray_project_inplace(zeta);
  return zeta;
}

// ---------------------------------------------------------------------------
// Picard iteration for the fixed point u = E[Ad^T(g^u).u0]
// ---------------------------------------------------------------------------

/// Heat flow e^{eta t Lap} u0.
inline SpectralField heat_flow(SpectralField u, double eta, double t) {
  const auto& g = u.grid;
  for (std::size_t slot = 0; slot < g.modes(); ++slot) {
    const double f = std::exp(-eta * norm_squared(g.mode_wavevector(slot), g.dim()) * t);
    for (int c = 0; c < u.ncomp; ++c) u.component(c)[slot] *= f;
  }
  return u;
}

/// Mean field at every time step t_n = n dt, n = 0..steps.
using MeanFieldPath = std::vector<SpectralField>;

struct PhiResult {
  MeanFieldPath mean;
  /// Standard error of the Monte Carlo mean, ||.||_L2, per time step.
  std::vector<double> stderr_path;
  double max_stderr() const {
    double s = 0.0;
    for (double e : stderr_path) s = std::max(s, e);
    return s;
  }
};

/// Phi(u) = E[Ad^T(g^u).u0] over M label maps with noise ids 0..M-1.
inline PhiResult picard_map(const MeanFieldPath& u, const SpectralField& u0, const ModelVariant& model,
                            const NoiseStream& stream, std::size_t M, double dt, int workers = 1) {
  if (u.empty()) throw Error("picard_map: empty mean-field path");
  if (M < 2) throw Error("picard_map: needs at least two trajectories");
  const std::size_t steps = u.size() - 1;
  const auto& g = u0.grid;
  std::vector<std::vector<SpectralField>> zeta(steps + 1, std::vector<SpectralField>(M, SpectralField(g, g.dim())));
  SpectralField start = u0;
  dealias(start);
  for (std::size_t i = 0; i < M; ++i) zeta[0][i] = start;
  parallel_for(M, workers, [&](std::size_t i) {
    LabelMap a = LabelMap::identity(g);
    for (std::size_t s = 0; s < steps; ++s) {
      advance_label_map(a, u[s], model, stream, i, s, dt);
      zeta[s + 1][i] = ad_top_transport(a, u0);
    }
  });
  PhiResult r;
  for (std::size_t s = 0; s <= steps; ++s) {
    auto mean = empirical_mean(zeta[s]);
    double var = 0.0;
    for (const auto& z : zeta[s]) {
      SpectralField d = z;
      d -= mean;
      var += spectral_inner(d, d);
    }
    r.stderr_path.push_back(std::sqrt(var / (static_cast<double>(M) * static_cast<double>(M - 1))));
    r.mean.push_back(std::move(mean));
  }
  return r;
}

struct PicardOptions {
  std::size_t M = 64;
  double dt = 1e-2;
  double T = 0.25;
  int max_iters = 8;
  double damping = 1.0;  // u <- (1 - damping) u + damping Phi(u)
  int workers = 1;
};

struct PicardResult {
  std::vector<double> residuals;
  std::vector<double> mc_errors;
  double tol_fix = 0.0;
  bool converged = false;
  /// Stopped after three consecutive non-decreasing residuals.
  bool stalled = false;
  MeanFieldPath path;
};

/// max_n ||a_n - b_n||
inline double path_distance(const MeanFieldPath& a, const MeanFieldPath& b) {
  if (a.size() != b.size()) throw Error("path_distance: paths differ in length");
  double d = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    SpectralField x = a[s];
    x -= b[s];
    d = std::max(d, spectral_norm(x));
  }
  return d;
}

inline MeanFieldPath heat_flow_path(const SpectralField& u0, double eta, double dt, std::size_t steps) {
  MeanFieldPath p;
  SpectralField start = u0;
  dealias(start);
  for (std::size_t s = 0; s <= steps; ++s) p.push_back(heat_flow(start, eta, static_cast<double>(s) * dt));
  return p;
}

/// Picard iteration u^{(m+1)} = Phi(u^{(m)}). The same noise addresses are used
/// in every sweep. Converged once the residual drops below
/// tol_fix = max(0.02 ||u0||, 3 * MC error).
inline PicardResult picard_iterate(const SpectralField& u0, const ModelVariant& model, const NoiseStream& stream,
                                   const PicardOptions& opt, std::optional<MeanFieldPath> initial = std::nullopt) {
  if (!(opt.dt > 0.0)) throw Error("picard_iterate: dt must be positive");
  if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw Error("picard_iterate: damping must lie in (0, 1]");
  const auto steps = static_cast<std::size_t>(std::llround(opt.T / opt.dt));
  PicardResult r;
  r.path = initial ? std::move(*initial) : heat_flow_path(u0, model.eta(), opt.dt, steps);
  if (r.path.size() != steps + 1) throw Error("picard_iterate: initial path has the wrong length");
  const double u0n = spectral_norm(u0);
  int non_decreasing = 0;
  for (int it = 0; it < opt.max_iters; ++it) {
    auto phi = picard_map(r.path, u0, model, stream, opt.M, opt.dt, opt.workers);
    MeanFieldPath next = std::move(phi.mean);
    if (opt.damping < 1.0) {
      for (std::size_t s = 0; s <= steps; ++s) {
        next[s] *= opt.damping;
        next[s].axpy(1.0 - opt.damping, r.path[s]);
      }
    }
    const double res = path_distance(next, r.path);
    if (!r.residuals.empty() && res >= r.residuals.back()) {
      ++non_decreasing;
    } else {
      non_decreasing = 0;
    }
    r.residuals.push_back(res);
    r.mc_errors.push_back(phi.max_stderr());
    r.tol_fix = std::max(0.02 * u0n, 3.0 * phi.max_stderr());
    r.path = std::move(next);
    if (res <= r.tol_fix) {
      r.converged = true;
      break;
    }
    if (non_decreasing >= 3) {
      r.stalled = true;
      break;
    }
  }
  return r;
}

}  // namespace tmf
