#pragma once

// FFTW-backed transforms between real samples and the normalized half spectrum.
//
// Plans are created once per grid with FFTW_ESTIMATE | FFTW_UNALIGNED under a
// global mutex and executed through the new-array interface, which FFTW
// documents as thread safe. ESTIMATE plans are deterministic, so transforms
// are bitwise reproducible across runs and worker counts.

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "tmf/grid.hpp"

namespace tmf {

namespace detail {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  ~PlanPair() {
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
  }
};

inline std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

inline const PlanPair& plans_for(const GridSpec& g) {
  static std::map<std::pair<int, int>, std::unique_ptr<PlanPair>> cache;
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  auto key = std::make_pair(g.dim(), g.m());
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;

  int dims[3] = {g.m(), g.m(), g.m()};
  std::vector<double> real(g.points());
  std::vector<Complex> spec(g.modes());
  auto pp = std::make_unique<PlanPair>();
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  pp->forward = fftw_plan_dft_r2c(g.dim(), dims, real.data(),
                                  reinterpret_cast<fftw_complex*>(spec.data()), flags);
  pp->inverse = fftw_plan_dft_c2r(g.dim(), dims, reinterpret_cast<fftw_complex*>(spec.data()),
                                  real.data(), flags);
  if (!pp->forward || !pp->inverse) throw Error("FFTW plan creation failed");
  auto& ref = *pp;
  cache.emplace(key, std::move(pp));
  return ref;
}

}  // namespace detail

inline void forward_component(const GridSpec& g, std::span<const double> in, std::span<Complex> out) {
  const auto& p = detail::plans_for(g);
  // r2c does not modify its input.
  fftw_execute_dft_r2c(p.forward, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / static_cast<double>(g.points());
  for (auto& z : out) z *= scale;
}

inline void inverse_component(const GridSpec& g, std::span<const Complex> in, std::span<double> out) {
  const auto& p = detail::plans_for(g);
  // c2r destroys its input, so transform a copy.
  std::vector<Complex> work(in.begin(), in.end());
  fftw_execute_dft_c2r(p.inverse, reinterpret_cast<fftw_complex*>(work.data()), out.data());
}

inline SpectralField dft_forward(const VectorField& f) {
  SpectralField s(f.grid, f.components());
  for (int c = 0; c < f.components(); ++c) forward_component(f.grid, f.component(c), s.component(c));
  return s;
}

inline VectorField dft_inverse(const SpectralField& s) {
  VectorField f(s.grid);
  if (s.ncomp != s.grid.dim()) throw Error("dft_inverse: expected a vector spectrum");
  for (int c = 0; c < s.ncomp; ++c) inverse_component(s.grid, s.component(c), f.component(c));
  return f;
}

inline SpectralField dft_forward(const ScalarField& f) {
  SpectralField s(f.grid, 1);
  forward_component(f.grid, f.samples, s.component(0));
  return s;
}

inline ScalarField dft_inverse_scalar(const SpectralField& s) {
  if (s.ncomp != 1) throw Error("dft_inverse_scalar: expected a scalar spectrum");
  ScalarField f(s.grid);
  inverse_component(s.grid, s.component(0), f.samples);
  return f;
}

}  // namespace tmf
