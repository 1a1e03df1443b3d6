#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "test_support.hpp"
#include "tmf/engine.hpp"

using namespace tmf;
using namespace tmf::testing;

namespace {

SpectralField taylor_green(const GridSpec& g) {
  return dft_forward(VectorField::sample(g, [](const Point& x) {
    return Point{std::sin(x[0]) * std::cos(x[1]), -std::cos(x[0]) * std::sin(x[1]), 0.0};
  }));
}

double dist(SpectralField a, const SpectralField& b) {
  a -= b;
  return spectral_norm(a);
}

}  // namespace

TEST(Reference, TaylorGreenDecay) {
  GridSpec g(2, 32);
  const double eta = 0.05;
  auto run = run_reference(taylor_green(g), eta, 0.01, 1.0, 10);
  ASSERT_EQ(run.times.size(), 11u);
  auto exact = taylor_green(g);
  exact *= std::exp(-2 * eta * 1.0);
  EXPECT_LT(dist(run.states.back(), exact) / spectral_norm(exact), 1e-6);
  EXPECT_NEAR(run.final_time(), 1.0, 1e-12);
  EXPECT_GT(run.max_cfl, 0.0);
}

TEST(Reference, FourthOrderInTime) {
  std::mt19937_64 rng(3);
  GridSpec g(2, 32);
  auto u0 = dft_forward(VectorField::sample(g, random_solenoidal(rng, 2, 4)));
  const double T = 0.5, eta = 0.02;
  auto fine = run_reference(u0, eta, T / 400, T, 400).states.back();
  const double e1 = dist(run_reference(u0, eta, T / 25, T, 25).states.back(), fine);
  const double e2 = dist(run_reference(u0, eta, T / 50, T, 50).states.back(), fine);
  EXPECT_GT(e1 / e2, 12.0);
}

TEST(Reference, EnergyDecaysAndInterpolates) {
  std::mt19937_64 rng(5);
  GridSpec g(2, 32);
  auto u0 = dft_forward(VectorField::sample(g, random_solenoidal(rng, 2, 4)));
  auto run = run_reference(u0, 0.05, 0.01, 0.2, 5);
  for (std::size_t i = 1; i < run.states.size(); ++i) {
    EXPECT_LT(spectral_norm(run.states[i]), spectral_norm(run.states[i - 1]));
  }
  auto mid = run.velocity_at(0.075);
  auto lin = run.states[1];
  lin *= 0.5;
  lin.axpy(0.5, run.states[2]);
  EXPECT_LT(dist(mid, lin), 1e-15);
  EXPECT_EQ(dist(run.velocity_at(0.1), run.states[2]), 0.0);
  EXPECT_THROW(run.velocity_at(0.5), Error);
}

TEST(Reference, RejectsCompressibleStart) {
  GridSpec g(2, 16);
  auto f = dft_forward(VectorField::sample(g, [](const Point& x) { return Point{std::sin(x[0]), 0.0, 0.0}; }));
  EXPECT_THROW(run_reference(f, 0.01, 0.01, 0.1), Error);
  EXPECT_THROW(run_reference(taylor_green(g), 0.01, 0.0, 0.1), Error);
}

TEST(Ensemble, MeanIsPermutationInvariantBitwise) {
  std::mt19937_64 rng(7);
  GridSpec g(2, 16);
  std::vector<SpectralField> ps;
  for (int i = 0; i < 13; ++i) ps.push_back(dft_forward(VectorField::sample(g, random_solenoidal(rng, 2, 3))));
  auto m0 = empirical_mean(ps);
  std::shuffle(ps.begin(), ps.end(), rng);
  auto m1 = empirical_mean(ps);
  EXPECT_EQ(m0.coeffs, m1.coeffs);
  SpectralField naive(g, 2);
  for (const auto& p : ps) naive += p;
  naive *= 1.0 / 13;
  EXPECT_LT(dist(m0, naive), 1e-14);
}

TEST(Ensemble, RelabellingParticlesAndNoiseGivesSameMean) {
  GridSpec g(2, 16);
  auto basis = std::make_shared<BasisTruncation>(2, 2, 3.0);
  ModelVariant m(Variant::v1_hamiltonian, 0.05, basis);
  auto a = Ensemble::replicate(taylor_green(g), 6, m, NoiseStream(1), Coupling::ips);
  auto b = a;
  std::reverse(b.particles.begin(), b.particles.end());
  std::reverse(b.noise_ids.begin(), b.noise_ids.end());
  for (int s = 0; s < 5; ++s) {
    step_ips(a, 0.01);
    step_ips(b, 0.01);
  }
  EXPECT_EQ(empirical_mean(a.particles).coeffs, empirical_mean(b.particles).coeffs);
}

TEST(Ensemble, WorkerCountDoesNotChangeResults) {
  GridSpec g(2, 16);
  auto basis = std::make_shared<BasisTruncation>(2, 2, 3.0);
  ModelVariant m(Variant::v2_projected, 0.05, basis);
  auto a = Ensemble::replicate(taylor_green(g), 7, m, NoiseStream(2), Coupling::ips);
  auto b = a;
  for (int s = 0; s < 4; ++s) {
    step_ips(a, 0.01, 1);
    step_ips(b, 0.01, 3);
  }
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.particles[i].coeffs, b.particles[i].coeffs);
  EXPECT_EQ(a.step, 4u);
  EXPECT_NEAR(a.t, 0.04, 1e-15);
}

TEST(Ensemble, CouplingIsChecked) {
  GridSpec g(2, 16);
  auto basis = std::make_shared<BasisTruncation>(2, 1, 3.0);
  ModelVariant m(Variant::v2_projected, 0.05, basis);
  auto a = Ensemble::replicate(taylor_green(g), 2, m, NoiseStream(2), Coupling::prescribed);
  EXPECT_THROW(step_ips(a, 0.01), Error);
  EXPECT_THROW(step_meanfield(a, taylor_green(g), -0.01), Error);
  EXPECT_THROW(step_heun_v1(a, taylor_green(g), taylor_green(g), 0.01), Error);
}

TEST(Ensemble, NoiseOffParticlesStayIdentical) {
  GridSpec g(2, 16);
  auto basis = std::make_shared<BasisTruncation>(2, 2, 3.0);
  ModelVariant m = ModelVariant(Variant::v1_hamiltonian, 0.05, basis).with_noise(false);
  auto a = Ensemble::replicate(taylor_green(g), 3, m, NoiseStream(2), Coupling::ips);
  for (int s = 0; s < 3; ++s) step_ips(a, 0.01);
  EXPECT_EQ(a.particles[0].coeffs, a.particles[2].coeffs);
  // Euler steps on Taylor-Green: (1 - 2 eta dt)^3.
  auto expect = taylor_green(g);
  expect *= std::pow(1 - 2 * 0.05 * 0.01, 3);
  EXPECT_LT(dist(a.particles[0], expect), 1e-13);
}

TEST(Ensemble, MeanFollowsLinearDriftInExpectation) {
  // With u = 0 the noise has zero mean, so E[xi_n] = (I + eta dt Lap)^n xi_0.
  GridSpec g(2, 16);
  std::mt19937_64 rng(29);
  auto xi0 = dft_forward(VectorField::sample(g, random_solenoidal(rng, 2, 3)));
  auto basis = std::make_shared<BasisTruncation>(2, 2, 3.0);
  const double eta = 0.1, dt = 0.01;
  const int steps = 20, M = 200;
  ModelVariant m(Variant::v2_projected, eta, basis);
  auto ens = Ensemble::replicate(xi0, M, m, NoiseStream(31), Coupling::prescribed);
  SpectralField zero(g, 2);
  for (int s = 0; s < steps; ++s) step_meanfield(ens, zero, dt);
  auto mean = empirical_mean(ens.particles);
  double spread = 0.0;
  for (const auto& p : ens.particles) spread += std::pow(dist(p, mean), 2);
  spread /= (M - 1);
  auto oracle = xi0;
  for (int s = 0; s < steps; ++s) {
    auto l = spectral_laplacian(oracle);
    oracle.axpy(eta * dt, l);
  }
  EXPECT_LT(dist(mean, oracle), 3.0 * std::sqrt(spread / M));
  EXPECT_GT(spread, 0.0);
}

TEST(Ensemble, HeunWithoutNoiseAndFlowIsIdentity) {
  GridSpec g(2, 16);
  auto basis = std::make_shared<BasisTruncation>(2, 2, 3.0);
  ModelVariant m = ModelVariant(Variant::v1_hamiltonian, 0.05, basis).with_noise(false);
  auto a = Ensemble::replicate(taylor_green(g), 2, m, NoiseStream(2), Coupling::prescribed);
  SpectralField zero(g, 2);
  step_heun_v1(a, zero, zero, 0.01);
  EXPECT_LT(dist(a.particles[0], taylor_green(g)), 1e-13);
}
