#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tdscat/mikhlin.hpp"
#include "tdscat/potentials.hpp"

using namespace tdscat;

namespace {

double finite_difference(const TimeEnvelope& e, double t, int a) {
  const double h = 1e-4;
  return (e.derivative(t + h, a - 1) - e.derivative(t - h, a - 1)) / (2 * h);
}

// V_hat(xi_k) ~ (2pi)^{-n/2} h^n sum_j V(x_j) e^{-i xi_k x_j} by direct sums.
Field dft_of_samples(const PotentialSpec& s, const GridSpec& g, double t) {
  Field hat = oracle::direct_dft(evaluate(s, g, t));
  const double scale = std::pow(g.spacing(), g.dim) * std::sqrt(static_cast<double>(g.size())) / std::pow(2 * pi, 0.5 * g.dim);
  for (auto& v : hat.values) v *= scale;
  return hat;
}

}  // namespace

TEST(Envelope, DerivativesMatchFiniteDifferences) {
  std::vector<TimeEnvelope> envs{TimeEnvelope::hyperbolic(), TimeEnvelope::log_osc(2.0, 0.5),
                                 TimeEnvelope::inverse_power({0.5, 1.0, -0.25, 0.125}, 1.0),
                                 TimeEnvelope::quench(1.5, false)};
  for (const auto& e : envs)
    for (int a = 1; a <= 4; ++a)
      for (double t : {0.3, 1.7, 2.2, 4.5}) {
        double fd = finite_difference(e, t, a);
        EXPECT_NEAR(e.derivative(t, a), fd, 1e-5 * std::max(1.0, std::abs(fd))) << "kind " << int(e.kind) << " a " << a;
      }
}

TEST(Envelope, ScalarValues) {
  EXPECT_NEAR(TimeEnvelope::hyperbolic().value(3.0), std::tanh(3.0), 1e-15);
  EXPECT_NEAR(TimeEnvelope::log_osc(2.0, 1.0).value(4.0), std::sin(2.0 * std::log(5.0)) / 5.0, 1e-14);
  auto q = TimeEnvelope::quench(2.0, true);
  EXPECT_EQ(q.value(1.999), 0.0);
  EXPECT_EQ(q.value(2.0), 1.0);
  auto s = TimeEnvelope::quench(2.0, false);
  EXPECT_EQ(s.value(1.9), 0.0);
  EXPECT_EQ(s.value(4.0), 1.0);
  EXPECT_THROW(TimeEnvelope::quench(0.0, true), ContractViolation);
  EXPECT_THROW(TimeEnvelope::log_osc(1.0, -1.0), ContractViolation);
}

TEST(Envelope, MikhlinConstants) {
  EXPECT_EQ(TimeEnvelope::hyperbolic().mikhlin_c(), 4.0);
  EXPECT_EQ(TimeEnvelope::quench(1.0, true).mikhlin_c(), 1.0);
  EXPECT_EQ(TimeEnvelope::inverse_power({1.0, 0.5}, 1.0).mikhlin_c(), 2.0);
  // LogOsc: verify sup_t (1+t)^a |f^(a)| / a! <= c^a by sampling.
  for (auto [w, d] : {std::pair{1.0, 0.0}, std::pair{2.0, 1.0}, std::pair{0.5, 0.5}}) {
    auto e = TimeEnvelope::log_osc(w, d);
    double c = e.mikhlin_c();
    for (int a = 1; a <= 4; ++a)
      for (int i = 0; i <= 4000; ++i) {
        double t = 50.0 * i / 4000.0;
        double v = std::pow(1 + t, a) / TimeEnvelope::factorial(a) * std::abs(e.derivative(t, a));
        EXPECT_LE(v, std::pow(c, a) * (1 + 1e-12));
      }
  }
}

TEST(Evaluate, Basics) {
  GridSpec g(1, 64, 8.0);
  Field one = evaluate(*plane_waves({{1.0, {0, 0, 0}}}), g, 0.0);
  for (const auto& v : one.values) EXPECT_EQ(v, cplx(1.0, 0.0));
  const double b = 3 * g.dxi();
  Field pw = evaluate(*plane_waves({{cplx{0.5, 0.2}, {b, 0, 0}}}), g, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(std::abs(pw[i] - cplx{0.5, 0.2} * std::polar(1.0, b * g.point(i)[0])), 0, 1e-15);
}

TEST(Evaluate, MovingSqrtShiftAtZero) {
  // V(x - sqrt(1+t) v) at t = 0 is the Gaussian translated by +v.
  GridSpec g(1, 64, 8.0);
  Vec3 c{0.5, 0, 0}, v{1.25, 0, 0};
  Field moved = evaluate(*moving(gaussian(1.0, 1.0, c), PathKind::SqrtShift, v), g, 0.0);
  Field ref = evaluate(*gaussian(1.0, 1.0, {c[0] + v[0], 0, 0}), g, 0.0);
  EXPECT_LT(oracle::max_abs_diff(moved, ref), 1e-14);
}

TEST(Evaluate, EnvelopedTanh) {
  GridSpec g(2, 16, 4.0);
  auto base = gaussian(1.5, 0.8);
  Field a = evaluate(*enveloped(base, TimeEnvelope::hyperbolic()), g, 3.0);
  Field b = evaluate(*base, g, 3.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(std::abs(a[i] - std::tanh(3.0) * b[i]), 0, 1e-15);
  EXPECT_THROW(enveloped(moving(base, PathKind::Linear, {1, 0, 0}), TimeEnvelope::hyperbolic()), ContractViolation);
}

TEST(Evaluate, SelfSimilarInsideCutoffIsZero) {
  GridSpec g(1, 32, 4.0);
  auto s = self_similar(gaussian(1.0, 1.0), 1.0, 2.0);
  Field z = evaluate(*s, g, 0.5);
  for (const auto& v : z.values) EXPECT_EQ(v, cplx(0, 0));
  Field w = evaluate(*s, g, 2.0);
  // sin(2*2)/2^{1/2} * exp(-(x/2)^2/2)
  for (std::size_t i = 0; i < g.size(); ++i) {
    double x = g.point(i)[0];
    EXPECT_NEAR(w[i].real(), std::sin(4.0) / std::sqrt(2.0) * std::exp(-x * x / 8.0), 1e-14);
  }
}

TEST(FourierData, GaussianClosedFormMatchesDft) {
  GridSpec g(1, 256, 16.0);
  auto s = gaussian(1.0, 1.0, {0.3, 0, 0});
  Field closed = fourier_data(*s, g, 0.0);
  Field dft = dft_of_samples(*s, g, 0.0);
  double top = 0;
  for (const auto& v : closed.values) top = std::max(top, std::abs(v));
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (std::abs(g.wavenumber(static_cast<int>(k))) > 64) continue;
    EXPECT_NEAR(std::abs(closed[k] - dft[k]), 0.0, 1e-8 * top);
  }
}

TEST(FourierData, MovingPhaseUnimodularAndSumLinear) {
  GridSpec g(2, 16, 4.0);
  auto base = gaussian(1.0, 0.7, {0.2, -0.1, 0});
  auto mv = moving(base, PathKind::SinLog, {0.5, 1.0, 0});
  for (double t : {0.0, 1.3, 4.0}) {
    Field a = fourier_data(*mv, g, t), b = fourier_data(*base, g, t);
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_NEAR(std::abs(a[i]), std::abs(b[i]), 1e-14);
      double p = std::sin(std::log1p(t));
      Vec3 xi = g.frequency_vector(i);
      cplx phase = std::polar(1.0, -p * (0.5 * xi[0] + 1.0 * xi[1]));
      EXPECT_NEAR(std::abs(a[i] - phase * b[i]), 0, 1e-14);
    }
  }
  auto other = gaussian(-0.4, 1.3);
  Field s = fourier_data(*sum({base, other}), g, 0.0);
  Field parts = fourier_data(*base, g, 0.0) + fourier_data(*other, g, 0.0);
  EXPECT_LT(oracle::max_abs_diff(s, parts), 1e-15);
}

TEST(FourierData, InverseMatchesEvaluate) {
  // (2pi)^{-n/2} dxi^n sum_k V_hat(xi_k) e^{i xi_k x} reproduces the samples.
  GridSpec g(1, 256, 24.0);
  std::vector<PotentialPtr> cat{gaussian(1.0, 1.0), moving(gaussian(0.5, 1.2), PathKind::SqrtShift, {1.0, 0, 0}),
                                enveloped(gaussian(2.0, 0.9), TimeEnvelope::log_osc(1.0, 0.5)),
                                sum({gaussian(1.0, 1.0), gaussian(-0.5, 1.5, {2, 0, 0})}),
                                self_similar(gaussian(1.0, 1.0), 1.0, 1.0)};
  for (const auto& s : cat) {
    for (double t : {1.5, 3.0}) {
      Field hat = fourier_data(*s, g, t);
      hat *= g.dxi() / std::sqrt(2 * pi);
      Field rec(g);
      for (std::size_t j = 0; j < g.size(); ++j) {
        cplx acc{0, 0};
        for (std::size_t k = 0; k < g.size(); ++k) acc += hat[k] * std::polar(1.0, g.frequency_vector(k)[0] * g.point(j)[0]);
        rec[j] = acc;
      }
      Field direct = evaluate(*s, g, t);
      double top = lp_norm(direct, inf);
      for (std::size_t j = 32; j < g.size() - 32; ++j) EXPECT_NEAR(std::abs(rec[j] - direct[j]), 0, 1e-8 * std::max(top, 1e-3));
    }
  }
}

TEST(FourierData, PlaneWaveDeltasAndOffLattice) {
  GridSpec g(1, 32, 4.0);
  const double b = 2 * g.dxi();
  Field hat = fourier_data(*plane_waves({{1.0, {b, 0, 0}}}), g, 0.0);
  EXPECT_NEAR(std::abs(hat[2]), std::sqrt(2 * pi) / g.dxi(), 1e-12);
  EXPECT_THROW(fourier_data(*plane_waves({{1.0, {b * 1.3, 0, 0}}}), g, 0.0), ContractViolation);
  auto snapped = snap_to_lattice(*plane_waves({{1.0, {b * (1 + 1e-7), 0, 0}}}), g, 1e-3);
  EXPECT_NO_THROW(fourier_data(*snapped, g, 0.0));
  EXPECT_THROW(snap_to_lattice(*plane_waves({{1.0, {b * 1.3, 0, 0}}}), g, 1e-3), ContractViolation);
}

TEST(TotalVariation, Cases) {
  GridSpec g(1, 256, 16.0);
  const double b = 4 * g.dxi();
  const double a = 0.7;
  auto cosine = plane_waves({{0.5 * a, {b, 0, 0}}, {0.5 * a, {-b, 0, 0}}});
  EXPECT_NEAR(total_variation(*cosine, g, 0.0), a, 1e-15);
  EXPECT_NEAR(coefficient_mass(evaluate(*cosine, g, 0.0)), a, 1e-12);
  auto q = enveloped(gaussian(1.0, 1.0), TimeEnvelope::quench(2.0, true));
  EXPECT_EQ(total_variation(*q, g, 1.0), 0.0);
  // Gaussian A=1, sigma=1, n=1: (2pi)^{-1/2} int |V_hat| = 1.
  double ref = oracle::adaptive_simpson([](double k) { return std::exp(-0.5 * k * k); }, -40, 40, 1e-13) / std::sqrt(2 * pi);
  EXPECT_NEAR(total_variation(*gaussian(1.0, 1.0), g, 0.0), ref, 0.01 * ref);
}

TEST(TotalVariation, DominatesSupNorm) {
  GridSpec g(2, 32, 6.0);
  std::vector<PotentialPtr> cat{gaussian(1.0, 1.0), moving(gaussian(-0.5, 0.7), PathKind::Linear, {0.3, 0.1, 0}),
                                enveloped(gaussian(1.0, 1.0), TimeEnvelope::hyperbolic())};
  for (const auto& s : cat)
    for (double t : {0.0, 1.0, 2.5}) EXPECT_LE(lp_norm(evaluate(*s, g, t), inf), total_variation(*s, g, t) + 1e-12);
}

TEST(AccumulatedC, Properties) {
  GridSpec g(1, 128, 12.0);
  auto gs = gaussian(1.0, 1.0);
  EXPECT_EQ(accumulated_c(*gs, g, 0.0), 0.0);
  EXPECT_NEAR(accumulated_c(*gs, g, 2.0), 2.0 * total_variation(*gs, g, 0.0), 1e-14);
  auto lo = enveloped(gs, TimeEnvelope::log_osc(1.0, 1.0));
  const double m0 = total_variation(*gs, g, 0.0);
  double ref = m0 * oracle::adaptive_simpson([](double t) { return std::abs(std::sin(std::log1p(t))) / (1 + t); }, 0, 10, 1e-12);
  EXPECT_NEAR(accumulated_c(*lo, g, 10.0), ref, 1e-4);
  double prev = 0.0;
  for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    double c = accumulated_c(*lo, g, t);
    EXPECT_GE(c, prev);
    prev = c;
  }
  EXPECT_NEAR(accumulated_c(*lo, g, 0, 3) + accumulated_c(*lo, g, 3, 7), accumulated_c(*lo, g, 0, 7), 1e-10);
  auto q = enveloped(gs, TimeEnvelope::quench(1.5, true));
  EXPECT_NEAR(accumulated_c(*q, g, 4.0), 2.5 * m0, 1e-10);
  EXPECT_THROW(accumulated_c(*gs, g, -1.0), DomainError);
}

TEST(Mikhlin, Verdicts) {
  GridSpec g(1, 64, 8.0);
  auto pw = mikhlin_data(*plane_waves({{1.0, {g.dxi(), 0, 0}}}), g);
  EXPECT_EQ(pw.verdict, Verdict::CLClassOnly);
  EXPECT_EQ(std::string(verdict_name(pw.verdict)), "CL-class, not (pp1)-class");
  auto th = mikhlin_data(*enveloped(gaussian(1.0, 1.0), TimeEnvelope::hyperbolic()), g);
  EXPECT_EQ(th.verdict, Verdict::PP1Class);
  EXPECT_EQ(th.mikhlin_c, 4.0);
  EXPECT_GT(th.vhat0_l1, 0.0);
  auto ss = mikhlin_data(*self_similar(gaussian(1.0, 1.0), 1.0, 1.0), g, 4.0);
  EXPECT_EQ(ss.verdict, Verdict::SelfSimilarClass);
  EXPECT_EQ(mikhlin_data(*moving(gaussian(1.0, 1.0), PathKind::SqrtShift, {1, 0, 0}), g).verdict, Verdict::NotAssessed);
}

TEST(Mikhlin, GaussianKmStableUnderRefinement) {
  GridSpec g(1, 64, 8.0);
  KmSettings coarse, fine;
  fine.radial_points = 2 * coarse.radial_points;
  auto s = gaussian(1.0, 1.0);
  double a = km_estimate(*s, 1, coarse), b = km_estimate(*s, 1, fine);
  EXPECT_GT(a, 0.0);
  EXPECT_LT(std::abs(a - b), 0.1 * b);
  auto d = mikhlin_data(*s, g);
  EXPECT_EQ(d.verdict, Verdict::TimeIndependent);
  ASSERT_TRUE(d.km_estimate.has_value());
}

TEST(Mikhlin, GaussianFourierDerivativesMatchFiniteDifferences) {
  auto s = gaussian(1.3, 0.8, {0.4, -0.2, 0.1});
  Vec3 xi{0.3, -0.7, 0.5};
  for (int l = 0; l < 3; ++l)
    for (int j = 1; j <= 2; ++j) {
      const double h = 1e-4;
      Vec3 p = xi, m = xi;
      p[l] += h;
      m[l] -= h;
      cplx fd = (fourier_derivative(*s, p, 3, l, j - 1, l, 0) -
                 fourier_derivative(*s, m, 3, l, j - 1, l, 0)) /
                (2 * h);
      cplx an = fourier_derivative(*s, xi, 3, l, j, l, 0);
      EXPECT_NEAR(std::abs(an - fd), 0.0, 1e-6) << "l " << l << " j " << j;
    }
}
