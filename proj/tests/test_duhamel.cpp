#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>

#include "oracles.hpp"
#include "tdscat/duhamel.hpp"

using namespace tdscat;

namespace {

Eigen::MatrixXcd dense_free(const GridSpec& g, double t) {
  Eigen::MatrixXcd F = dft_matrix(g);
  Eigen::VectorXcd ph(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    Vec3 xi = g.frequency_vector(k);
    ph(k) = std::polar(1.0, -t * dot3(xi, xi));
  }
  return F.adjoint() * ph.asDiagonal() * F;
}

Eigen::MatrixXcd dense_kt(const PotentialSpec& s, const GridSpec& g, double t) {
  Eigen::VectorXcd d = to_vector(evaluate(s, g, t));
  return dense_free(g, -t) * d.asDiagonal() * dense_free(g, t);
}

Field wave(const GridSpec& g, double q) {
  return sample(g, [&](const Vec3& x) { return std::polar(1.0, q * x[0]); });
}

// (e^{zT} - 1) / z
cplx E(cplx z, double T) { return std::abs(z) < 1e-14 ? cplx{T, 0} : (std::exp(z * T) - 1.0) / z; }

Field packet(const GridSpec& g, double w, double q, double c) {
  return sample(g, [&](const Vec3& x) { return std::exp(-(x[0] - c) * (x[0] - c) / (2 * w * w)) * std::polar(1.0, q * x[0]); });
}

}  // namespace

TEST(Series, ConfigValidation) {
  SeriesConfig c;
  EXPECT_NO_THROW(c.validate());
  c.max_order = 8;
  c.n_t = 20;
  EXPECT_THROW(c.validate(), ContractViolation);
  c.n_t = 401;
  c.eps_schedule = {0.1, 0.2};
  EXPECT_THROW(c.validate(), ContractViolation);
  c.eps_schedule = {0.2, -0.1};
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(Cumulative, FourthOrderOnSmoothIntegrand) {
  GridSpec g(1, 8, 1.0);
  for (int n : {9, 10}) {
    const double T = 2.0, h = T / (n - 1);
    std::vector<Field> f(n, Field(g));
    for (int i = 0; i < n; ++i) f[i][0] = std::cos(3 * h * i);
    detail::cumulative_right(f, h, QuadRule::Simpson);
    for (int i = 0; i < n; ++i) {
      double exact = (std::sin(3 * T) - std::sin(3 * h * i)) / 3;
      EXPECT_NEAR(f[i][0].real(), exact, 1e-2) << n << " " << i;
    }
    auto w = detail::full_weights(static_cast<std::size_t>(n), h, QuadRule::Simpson);
    double acc = 0;
    for (int i = 0; i < n; ++i) acc += w[i] * std::cos(3 * h * i);
    EXPECT_NEAR(acc, std::sin(3 * T) / 3, 1e-2);
  }
  // Convergence order close to 4 on a refinement pair.
  auto err = [&](int n) {
    const double T = 2.0, h = T / (n - 1);
    std::vector<Field> f(n, Field(g));
    for (int i = 0; i < n; ++i) f[i][0] = std::cos(3 * h * i);
    detail::cumulative_right(f, h, QuadRule::Simpson);
    double m = 0;
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs(f[i][0].real() - (std::sin(3 * T) - std::sin(3 * h * i)) / 3));
    return m;
  };
  EXPECT_GT(std::log2(err(41) / err(81)), 3.5);
}

TEST(BornTerms, ZeroSpec) {
  GridSpec g(1, 32, 6.0);
  Field psi = packet(g, 1.0, 1.0, 0.0);
  SeriesConfig c;
  c.max_order = 4;
  c.n_t = 41;
  BornLedger L = born_terms(*zero_potential(), 2.0, psi, c);
  ASSERT_EQ(L.orders.size(), 5u);
  EXPECT_EQ(L.orders[0].values, psi.values);
  for (int k = 1; k <= 4; ++k) EXPECT_EQ(lp_norm(L.orders[k], inf), 0.0);
  auto cmp = born_series_vs_direct(*zero_potential(), 2.0, psi, c, {0.01});
  EXPECT_LT(cmp.residual, 1e-12);
}

TEST(BornTerms, FirstOrderSingleWave) {
  GridSpec g(1, 32, 8.0);
  const double b = 2 * g.dxi(), q = -3 * g.dxi(), T = 1.5;
  auto s = plane_waves({{1.0, {b, 0, 0}}});
  SeriesConfig c;
  c.max_order = 1;
  c.n_t = 2001;
  BornLedger L = born_terms(*s, T, wave(g, q), c);
  cplx coef = E(cplx{0, b * b + 2 * b * q}, T);
  Field expect = coef * wave(g, b + q);
  EXPECT_LT(oracle::rel_l2(L.orders[1], expect), 1e-8);
}

TEST(BornTerms, SecondOrderMatchesBruteForceSimplex) {
  GridSpec g(1, 16, 4.0);
  auto s = gaussian(0.5, 0.8);
  Field psi = packet(g, 0.8, g.dxi(), 0.0);
  const double T = 1.0;
  // Nested Gauss-Legendre over {0 <= t1 <= t2 <= T} with dense K_t.
  using GL = boost::math::quadrature::gauss<double, 40>;
  Eigen::VectorXcd v = to_vector(psi);
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(v.size());
  const auto& x = GL::abscissa();
  const auto& w = GL::weights();
  std::vector<std::pair<double, double>> nodes;
  for (std::size_t i = 0; i < x.size(); ++i) {
    nodes.push_back({x[i], w[i]});
    if (x[i] != 0) nodes.push_back({-x[i], w[i]});
  }
  for (auto [x1, w1] : nodes) {
    double t1 = 0.5 * T * (x1 + 1);
    Eigen::VectorXcd inner = Eigen::VectorXcd::Zero(v.size());
    for (auto [x2, w2] : nodes) {
      double t2 = t1 + 0.5 * (T - t1) * (x2 + 1);
      inner += 0.5 * (T - t1) * w2 * (dense_kt(*s, g, t2) * v);
    }
    acc += 0.5 * T * w1 * (dense_kt(*s, g, t1) * inner);
  }
  SeriesConfig c;
  c.max_order = 2;
  c.n_t = 2001;
  BornLedger L = born_terms(*s, T, psi, c);
  EXPECT_LT(oracle::rel_l2(L.orders[2], from_vector(g, acc)), 1e-6);
}

TEST(BornTerms, SeriesAgainstDirect1D) {
  GridSpec g(1, 256, 32.0);
  auto s = gaussian(0.5, 1.0);
  Field psi = packet(g, 1.5, 1.0, -4.0);
  const double T = 2.0;
  SeriesConfig c;
  c.max_order = 8;
  c.n_t = 801;
  auto cmp = born_series_vs_direct(*s, T, psi, c, {1e-3});
  EXPECT_LE(cmp.ledger.c_T, 1.5);
  EXPECT_LE(cmp.residual, 1e-3);
  // Residual shrinks with the truncation order.
  c.max_order = 2;
  auto low = born_series_vs_direct(*s, T, psi, c, {1e-3});
  EXPECT_GT(low.residual, cmp.residual);
  for (const auto& r : cmp.ledger.rows) EXPECT_LE(r.ratio, 1.2) << "order " << r.order << " p " << r.p;
}

TEST(BornTerms, MajorantAndExponentialBoundDense) {
  GridSpec g = GridSpec::commensurate(1, 16, 0.5);
  auto s = gaussian(0.8, 0.9);
  const double T = 1.5;
  SeriesConfig c;
  c.max_order = 8;
  c.n_t = 601;
  for (int m = 0; m < 4; ++m) {
    Field psi = oracle::random_field(g, 50 + m);
    BornLedger L = born_terms(*s, T, psi, c);
    for (const auto& r : L.rows) EXPECT_LE(r.norm, r.majorant * 1.2 + 1e-12);
    Field series = series_sum(L.orders);
    for (double p : {1.0, 2.0, inf}) EXPECT_LE(lp_norm(series, p), std::exp(L.c_T) * 1.2 * lp_norm(psi, p));
  }
}

TEST(OmegaEps, LowOrders) {
  GridSpec g(1, 32, 8.0);
  auto s = plane_waves({{0.3, {g.dxi(), 0, 0}}, {0.2, {-2 * g.dxi(), 0, 0}}});
  Field psi = oracle::band_limited(g, 5, 3);
  SeriesConfig c;
  c.max_order = 0;
  c.n_t = 8001;
  EXPECT_EQ(omega_eps(*s, psi, c, 0.5).values, psi.values);
  c.max_order = 1;
  Field one = omega_eps(*s, psi, c, 0.5);
  Field ref = psi + I * apply_i_eps_resolvent(*s, 0.5, psi);
  EXPECT_LT(oracle::rel_l2(one, ref), 1e-6);
  // Order 1 is exactly the weighted node sum of K_t on the shared mesh.
  const double T = c.horizon_for(0.5);
  auto w = detail::full_weights(static_cast<std::size_t>(c.n_t), T / (c.n_t - 1), c.rule);
  Field direct(g);
  for (int i = 0; i < c.n_t; ++i) {
    double t = T * i / (c.n_t - 1);
    direct.axpy(w[i] * std::exp(-0.5 * t), apply_kt_spectral(*s, t, psi));
  }
  auto orders = omega_eps_orders(sampler_of(s, g), psi, c, 0.5);
  EXPECT_LT(oracle::rel_l2(orders[1], direct), 1e-10);
  // Both eps placements agree at order 1.
  c.weight_on_largest = true;
  EXPECT_LT(oracle::rel_l2(omega_eps_orders(sampler_of(s, g), psi, c, 0.5)[1], direct), 1e-10);
}

TEST(OmegaEps, SecondOrderSingleWaveClosedForm) {
  GridSpec g(1, 32, 8.0);
  const double b = 2 * g.dxi(), q = 3 * g.dxi(), eps = 0.5, a = 0.4;
  auto s = plane_waves({{a, {b, 0, 0}}});
  SeriesConfig c;
  c.max_order = 2;
  c.n_t = 8001;
  const double T = c.horizon_for(eps);
  auto orders = omega_eps_orders(sampler_of(s, g), wave(g, q), c, eps);
  const double w1 = b * b + 2 * b * q, w2 = 3 * b * b + 2 * b * q;
  cplx inner_outer = (std::exp(cplx{0, w1 * T}) * E(cplx{-eps, w2}, T) - E(cplx{-eps, w1 + w2}, T)) / cplx{0, w1};
  Field expect = (a * a * inner_outer) * wave(g, 2 * b + q);
  EXPECT_LT(oracle::rel_l2(orders[2], expect), 1e-6);
}

TEST(HighFreqScan, TrivialRows) {
  GridSpec g(1, 64, 8.0);
  Ensemble e;
  e.count = 4;
  e.band = 0.5;
  auto members = e.members(g);
  SeriesConfig c;
  c.max_order = 2;
  c.n_t = 201;
  c.horizon = 4.0;
  c.cutoffs = {2.0, 4.0, g.nyquist()};
  auto rows = omega_eps_highfreq_scan(sampler_of(zero_potential(), g), members, c, 0.5);
  for (const auto& r : rows) {
    if (r.skipped) continue;
    if (r.order >= 1) {
      EXPECT_EQ(r.norm, 0.0);
    }
    if (r.order == 0) {
      double m = 0;
      for (const auto& f : members) m = std::max(m, lp_norm(apply(make_cutoff(g, CutoffKind::High, r.M), f), 2.0) / lp_norm(f, 2.0));
      EXPECT_NEAR(r.norm, m, 1e-14);
    }
  }
  EXPECT_TRUE(rows.back().skipped);
}

TEST(Abelian, ZeroSpecAndSingleWaveLimit) {
  GridSpec g(1, 32, 8.0);
  Field psi = wave(g, 3 * g.dxi());
  SeriesConfig c;
  c.max_order = 1;
  c.n_t = 20001;
  c.eps_schedule = {0.4, 0.2, 0.1};
  auto z = abelian_limit(*zero_potential(), psi, c);
  for (double d : z.differences) EXPECT_EQ(d, 0.0);
  EXPECT_EQ(z.extrapolated.values, psi.values);
  const double b = 2 * g.dxi(), q = 3 * g.dxi(), a = 0.1;
  auto s = plane_waves({{a, {b, 0, 0}}});
  c.eps_schedule = {0.04, 0.02, 0.01};
  auto r = abelian_limit(*s, psi, c);
  const double w = b * b + 2 * b * q;
  Field limit = psi + (I * a * (-1.0 / cplx{0, w})) * wave(g, b + q);
  Field first = r.extrapolated - psi;
  EXPECT_LT(oracle::rel_l2(first, limit - psi), 1e-3);
  EXPECT_TRUE(r.converged);
  c.eps_schedule = {0.4, 0.2};
  EXPECT_THROW(abelian_limit(*s, psi, c), ContractViolation);
}

TEST(OmegaT, TrivialCases) {
  GridSpec g(1, 64, 8.0);
  Field psi = packet(g, 1.0, 1.0, 0.0);
  auto z = omega_T(*zero_potential(), 1.0, 4.0, psi, {0.01});
  EXPECT_LT(oracle::rel_l2(z.value, psi), 1e-12);
  auto q = enveloped(gaussian(1.0, 1.0), TimeEnvelope::quench(20.0, true));
  EXPECT_LT(oracle::rel_l2(omega_T(*q, 1.0, 4.0, psi, {0.01}).value, psi), 1e-12);
  // T = 0: Omega_0 = U(0, s) e^{-isH0}
  auto s = gaussian(0.3, 1.0);
  auto r = omega_T(*s, 0.0, 2.0, psi, {0.01});
  EXPECT_LT(oracle::rel_l2(r.value, omega_direct(*s, 2.0, psi, {0.01})), 1e-12);
}

TEST(Intertwine, TrivialCases) {
  GridSpec g(1, 64, 8.0);
  Field psi = packet(g, 1.0, 1.0, 0.0);
  EXPECT_LT(intertwine_check(*zero_potential(), 2.0, psi, 4.0, {0.01}).residual, 1e-12);
  // T = 0: residual is the defect of Omega_+ Omega_+^* = identity on this state.
  auto r = intertwine_check(*gaussian(0.1, 1.0), 0.0, psi, 4.0, {0.01});
  EXPECT_LT(r.residual, 1e-10);
}

TEST(UniformBound, Finite) {
  GridSpec g(1, 64, 16.0);
  Ensemble e;
  e.count = 4;
  e.band = 0.5;
  double v = direct_uniform_bound(*gaussian(0.5, 1.0), e.members(g), {1.0, 2.0, 4.0}, 1.0, 2.0, {0.01});
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_LE(v, 1.0 + 1e-9);
}
