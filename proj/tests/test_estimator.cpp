#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tdscat/estimator.hpp"
#include "tdscat/propagator.hpp"

using namespace tdscat;

TEST(Ensemble, DeterministicAndNormalised) {
  GridSpec g(1, 64, 8.0);
  Ensemble e;
  e.seed = 42;
  e.count = 12;
  for (double p : {1.0, 2.0, inf}) {
    e.p = p;
    auto a = e.members(g), b = e.members(g);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].values, b[i].values);
      EXPECT_NEAR(lp_norm(a[i], p), 1.0, 1e-12);
    }
  }
  Ensemble other = e;
  other.seed = 43;
  EXPECT_NE(e.member(g, 0).values, other.member(g, 0).values);
}

TEST(Ensemble, BandLimitRespected) {
  GridSpec g(1, 64, 8.0);
  Ensemble e;
  e.kind = EnsembleKind::GaussianRandom;
  e.band = 0.5;
  Field hat = forward_transform(e.member(g, 3));
  for (std::size_t k = 0; k < g.size(); ++k)
    if (std::abs(g.wavenumber(static_cast<int>(k))) > 16) {
      EXPECT_LT(std::abs(hat[k]), 1e-12);
    }
}

TEST(OpNorm, IdentityAndMultiplier) {
  GridSpec g(1, 16, 3.0);
  Ensemble e;
  e.count = 16;
  auto members = e.members(g);
  LinearMap id = [](const Field& f) { return f; };
  for (double p : {1.0, 2.0, inf}) {
    Eigen::MatrixXcd A = operator_matrix(g, id);
    NormReport r = op_norm(id, p, members, A, "identity");
    EXPECT_NEAR(r.measured, 1.0, 1e-12);
    EXPECT_NEAR(*r.exact, 1.0, 1e-12);
  }
  Multiplier beta = make_cutoff(g, CutoffKind::High, 2.0);
  LinearMap m = [&](const Field& f) { return apply(beta, f); };
  NormReport r = op_norm(m, 2.0, members, operator_matrix(g, m));
  EXPECT_NEAR(*r.exact, 1.0, 1e-10);
  EXPECT_LE(r.measured, 1.0 + 1e-12);
}

TEST(OpNorm, DenseTwoNormMatchesEigenOracle) {
  GridSpec g(1, 16, 3.0);
  auto s = gaussian(1.0, 0.7);
  LinearMap A = [&](const Field& f) { return free_propagate(multiply(evaluate(*s, g, 0), free_propagate(f, 0.3)), 0.1); };
  Eigen::MatrixXcd M = operator_matrix(g, A);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M.adjoint() * M);
  double oracle_norm = std::sqrt(es.eigenvalues().maxCoeff());
  EXPECT_NEAR(dense_norm(M, 2.0), oracle_norm, 1e-10);
}

TEST(OpNorm, ExactDominatesAndMonotoneInSize) {
  GridSpec g(1, 16, 3.0);
  auto s = sum({gaussian(1.0, 0.7), gaussian(-0.3, 0.3, {1, 0, 0})});
  LinearMap A = [&](const Field& f) { return multiply(evaluate(*s, g, 0), free_propagate(f, 0.4)); };
  Eigen::MatrixXcd M = operator_matrix(g, A);
  Ensemble e;
  e.count = 32;
  for (double p : {1.0, 2.0, inf}) {
    e.p = p;
    auto all = e.members(g);
    std::vector<Field> half(all.begin(), all.begin() + 16);
    NormReport small = op_norm(A, p, half), big = op_norm(A, p, all, M);
    EXPECT_GE(big.measured, small.measured);
    EXPECT_LE(big.measured, *big.exact + 1e-12);
  }
}

TEST(OpNorm, RejectsNonlinear) {
  GridSpec g(1, 16, 3.0);
  Ensemble e;
  e.count = 4;
  LinearMap nl = [](const Field& f) {
    Field out = f;
    for (auto& v : out.values) v *= std::abs(v);
    return out;
  };
  EXPECT_THROW(op_norm(nl, 2.0, e.members(g)), ContractViolation);
}

TEST(DecayFit, Synthetic) {
  std::vector<double> t{1, 2, 4, 8, 16};
  std::vector<double> v;
  for (double x : t) v.push_back(3.0 * std::pow(x, -1.5));
  DecayFit f = decay_fit(t, v);
  EXPECT_NEAR(f.exponent, -1.5, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_LT(f.residual, 1e-12);
  std::vector<double> c(t.size(), 2.0);
  EXPECT_NEAR(decay_fit(t, c).exponent, 0.0, 1e-14);
  std::vector<double> scaled;
  for (double x : v) scaled.push_back(7.0 * x);
  DecayFit fs = decay_fit(t, scaled);
  EXPECT_NEAR(fs.exponent, f.exponent, 1e-12);
  EXPECT_NEAR(fs.intercept - f.intercept, std::log(7.0), 1e-12);
  EXPECT_THROW(decay_fit({1, 2, 3, 4}, {1, 0, 1, 1}), DomainError);
  EXPECT_THROW(decay_fit({1, 2, 3}, {1, 1, 1}), ContractViolation);
}

TEST(DecayFit, FreeKernelProxy1D) {
  GridSpec g(1, 1024, 128.0);
  Ensemble e;
  e.kind = EnsembleKind::NearDelta;
  e.count = 4;
  e.p = 1.0;
  std::vector<double> ts{1, 2, 3, 4, 5, 6, 7, 8};
  auto vals = gap_norm_scan(*zero_potential(), e.members(g), 0.0, ts, {0.1});
  EXPECT_NEAR(decay_fit(ts, vals).exponent, -0.5, 0.05);
}

TEST(BoundAudit, PassAndForcedFailure) {
  NormReport ok;
  ok.label = "ok";
  ok.measured = 0.9;
  ok.bound = 1.0;
  ok.fixture = "fx";
  ok.seed = 7;
  NormReport bad = ok;
  bad.label = "corrupted";
  bad.bound = *ok.bound * 0.0;
  NormReport none;
  auto rows = bound_audit({ok, bad, none});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].pass);
  EXPECT_NEAR(rows[0].margin, 0.1, 1e-15);
  EXPECT_FALSE(rows[1].pass);
  EXPECT_EQ(rows[1].fixture, "fx");
  EXPECT_EQ(rows[1].seed, 7u);
}
