#pragma once

#include <optional>
#include <random>
#include <string>

#include "tdscat/dense.hpp"
#include "tdscat/spectral.hpp"

namespace tdscat {

enum class EnsembleKind { GaussianRandom, PlanePackets, NearDelta, HighCutoff, Mixed };

inline const char* ensemble_name(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::GaussianRandom: return "gaussian_random";
    case EnsembleKind::PlanePackets: return "plane_packets";
    case EnsembleKind::NearDelta: return "near_delta";
    case EnsembleKind::HighCutoff: return "high_cutoff";
    case EnsembleKind::Mixed: return "mixed";
  }
  return "";
}

// Deterministic probe family standing in for the unit ball. Members are
// normalised in the p-norm. band < 1 restricts random fields to
// |k| <= band * N/2 per axis (dealiasing).
struct Ensemble {
  EnsembleKind kind = EnsembleKind::Mixed;
  int count = 64;
  std::uint64_t seed = 1;
  double cutoff = 0.0;  // M for HighCutoff; 0 picks nyquist/4
  double band = 1.0;
  double p = 2.0;

  std::vector<Field> members(const GridSpec& g) const {
    std::vector<Field> out(static_cast<std::size_t>(count));
    parallel_for(out.size(), [&](std::size_t i) { out[i] = member(g, i); });
    return out;
  }

  Field member(const GridSpec& g, std::size_t i) const {
    std::mt19937_64 rng(member_seed(seed, i));
    EnsembleKind k = kind;
    if (k == EnsembleKind::Mixed) {
      const EnsembleKind cycle[4] = {EnsembleKind::GaussianRandom, EnsembleKind::PlanePackets,
                                     EnsembleKind::NearDelta, EnsembleKind::HighCutoff};
      k = cycle[i % 4];
    }
    Field f(g);
    switch (k) {
      case EnsembleKind::GaussianRandom: f = random_field(g, rng, band); break;
      case EnsembleKind::PlanePackets: f = packet(g, rng); break;
      case EnsembleKind::NearDelta: f = near_delta(g, rng); break;
      case EnsembleKind::HighCutoff: {
        double M = cutoff > 0 ? cutoff : 0.25 * g.nyquist();
        f = apply(make_cutoff(g, CutoffKind::High, M), random_field(g, rng, band));
        break;
      }
      case EnsembleKind::Mixed: break;
    }
    double nrm = lp_norm(f, p);
    if (nrm > 0) f *= 1.0 / nrm;
    return f;
  }

  static Field random_field(const GridSpec& g, std::mt19937_64& rng, double band) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Field hat(g, Domain::Frequency);
    const int kmax = static_cast<int>(std::floor(band * (g.n / 2)));
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto idx = g.unravel(i);
      bool inside = true;
      for (int a = 0; a < g.dim; ++a) inside = inside && std::abs(g.wavenumber(idx[a])) <= kmax;
      cplx z{gauss(rng), gauss(rng)};
      if (inside && !(band < 1.0 && is_nyquist(g, idx))) hat[i] = z;
    }
    return inverse_transform(hat);
  }

  static bool is_nyquist(const GridSpec& g, const std::array<int, 3>& idx) {
    for (int a = 0; a < g.dim; ++a)
      if (idx[a] == g.n / 2) return true;
    return false;
  }

  // Gaussian packet with random center, width and lattice momentum.
  Field packet(const GridSpec& g, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double L = g.half_length;
    double w = (0.1 + 0.15 * u(rng)) * L;
    Vec3 c{0, 0, 0}, q{0, 0, 0};
    const int kmax = std::max(1, static_cast<int>(std::floor(0.5 * band * (g.n / 2))));
    for (int a = 0; a < g.dim; ++a) {
      c[a] = (u(rng) - 0.5) * L;
      q[a] = g.dxi() * std::floor((2.0 * u(rng) - 1.0) * kmax);
    }
    return sample(g, [&](const Vec3& x) {
      double r2 = 0.0;
      for (int a = 0; a < g.dim; ++a) r2 += (x[a] - c[a]) * (x[a] - c[a]);
      return std::exp(-r2 / (2.0 * w * w)) * std::polar(1.0, dot3(q, x));
    });
  }

  // Gaussian of width two cells around a random lattice point in the
  // central half of the box.
  static Field near_delta(const GridSpec& g, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(g.n / 4, 3 * g.n / 4 - 1);
    Vec3 c{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) c[a] = g.coordinate(pick(rng));
    const double w = 2.0 * g.spacing();
    return sample(g, [&](const Vec3& x) {
      double r2 = 0.0;
      for (int a = 0; a < g.dim; ++a) r2 += (x[a] - c[a]) * (x[a] - c[a]);
      return cplx{std::exp(-r2 / (2.0 * w * w)), 0.0};
    });
  }
};

struct NormReport {
  std::string label;
  double p = 2.0;
  double measured = 0.0;          // ensemble lower bound
  std::optional<double> exact;    // dense value on tiny grids
  std::optional<double> bound;    // paper bound
  double margin = 0.0;            // bound - max(measured, exact)
  bool pass = true;
  std::string fixture;
  std::uint64_t seed = 0;
};

using LinearMap = std::function<Field(const Field&)>;

// Ensemble estimate of ||A||_{p->p}; exact dense value attached when a
// dense matrix is supplied.
inline NormReport op_norm(const LinearMap& A, double p, const std::vector<Field>& members,
                          const std::optional<Eigen::MatrixXcd>& dense = std::nullopt, const std::string& label = "",
                          std::optional<double> bound = std::nullopt, double abs_tol = 1e-8) {
  if (members.size() >= 2) {
    Field a = A(members[0]), b = A(members[1]);
    Field sum = A(members[0] + members[1]);
    Field diff = sum - (a + b);
    double scale = lp_norm(a, 2.0) + lp_norm(b, 2.0);
    if (lp_norm(diff, 2.0) > 1e-8 * std::max(scale, 1e-300) && scale > 0)
      throw ContractViolation("operator handle failed the linearity probe");
  }
  std::vector<double> ratios(members.size(), 0.0);
  parallel_for(members.size(), [&](std::size_t i) {
    double den = lp_norm(members[i], p);
    if (den > 0) ratios[i] = lp_norm(A(members[i]), p) / den;
  });
  NormReport r;
  r.label = label;
  r.p = p;
  for (double v : ratios) r.measured = std::max(r.measured, v);
  if (dense) r.exact = dense_norm(*dense, p);
  r.bound = bound;
  if (bound) {
    double worst = std::max(r.measured, r.exact.value_or(0.0));
    r.margin = *bound - worst;
    r.pass = r.margin >= -abs_tol;
  }
  return r;
}

struct DecayFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of log-residuals
};

// Least squares of log v = exponent * log t + intercept.
inline DecayFit decay_fit(const std::vector<double>& t, const std::vector<double>& v) {
  if (t.size() != v.size() || t.size() < 4) throw ContractViolation("decay_fit needs at least 4 (t, value) pairs");
  const double n = static_cast<double>(t.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0) || !(v[i] > 0)) throw DomainError("decay_fit needs positive times and values");
    double x = std::log(t[i]), y = std::log(v[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  DecayFit f;
  double den = n * sxx - sx * sx;
  f.exponent = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.exponent * sx) / n;
  double rss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double e = std::log(v[i]) - (f.exponent * std::log(t[i]) + f.intercept);
    rss += e * e;
  }
  f.residual = std::sqrt(rss / n);
  return f;
}

struct AuditRow {
  std::string label;
  double p = 0.0;
  double measured = 0.0;
  double bound = 0.0;
  double margin = 0.0;
  bool pass = false;
  std::string fixture;
  std::uint64_t seed = 0;
};

// measured <= bound for every report carrying a bound.
inline std::vector<AuditRow> bound_audit(const std::vector<NormReport>& reports, double abs_tol = 1e-8) {
  std::vector<AuditRow> rows;
  for (const auto& r : reports) {
    if (!r.bound) continue;
    AuditRow a;
    a.label = r.label;
    a.p = r.p;
    a.measured = std::max(r.measured, r.exact.value_or(0.0));
    a.bound = *r.bound;
    a.margin = a.bound - a.measured;
    a.pass = a.margin >= -abs_tol;
    a.fixture = r.fixture;
    a.seed = r.seed;
    rows.push_back(a);
  }
  return rows;
}

}  // namespace tdscat
