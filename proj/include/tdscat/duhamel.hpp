#pragma once

#include <optional>
#include <string>

#include "tdscat/estimator.hpp"
#include "tdscat/propagator.hpp"

namespace tdscat {

struct SeriesConfig {
  int max_order = 8;
  int n_t = 401;                       // uniform mesh nodes on [0, T]
  std::vector<double> eps_schedule{0.4, 0.2, 0.1};
  std::vector<double> cutoffs;         // M values for the high-frequency scan
  QuadRule rule = QuadRule::Simpson;
  bool weight_on_largest = false;      // alternative eps placement
  double horizon = 0.0;                // T*; 0 uses the eps tail rule
  double tail_tolerance = 1e-8;
  bool subtract_zero_mode = false;
  double slack = 0.2;

  void validate() const {
    if (max_order < 0) throw ContractViolation("series.max_order must be >= 0");
    if (n_t < 3 || n_t < 4 * max_order) throw ContractViolation("series.n_t must be >= 4 * max_order and >= 3");
    for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
      if (!(eps_schedule[i] > 0)) throw ContractViolation("series.eps schedule must be positive");
      if (i > 0 && !(eps_schedule[i] < eps_schedule[i - 1]))
        throw ContractViolation("series.eps schedule must be strictly descending");
    }
  }

  double horizon_for(double eps) const {
    if (horizon > 0) return horizon;
    return std::log(1.0 / tail_tolerance) / eps;
  }
};

namespace detail {

// In place: f[i] <- int_{t_i}^{t_{n-1}} f, fourth order (Simpson chains from
// the right plus a three-point single-interval rule).
inline void cumulative_right(std::vector<Field>& f, double h, QuadRule rule) {
  const std::size_t n = f.size();
  if (n < 3) throw ContractViolation("cumulative quadrature needs >= 3 nodes");
  const GridSpec g = f[0].grid;
  Field f1 = std::move(f[n - 1]), f2(g);
  f[n - 1] = Field(g);
  for (std::size_t i = n - 1; i-- > 0;) {
    Field fi = std::move(f[i]);
    Field c(g);
    if (rule == QuadRule::Trapezoid) {
      c = f[i + 1];
      c.axpy(0.5 * h, fi);
      c.axpy(0.5 * h, f1);
    } else if (((n - 1 - i) & 1) == 0) {
      c = f[i + 2];
      c.axpy(h / 3.0, fi);
      c.axpy(4.0 * h / 3.0, f1);
      c.axpy(h / 3.0, f2);
    } else if (i + 2 <= n - 1) {
      c = f[i + 1];
      c.axpy(5.0 * h / 12.0, fi);
      c.axpy(8.0 * h / 12.0, f1);
      c.axpy(-h / 12.0, f2);
    } else {
      c = f[i + 1];
      c.axpy(-h / 12.0, f[i - 1]);
      c.axpy(8.0 * h / 12.0, fi);
      c.axpy(5.0 * h / 12.0, f1);
    }
    f2 = std::move(f1);
    f1 = std::move(fi);
    f[i] = std::move(c);
  }
}

// Full-interval weights consistent with cumulative_right at node 0.
inline std::vector<double> full_weights(std::size_t n, double h, QuadRule rule) {
  std::vector<double> w(n, 0.0);
  if (rule == QuadRule::Trapezoid) {
    for (std::size_t i = 0; i < n; ++i) w[i] = (i == 0 || i + 1 == n) ? 0.5 * h : h;
    return w;
  }
  std::size_t start = 0;
  if (((n - 1) & 1) == 1) {
    w[0] += 5.0 * h / 12.0;
    w[1] += 8.0 * h / 12.0;
    w[2] += -h / 12.0;
    start = 1;
  }
  for (std::size_t i = start; i + 2 < n; i += 2) {
    w[i] += h / 3.0;
    w[i + 1] += 4.0 * h / 3.0;
    w[i + 2] += h / 3.0;
  }
  return w;
}

}  // namespace detail

using Weight = std::function<double(double)>;

// Nested simplex integrals of K_t by the Volterra recursion
// A_0 = psi, A_m(s) = int_s^T K_tau A_{m-1}(tau) dtau.
// orders[k] = int_0^T last(tau) K_tau A_{k-1}(tau) dtau; `first` multiplies
// the integrand of the first level (largest time variable).
inline std::vector<Field> simplex_terms(const Sampler& V, double T, const Field& psi, int K, int n_t, QuadRule rule,
                                        const Weight& last = nullptr, const Weight& first = nullptr) {
  std::vector<Field> orders;
  orders.push_back(psi);
  if (K == 0) return orders;
  const std::size_t n = static_cast<std::size_t>(n_t);
  const double h = T / static_cast<double>(n - 1);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = h * static_cast<double>(i);
  std::vector<Field> Vs(n);
  parallel_for(n, [&](std::size_t i) { Vs[i] = V(t[i]); });
  const auto w_full = detail::full_weights(n, h, rule);
  std::vector<Field> A(n);
  for (int m = 1; m <= K; ++m) {
    parallel_for(n, [&](std::size_t i) {
      Field b = apply_kt_sampled(Vs[i], t[i], m == 1 ? psi : A[i]);
      if (m == 1 && first) b *= first(t[i]);
      A[i] = std::move(b);
    });
    Field total(psi.grid);
    for (std::size_t i = 0; i < n; ++i) total.axpy(w_full[i] * (last ? last(t[i]) : 1.0), A[i]);
    orders.push_back(std::move(total));
    if (m < K) detail::cumulative_right(A, h, rule);
  }
  return orders;
}

struct LedgerRow {
  int order = 0;
  double p = 2.0;
  double norm = 0.0;
  double majorant = 0.0;  // c^k / k! ||psi||_p
  double ratio = 0.0;
};

struct BornLedger {
  std::vector<Field> orders;
  std::vector<LedgerRow> rows;
  double c_T = 0.0;
  double tail_bound = 0.0;  // c^{K+1}/(K+1)! e^c
  bool diverged = false;
};

inline BornLedger make_ledger(std::vector<Field> orders, const Field& psi, double c, double slack,
                              const std::vector<double>& ps) {
  BornLedger L;
  L.orders = std::move(orders);
  L.c_T = c;
  const int K = static_cast<int>(L.orders.size()) - 1;
  double fact = 1.0;
  for (int k = 1; k <= K + 1; ++k) fact *= k;
  L.tail_bound = std::pow(c, K + 1) / fact * std::exp(c);
  for (double p : ps) {
    double base = lp_norm(psi, p);
    double kf = 1.0;
    for (int k = 0; k <= K; ++k) {
      if (k > 0) kf *= k;
      LedgerRow r;
      r.order = k;
      r.p = p;
      r.norm = lp_norm(L.orders[static_cast<std::size_t>(k)], p);
      r.majorant = std::pow(c, k) / kf * base;
      r.ratio = r.majorant > 0 ? r.norm / r.majorant : (r.norm > 0 ? inf : 0.0);
      if (p == 2.0 && r.norm > (1.0 + slack) * r.majorant + 1e-12 * base) L.diverged = true;
      L.rows.push_back(r);
    }
  }
  return L;
}

inline BornLedger born_terms(const PotentialSpec& spec, double T, const Field& psi, const SeriesConfig& cfg,
                             const std::vector<double>& ps = {1.0, 2.0, inf}) {
  cfg.validate();
  auto V = sampler_of(std::make_shared<const PotentialSpec>(spec), psi.grid);
  auto orders = simplex_terms(V, T, psi, cfg.max_order, cfg.n_t, cfg.rule);
  return make_ledger(std::move(orders), psi, accumulated_c(spec, psi.grid, T), cfg.slack, ps);
}

inline Field series_sum(const std::vector<Field>& orders) {
  Field out(orders.front().grid);
  cplx ik{1, 0};
  for (const auto& o : orders) {
    out.axpy(ik, o);
    ik *= I;
  }
  return out;
}

// Omega(0, T) psi = U(0, T) e^{-iTH0} psi
inline Field omega_direct(const PotentialSpec& spec, double T, const Field& psi, const StepSpec& step) {
  return evolve_to(spec, free_propagate(psi, T), T, 0.0, step);
}

struct SeriesComparison {
  Field series;
  Field direct;
  double residual = 0.0;  // relative L2
  double tail_bound = 0.0;
  BornLedger ledger;
};

inline SeriesComparison born_series_vs_direct(const PotentialSpec& spec, double T, const Field& psi,
                                              const SeriesConfig& cfg, const StepSpec& step) {
  SeriesComparison out;
  out.ledger = born_terms(spec, T, psi, cfg);
  if (out.ledger.diverged)
    throw NumericalFailure("series divergence: order norms exceed the factorial majorant; refine the mesh");
  out.series = series_sum(out.ledger.orders);
  out.direct = omega_direct(spec, T, psi, step);
  out.residual = lp_norm(out.series - out.direct, 2.0) / lp_norm(psi, 2.0);
  out.tail_bound = out.ledger.tail_bound;
  return out;
}

// Orders I_eps^(k) psi, k = 0..K, with e^{-eps t} on the innermost
// (smallest) time variable, or on the largest one if requested.
inline std::vector<Field> omega_eps_orders(const Sampler& V, const Field& psi, const SeriesConfig& cfg, double eps) {
  cfg.validate();
  const double T = cfg.horizon_for(eps);
  Weight w = [eps](double t) { return std::exp(-eps * t); };
  if (cfg.weight_on_largest) return simplex_terms(V, T, psi, cfg.max_order, cfg.n_t, cfg.rule, nullptr, w);
  return simplex_terms(V, T, psi, cfg.max_order, cfg.n_t, cfg.rule, w, nullptr);
}

inline Field omega_eps(const PotentialSpec& spec, const Field& psi, const SeriesConfig& cfg, double eps) {
  auto V = sampler_of(std::make_shared<const PotentialSpec>(spec), psi.grid, cfg.subtract_zero_mode);
  return series_sum(omega_eps_orders(V, psi, cfg, eps));
}

struct ScanRow {
  int order = 0;
  double M = 0.0;
  double norm = 0.0;  // ensemble max of ||I_eps^(k) beta psi||_2 / ||psi||_2
  bool skipped = false;
  std::string note;
};

// Ensemble-estimated ||I_eps^(k) beta(|P|>M)||_{2->2} for each M and k.
inline std::vector<ScanRow> omega_eps_highfreq_scan(const Sampler& V, const std::vector<Field>& members,
                                                    const SeriesConfig& cfg, double eps) {
  std::vector<ScanRow> rows;
  for (double M : cfg.cutoffs) {
    Multiplier beta = make_cutoff(members.front().grid, CutoffKind::High, M);
    if (beta.warning) {
      ScanRow r;
      r.M = M;
      r.skipped = true;
      r.note = "M at or above Nyquist; row skipped";
      rows.push_back(r);
      continue;
    }
    std::vector<std::vector<double>> per(members.size());
    parallel_for(members.size(), [&](std::size_t m) {
      Field bpsi = apply(beta, members[m]);
      auto orders = omega_eps_orders(V, bpsi, cfg, eps);
      double base = lp_norm(members[m], 2.0);
      for (const auto& o : orders) per[m].push_back(lp_norm(o, 2.0) / base);
    });
    for (int k = 0; k <= cfg.max_order; ++k) {
      ScanRow r;
      r.order = k;
      r.M = M;
      for (const auto& p : per) r.norm = std::max(r.norm, p[static_cast<std::size_t>(k)]);
      rows.push_back(r);
    }
  }
  return rows;
}

struct AbelianResult {
  Field extrapolated;
  std::vector<Field> values;        // Omega_eps psi along the schedule
  std::vector<double> differences;  // ||Omega_{eps_i} - Omega_{eps_{i+1}}||_2 / ||psi||_2
  bool converged = true;
  std::string diagnostic;
};

inline AbelianResult abelian_limit_sampled(const Sampler& V, const Field& psi, const SeriesConfig& cfg) {
  cfg.validate();
  if (cfg.eps_schedule.size() < 3) throw ContractViolation("abelian limit needs >= 3 eps values");
  AbelianResult r;
  r.values.resize(cfg.eps_schedule.size());
  for (std::size_t i = 0; i < cfg.eps_schedule.size(); ++i)
    r.values[i] = series_sum(omega_eps_orders(V, psi, cfg, cfg.eps_schedule[i]));
  const double base = lp_norm(psi, 2.0);
  for (std::size_t i = 0; i + 1 < r.values.size(); ++i)
    r.differences.push_back(lp_norm(r.values[i] - r.values[i + 1], 2.0) / base);
  for (std::size_t i = 0; i + 1 < r.differences.size(); ++i)
    if (!(r.differences[i + 1] < r.differences[i])) {
      r.converged = false;
      r.diagnostic = "Cauchy differences along the eps schedule are not decreasing";
    }
  const std::size_t n = r.values.size();
  const double ea = cfg.eps_schedule[n - 2], eb = cfg.eps_schedule[n - 1];
  r.extrapolated = (ea / (ea - eb)) * r.values[n - 1];
  r.extrapolated.axpy(-eb / (ea - eb), r.values[n - 2]);
  return r;
}

inline AbelianResult abelian_limit(const PotentialSpec& spec, const Field& psi, const SeriesConfig& cfg) {
  return abelian_limit_sampled(sampler_of(std::make_shared<const PotentialSpec>(spec), psi.grid, cfg.subtract_zero_mode),
                               psi, cfg);
}

struct OmegaTResult {
  Field value;
  double cauchy = 0.0;  // ||value(s_max) - value(s_max/2)|| / ||psi||
};

// Omega_T psi ~ U(T, T + s) e^{-isH0} psi at s = s_max (and s_max/2).
inline OmegaTResult omega_T(const PotentialSpec& spec, double T, double s_max, const Field& psi, const StepSpec& step) {
  auto at = [&](double s) { return evolve_to(spec, free_propagate(psi, s), T + s, T, step); };
  OmegaTResult r;
  r.value = at(s_max);
  Field half = at(0.5 * s_max);
  r.cauchy = lp_norm(r.value - half, 2.0) / lp_norm(psi, 2.0);
  return r;
}

struct IntertwineResult {
  double residual = 0.0;       // at s_max, relative
  double residual_half = 0.0;  // at s_max / 2
  double cauchy = 0.0;         // between the two right-hand sides
};

// U(T,0) psi against Omega_T e^{-iTH0} Omega_+^* psi with
// Omega_+^* psi ~ e^{isH0} U(s,0) psi.
inline IntertwineResult intertwine_check(const PotentialSpec& spec, double T, const Field& psi, double s_max,
                                         const StepSpec& step) {
  const double base = lp_norm(psi, 2.0);
  Field lhs = evolve_to(spec, psi, 0.0, T, step);
  Trajectory fwd = evolve(spec, psi, 0.0, s_max, step, {0.5 * s_max, s_max});
  auto rhs = [&](double s, const Field& Us) {
    Field star = free_propagate(Us, -s);
    Field mid = free_propagate(star, T);
    return evolve_to(spec, free_propagate(mid, s), T + s, T, step);
  };
  Field r_half = rhs(0.5 * s_max, fwd.states[0]);
  Field r_full = rhs(s_max, fwd.states[1]);
  IntertwineResult out;
  out.residual = lp_norm(lhs - r_full, 2.0) / base;
  out.residual_half = lp_norm(lhs - r_half, 2.0) / base;
  out.cauchy = lp_norm(r_full - r_half, 2.0) / base;
  return out;
}

// max over T of ||Omega(0,T) beta psi||_p / ||psi||_p across members.
inline double direct_uniform_bound(const PotentialSpec& spec, const std::vector<Field>& members,
                                   const std::vector<double>& Ts, std::optional<double> M, double p,
                                   const StepSpec& step) {
  std::vector<double> best(members.size(), 0.0);
  parallel_for(members.size(), [&](std::size_t m) {
    Field psi = members[m];
    Field bpsi = M ? apply(make_cutoff(psi.grid, CutoffKind::High, *M), psi) : psi;
    for (double T : Ts)
      best[m] = std::max(best[m], lp_norm(omega_direct(spec, T, bpsi, step), p) / lp_norm(psi, p));
  });
  return *std::max_element(best.begin(), best.end());
}

}  // namespace tdscat
