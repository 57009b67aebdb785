#pragma once

#include <optional>
#include <string>

#include "tdscat/propagator.hpp"

namespace tdscat {

enum class KernelKind {
  Singular,  // f_hat = |xi|^{-3/2-delta}
  Bracket,   // f_hat = <xi>^{-3/2-delta}, smooth at the origin (damped kernel)
  Gaussian,  // f = exp(-|x|^2/(2 s^2)), f_hat = s^n exp(-s^2 |xi|^2 / 2)
  Delta,     // f_hat = (2pi)^{-n/2}
  Spec       // f_hat from a continuous potential spec
};

struct HartreeKernel {
  KernelKind kind = KernelKind::Gaussian;
  double delta = 0.5;
  double width = 1.0;
  PotentialPtr spec;

  double power() const { return 1.5 + delta; }

  // f_hat on the lattice; sets zero_mode_regularised for the singular kernel.
  Field fhat(const GridSpec& g, bool* zero_mode_regularised = nullptr) const {
    if ((kind == KernelKind::Singular || kind == KernelKind::Bracket) && !(delta > 0 && delta < 1.5))
      throw ContractViolation("Hartree kernel delta must lie in (0, 3/2)");
    Field out(g, Domain::Frequency);
    if (kind == KernelKind::Spec) {
      if (!spec) throw ContractViolation("Hartree spec kernel is missing");
      for (std::size_t i = 0; i < g.size(); ++i) out[i] = fourier_at(*spec, g.frequency_vector(i), 0.0, g.dim);
      return out;
    }
    auto k2 = detail::squared_frequencies(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double k = std::sqrt((*k2)[i]);
      switch (kind) {
        case KernelKind::Singular: out[i] = k > 0 ? std::pow(k, -power()) : std::pow(g.dxi(), -power()); break;
        case KernelKind::Bracket: out[i] = std::pow(1.0 + k * k, -0.5 * power()); break;
        case KernelKind::Gaussian:
          out[i] = std::pow(width, g.dim) * std::exp(-0.5 * width * width * k * k);
          break;
        case KernelKind::Delta: out[i] = std::pow(2.0 * pi, -0.5 * g.dim); break;
        case KernelKind::Spec: break;
      }
    }
    if (kind == KernelKind::Singular && zero_mode_regularised) *zero_mode_regularised = true;
    return out;
  }

  // ||f||_2 = ||f_hat||_2 on the lattice.
  double l2_norm(const GridSpec& g) const {
    Field fh = fhat(g);
    double acc = 0.0;
    for (const auto& v : fh.values) acc += std::norm(v);
    return std::sqrt(acc * std::pow(g.dxi(), g.dim));
  }
};

// (f * rho)(x) = (2pi)^{n/2} F^{-1}[f_hat . F rho] for real rho.
inline Field convolve(const Field& fhat, const Field& rho) {
  const GridSpec& g = rho.grid;
  const double w = std::pow(2.0 * pi, 0.5 * g.dim);
  Field out = rho;
  detail::apply_symbol_inplace(out.values, g, [&](std::size_t i) { return w * fhat[i]; });
  double top = 0.0, im = 0.0;
  for (const auto& v : out.values) {
    top = std::max(top, std::abs(v));
    im = std::max(im, std::abs(v.imag()));
  }
  if (im > 1e-10 * std::max(top, 1e-300) && top > 0)
    throw NumericalFailure("Hartree potential is not real; kernel must be real and even");
  for (auto& v : out.values) v = v.real();
  return out;
}

inline Field density(const Field& psi) {
  Field rho(psi.grid);
  for (std::size_t i = 0; i < psi.size(); ++i) rho[i] = std::norm(psi[i]);
  return rho;
}

inline Field hartree_potential(const HartreeKernel& f, const Field& psi) { return convolve(f.fhat(psi.grid), density(psi)); }

enum class PowerKind { Cubic, Quartic, Mixed };  // N = |psi|^2, |psi|^3, -|psi|^2 + |psi|^3

struct NonlinearitySpec {
  enum class Kind { Hartree, Power } kind = Kind::Hartree;
  HartreeKernel kernel;
  PowerKind power = PowerKind::Cubic;
  double coupling = 1.0;
  int sign = 1;

  double lambda() const { return coupling * sign; }

  // Real potential N(psi) multiplying psi; fhat is the cached kernel.
  Field potential(const Field& psi, const Field* fhat = nullptr) const {
    if (kind == Kind::Hartree) {
      Field v = fhat ? convolve(*fhat, density(psi)) : hartree_potential(kernel, psi);
      v *= lambda();
      return v;
    }
    Field v(psi.grid);
    for (std::size_t i = 0; i < psi.size(); ++i) {
      double a = std::abs(psi[i]);
      double n = power == PowerKind::Cubic ? a * a : (power == PowerKind::Quartic ? a * a * a : -a * a + a * a * a);
      v[i] = lambda() * n;
    }
    return v;
  }

  // Potential energy int G(psi) with dG/d|psi|^2 = N.
  double potential_energy(const Field& psi, const Field* fhat = nullptr) const {
    const double w = psi.grid.cell_volume();
    double acc = 0.0;
    if (kind == Kind::Hartree) {
      Field v = potential(psi, fhat);
      for (std::size_t i = 0; i < psi.size(); ++i) acc += 0.5 * v[i].real() * std::norm(psi[i]);
      return acc * w;
    }
    for (std::size_t i = 0; i < psi.size(); ++i) {
      double a = std::abs(psi[i]);
      double a4 = a * a * a * a, a5 = a4 * a;
      double gdens = power == PowerKind::Cubic ? 0.5 * a4 : (power == PowerKind::Quartic ? 0.4 * a5 : -0.5 * a4 + 0.4 * a5);
      acc += lambda() * gdens;
    }
    return acc * w;
  }
};

// Conserved energy for H0 = -Laplacian: ||grad psi||^2 + int G(psi).
inline double energy(const NonlinearitySpec& nl, const Field& psi) {
  double g = gradient_norm(psi);
  return g * g + nl.potential_energy(psi);
}

// The paper's form 1/2 ||grad psi||^2 + 1/2 int |psi|^4 (cubic only).
inline double paper_energy(const Field& psi) {
  double g = gradient_norm(psi);
  double acc = 0.0;
  for (const auto& v : psi.values) acc += 0.5 * std::norm(v) * std::norm(v);
  return 0.5 * g * g + acc * psi.grid.cell_volume();
}

struct NlsTrajectory {
  Trajectory traj;
  std::vector<double> h1;    // ||grad psi||_2 at recorded times
  double h1_max = 0.0;
  bool zero_mode_regularised = false;
};

// Strang splitting; the nonlinear potential is frozen at the state after
// the first half free step (exact for power nonlinearities).
inline NlsTrajectory nls_evolve(const NonlinearitySpec& nl, const PotentialSpec* linear, const Field& psi0, double t0,
                                double t1, const StepSpec& step, const std::vector<double>& record = {},
                                double h1_cap = 1e6) {
  NlsTrajectory out;
  const GridSpec g = psi0.grid;
  std::optional<Field> fhat;
  if (nl.kind == NonlinearitySpec::Kind::Hartree) fhat = nl.kernel.fhat(g, &out.zero_mode_regularised);
  const Field* fh = fhat ? &*fhat : nullptr;
  const double mass0 = lp_norm(psi0, 2.0);
  Field psi = psi0;
  std::set<double> wanted(record.begin(), record.end());
  auto keep = [&](double t) {
    double h1 = gradient_norm(psi);
    if (h1 > h1_cap) throw NumericalFailure("H1 proxy exceeded the configured cap (possible blow-up)");
    out.traj.times.push_back(t);
    out.traj.states.push_back(psi);
    out.h1.push_back(h1);
    out.h1_max = std::max(out.h1_max, h1);
    if (mass0 > 0) out.traj.mass_drift = std::max(out.traj.mass_drift, std::abs(lp_norm(psi, 2.0) - mass0) / mass0);
  };
  if (record.empty() || wanted.count(t0)) keep(t0);
  auto stops = detail::stop_times(t0, t1, linear ? breakpoints(*linear) : std::vector<double>{}, record);
  std::size_t count = 0;
  for (std::size_t s = 0; s + 1 < stops.size(); ++s) {
    const double a = stops[s], b = stops[s + 1];
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / step.dt - 1e-9)));
    const double h = (b - a) / n;
    for (int k = 0; k < n; ++k, ++count) {
      psi = free_propagate(psi, 0.5 * h);
      Field v = nl.potential(psi, fh);
      if (linear) v += evaluate(*linear, g, a + (k + 0.5) * h);
      for (std::size_t i = 0; i < psi.size(); ++i) psi[i] *= std::exp(cplx{0, -h} * v[i]);
      psi = free_propagate(psi, 0.5 * h);
      if (count % 64 == 0) {
        psi.check_finite();
        if (gradient_norm(psi) > h1_cap) throw NumericalFailure("H1 proxy exceeded the configured cap (possible blow-up)");
      }
    }
    if (record.empty() ? s + 2 == stops.size() : wanted.count(b) > 0) keep(b);
  }
  return out;
}

struct StrichartzPair {
  double q = 8.0 / 3.0;
  double r = 4.0;
};

// 2/q + n/r = n/2 with 2 <= q <= inf and 2 <= r < 2n/(n-2).
inline bool admissible(const StrichartzPair& pr, int dim = 3) {
  double lhs = (std::isinf(pr.q) ? 0.0 : 2.0 / pr.q) + (std::isinf(pr.r) ? 0.0 : dim / pr.r);
  if (std::abs(lhs - 0.5 * dim) > 1e-12) return false;
  if (pr.q < 2.0 || pr.r < 2.0) return false;
  if (dim >= 3 && !(pr.r < 2.0 * dim / (dim - 2.0))) return false;
  return true;
}

// (int ||psi(t)||_r^q dt)^{1/q} by the trapezoid rule on the trajectory
// mesh; the sup for q = inf.
inline double strichartz_norm(const std::vector<double>& times, const std::vector<Field>& states, const StrichartzPair& pr) {
  if (times.size() < 2) throw ContractViolation("Strichartz norm needs >= 2 samples");
  std::vector<double> v(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) v[i] = lp_norm(states[i], pr.r);
  if (std::isinf(pr.q)) return *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    acc += 0.5 * std::abs(times[i + 1] - times[i]) * (std::pow(v[i], pr.q) + std::pow(v[i + 1], pr.q));
  return std::pow(acc, 1.0 / pr.q);
}

inline double strichartz_norm(const Trajectory& tr, const StrichartzPair& pr) {
  return strichartz_norm(tr.times, tr.states, pr);
}

// int_0^T sum_k |coef of f * |psi(t)|^2| dt / (T^{1/4} ||f||_2 ||psi||^2_{L^{8/3} L^4}).
inline std::optional<double> advanced_cl_constant(const HartreeKernel& f, const Trajectory& tr) {
  const GridSpec& g = tr.states.front().grid;
  Field fh = f.fhat(g);
  std::vector<double> m(tr.times.size());
  for (std::size_t i = 0; i < tr.times.size(); ++i) m[i] = coefficient_mass(convolve(fh, density(tr.states[i])));
  double num = 0.0;
  for (std::size_t i = 0; i + 1 < m.size(); ++i) num += 0.5 * (tr.times[i + 1] - tr.times[i]) * (m[i] + m[i + 1]);
  const double T = tr.times.back() - tr.times.front();
  double s = strichartz_norm(tr, {8.0 / 3.0, 4.0});
  double den = std::pow(T, 0.25) * f.l2_norm(g) * s * s;
  if (!(den > 0)) return std::nullopt;
  return num / den;
}

// L^{4/3}_t norm of t -> ||N(psi(t))||_{FL^1}.
inline double acc1_surrogate(const NonlinearitySpec& nl, const Trajectory& tr) {
  std::vector<double> m(tr.times.size());
  for (std::size_t i = 0; i < tr.times.size(); ++i) m[i] = coefficient_mass(nl.potential(tr.states[i]));
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < m.size(); ++i)
    acc += 0.5 * (tr.times[i + 1] - tr.times[i]) * (std::pow(m[i], 4.0 / 3.0) + std::pow(m[i + 1], 4.0 / 3.0));
  return std::pow(acc, 0.75);
}

struct PicardResult {
  std::vector<double> times;
  std::vector<Field> final_iterate;
  std::vector<double> diff_strichartz;  // ||psi_{n+1} - psi_n|| in L^{8/3}_t L^4_x
  std::vector<double> diff_c_l2;        // same in C_t L^2_x
  std::vector<double> factors;          // consecutive ratios of diff_strichartz
  double max_factor = 0.0;
  int iterations = 0;
};

// psi_1 = e^{-itH0} psi_0; psi_{n+1} solves the linear equation with
// potential lambda f * |psi_n|^2, discretised with the same Strang scheme
// as nls_evolve so that the fixed point is the split-step solution.
inline PicardResult picard_iterate(const NonlinearitySpec& nl, const Field& psi0, double T, int n_max, int steps,
                                   double tol = 1e-13) {
  if (nl.kind != NonlinearitySpec::Kind::Hartree) throw ContractViolation("Picard iteration is implemented for Hartree nonlinearities");
  const GridSpec g = psi0.grid;
  const Field fh = nl.kernel.fhat(g);
  const double h = T / steps;
  PicardResult out;
  out.times.resize(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) out.times[static_cast<std::size_t>(k)] = h * k;
  // Endpoint states and half-step (post free half step) states per iterate.
  std::vector<Field> ends(steps + 1), mids(steps);
  for (int k = 0; k <= steps; ++k) ends[k] = free_propagate(psi0, h * k);
  for (int k = 0; k < steps; ++k) mids[k] = free_propagate(psi0, h * k + 0.5 * h);
  double prev = -1.0;
  for (int it = 1; it <= n_max; ++it) {
    std::vector<Field> pot(steps);
    parallel_for(static_cast<std::size_t>(steps), [&](std::size_t k) { pot[k] = nl.potential(mids[k], &fh); });
    std::vector<Field> new_ends(steps + 1), new_mids(steps);
    Field psi = psi0;
    new_ends[0] = psi;
    for (int k = 0; k < steps; ++k) {
      psi = free_propagate(psi, 0.5 * h);
      new_mids[k] = psi;
      for (std::size_t i = 0; i < psi.size(); ++i) psi[i] *= std::exp(cplx{0, -h} * pot[k][i]);
      psi = free_propagate(psi, 0.5 * h);
      new_ends[k + 1] = psi;
    }
    std::vector<Field> diff(steps + 1);
    double cl2 = 0.0;
    for (int k = 0; k <= steps; ++k) {
      diff[k] = new_ends[k] - ends[k];
      cl2 = std::max(cl2, lp_norm(diff[k], 2.0));
    }
    double ds = strichartz_norm(out.times, diff, {8.0 / 3.0, 4.0});
    out.diff_strichartz.push_back(ds);
    out.diff_c_l2.push_back(cl2);
    if (prev > 0) {
      out.factors.push_back(ds / prev);
      out.max_factor = std::max(out.max_factor, ds / prev);
    }
    prev = ds;
    ends = std::move(new_ends);
    mids = std::move(new_mids);
    out.iterations = it;
    if (ds <= tol * std::max(1.0, lp_norm(psi0, 2.0))) break;
  }
  out.final_iterate = std::move(ends);
  return out;
}

struct PicardThreshold {
  double cl_constant = 0.0;   // advanced CL constant C, measured on the free flow
  double strichartz_c = 0.0;  // ||e^{-itH0} psi0||_{L^{8/3}L^4} / ||psi0||_2 on [0, T_ref]
  double f_l2 = 0.0;
  double T = 0.0;             // largest T with 4 C T^{1/4} ||f|| C_str^2 ||psi0|| <= 1/2
};

inline PicardThreshold picard_threshold(const NonlinearitySpec& nl, const Field& psi0, double T_ref = 1.0, int samples = 64) {
  std::vector<double> ts;
  for (int k = 0; k <= samples; ++k) ts.push_back(T_ref * k / samples);
  Trajectory free;
  for (double t : ts) {
    free.times.push_back(t);
    free.states.push_back(free_propagate(psi0, t));
  }
  PicardThreshold th;
  th.cl_constant = advanced_cl_constant(nl.kernel, free).value_or(0.0);
  th.strichartz_c = strichartz_norm(free, {8.0 / 3.0, 4.0}) / lp_norm(psi0, 2.0);
  th.f_l2 = nl.kernel.l2_norm(psi0.grid) * std::abs(nl.lambda());
  double k = 4.0 * th.cl_constant * th.f_l2 * th.strichartz_c * th.strichartz_c * lp_norm(psi0, 2.0);
  th.T = k > 0 ? std::pow(0.5 / k, 4.0) : inf;
  return th;
}

struct DeficitRow {
  double t = 0.0;
  std::vector<double> norms;   // ||e^{itH0} psi(t) - psi0||_p per requested p
  std::vector<double> cauchy;  // ||D(t_i) - D(t_{i-1})||_p (empty for the first row)
};

inline std::vector<DeficitRow> free_channel_deficit(const Trajectory& tr, const std::vector<double>& ps) {
  std::vector<DeficitRow> rows;
  const Field& psi0 = tr.states.front();
  std::optional<Field> prev;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    double t = tr.times[i] - tr.times.front();
    Field D = free_propagate(tr.states[i], -t) - psi0;
    if (i == 0) D = Field(psi0.grid);
    DeficitRow r;
    r.t = tr.times[i];
    for (double p : ps) r.norms.push_back(lp_norm(D, p));
    if (prev)
      for (double p : ps) r.cauchy.push_back(lp_norm(D - *prev, p));
    prev = D;
    rows.push_back(r);
  }
  return rows;
}

struct LinfMonitor {
  double sup = 0.0;
  double free_sup = 0.0;
  double ratio = 0.0;
};

// sup over recorded |t| >= c of ||psi(t)||_inf against the free flow.
inline LinfMonitor linf_monitor(const Trajectory& tr, double c, std::optional<double> t_end = std::nullopt) {
  LinfMonitor m;
  const Field& psi0 = tr.states.front();
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    double t = tr.times[i];
    if (std::abs(t) < c || (t_end && std::abs(t) > *t_end)) continue;
    m.sup = std::max(m.sup, lp_norm(tr.states[i], inf));
    m.free_sup = std::max(m.free_sup, lp_norm(free_propagate(psi0, t - tr.times.front()), inf));
  }
  m.ratio = m.free_sup > 0 ? m.sup / m.free_sup : 0.0;
  return m;
}

}  // namespace tdscat
