#pragma once

#include <boost/numeric/odeint.hpp>

#include <set>
#include <sstream>

#include "tdscat/dense.hpp"
#include "tdscat/tt_operator.hpp"

namespace tdscat {

enum class Scheme { Strang, Lie };

struct StepSpec {
  double dt = 1e-3;
  Scheme scheme = Scheme::Strang;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Field> states;
  double mass_drift = 0.0;   // max relative change of ||psi||_2 over recorded states
  bool non_unitary = false;  // complex potential samples were seen

  const Field& final_state() const { return states.back(); }
};

namespace detail {

inline bool has_imaginary_part(const Field& V) {
  double top = 0.0, im = 0.0;
  for (const auto& v : V.values) {
    top = std::max(top, std::abs(v));
    im = std::max(im, std::abs(v.imag()));
  }
  return im > 1e-12 * std::max(top, 1.0);
}

// Ordered stop times: t0, every cut and record time strictly between, t1.
inline std::vector<double> stop_times(double t0, double t1, const std::vector<double>& cuts, const std::vector<double>& record) {
  std::set<double> inner;
  double lo = std::min(t0, t1), hi = std::max(t0, t1);
  for (double c : cuts)
    if (c > lo && c < hi) inner.insert(c);
  for (double r : record)
    if (r > lo && r < hi) inner.insert(r);
  std::vector<double> out{t0};
  if (t1 >= t0) out.insert(out.end(), inner.begin(), inner.end());
  else out.insert(out.end(), inner.rbegin(), inner.rend());
  if (t1 != t0) out.push_back(t1);
  return out;
}

}  // namespace detail

// Strang (or Lie) splitting with midpoint potential samples. V(t) returns
// the potential on the grid; cuts are times where V jumps.
template <class PotentialAt>
Trajectory evolve_with(PotentialAt&& V, const std::vector<double>& cuts, const Field& psi0, double t0, double t1,
                       const StepSpec& step, const std::vector<double>& record = {}) {
  if (!(step.dt > 0)) throw ContractViolation("step dt must be positive");
  Trajectory traj;
  Field psi = psi0;
  const double mass0 = lp_norm(psi0, 2.0);
  std::set<double> wanted(record.begin(), record.end());
  auto keep = [&](double t) {
    if (!traj.times.empty() && traj.times.back() == t) return;
    traj.times.push_back(t);
    traj.states.push_back(psi);
    double m = lp_norm(psi, 2.0);
    if (mass0 > 0) traj.mass_drift = std::max(traj.mass_drift, std::abs(m - mass0) / mass0);
  };
  if (record.empty() || wanted.count(t0)) keep(t0);
  auto stops = detail::stop_times(t0, t1, cuts, record);
  std::size_t global_step = 0;
  for (std::size_t s = 0; s + 1 < stops.size(); ++s) {
    const double a = stops[s], b = stops[s + 1];
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / step.dt - 1e-9)));
    const double h = (b - a) / n;
    if (step.scheme == Scheme::Strang) psi = free_propagate(psi, 0.5 * h);
    for (int k = 0; k < n; ++k, ++global_step) {
      if (step.scheme == Scheme::Lie) psi = free_propagate(psi, h);
      Field v = V(a + (k + 0.5) * h);
      if (!traj.non_unitary && detail::has_imaginary_part(v)) traj.non_unitary = true;
      double norm2 = 0.0;
      for (std::size_t i = 0; i < psi.size(); ++i) {
        psi[i] *= std::exp(cplx{0, -h} * v[i]);
        norm2 += std::norm(psi[i]);
      }
      if (!std::isfinite(norm2)) {
        std::ostringstream msg;
        msg << "non-finite state at step " << global_step << " (t = " << a + (k + 1) * h << ")";
        throw NumericalFailure(msg.str());
      }
      if (step.scheme == Scheme::Strang) psi = free_propagate(psi, k + 1 < n ? h : 0.5 * h);
    }
    if (record.empty() ? s + 2 == stops.size() : wanted.count(b) > 0) keep(b);
  }
  return traj;
}

inline Trajectory evolve(const PotentialSpec& s, const Field& psi0, double t0, double t1, const StepSpec& step = {},
                         const std::vector<double>& record = {}) {
  const GridSpec g = psi0.grid;
  return evolve_with([&](double t) { return evaluate(s, g, t); }, breakpoints(s), psi0, t0, t1, step, record);
}

inline Field evolve_to(const PotentialSpec& s, const Field& psi0, double t0, double t1, const StepSpec& step = {}) {
  return evolve(s, psi0, t0, t1, step).final_state();
}

// Dense oracle -----------------------------------------------------------

// -Laplacian as a dense matrix F^dagger diag(|xi|^2) F with F the directly
// summed DFT matrix.
inline Eigen::MatrixXcd kinetic_matrix(const GridSpec& g) {
  Eigen::MatrixXcd F = dft_matrix(g);
  Eigen::VectorXd k2(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec3 xi = g.frequency_vector(i);
    k2(static_cast<Eigen::Index>(i)) = dot3(xi, xi);
  }
  return F.adjoint() * k2.asDiagonal() * F;
}

// Adaptive Dormand-Prince integration of i psi' = (H0 + V(t)) psi with the
// dense Hamiltonian, split at the potential's breakpoints.
inline Field oracle_evolve(const PotentialSpec& s, const Field& psi0, double t0, double t1, double tol = 1e-10) {
  namespace ode = boost::numeric::odeint;
  const GridSpec g = psi0.grid;
  require_dense(g);
  const Eigen::MatrixXcd K = kinetic_matrix(g);
  using State = std::vector<cplx>;
  State x = psi0.values;
  const Eigen::Index n = static_cast<Eigen::Index>(g.size());
  auto rhs = [&](const State& y, State& dy, double t) {
    Field v = evaluate(s, g, t);
    Eigen::Map<const Eigen::VectorXcd> ym(y.data(), n);
    Eigen::VectorXcd out = K * ym;
    for (Eigen::Index i = 0; i < n; ++i) out(i) += v[static_cast<std::size_t>(i)] * ym(i);
    dy.resize(y.size());
    for (Eigen::Index i = 0; i < n; ++i) dy[static_cast<std::size_t>(i)] = cplx{0, -1} * out(i);
  };
  auto stops = detail::stop_times(t0, t1, breakpoints(s), {});
  for (std::size_t k = 0; k + 1 < stops.size(); ++k) {
    double a = stops[k], b = stops[k + 1];
    // Stay strictly inside each smooth piece so a jump is never straddled.
    double a_in = a, b_in = b;
    if (k > 0) a_in = a + (b > a ? 1 : -1) * 1e-13 * std::max(1.0, std::abs(a));
    auto stepper = ode::make_controlled(tol, tol, ode::runge_kutta_dopri5<State>());
    ode::integrate_adaptive(stepper, rhs, x, a_in, b_in, (b_in - a_in) * 1e-3);
  }
  return Field(g, x);
}

// e^{-itH} psi by dense eigendecomposition (time-independent V).
inline Field eigen_evolve(const PotentialSpec& s, const Field& psi0, double t) {
  if (!is_time_independent(s)) throw ContractViolation("eigen_evolve needs a time-independent spec");
  const GridSpec g = psi0.grid;
  require_dense(g);
  Eigen::MatrixXcd H = kinetic_matrix(g);
  Field v = evaluate(s, g, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) H(i, i) += v[i].real();
  H = 0.5 * (H + H.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  Eigen::VectorXcd phase = (es.eigenvalues().cast<cplx>() * cplx{0, -t}).array().exp();
  Eigen::VectorXcd out = es.eigenvectors() * phase.asDiagonal() * (es.eigenvectors().adjoint() * to_vector(psi0));
  return from_vector(g, out);
}

struct BoundStateReport {
  std::vector<double> negative_eigenvalues;
  std::vector<double> localization;  // N * sum |v|^4 for each negative state (1 = fully spread)
  std::vector<bool> flagged;
  double energy_tolerance = 0.0;
  bool scattering_dominated = true;
};

// Negative-energy states whose energy is below -energy_tolerance and whose
// localization N sum|v|^4 reaches 2 are flagged as bound-state candidates.
// energy_tolerance is a tenth of the first nonzero free level (pi/L)^2.
inline BoundStateReport bound_state_report(const PotentialSpec& s, const GridSpec& g) {
  if (!is_time_independent(s)) throw ContractViolation("bound_state_report needs a time-independent spec");
  require_dense(g);
  Eigen::MatrixXcd H = kinetic_matrix(g);
  Field v = evaluate(s, g, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) H(i, i) += v[i].real();
  H = 0.5 * (H + H.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  BoundStateReport r;
  r.energy_tolerance = 0.1 * g.dxi() * g.dxi();
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    double e = es.eigenvalues()(k);
    if (e >= 0) continue;
    Eigen::VectorXcd vec = es.eigenvectors().col(k);
    vec /= vec.norm();
    double loc = static_cast<double>(g.size()) * vec.cwiseAbs2().cwiseAbs2().sum();
    bool flag = e < -r.energy_tolerance && loc >= 2.0;
    r.negative_eigenvalues.push_back(e);
    r.localization.push_back(loc);
    r.flagged.push_back(flag);
    if (flag) r.scattering_dominated = false;
  }
  return r;
}

// max over members of ||U(t,s) B psi||_inf / ||psi||_1 at each requested
// t, where B is an optional high cutoff. One evolution per member.
inline std::vector<double> gap_norm_scan(const PotentialSpec& spec, const std::vector<Field>& members, double s,
                                         const std::vector<double>& ts, const StepSpec& step,
                                         const std::optional<double>& cutoff = std::nullopt) {
  std::vector<std::vector<double>> per(members.size(), std::vector<double>(ts.size(), 0.0));
  parallel_for(members.size(), [&](std::size_t m) {
    Field psi = members[m];
    double l1 = lp_norm(psi, 1.0);
    if (cutoff) psi = apply(make_cutoff(psi.grid, CutoffKind::High, *cutoff), psi);
    double tmax = *std::max_element(ts.begin(), ts.end());
    Trajectory tr = evolve(spec, psi, s, tmax, step, ts);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      auto it = std::find(tr.times.begin(), tr.times.end(), ts[k]);
      if (it == tr.times.end()) throw NumericalFailure("requested time missing from trajectory");
      per[m][k] = lp_norm(tr.states[static_cast<std::size_t>(it - tr.times.begin())], inf) / l1;
    }
  });
  std::vector<double> out(ts.size(), 0.0);
  for (const auto& row : per)
    for (std::size_t k = 0; k < ts.size(); ++k) out[k] = std::max(out[k], row[k]);
  return out;
}

inline double finite_gap_norm(const PotentialSpec& spec, const std::vector<Field>& members, double s, double t,
                              const StepSpec& step, const std::optional<double>& cutoff = std::nullopt) {
  if (std::abs(t - s) < 1.0) throw ContractViolation("finite_gap_norm needs |t - s| >= 1");
  return gap_norm_scan(spec, members, s, {t}, step, cutoff).front();
}

}  // namespace tdscat
