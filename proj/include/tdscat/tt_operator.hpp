#pragma once

#include <functional>
#include <optional>
#include <sstream>

#include "tdscat/potentials.hpp"

namespace tdscat {

// Potential samples as a function of time; must be safe to call concurrently.
using Sampler = std::function<Field(double)>;

inline Sampler sampler_of(PotentialPtr s, const GridSpec& g, bool subtract_zero_mode = false) {
  return [s, g, subtract_zero_mode](double t) {
    Field v = evaluate(*s, g, t);
    return subtract_zero_mode ? mean_free(v) : v;
  };
}

// e^{itH0} V e^{-itH0} psi for sampled V.
inline Field apply_kt_sampled(const Field& V, double t, const Field& psi) {
  Field w = free_propagate(psi, t);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= V[i];
  return free_propagate(w, -t);
}

inline Field apply_kt_spectral(const PotentialSpec& s, double t, const Field& psi) {
  return apply_kt_sampled(evaluate(s, psi.grid, t), t, psi);
}

namespace detail {

// Effective plane-wave terms of a plane-wave tree at time t.
inline void collect_plane_waves(const PotentialSpec& s, double t, int dim, cplx scale, std::vector<PlaneWaveTerm>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, PlaneWaveSum>) {
          for (const auto& term : n.terms) out.push_back({scale * term.amplitude, term.frequency});
        } else if constexpr (std::is_same_v<T, Enveloped>) {
          collect_plane_waves(*n.spatial, t, dim, scale * n.envelope.value(t), out);
        } else if constexpr (std::is_same_v<T, Moving>) {
          std::vector<PlaneWaveTerm> inner;
          collect_plane_waves(*n.spatial, t, dim, scale, inner);
          double p = path_value(n.path, t);
          for (auto& term : inner) {
            double phase = 0.0;
            for (int a = 0; a < dim; ++a) phase += term.frequency[a] * p * n.velocity[a];
            term.amplitude *= std::polar(1.0, -phase);
            out.push_back(term);
          }
        } else if constexpr (std::is_same_v<T, Sum>) {
          for (const auto& p : n.parts) collect_plane_waves(*p, t, dim, scale, out);
        } else {
          throw UnsupportedSpec("plane-wave algorithm needs a plane-wave spec");
        }
      },
      s.node);
}

}  // namespace detail

inline std::vector<PlaneWaveTerm> plane_wave_terms(const PotentialSpec& s, double t, int dim) {
  std::vector<PlaneWaveTerm> out;
  detail::collect_plane_waves(s, t, dim, cplx{1, 0}, out);
  return out;
}

// sum_j a_j e^{it b_j^2} e^{i b_j x} psi(x + 2t b_j); the shift is applied
// as the frequency-side phase e^{2it b_j . xi}.
inline Field apply_kt_planewave(const PotentialSpec& s, double t, const Field& psi) {
  const GridSpec& g = psi.grid;
  auto terms = plane_wave_terms(s, t, g.dim);
  for (const auto& term : terms)
    if (lattice_index(g, term.frequency) < 0)
      throw ContractViolation("plane-wave frequency is off the lattice; snap it first");
  Field out(g);
  if (terms.empty()) return out;
  std::vector<cplx> hat = psi.values;
  detail::raw_fft(hat, g, FFTW_FORWARD);
  const double scale = 1.0 / static_cast<double>(g.size());
  std::vector<cplx> buf(g.size());
  for (const auto& term : terms) {
    const double b2 = dot3(term.frequency, term.frequency);
    for (std::size_t i = 0; i < g.size(); ++i)
      buf[i] = hat[i] * std::polar(scale, 2.0 * t * dot3(term.frequency, g.frequency_vector(i)));
    detail::raw_fft(buf, g, FFTW_BACKWARD);
    const cplx amp = term.amplitude * std::polar(1.0, t * b2);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] += amp * std::polar(1.0, dot3(term.frequency, g.point(i))) * buf[i];
  }
  return out;
}

enum class QuadRule { Trapezoid, Simpson };

struct QuadratureSpec {
  QuadRule rule = QuadRule::Simpson;
  double dt = 0.0;              // 0 picks phase_step / max |xi|^2
  double horizon = 0.0;         // 0 picks ln(1/tail_tolerance)/eps
  double tail_tolerance = 1e-8;
  double phase_step = 0.5;
};

struct QuadNodes {
  std::vector<double> t, w;
};

// Composite rule on [a, b] with every breakpoint as a node.
inline QuadNodes make_nodes(double a, double b, double dt, QuadRule rule, const std::vector<double>& cuts = {}) {
  if (!(dt > 0)) throw ContractViolation("quadrature dt must be positive");
  QuadNodes q;
  std::vector<double> edges{a};
  for (double c : cuts)
    if (c > a && c < b) edges.push_back(c);
  edges.push_back(b);
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    double lo = edges[s], hi = edges[s + 1];
    int n = std::max(2, static_cast<int>(std::ceil((hi - lo) / dt)));
    if (rule == QuadRule::Simpson && (n & 1)) ++n;
    double h = (hi - lo) / n;
    for (int i = 0; i <= n; ++i) {
      double w;
      if (rule == QuadRule::Trapezoid) w = (i == 0 || i == n) ? 0.5 * h : h;
      else w = (i == 0 || i == n) ? h / 3.0 : ((i & 1) ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
      // Segment edges are doubled: the left copy is nudged below the cut so
      // that a jump in the envelope is sampled from the correct side.
      if (i == 0 && !q.t.empty()) q.t.back() = std::nextafter(q.t.back(), -inf);
      q.t.push_back(lo + h * i);
      q.w.push_back(w);
    }
  }
  return q;
}

// sum_i w_i f(t_i) psi_i reduced in fixed chunk order, independent of the
// number of workers.
inline Field weighted_sum(const QuadNodes& q, const GridSpec& g, const std::function<Field(double)>& term) {
  const std::size_t chunk = 64;
  const std::size_t chunks = (q.t.size() + chunk - 1) / chunk;
  std::vector<Field> partial(chunks, Field(g));
  parallel_for(chunks, [&](std::size_t c) {
    Field acc(g);
    for (std::size_t i = c * chunk; i < std::min(q.t.size(), (c + 1) * chunk); ++i) acc.axpy(q.w[i], term(q.t[i]));
    partial[c] = std::move(acc);
  });
  Field out(g);
  for (const auto& p : partial) out += p;
  return out;
}

inline double max_squared_frequency(const GridSpec& g) {
  return g.dim * g.nyquist() * g.nyquist();
}

struct IEpsResult {
  Field value;
  double horizon = 0.0;
  double tail_bound = 0.0;
  std::size_t nodes = 0;
};

// Quadrature of t -> e^{-eps t} K_t psi over [0, T*], sampled potential.
inline IEpsResult integrate_i_eps(const Sampler& V, const std::vector<double>& cuts, double sup_mass, double eps,
                                  const Field& psi, const QuadratureSpec& quad) {
  if (eps < 0) throw DomainError("eps must be >= 0");
  IEpsResult r;
  double T = quad.horizon;
  if (T <= 0) {
    if (eps == 0) throw DomainError("eps = 0 needs an explicit horizon");
    T = std::log(1.0 / quad.tail_tolerance) / eps;
  }
  double dt = quad.dt > 0 ? quad.dt : quad.phase_step / max_squared_frequency(psi.grid);
  QuadNodes q = make_nodes(0.0, T, dt, quad.rule, cuts);
  r.value = weighted_sum(q, psi.grid, [&](double t) {
    Field k = apply_kt_sampled(V(t), t, psi);
    if (eps > 0) k *= std::exp(-eps * t);
    return k;
  });
  r.horizon = T;
  r.nodes = q.t.size();
  r.tail_bound = eps > 0 ? sup_mass * std::exp(-eps * T) / eps * lp_norm(psi, 2.0) : 0.0;
  return r;
}

namespace detail {

inline bool integrable_mass(const PotentialSpec& s, int dim) {
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, SelfSimilar>) return dim >= 3;
        else if constexpr (std::is_same_v<T, Sum>) {
          for (const auto& p : n.parts)
            if (!integrable_mass(*p, dim)) return false;
          return true;
        } else if constexpr (std::is_same_v<T, PlaneWaveSum>) return n.terms.empty();
        else return false;
      },
      s.node);
}

inline double sup_mass_estimate(const PotentialSpec& s, const GridSpec& g, double T) {
  if (is_time_independent(s)) return total_variation(s, g, 0.0);
  double m = 0.0;
  const int samples = 64;
  for (int i = 0; i <= samples; ++i) m = std::max(m, total_variation(s, g, T * i / samples));
  return m;
}

}  // namespace detail

inline Field apply_i_eps(const PotentialSpec& s, double eps, const Field& psi, const QuadratureSpec& quad = {},
                         IEpsResult* info = nullptr) {
  if (eps == 0 && !detail::integrable_mass(s, psi.grid.dim))
    throw DomainError("bound violation: eps = 0 needs an integrable m(t) (self-similar class with n >= 3)");
  auto V = sampler_of(std::make_shared<const PotentialSpec>(s), psi.grid);
  double T = quad.horizon > 0 ? quad.horizon : (eps > 0 ? std::log(1.0 / quad.tail_tolerance) / eps : 0.0);
  IEpsResult r = integrate_i_eps(V, breakpoints(s), detail::sup_mass_estimate(s, psi.grid, T), eps, psi, quad);
  if (info) *info = r;
  return r.value;
}

// Coefficients (b, c_b) used by the resolvent route.
struct LatticeTerm {
  std::size_t index;
  Vec3 b;
  cplx c;
};

inline std::vector<LatticeTerm> lattice_terms(const Field& V, double relative_cutoff = 0.0) {
  Field c = coefficients(V);
  double top = 0.0;
  for (const auto& v : c.values) top = std::max(top, std::abs(v));
  std::vector<LatticeTerm> out;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (std::abs(c[i]) > relative_cutoff * top && std::abs(c[i]) > 0)
      out.push_back({i, V.grid.frequency_vector(i), c[i]});
  return out;
}

inline std::vector<LatticeTerm> lattice_terms(const PotentialSpec& s, const GridSpec& g, double relative_cutoff = 0.0) {
  if (is_plane_wave_tree(s)) {
    std::vector<LatticeTerm> out;
    for (const auto& term : plane_wave_terms(s, 0.0, g.dim)) {
      long k = lattice_index(g, term.frequency);
      if (k < 0) throw ContractViolation("plane-wave frequency is off the lattice; snap it first");
      out.push_back({static_cast<std::size_t>(k), term.frequency, term.amplitude});
    }
    return out;
  }
  return lattice_terms(evaluate(s, g, 0.0), relative_cutoff);
}

// sum_b c_b e^{ibx} [-1/(i(b^2 + 2 b.xi) - eps)] psi
inline Field resolvent_from_terms(const std::vector<LatticeTerm>& terms, double eps, const Field& psi) {
  const GridSpec& g = psi.grid;
  std::vector<cplx> hat = psi.values;
  detail::raw_fft(hat, g, FFTW_FORWARD);
  const double scale = 1.0 / static_cast<double>(g.size());
  double hat_top = 0.0;
  for (const auto& v : hat) hat_top = std::max(hat_top, std::abs(v));
  std::vector<Vec3> xi(g.size());
  std::vector<Vec3> x(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    xi[i] = g.frequency_vector(i);
    x[i] = g.point(i);
  }
  Field out(g);
  std::vector<cplx> buf(g.size());
  for (const auto& term : terms) {
    const double b2 = dot3(term.b, term.b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double omega = b2 + 2.0 * dot3(term.b, xi[i]);
      if (eps == 0.0 && std::abs(omega) < 1e-12 && std::abs(hat[i]) > 1e-14 * hat_top) {
        std::ostringstream msg;
        msg << "singular denominator: resonant pair b = (" << term.b[0] << ", " << term.b[1] << ", " << term.b[2]
            << "), q = (" << xi[i][0] << ", " << xi[i][1] << ", " << xi[i][2] << ")";
        throw NumericalFailure(msg.str());
      }
      buf[i] = hat[i] * scale * (-1.0 / cplx{-eps, omega});
    }
    detail::raw_fft(buf, g, FFTW_BACKWARD);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] += term.c * std::polar(1.0, dot3(term.b, x[i])) * buf[i];
  }
  return out;
}

inline Field apply_i_eps_resolvent(const PotentialSpec& s, double eps, const Field& psi, double relative_cutoff = 0.0) {
  if (!is_time_independent(s)) throw ContractViolation("resolvent route needs a time-independent spec");
  if (eps < 0) throw DomainError("eps must be >= 0");
  return resolvent_from_terms(lattice_terms(s, psi.grid, relative_cutoff), eps, psi);
}

inline Field apply_i_eps_resolvent(const Field& V, double eps, const Field& psi, double relative_cutoff = 0.0) {
  if (eps < 0) throw DomainError("eps must be >= 0");
  return resolvent_from_terms(lattice_terms(V, relative_cutoff), eps, psi);
}

// Enveloped spec f(t) V1 whose envelope settles to f_inf: resolvent for
// f_inf V1 plus quadrature of (f - f_inf) V1 up to the settling time.
inline Field apply_i_eps_split(const Enveloped& e, double eps, const Field& psi, const QuadratureSpec& quad,
                               bool subtract_zero_mode = false) {
  auto asym = e.envelope.asymptote(quad.tail_tolerance);
  if (!asym) throw UnsupportedSpec("envelope has no exponential asymptote");
  auto [finf, H] = *asym;
  Field V1 = evaluate(*e.spatial, psi.grid, 0.0);
  if (subtract_zero_mode) V1 = mean_free(V1);
  Field out(psi.grid);
  if (finf != 0.0) out = finf * apply_i_eps_resolvent(V1, eps, psi);
  if (H > 0) {
    double dt = quad.dt > 0 ? quad.dt : quad.phase_step / max_squared_frequency(psi.grid);
    QuadNodes q = make_nodes(0.0, H, dt, quad.rule, e.envelope.breakpoints());
    TimeEnvelope env = e.envelope;
    // Left limit at a sharp jump: the segment ending at d sees f(d-) = 0.
    out += weighted_sum(q, psi.grid, [&](double t) {
      double f = (env.kind == EnvelopeKind::QuenchSharp && t >= env.d) ? 0.0 : env.value(t);
      double w = (f - finf) * std::exp(-eps * t);
      Field k = apply_kt_sampled(V1, t, psi);
      k *= w;
      return k;
    });
  }
  return out;
}

enum class IEpsMethod { Auto, Quadrature, Resolvent };

inline Field apply_i_eps_method(const PotentialSpec& s, double eps, const Field& psi, IEpsMethod method,
                                const QuadratureSpec& quad = {}) {
  if (method == IEpsMethod::Resolvent) return apply_i_eps_resolvent(s, eps, psi);
  if (method == IEpsMethod::Auto && eps > 0) {
    if (is_time_independent(s)) return apply_i_eps_resolvent(s, eps, psi);
    if (auto* e = std::get_if<Enveloped>(&s.node))
      if (e->envelope.asymptote(quad.tail_tolerance)) return apply_i_eps_split(*e, eps, psi, quad);
  }
  return apply_i_eps(s, eps, psi, quad);
}

// Pointwise max over the eps grid of |I_eps psi|.
inline Field maximal_i(const PotentialSpec& s, const Field& psi, const std::vector<double>& eps_grid,
                       IEpsMethod method = IEpsMethod::Auto, const QuadratureSpec& quad = {}) {
  if (eps_grid.empty()) throw ContractViolation("eps grid must be nonempty");
  std::vector<Field> values(eps_grid.size());
  parallel_for(eps_grid.size(), [&](std::size_t i) { values[i] = apply_i_eps_method(s, eps_grid[i], psi, method, quad); });
  Field out(psi.grid);
  for (const auto& v : values)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i].real(), std::abs(v[i]));
  return out;
}

}  // namespace tdscat
