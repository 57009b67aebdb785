#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <memory>
#include <set>
#include <variant>
#include <vector>

#include "tdscat/envelope.hpp"

namespace tdscat {

struct PotentialSpec;
using PotentialPtr = std::shared_ptr<const PotentialSpec>;

struct PlaneWaveTerm {
  cplx amplitude;
  Vec3 frequency{0, 0, 0};
};

struct PlaneWaveSum {
  std::vector<PlaneWaveTerm> terms;
};

// A exp(-|x - c|^2 / (2 sigma^2))
struct GaussianWell {
  double amplitude = 1.0;
  double width = 1.0;
  Vec3 center{0, 0, 0};
};

struct Enveloped {
  PotentialPtr spatial;
  TimeEnvelope envelope;
};

enum class PathKind { SinLog, SqrtShift, Linear };

// spatial(x - path(t) v)
struct Moving {
  PotentialPtr spatial;
  PathKind path = PathKind::SqrtShift;
  Vec3 velocity{0, 0, 0};
};

// chi(|t| >= cutoff) sin(omega t) / |t|^{n/2} * profile(x / t)
struct SelfSimilar {
  PotentialPtr profile;
  double cutoff = 1.0;
  double omega = 1.0;
};

struct Sum {
  std::vector<PotentialPtr> parts;
};

struct PotentialSpec {
  std::variant<PlaneWaveSum, GaussianWell, Enveloped, Moving, SelfSimilar, Sum> node;
};

// Constructors -------------------------------------------------------------

inline PotentialPtr make_spec(PotentialSpec s) { return std::make_shared<const PotentialSpec>(std::move(s)); }

inline PotentialPtr zero_potential() { return make_spec({PlaneWaveSum{}}); }

inline PotentialPtr plane_waves(std::vector<PlaneWaveTerm> terms) {
  return make_spec({PlaneWaveSum{std::move(terms)}});
}

inline PotentialPtr gaussian(double amplitude, double width, Vec3 center = {0, 0, 0}) {
  if (!(width > 0)) throw ContractViolation("Gaussian width must be positive");
  return make_spec({GaussianWell{amplitude, width, center}});
}

inline PotentialPtr enveloped(PotentialPtr spatial, TimeEnvelope env);
inline PotentialPtr moving(PotentialPtr spatial, PathKind path, Vec3 v) {
  return make_spec({Moving{std::move(spatial), path, v}});
}
inline PotentialPtr self_similar(PotentialPtr profile, double cutoff, double omega) {
  if (!(cutoff > 0)) throw ContractViolation("self-similar cutoff must be positive");
  return make_spec({SelfSimilar{std::move(profile), cutoff, omega}});
}
inline PotentialPtr sum(std::vector<PotentialPtr> parts) { return make_spec({Sum{std::move(parts)}}); }

// Structural queries ------------------------------------------------------

inline bool is_time_independent(const PotentialSpec& s) {
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, PlaneWaveSum> || std::is_same_v<T, GaussianWell>) return true;
        else if constexpr (std::is_same_v<T, Enveloped>)
          return n.envelope.is_constant() && is_time_independent(*n.spatial);
        else if constexpr (std::is_same_v<T, Moving>)
          return norm3(n.velocity) == 0.0 && is_time_independent(*n.spatial);
        else if constexpr (std::is_same_v<T, SelfSimilar>) return false;
        else {
          for (const auto& p : n.parts)
            if (!is_time_independent(*p)) return false;
          return true;
        }
      },
      s.node);
}

inline PotentialPtr enveloped(PotentialPtr spatial, TimeEnvelope env) {
  if (!is_time_independent(*spatial)) throw ContractViolation("Enveloped requires a time-independent spatial part");
  return make_spec({Enveloped{std::move(spatial), std::move(env)}});
}

// True when the tree contains only plane waves (possibly enveloped/moved).
inline bool is_plane_wave_tree(const PotentialSpec& s) {
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, PlaneWaveSum>) return true;
        else if constexpr (std::is_same_v<T, Enveloped> || std::is_same_v<T, Moving>)
          return is_plane_wave_tree(*n.spatial);
        else if constexpr (std::is_same_v<T, Sum>) {
          for (const auto& p : n.parts)
            if (!is_plane_wave_tree(*p)) return false;
          return true;
        } else
          return false;
      },
      s.node);
}

inline std::vector<double> breakpoints(const PotentialSpec& s) {
  return std::visit(
      [](const auto& n) -> std::vector<double> {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Enveloped>) return n.envelope.breakpoints();
        else if constexpr (std::is_same_v<T, SelfSimilar>) return {-n.cutoff, 0.0, n.cutoff};
        else if constexpr (std::is_same_v<T, Moving>) return breakpoints(*n.spatial);
        else if constexpr (std::is_same_v<T, Sum>) {
          std::set<double> all;
          for (const auto& p : n.parts)
            for (double b : breakpoints(*p)) all.insert(b);
          return {all.begin(), all.end()};
        } else
          return {};
      },
      s.node);
}

// Breakpoints strictly inside (a, b), sorted in the direction a -> b.
inline std::vector<double> breakpoints_between(const PotentialSpec& s, double a, double b) {
  std::vector<double> out;
  double lo = std::min(a, b), hi = std::max(a, b);
  for (double p : breakpoints(s))
    if (p > lo && p < hi) out.push_back(p);
  std::sort(out.begin(), out.end());
  if (a > b) std::reverse(out.begin(), out.end());
  return out;
}

inline double path_value(PathKind k, double t) {
  switch (k) {
    case PathKind::SinLog: return std::sin(std::log1p(std::abs(t)));
    case PathKind::SqrtShift: return std::sqrt(1.0 + std::abs(t));
    case PathKind::Linear: return t;
  }
  return 0.0;
}

inline double self_similar_factor(const SelfSimilar& s, double t, int dim) {
  if (std::abs(t) < s.cutoff) return 0.0;
  return std::sin(s.omega * t) / std::pow(std::abs(t), 0.5 * dim);
}

// Pointwise evaluation ----------------------------------------------------

inline cplx value_at(const PotentialSpec& s, const Vec3& x, double t, int dim) {
  return std::visit(
      [&](const auto& n) -> cplx {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, PlaneWaveSum>) {
          cplx acc{0, 0};
          for (const auto& term : n.terms) acc += term.amplitude * std::polar(1.0, dot3(term.frequency, x));
          return acc;
        } else if constexpr (std::is_same_v<T, GaussianWell>) {
          double r2 = 0.0;
          for (int a = 0; a < dim; ++a) r2 += (x[a] - n.center[a]) * (x[a] - n.center[a]);
          return n.amplitude * std::exp(-r2 / (2.0 * n.width * n.width));
        } else if constexpr (std::is_same_v<T, Enveloped>) {
          double f = n.envelope.value(t);
          return f == 0.0 ? cplx{0, 0} : f * value_at(*n.spatial, x, t, dim);
        } else if constexpr (std::is_same_v<T, Moving>) {
          double p = path_value(n.path, t);
          Vec3 y = x;
          for (int a = 0; a < dim; ++a) y[a] -= p * n.velocity[a];
          return value_at(*n.spatial, y, t, dim);
        } else if constexpr (std::is_same_v<T, SelfSimilar>) {
          double g = self_similar_factor(n, t, dim);
          if (g == 0.0) return {0, 0};
          Vec3 y{0, 0, 0};
          for (int a = 0; a < dim; ++a) y[a] = x[a] / t;
          return g * value_at(*n.profile, y, t, dim);
        } else {
          cplx acc{0, 0};
          for (const auto& p : n.parts) acc += value_at(*p, x, t, dim);
          return acc;
        }
      },
      s.node);
}

inline Field evaluate(const PotentialSpec& s, const GridSpec& g, double t) {
  Field out(g);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = value_at(s, g.point(i), t, g.dim);
  return out;
}

// Continuum transform (2pi)^{-n/2} int V(x) e^{-i xi x} dx at an arbitrary
// frequency; defined for the absolutely continuous families only.
inline cplx fourier_at(const PotentialSpec& s, const Vec3& xi, double t, int dim) {
  return std::visit(
      [&](const auto& n) -> cplx {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, PlaneWaveSum>) {
          if (n.terms.empty()) return {0, 0};
          throw UnsupportedSpec("plane-wave sums have atomic Fourier data; use fourier_data on a grid");
        } else if constexpr (std::is_same_v<T, GaussianWell>) {
          double k2 = 0.0, kc = 0.0;
          for (int a = 0; a < dim; ++a) {
            k2 += xi[a] * xi[a];
            kc += xi[a] * n.center[a];
          }
          return n.amplitude * std::pow(n.width, dim) * std::exp(-0.5 * n.width * n.width * k2) *
                 std::polar(1.0, -kc);
        } else if constexpr (std::is_same_v<T, Enveloped>) {
          double f = n.envelope.value(t);
          return f == 0.0 ? cplx{0, 0} : f * fourier_at(*n.spatial, xi, t, dim);
        } else if constexpr (std::is_same_v<T, Moving>) {
          double p = path_value(n.path, t);
          double phase = 0.0;
          for (int a = 0; a < dim; ++a) phase += p * n.velocity[a] * xi[a];
          return std::polar(1.0, -phase) * fourier_at(*n.spatial, xi, t, dim);
        } else if constexpr (std::is_same_v<T, SelfSimilar>) {
          double g = self_similar_factor(n, t, dim);
          if (g == 0.0) return {0, 0};
          Vec3 y{0, 0, 0};
          for (int a = 0; a < dim; ++a) y[a] = xi[a] * t;
          return g * std::pow(std::abs(t), dim) * fourier_at(*n.profile, y, t, dim);
        } else {
          cplx acc{0, 0};
          for (const auto& p : n.parts) acc += fourier_at(*p, xi, t, dim);
          return acc;
        }
      },
      s.node);
}

// Lattice index of a plane-wave frequency, or -1 when it is off the lattice
// by more than tol (in units of the lattice spacing).
inline long lattice_index(const GridSpec& g, const Vec3& b, double tol = 1e-9) {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = 0; a < g.dim; ++a) {
    double k = b[a] / g.dxi();
    double r = std::round(k);
    if (std::abs(k - r) > tol) return -1;
    idx[a] = static_cast<int>(r);
  }
  for (int a = g.dim; a < 3; ++a)
    if (b[a] != 0.0) return -1;
  return static_cast<long>(g.ravel(idx));
}

// Copy of a plane-wave tree with every frequency moved to the nearest
// lattice point; frequencies further than tol lattice units away are rejected.
inline PotentialPtr snap_to_lattice(const PotentialSpec& s, const GridSpec& g, double tol) {
  return std::visit(
      [&](const auto& n) -> PotentialPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, PlaneWaveSum>) {
          PlaneWaveSum out;
          for (auto term : n.terms) {
            for (int a = 0; a < g.dim; ++a) {
              double k = term.frequency[a] / g.dxi();
              double r = std::round(k);
              if (std::abs(k - r) > tol) throw ContractViolation("plane-wave frequency is off the lattice beyond the snap tolerance");
              term.frequency[a] = r * g.dxi();
            }
            out.terms.push_back(term);
          }
          return make_spec({out});
        } else if constexpr (std::is_same_v<T, Enveloped>) {
          return make_spec({Enveloped{snap_to_lattice(*n.spatial, g, tol), n.envelope}});
        } else if constexpr (std::is_same_v<T, Sum>) {
          Sum out;
          for (const auto& p : n.parts) out.parts.push_back(snap_to_lattice(*p, g, tol));
          return make_spec({out});
        } else {
          return make_spec(PotentialSpec{n});
        }
      },
      s.node);
}

// Continuum-normalised V_hat on the lattice. Plane waves become lattice
// deltas of weight (2pi)^{n/2} a / dxi^n.
inline Field fourier_data(const PotentialSpec& s, const GridSpec& g, double t) {
  return std::visit(
      [&](const auto& n) -> Field {
        using T = std::decay_t<decltype(n)>;
        Field out(g, Domain::Frequency);
        if constexpr (std::is_same_v<T, PlaneWaveSum>) {
          const double w = std::pow(2.0 * pi, 0.5 * g.dim) / std::pow(g.dxi(), g.dim);
          for (const auto& term : n.terms) {
            long k = lattice_index(g, term.frequency);
            if (k < 0) throw ContractViolation("plane-wave frequency is off the lattice; snap it first");
            out[static_cast<std::size_t>(k)] += w * term.amplitude;
          }
        } else if constexpr (std::is_same_v<T, Enveloped>) {
          double f = n.envelope.value(t);
          if (f != 0.0) out = f * fourier_data(*n.spatial, g, t);
        } else if constexpr (std::is_same_v<T, Moving>) {
          out = fourier_data(*n.spatial, g, t);
          double p = path_value(n.path, t);
          for (std::size_t i = 0; i < g.size(); ++i)
            out[i] *= std::polar(1.0, -p * dot3(n.velocity, g.frequency_vector(i)));
        } else if constexpr (std::is_same_v<T, Sum>) {
          for (const auto& p : n.parts) out += fourier_data(*p, g, t);
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) out[i] = fourier_at(s, g.frequency_vector(i), t, g.dim);
        }
        out.domain = Domain::Frequency;
        return out;
      },
      s.node);
}

// Discrete coefficients c_k with V(x_j) = sum_k c_k e^{i xi_k x_j} exactly on
// the grid.
inline Field coefficients(const Field& samples) {
  Field c = forward_transform(samples);
  const double scale = 1.0 / std::sqrt(static_cast<double>(samples.size()));
  for (auto& v : c.values) v *= scale;
  return c;
}

inline Field coefficients(const PotentialSpec& s, const GridSpec& g, double t) {
  return coefficients(evaluate(s, g, t));
}

inline double coefficient_mass(const Field& samples) {
  Field c = coefficients(samples);
  double acc = 0.0;
  for (const auto& v : c.values) acc += std::abs(v);
  return acc;
}

namespace detail {

inline double plane_wave_variation(const PotentialSpec& s, double t) {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, PlaneWaveSum>) {
          double acc = 0.0;
          for (const auto& term : n.terms) acc += std::abs(term.amplitude);
          return acc;
        } else if constexpr (std::is_same_v<T, Enveloped>) {
          return std::abs(n.envelope.value(t)) * plane_wave_variation(*n.spatial, t);
        } else if constexpr (std::is_same_v<T, Moving>) {
          return plane_wave_variation(*n.spatial, t);
        } else if constexpr (std::is_same_v<T, Sum>) {
          double acc = 0.0;
          for (const auto& p : n.parts) acc += plane_wave_variation(*p, t);
          return acc;
        } else {
          return 0.0;
        }
      },
      s.node);
}

}  // namespace detail

// m(t): discrete coefficient mass. Exact sum |a_j f_j(t)| for plane-wave
// trees, sum_k |c_k| of the sampled potential otherwise.
inline double total_variation(const PotentialSpec& s, const GridSpec& g, double t) {
  if (is_plane_wave_tree(s)) return detail::plane_wave_variation(s, t);
  if (auto* e = std::get_if<Enveloped>(&s.node)) {
    double f = e->envelope.value(t);
    return f == 0.0 ? 0.0 : std::abs(f) * total_variation(*e->spatial, g, 0.0);
  }
  return coefficient_mass(evaluate(s, g, t));
}

// c(t1) - c(t0) = int_{t0}^{t1} m(s) ds, split at breakpoints, Gauss-Kronrod.
inline double accumulated_c(const PotentialSpec& s, const GridSpec& g, double t0, double t1) {
  if (t1 < t0) throw DomainError("accumulated_c needs t0 <= t1");
  if (t1 == t0) return 0.0;
  if (is_time_independent(s)) return (t1 - t0) * total_variation(s, g, 0.0);
  std::vector<double> cuts{t0};
  for (double b : breakpoints_between(s, t0, t1)) cuts.push_back(b);
  cuts.push_back(t1);
  std::function<double(double)> m;
  if (auto* e = std::get_if<Enveloped>(&s.node)) {
    double base = total_variation(*e->spatial, g, 0.0);
    TimeEnvelope env = e->envelope;
    m = [env, base](double t) { return std::abs(env.value(t)) * base; };
  } else {
    m = [&](double t) { return total_variation(s, g, t); };
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], b = cuts[i + 1];
    // Long intervals are cut into unit pieces so oscillating integrands are resolved.
    int pieces = std::max(1, static_cast<int>(std::ceil(b - a)));
    for (int k = 0; k < pieces; ++k) {
      double lo = a + (b - a) * k / pieces, hi = a + (b - a) * (k + 1) / pieces;
      acc += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(m, lo, hi, 15, 1e-12);
    }
  }
  return acc;
}

inline double accumulated_c(const PotentialSpec& s, const GridSpec& g, double t) {
  if (t < 0) throw DomainError("accumulated_c needs t >= 0");
  return accumulated_c(s, g, 0.0, t);
}

// Removes the zero lattice mode of the sampled potential. A constant
// potential only contributes a global phase to the wave operator.
inline Field mean_free(const Field& samples) {
  cplx mean{0, 0};
  for (const auto& v : samples.values) mean += v;
  mean /= static_cast<double>(samples.size());
  Field out = samples;
  for (auto& v : out.values) v -= mean;
  return out;
}

}  // namespace tdscat
