#pragma once

#include <optional>
#include <string>

#include "tdscat/potentials.hpp"

namespace tdscat {

enum class Verdict {
  PP1Class,         // envelope family with closed-form Mikhlin constant
  TimeIndependent,  // (pp1) with c = 1; K_m estimate attached
  CLClassOnly,      // atomic Fourier data, CL bound only
  SelfSimilarClass, // integrable h(t), Theorem-dilation class
  NotAssessed       // moving potentials: no (pp1) analysis provided
};

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::PP1Class: return "pp1-class";
    case Verdict::TimeIndependent: return "pp1-class (time independent)";
    case Verdict::CLClassOnly: return "CL-class, not (pp1)-class";
    case Verdict::SelfSimilarClass: return "self-similar class";
    case Verdict::NotAssessed: return "not assessed";
  }
  return "";
}

struct KmSettings {
  int radial_points = 256;     // samples on [0, R]
  double radial_extent = 0.0;  // R; 0 picks 12 / (smallest Gaussian width) + max |eta|
  int directions = 32;         // used for dim >= 2
  std::vector<double> eps_grid{0.0, 1e-3, 1e-2, 1e-1, 1.0};
  std::vector<double> eta_radii{0.5, 1.0, 2.0};
};

struct PotentialConstants {
  double m0 = 0.0;             // m(t) at t = 0
  double c_T = 0.0;            // c(T)
  double h_L1 = 0.0;           // int_0^T h(t) dt for self-similar specs
  double mikhlin_c = 0.0;
  double vhat0_l1 = 0.0;       // int V0_hat
  double vhat0_linf = 0.0;     // sup V0_hat
  std::optional<double> km_estimate;
  Verdict verdict = Verdict::NotAssessed;
};

namespace detail {

// d^k/du^k exp(-s2 u^2/2 - i c u) = Q_k(p) exp(...), p = -s2 u - i c,
// Q_{k+1} = p Q_k - s2 Q_k'.
inline cplx gaussian_axis_derivative(double u, double s2, double c, int k) {
  std::vector<cplx> q{cplx{1, 0}};
  for (int r = 0; r < k; ++r) {
    std::vector<cplx> next(q.size() + 1, cplx{0, 0});
    for (std::size_t j = 0; j < q.size(); ++j) next[j + 1] += q[j];
    for (std::size_t j = 1; j < q.size(); ++j) next[j - 1] -= s2 * static_cast<double>(j) * q[j];
    q = std::move(next);
  }
  cplx p{-s2 * u, -c};
  cplx acc{0, 0};
  for (std::size_t j = q.size(); j-- > 0;) acc = acc * p + q[j];
  return acc * std::exp(cplx{-0.5 * s2 * u * u, -c * u});
}

inline void gaussian_widths(const PotentialSpec& s, double& smallest) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianWell>) smallest = std::min(smallest, n.width);
        else if constexpr (std::is_same_v<T, Enveloped> || std::is_same_v<T, Moving>) gaussian_widths(*n.spatial, smallest);
        else if constexpr (std::is_same_v<T, SelfSimilar>) gaussian_widths(*n.profile, smallest);
        else if constexpr (std::is_same_v<T, Sum>)
          for (const auto& p : n.parts) gaussian_widths(*p, smallest);
      },
      s.node);
}

}  // namespace detail

// Mixed partial d^{l}_{xi_r} d^{j}_{xi_m} V_hat(xi) for time-independent
// continuous specs (Gaussians, sums, constant envelopes).
inline cplx fourier_derivative(const PotentialSpec& s, const Vec3& xi, int dim, int r, int l, int m, int j) {
  return std::visit(
      [&](const auto& n) -> cplx {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianWell>) {
          const double s2 = n.width * n.width;
          cplx acc = n.amplitude * std::pow(n.width, dim);
          for (int a = 0; a < dim; ++a) {
            int order = (a == r ? l : 0) + (a == m ? j : 0);
            acc *= detail::gaussian_axis_derivative(xi[a], s2, n.center[a], order);
          }
          return acc;
        } else if constexpr (std::is_same_v<T, Enveloped>) {
          if (!n.envelope.is_constant()) throw UnsupportedSpec("fourier_derivative needs a time-independent spec");
          return fourier_derivative(*n.spatial, xi, dim, r, l, m, j);
        } else if constexpr (std::is_same_v<T, Sum>) {
          cplx acc{0, 0};
          for (const auto& p : n.parts) acc += fourier_derivative(*p, xi, dim, r, l, m, j);
          return acc;
        } else if constexpr (std::is_same_v<T, PlaneWaveSum>) {
          if (n.terms.empty()) return {0, 0};
          throw UnsupportedSpec("plane-wave sums have no pointwise Fourier derivatives");
        } else {
          throw UnsupportedSpec("fourier_derivative is defined for time-independent continuous specs");
        }
      },
      s.node);
}

// sum_{l,j<=2} sum_{r,m} |d^l_r d^j_m V_hat(xi)|
inline double pp1_majorant(const PotentialSpec& s, const Vec3& xi, int dim) {
  double acc = 0.0;
  for (int r = 0; r < dim; ++r)
    for (int m = 0; m < dim; ++m)
      for (int l = 0; l <= 2; ++l)
        for (int j = 0; j <= 2; ++j) acc += std::abs(fourier_derivative(s, xi, dim, r, l, m, j));
  return acc;
}

// L1 and sup of the (pp1) majorant on a lattice of step 1/(2 width) over
// [-8/width, 8/width]^dim.
inline std::pair<double, double> majorant_masses(const PotentialSpec& s, int dim) {
  double w = 1e300;
  detail::gaussian_widths(s, w);
  if (w == 1e300) return {0.0, 0.0};
  const double step = 0.5 / w;
  const int half = static_cast<int>(std::ceil(8.0 / w / step));
  const int side = 2 * half + 1;
  double l1 = 0.0, linf = 0.0;
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= side;
  for (std::size_t f = 0; f < total; ++f) {
    std::size_t rem = f;
    Vec3 xi{0, 0, 0};
    for (int a = dim - 1; a >= 0; --a) {
      xi[a] = (static_cast<int>(rem % side) - half) * step;
      rem /= side;
    }
    double v = pp1_majorant(s, xi, dim);
    l1 += v;
    linf = std::max(linf, v);
  }
  return {l1 * std::pow(step, dim), linf};
}

inline std::vector<Vec3> sphere_directions(int dim, int count) {
  std::vector<Vec3> out;
  if (dim == 1) return {Vec3{1, 0, 0}, Vec3{-1, 0, 0}};
  if (dim == 2) {
    for (int i = 0; i < count; ++i) {
      double a = 2.0 * pi * (i + 0.5) / count;
      out.push_back({std::cos(a), std::sin(a), 0});
    }
    return out;
  }
  const double golden = pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / count;
    double r = std::sqrt(1.0 - z * z);
    out.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
  }
  return out;
}

// K_1(V, eta): max over axis l and order j of
// int_{S} dsigma int dk sup_eps |L(k)|, with L the 1D transform in r of
// r d^j_l[V_hat(r xi_hat - eta)] e^{-eps/r}.
inline double k1_estimate(const PotentialSpec& s, int dim, const Vec3& eta, const KmSettings& cfg) {
  double w = 1e300;
  detail::gaussian_widths(s, w);
  if (w == 1e300) throw UnsupportedSpec("K_m estimate needs a continuous time-independent spec");
  const double R = cfg.radial_extent > 0 ? cfg.radial_extent : 12.0 / w + norm3(eta);
  const int nr = cfg.radial_points;
  const int P = 4 * nr;
  const double dr = R / nr;
  const double dk = 2.0 * pi / (P * dr);
  auto dirs = sphere_directions(dim, cfg.directions);
  const double dir_weight = dim == 1 ? 1.0 : (dim == 2 ? 2.0 * pi : 4.0 * pi) / dirs.size();
  fftw_plan plan = detail::PlanCache::instance().get(1, P, FFTW_FORWARD);
  double best = 0.0;
  for (int l = 0; l < dim; ++l) {
    for (int j = 0; j <= 2; ++j) {
      double total = 0.0;
      for (const auto& d : dirs) {
        std::vector<cplx> base(nr);
        for (int i = 0; i < nr; ++i) {
          double r = (i + 0.5) * dr;
          Vec3 xi{0, 0, 0};
          for (int a = 0; a < dim; ++a) xi[a] = r * d[a] - eta[a];
          base[i] = r * fourier_derivative(s, xi, dim, l, j, l, 0);
        }
        std::vector<double> sup(P, 0.0);
        std::vector<cplx> buf(P);
        for (double eps : cfg.eps_grid) {
          std::fill(buf.begin(), buf.end(), cplx{0, 0});
          for (int i = 0; i < nr; ++i) {
            double r = (i + 0.5) * dr;
            buf[i] = base[i] * std::exp(-eps / r);
          }
          auto* p = reinterpret_cast<fftw_complex*>(buf.data());
          fftw_execute_dft(plan, p, p);
          for (int k = 0; k < P; ++k) sup[k] = std::max(sup[k], std::abs(buf[k]) * dr / std::sqrt(2.0 * pi));
        }
        double integral = 0.0;
        for (double v : sup) integral += v * dk;
        total += dir_weight * integral;
      }
      best = std::max(best, total);
    }
  }
  return best;
}

// sup over the documented eta sample set {0} U {+-rho e_a}.
inline double km_estimate(const PotentialSpec& s, int dim, const KmSettings& cfg = {}) {
  double best = k1_estimate(s, dim, Vec3{0, 0, 0}, cfg);
  for (double rho : cfg.eta_radii)
    for (int a = 0; a < dim; ++a)
      for (double sgn : {1.0, -1.0}) {
        Vec3 eta{0, 0, 0};
        eta[a] = sgn * rho;
        best = std::max(best, k1_estimate(s, dim, eta, cfg));
      }
  return best;
}

namespace detail {

inline bool is_catalog_envelope_family(const PotentialSpec& s, double& c, double& factor, const PotentialSpec*& spatial) {
  if (auto* e = std::get_if<Enveloped>(&s.node)) {
    if (!is_plane_wave_tree(*e->spatial)) {
      c = e->envelope.mikhlin_c();
      factor = e->envelope.majorant_factor();
      spatial = e->spatial.get();
      return true;
    }
  }
  return false;
}

}  // namespace detail

// (pp1) data and class constants; T is the horizon for c(T) and h_L1.
inline PotentialConstants mikhlin_data(const PotentialSpec& s, const GridSpec& g, double T = 1.0,
                                       const KmSettings& km = {}, bool with_km = true) {
  PotentialConstants out;
  out.m0 = total_variation(s, g, 0.0);
  out.c_T = accumulated_c(s, g, T);
  if (is_plane_wave_tree(s)) {
    out.verdict = Verdict::CLClassOnly;
    return out;
  }
  if (std::holds_alternative<SelfSimilar>(s.node)) {
    out.verdict = Verdict::SelfSimilarClass;
    out.h_L1 = out.c_T;
    return out;
  }
  if (std::holds_alternative<Moving>(s.node)) {
    out.verdict = Verdict::NotAssessed;
    return out;
  }
  if (is_time_independent(s)) {
    out.verdict = Verdict::TimeIndependent;
    out.mikhlin_c = 1.0;
    auto [l1, linf] = majorant_masses(s, g.dim);
    out.vhat0_l1 = l1;
    out.vhat0_linf = linf;
    if (with_km) out.km_estimate = km_estimate(s, g.dim, km);
    return out;
  }
  double c = 0.0, factor = 0.0;
  const PotentialSpec* spatial = nullptr;
  if (detail::is_catalog_envelope_family(s, c, factor, spatial)) {
    out.verdict = Verdict::PP1Class;
    out.mikhlin_c = c;
    auto [l1, linf] = majorant_masses(*spatial, g.dim);
    out.vhat0_l1 = factor * l1;
    out.vhat0_linf = factor * linf;
    return out;
  }
  if (auto* sm = std::get_if<Sum>(&s.node)) {
    out.verdict = Verdict::PP1Class;
    out.mikhlin_c = 1.0;
    for (const auto& p : sm->parts) {
      PotentialConstants part = mikhlin_data(*p, g, T, km, false);
      if (part.verdict == Verdict::CLClassOnly || part.verdict == Verdict::NotAssessed ||
          part.verdict == Verdict::SelfSimilarClass)
        throw UnsupportedSpec("sum contains a member outside the (pp1) catalog");
      out.mikhlin_c = std::max(out.mikhlin_c, part.mikhlin_c);
      out.vhat0_l1 += part.vhat0_l1;
      out.vhat0_linf += part.vhat0_linf;
    }
    return out;
  }
  throw UnsupportedSpec("spec is outside the catalog handled by mikhlin_data");
}

}  // namespace tdscat
