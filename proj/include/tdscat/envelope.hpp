#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "tdscat/spectral.hpp"

namespace tdscat {

enum class EnvelopeKind { Const, QuenchSharp, QuenchSmooth, Tanh, LogOsc, InversePowerSeries };

// Scalar time profile f(t) with closed-form derivatives up to order 4.
struct TimeEnvelope {
  EnvelopeKind kind = EnvelopeKind::Const;
  double d = 1.0;                     // quench onset
  double omega = 1.0, delta = 0.0;    // LogOsc: sin(omega ln(1+|t|)) / (1+|t|)^delta
  std::vector<double> coefficients;   // InversePowerSeries: sum_j a_j (1+|t|)^{-j}
  double t0 = 0.0;                    // InversePowerSeries validity start T0

  static TimeEnvelope constant() { return {}; }
  static TimeEnvelope quench(double d, bool sharp) {
    if (!(d > 0)) throw ContractViolation("quench onset d must be positive");
    TimeEnvelope e;
    e.kind = sharp ? EnvelopeKind::QuenchSharp : EnvelopeKind::QuenchSmooth;
    e.d = d;
    return e;
  }
  static TimeEnvelope hyperbolic() {
    TimeEnvelope e;
    e.kind = EnvelopeKind::Tanh;
    return e;
  }
  static TimeEnvelope log_osc(double omega, double delta) {
    if (!(delta >= 0)) throw ContractViolation("LogOsc delta must be >= 0");
    TimeEnvelope e;
    e.kind = EnvelopeKind::LogOsc;
    e.omega = omega;
    e.delta = delta;
    return e;
  }
  static TimeEnvelope inverse_power(std::vector<double> coeffs, double T0) {
    if (!(T0 > 0)) throw ContractViolation("inverse power series T0 must be positive");
    TimeEnvelope e;
    e.kind = EnvelopeKind::InversePowerSeries;
    e.coefficients = std::move(coeffs);
    e.t0 = T0;
    return e;
  }

  double value(double t) const { return derivative(t, 0); }

  double derivative(double t, int a) const {
    if (a < 0 || a > 4) throw DomainError("envelope derivatives are available up to order 4");
    switch (kind) {
      case EnvelopeKind::Const:
        return a == 0 ? 1.0 : 0.0;
      case EnvelopeKind::QuenchSharp:
        return a == 0 ? (t >= d ? 1.0 : 0.0) : 0.0;
      case EnvelopeKind::QuenchSmooth:
        return CutoffProfile::derivative(t / (2.0 * d), a) * std::pow(2.0 * d, -a);
      case EnvelopeKind::Tanh:
        return tanh_derivative(t, a);
      case EnvelopeKind::LogOsc: {
        double sgn = (t < 0 && (a & 1)) ? -1.0 : 1.0;
        return sgn * logosc_derivative(std::abs(t), a);
      }
      case EnvelopeKind::InversePowerSeries: {
        double s = 1.0 + std::abs(t);
        double sgn = (t < 0 && (a & 1)) ? -1.0 : 1.0;
        double acc = 0.0;
        for (std::size_t j = 0; j < coefficients.size(); ++j) {
          double fall = 1.0;
          for (int r = 0; r < a; ++r) fall *= -static_cast<double>(j) - r;
          acc += coefficients[j] * fall * std::pow(s, -static_cast<double>(j) - a);
        }
        return sgn * acc;
      }
    }
    return 0.0;
  }

  bool is_constant() const { return kind == EnvelopeKind::Const; }

  // Points where f or a low derivative jumps; quadratures split there.
  std::vector<double> breakpoints() const {
    switch (kind) {
      case EnvelopeKind::QuenchSharp: return {d};
      case EnvelopeKind::QuenchSmooth: return {d, 2.0 * d};
      case EnvelopeKind::LogOsc:
      case EnvelopeKind::InversePowerSeries: return {0.0};
      default: return {};
    }
  }

  // Limit value as t -> +inf when f approaches it exponentially fast (or
  // reaches it at a finite time), with the time after which |f - f_inf| <= tol.
  std::optional<std::pair<double, double>> asymptote(double tol) const {
    switch (kind) {
      case EnvelopeKind::Const: return std::make_pair(1.0, 0.0);
      case EnvelopeKind::QuenchSharp: return std::make_pair(1.0, d);
      case EnvelopeKind::QuenchSmooth: return std::make_pair(1.0, 2.0 * d);
      case EnvelopeKind::Tanh: return std::make_pair(1.0, 0.5 * std::log(2.0 / tol));
      default: return std::nullopt;
    }
  }

  // Constant c with sup_t (1+t)^a / a! |f^(a)(t)| <= c^a (a >= 1), on the
  // range where the envelope is in its asymptotic regime.
  double mikhlin_c() const {
    switch (kind) {
      case EnvelopeKind::Const:
      case EnvelopeKind::QuenchSharp: return 1.0;
      case EnvelopeKind::Tanh: return 4.0;
      case EnvelopeKind::LogOsc: return std::max(1.0, omega + delta);
      case EnvelopeKind::InversePowerSeries: return 2.0;
      case EnvelopeKind::QuenchSmooth: {
        double c = 1.0;
        for (int a = 1; a <= 4; ++a) {
          double sup = 0.0;
          const int samples = 4000;
          for (int i = 0; i <= samples; ++i) {
            double t = d + d * i / samples;
            sup = std::max(sup, std::pow(1.0 + t, a) / factorial(a) * std::abs(derivative(t, a)));
          }
          c = std::max(c, std::pow(sup, 1.0 / a));
        }
        return c;
      }
    }
    return 1.0;
  }

  // Factor multiplying the spatial (pp1) majorant: sup|f| for bounded
  // profiles; the paper's weighted coefficient sum for power series.
  double majorant_factor() const {
    if (kind == EnvelopeKind::InversePowerSeries) {
      double acc = 0.0;
      for (std::size_t b = 0; b < coefficients.size(); ++b)
        acc += std::pow(2.0 / (1.0 + t0), static_cast<double>(b)) * std::abs(coefficients[b]);
      return acc;
    }
    return 1.0;
  }

  static double factorial(int a) {
    double f = 1.0;
    for (int i = 2; i <= a; ++i) f *= i;
    return f;
  }

 private:
  static double tanh_derivative(double t, int a) {
    // d^a/dt^a tanh = P_a(y), y = tanh t, P_{a+1} = P_a'(y) (1 - y^2)
    std::vector<double> p{0.0, 1.0};
    for (int k = 0; k < a; ++k) {
      std::vector<double> dp(p.size() > 1 ? p.size() - 1 : 1, 0.0);
      for (std::size_t j = 1; j < p.size(); ++j) dp[j - 1] = p[j] * static_cast<double>(j);
      std::vector<double> next(dp.size() + 2, 0.0);
      for (std::size_t j = 0; j < dp.size(); ++j) {
        next[j] += dp[j];
        next[j + 2] -= dp[j];
      }
      p = std::move(next);
    }
    double y = std::tanh(t), acc = 0.0;
    for (std::size_t j = p.size(); j-- > 0;) acc = acc * y + p[j];
    return acc;
  }

  double logosc_derivative(double s, int a) const {
    // f = Im (1+s)^z, z = i omega - delta
    const cplx z{-delta, omega};
    cplx fall{1.0, 0.0};
    for (int r = 0; r < a; ++r) fall *= (z - static_cast<double>(r));
    cplx w = fall * std::exp((z - static_cast<double>(a)) * std::log1p(s));
    return w.imag();
  }
};

}  // namespace tdscat
