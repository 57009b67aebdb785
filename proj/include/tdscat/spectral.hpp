#pragma once

#include <fftw3.h>

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "tdscat/grid.hpp"

namespace tdscat {

namespace detail {

// FFTW plans are created once per (dim, N, sign) and executed through the
// new-array interface, which is thread safe. Planning itself is serialised.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int dim, int n, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_tuple(dim, n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    int dims[3] = {n, n, n};
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n);
    fftw_complex* buf = fftw_alloc_complex(total);
    fftw_plan p = fftw_plan_dft(dim, dims, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    if (!p) throw NumericalFailure("FFTW planning failed");
    plans_.emplace(key, p);
    return p;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& kv : plans_) fftw_destroy_plan(kv.second);
  }
  std::mutex mu_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

// Unnormalised in-place FFT over the lattice index (no (-1)^k phase).
inline void raw_fft(std::vector<cplx>& v, const GridSpec& g, int sign) {
  fftw_plan p = PlanCache::instance().get(g.dim, g.n, sign);
  auto* d = reinterpret_cast<fftw_complex*>(v.data());
  fftw_execute_dft(p, d, d);
}

inline int index_parity(const GridSpec& g, std::size_t flat) {
  auto idx = g.unravel(flat);
  return (idx[0] + idx[1] + idx[2]) & 1;
}

// In-place: v <- IFFT(symbol(i) * FFT(v)) / N^dim. The (-1)^k phases of
// the unitary transform cancel, so they are skipped here.
template <class Symbol>
void apply_symbol_inplace(std::vector<cplx>& v, const GridSpec& g, Symbol&& symbol) {
  raw_fft(v, g, FFTW_FORWARD);
  const double scale = 1.0 / static_cast<double>(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= symbol(i) * scale;
  raw_fft(v, g, FFTW_BACKWARD);
}

}  // namespace detail

// Unitary DFT with the grid origin at -L:
// psi_hat_k = N^{-dim/2} sum_j psi_j e^{-i xi_k . x_j}.
inline Field forward_transform(const Field& psi) {
  if (psi.values.size() != psi.grid.size()) throw ContractViolation("field length does not match grid");
  Field out(psi.grid, psi.values, Domain::Frequency);
  detail::raw_fft(out.values, out.grid, FFTW_FORWARD);
  const double scale = 1.0 / std::sqrt(static_cast<double>(out.size()));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] *= detail::index_parity(out.grid, i) ? -scale : scale;
  return out;
}

inline Field inverse_transform(const Field& psi_hat) {
  if (psi_hat.values.size() != psi_hat.grid.size())
    throw ContractViolation("field length does not match grid");
  Field out(psi_hat.grid, psi_hat.values, Domain::Space);
  const double scale = 1.0 / std::sqrt(static_cast<double>(out.size()));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] *= detail::index_parity(out.grid, i) ? -scale : scale;
  detail::raw_fft(out.values, out.grid, FFTW_BACKWARD);
  return out;
}

// Diagonal operator on the frequency lattice.
struct Multiplier {
  GridSpec grid;
  std::vector<cplx> symbol;
  bool warning = false;
  std::string note;

  Multiplier() = default;
  explicit Multiplier(const GridSpec& g) : grid(g), symbol(g.size(), cplx{1, 0}) {}
};

inline Field apply(const Multiplier& m, const Field& psi) {
  if (!(m.grid == psi.grid)) throw ContractViolation("multiplier and field live on different grids");
  Field out = psi;
  detail::apply_symbol_inplace(out.values, out.grid, [&](std::size_t i) { return m.symbol[i]; });
  return out;
}

inline Multiplier compose(const Multiplier& a, const Multiplier& b) {
  if (!(a.grid == b.grid)) throw ContractViolation("multipliers live on different grids");
  Multiplier out(a.grid);
  for (std::size_t i = 0; i < out.symbol.size(); ++i) out.symbol[i] = a.symbol[i] * b.symbol[i];
  out.warning = a.warning || b.warning;
  return out;
}

inline Multiplier free_propagator(const GridSpec& g, double t) {
  auto k2 = detail::squared_frequencies(g);
  Multiplier m(g);
  for (std::size_t i = 0; i < m.symbol.size(); ++i) m.symbol[i] = std::polar(1.0, -t * (*k2)[i]);
  return m;
}

// e^{-itH0} psi with H0 = -Laplacian.
inline Field free_propagate(const Field& psi, double t) {
  if (t == 0.0) return psi;
  auto k2 = detail::squared_frequencies(psi.grid);
  Field out = psi;
  detail::apply_symbol_inplace(out.values, out.grid,
                               [&](std::size_t i) { return std::polar(1.0, -t * (*k2)[i]); });
  return out;
}

// Degree-9 smoothstep on [1/2, 1]: zero below 1/2, one from 1 on, C^4 joins.
struct CutoffProfile {
  static double value(double lambda) {
    if (lambda <= 0.5) return 0.0;
    if (lambda >= 1.0) return 1.0;
    double s = 2.0 * lambda - 1.0;
    double s5 = s * s * s * s * s;
    return s5 * (126.0 + s * (-420.0 + s * (540.0 + s * (-315.0 + s * 70.0))));
  }

  // d^a beta / d lambda^a for a <= 4.
  static double derivative(double lambda, int a) {
    if (a == 0) return value(lambda);
    if (lambda <= 0.5 || lambda >= 1.0) return 0.0;
    double s = 2.0 * lambda - 1.0;
    // coefficients of S(s) = sum c_j s^j, j = 5..9
    const double c[10] = {0, 0, 0, 0, 0, 126.0, -420.0, 540.0, -315.0, 70.0};
    double acc = 0.0;
    for (int j = a; j <= 9; ++j) {
      double fall = 1.0;
      for (int r = 0; r < a; ++r) fall *= (j - r);
      acc += c[j] * fall * std::pow(s, j - a);
    }
    return acc * std::pow(2.0, a);
  }
};

enum class CutoffKind { High, Low };

// Symbol beta(|xi|/M) (high) or 1 - beta(|xi|/M) (low).
inline Multiplier make_cutoff(const GridSpec& g, CutoffKind kind, double M) {
  if (!(M > 0)) throw DomainError("cutoff threshold M must be positive");
  auto k2 = detail::squared_frequencies(g);
  Multiplier m(g);
  for (std::size_t i = 0; i < m.symbol.size(); ++i) {
    double b = CutoffProfile::value(std::sqrt((*k2)[i]) / M);
    m.symbol[i] = kind == CutoffKind::High ? b : 1.0 - b;
  }
  if (M >= g.nyquist()) {
    m.warning = true;
    m.note = "cutoff threshold at or above the Nyquist frequency";
  }
  return m;
}

// (sum |psi_i|^p h^dim)^{1/p}; max |psi_i| for p = inf.
inline double lp_norm(const Field& psi, double p) {
  if (!(p >= 1.0)) throw DomainError("lp_norm requires p >= 1");
  if (std::isinf(p)) {
    double m = 0.0;
    for (const auto& v : psi.values) m = std::max(m, std::abs(v));
    return m;
  }
  const double w = psi.grid.cell_volume();
  double acc = 0.0;
  if (p == 2.0) {
    for (const auto& v : psi.values) acc += std::norm(v);
    return std::sqrt(acc * w);
  }
  if (p == 1.0) {
    for (const auto& v : psi.values) acc += std::abs(v);
    return acc * w;
  }
  for (const auto& v : psi.values) acc += std::pow(std::abs(v), p);
  return std::pow(acc * w, 1.0 / p);
}

inline constexpr double inf = std::numeric_limits<double>::infinity();

// ||grad psi||_2 computed spectrally.
inline double gradient_norm(const Field& psi) {
  Field hat = forward_transform(psi);
  auto k2 = detail::squared_frequencies(psi.grid);
  double acc = 0.0;
  for (std::size_t i = 0; i < hat.size(); ++i) acc += (*k2)[i] * std::norm(hat[i]);
  return std::sqrt(acc * psi.grid.cell_volume());
}

}  // namespace tdscat
