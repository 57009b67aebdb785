#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <map>
#include <tuple>

#include "tdscat/common.hpp"

namespace tdscat {

// Periodic lattice on [-L, L)^dim with N points per axis, row-major with
// axis 0 slowest. Frequencies xi_k = (pi/L) k, k in [-N/2, N/2).
struct GridSpec {
  int dim = 1;
  int n = 16;
  double half_length = pi;

  GridSpec() = default;
  GridSpec(int dim_, int n_, double L) : dim(dim_), n(n_), half_length(L) { validate(); }

  void validate() const {
    if (dim < 1 || dim > 3) throw ContractViolation("grid dim must be 1, 2 or 3");
    if (n < 8 || (n & (n - 1)) != 0)
      throw ContractViolation("grid points per axis must be a power of two >= 8");
    if (!(half_length > 0) || !std::isfinite(half_length))
      throw ContractViolation("grid half_length must be positive");
  }

  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(n);
    return s;
  }
  double spacing() const { return 2.0 * half_length / n; }
  double cell_volume() const { return std::pow(spacing(), dim); }
  double dxi() const { return pi / half_length; }
  double nyquist() const { return dxi() * (n / 2); }
  int wavenumber(int i) const { return i < n / 2 ? i : i - n; }
  double frequency(int i) const { return dxi() * wavenumber(i); }
  double coordinate(int i) const { return -half_length + spacing() * i; }

  std::array<int, 3> unravel(std::size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = dim - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(flat % n);
      flat /= n;
    }
    return idx;
  }

  std::size_t ravel(const std::array<int, 3>& idx) const {
    std::size_t flat = 0;
    for (int a = 0; a < dim; ++a) flat = flat * n + static_cast<std::size_t>(((idx[a] % n) + n) % n);
    return flat;
  }

  Vec3 point(std::size_t flat) const {
    auto idx = unravel(flat);
    Vec3 x{0, 0, 0};
    for (int a = 0; a < dim; ++a) x[a] = coordinate(idx[a]);
    return x;
  }

  Vec3 frequency_vector(std::size_t flat) const {
    auto idx = unravel(flat);
    Vec3 k{0, 0, 0};
    for (int a = 0; a < dim; ++a) k[a] = frequency(idx[a]);
    return k;
  }

  // Box in which every t that is an integer multiple of time_unit makes the
  // free flow e^{-it xi^2} N-periodic in the lattice index.
  static GridSpec commensurate(int dim, int n, double time_unit) {
    return GridSpec(dim, n, std::sqrt(pi * n * time_unit));
  }

  bool operator==(const GridSpec& o) const {
    return dim == o.dim && n == o.n && half_length == o.half_length;
  }
};

enum class Domain { Space, Frequency };

struct Field {
  GridSpec grid;
  std::vector<cplx> values;
  Domain domain = Domain::Space;

  Field() = default;
  explicit Field(const GridSpec& g, Domain d = Domain::Space)
      : grid(g), values(g.size(), cplx{0, 0}), domain(d) {}
  Field(const GridSpec& g, std::vector<cplx> v, Domain d = Domain::Space)
      : grid(g), values(std::move(v)), domain(d) {
    if (values.size() != grid.size()) throw ContractViolation("field length does not match grid");
  }

  std::size_t size() const { return values.size(); }
  cplx& operator[](std::size_t i) { return values[i]; }
  const cplx& operator[](std::size_t i) const { return values[i]; }

  void check_finite() const {
    for (const auto& v : values)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw NumericalFailure("field contains non-finite entries");
  }

  Field& operator+=(const Field& o) {
    require_same(o);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    require_same(o);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    return *this;
  }
  Field& operator*=(cplx s) {
    for (auto& v : values) v *= s;
    return *this;
  }
  // this += s * o
  void axpy(cplx s, const Field& o) {
    require_same(o);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += s * o.values[i];
  }

  void require_same(const Field& o) const {
    if (!(grid == o.grid) || values.size() != o.values.size())
      throw ContractViolation("fields live on different grids");
  }
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(cplx s, Field a) { return a *= s; }

// Pointwise product a*b.
inline Field multiply(const Field& a, const Field& b) {
  a.require_same(b);
  Field out(a.grid, a.domain);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <class F>
Field sample(const GridSpec& g, F&& f) {
  Field out(g);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(g.point(i));
  return out;
}

namespace detail {

// |xi|^2 on the lattice, cached per grid (read-only after creation).
inline std::shared_ptr<const std::vector<double>> squared_frequencies(const GridSpec& g) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, double>, std::shared_ptr<const std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(g.dim, g.n, g.half_length);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto v = std::make_shared<std::vector<double>>(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec3 k = g.frequency_vector(i);
    (*v)[i] = dot3(k, k);
  }
  cache.emplace(key, v);
  return v;
}

}  // namespace detail

}  // namespace tdscat
