#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstdint>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tdscat {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

// Precondition broken by the caller (shape mismatch, bad parameter).
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain (p < 1, M <= 0, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// NaN, overflow, divergence or a failed convergence diagnostic.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense oracle refused: grid larger than the cap.
struct CapExceeded : std::length_error {
  using std::length_error::length_error;
};

// Operation not defined for this potential family.
struct UnsupportedSpec : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline double dot3(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double norm3(const Vec3& a) { return std::sqrt(dot3(a, a)); }

// splitmix64 finaliser; used to derive per-member seeds from a global seed.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t member_seed(std::uint64_t global, std::uint64_t index) {
  return mix64(mix64(global) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

// Worker count: TDSCAT_THREADS if set, else hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("TDSCAT_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs fn(i) for i in [0, count). Each index is handled exactly once and
// callers write into index-addressed slots, so results do not depend on the
// number of workers.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  unsigned workers = std::min<std::size_t>(thread_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace tdscat
