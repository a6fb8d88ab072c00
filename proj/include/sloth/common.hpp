// SPDX-License-Identifier: Apache-2.0
//
// Shared plumbing: error type, stable scalar transforms, deterministic RNG,
// bounded worker pool.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace sloth {

/// All library failures are reported as `sloth::error` with a short machine
/// code ("validation", "dimension", "infeasible", "io", ...) plus a message.
class error : public std::runtime_error {
 public:
  error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Branch-free logistic; tanh saturates cleanly so no overflow guard is needed.
inline double sigmoid(double x) { return 0.5 * (1.0 + std::tanh(0.5 * x)); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double sigmoid_deriv(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

/// Deterministic 64-bit generator (splitmix64). Used instead of the standard
/// distributions so that streams are identical across platforms and library
/// versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (unbuffered; one draw per call).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Derive an independent stream, e.g. one per restart or per family.
  Rng fork(uint64_t index) const {
    Rng child(state_ ^ (0x632be59bd9b4e019ULL * (index + 1)));
    child.next_u64();
    return child;
  }

 private:
  uint64_t state_;
};

/// Runs fn(i) for i in [0, count) on at most `workers` threads. Results must
/// be written to pre-sized slots so the output is independent of scheduling.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace sloth
