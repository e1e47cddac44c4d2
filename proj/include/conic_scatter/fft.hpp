#pragma once

// Minimal owning wrapper around FFTW's complex 1-D transforms.

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "conic_scatter/errors.hpp"

namespace conic_scatter {

namespace detail {
// Planner calls are not thread-safe in FFTW; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

class FourierTransform {
 public:
  explicit FourierTransform(std::size_t n) : n_(n) {
    require(n >= 1, ErrorKind::invalid_input, "transform size must be positive");
    in_ = fftw_alloc_complex(n);
    out_ = fftw_alloc_complex(n);
    require(in_ && out_, ErrorKind::numeric, "fftw allocation failed");
    std::lock_guard lock(detail::fftw_planner_mutex());
    const int size = static_cast<int>(n);
    forward_ = fftw_plan_dft_1d(size, in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_1d(size, in_, out_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  FourierTransform(const FourierTransform&) = delete;
  FourierTransform& operator=(const FourierTransform&) = delete;
  ~FourierTransform() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(in_);
    fftw_free(out_);
  }

  std::size_t size() const { return n_; }

  /// c_k = (1/N) sum_j u_j e^{-2 pi i jk/N}.
  std::vector<std::complex<double>> coefficients(std::span<const std::complex<double>> u) {
    require(u.size() == n_, ErrorKind::invalid_input, "grid size does not match the transform");
    run(forward_, u);
    std::vector<std::complex<double>> c(n_);
    const double inv = 1.0 / static_cast<double>(n_);
    for (std::size_t k = 0; k < n_; ++k) c[k] = std::complex<double>(out_[k][0], out_[k][1]) * inv;
    return c;
  }

  /// u_j = sum_k c_k e^{2 pi i jk/N}.
  std::vector<std::complex<double>> synthesize(std::span<const std::complex<double>> c) {
    require(c.size() == n_, ErrorKind::invalid_input, "coefficient count does not match the transform");
    run(backward_, c);
    std::vector<std::complex<double>> u(n_);
    for (std::size_t j = 0; j < n_; ++j) u[j] = {out_[j][0], out_[j][1]};
    return u;
  }

 private:
  void run(fftw_plan plan, std::span<const std::complex<double>> x) {
    for (std::size_t j = 0; j < n_; ++j) {
      in_[j][0] = x[j].real();
      in_[j][1] = x[j].imag();
    }
    fftw_execute(plan);
  }

  std::size_t n_;
  fftw_complex* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// Index of frequency m in an N-point transform.
inline std::size_t frequency_index(long m, std::size_t n) {
  const long nn = static_cast<long>(n);
  return static_cast<std::size_t>(((m % nn) + nn) % nn);
}

}  // namespace conic_scatter
