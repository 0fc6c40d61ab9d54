#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "tbstream/simd/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define TBSTREAM_X86 1
#endif
#if defined(__aarch64__)
#include <arm_neon.h>
#define TBSTREAM_NEON 1
#endif

namespace tbstream::simd {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Scalar: return "scalar";
    case Level::AVX2: return "avx2";
    case Level::NEON: return "neon";
  }
  return "scalar";
}

std::optional<Level> level_from_string(std::string_view name) {
  if (name == "scalar") return Level::Scalar;
  if (name == "avx2") return Level::AVX2;
  if (name == "neon") return Level::NEON;
  return std::nullopt;
}

bool supported(Level level) {
  switch (level) {
    case Level::Scalar: return true;
    case Level::AVX2:
#ifdef TBSTREAM_X86
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Level::NEON:
#ifdef TBSTREAM_NEON
      return true;
#else
      return false;
#endif
  }
  return false;
}

Level detected_level() {
  if (supported(Level::AVX2)) return Level::AVX2;
  if (supported(Level::NEON)) return Level::NEON;
  return Level::Scalar;
}

namespace {

Level initial_level() {
  if (const char* env = std::getenv("TBSTREAM_SIMD")) {
    auto lvl = level_from_string(env);
    if (lvl && supported(*lvl)) return *lvl;
  }
  return detected_level();
}

std::atomic<Level>& level_slot() {
  static std::atomic<Level> slot{initial_level()};
  return slot;
}

}  // namespace

Level active_level() { return level_slot().load(std::memory_order_relaxed); }

void set_level(Level level) {
  if (!supported(level)) {
    throw std::invalid_argument("SIMD level not supported here: " + std::string(to_string(level)));
  }
  level_slot().store(level, std::memory_order_relaxed);
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += a[i] * b[i];
    l1 += a[i + 1] * b[i + 1];
    l2 += a[i + 2] * b[i + 2];
    l3 += a[i + 3] * b[i + 3];
  }
  double s = (l0 + l1) + (l2 + l3);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

#ifdef TBSTREAM_X86
__attribute__((target("avx2"))) double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, prod);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}
#else
double dot_avx2(const double*, const double*, std::size_t) {
  throw std::invalid_argument("avx2 kernel not compiled for this target");
}
#endif

#ifdef TBSTREAM_NEON
double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0), hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double s = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
             (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}
#else
double dot_neon(const double*, const double*, std::size_t) {
  throw std::invalid_argument("neon kernel not compiled for this target");
}
#endif

double dot(Level level, const double* a, const double* b, std::size_t n) {
  switch (level) {
    case Level::AVX2: return dot_avx2(a, b, n);
    case Level::NEON: return dot_neon(a, b, n);
    case Level::Scalar: break;
  }
  return dot_scalar(a, b, n);
}

double dot(const double* a, const double* b, std::size_t n) { return dot(active_level(), a, b, n); }

void dot_many(Level level, const double* query, const double* rows, std::size_t nrows,
              std::size_t dim, double* out) {
  for (std::size_t r = 0; r < nrows; ++r) out[r] = dot(level, query, rows + r * dim, dim);
}

void dot_many(const double* query, const double* rows, std::size_t nrows, std::size_t dim,
              double* out) {
  dot_many(active_level(), query, rows, nrows, dim, out);
}

}  // namespace tbstream::simd
