#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace tbstream::simd {

enum class Level { Scalar, AVX2, NEON };

std::string_view to_string(Level level);
std::optional<Level> level_from_string(std::string_view name);

/// Best level the running CPU supports.
Level detected_level();
bool supported(Level level);

/// Level used by the dispatching entry points. Defaults to detected_level(),
/// or to TBSTREAM_SIMD (scalar|avx2|neon) when that names a supported level.
Level active_level();
/// Throws std::invalid_argument for an unsupported level.
void set_level(Level level);

// Every variant accumulates in four lanes (i mod 4), reduces them as
// (l0 + l1) + (l2 + l3), then adds the tail in order, without fused
// multiply-add. Variants therefore return bit-identical results.

double dot_scalar(const double* a, const double* b, std::size_t n);
double dot_avx2(const double* a, const double* b, std::size_t n);
double dot_neon(const double* a, const double* b, std::size_t n);

double dot(const double* a, const double* b, std::size_t n);
double dot(Level level, const double* a, const double* b, std::size_t n);

/// out[r] = dot(query, rows + r * dim, dim) for each of `nrows` rows.
void dot_many(Level level, const double* query, const double* rows, std::size_t nrows,
              std::size_t dim, double* out);
void dot_many(const double* query, const double* rows, std::size_t nrows, std::size_t dim,
              double* out);

}  // namespace tbstream::simd
