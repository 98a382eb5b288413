#pragma once

#include <gtest/gtest.h>

#include <cmath>

#include "itl/error.hpp"
#include "itl/matrix.hpp"
#include "itl/random.hpp"

#define EXPECT_ITL_ERROR(statement, expected_kind)                                 \
  do {                                                                             \
    try {                                                                          \
      statement;                                                                   \
      ADD_FAILURE() << "expected " << itl::to_string(expected_kind) << " error";   \
    } catch (const itl::Error& e_) {                                               \
      EXPECT_EQ(e_.kind(), expected_kind) << e_.what();                            \
    }                                                                              \
  } while (0)

namespace itl::test {

inline Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

inline Vector gaussian_vector(std::size_t n, std::uint64_t seed) { return gaussian(n, 1, seed).column(0); }

// Gᵀ·G + shift·I: SPD without going through the library's generators.
inline SymMatrix gram_spd(std::size_t n, std::uint64_t seed, double shift = 0.5) {
  const Matrix g = gaussian(n, n, seed);
  Matrix a = g.transposed() * g;
  for (std::size_t i = 0; i < n; ++i) a(i, i) += shift;
  return SymMatrix(a);
}

inline Matrix tridiag(std::size_t n, double lower, double diag, double upper) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = diag;
    if (i > 0) m(i, i - 1) = lower;
    if (i + 1 < n) m(i, i + 1) = upper;
  }
  return m;
}

}  // namespace itl::test
