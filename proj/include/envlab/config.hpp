#pragma once

#include <cstddef>
#include <cstdint>

namespace envlab {

struct Tolerances {
  double norm = 1e-9;
  double state = 1e-9;
  double ortho = 1e-9;
  double unitary = 1e-9;
  // Schmidt coefficients closer than this are treated as degenerate.
  double spec = 1e-8;
  double solver = 1e-9;
};

inline constexpr std::size_t kDefaultMaxTotalDim = 4096;
inline constexpr std::int64_t kDefaultMaxDenominator = 1'000'000;

struct Config {
  Tolerances tol{};
  std::size_t max_total_dim = kDefaultMaxTotalDim;
  std::int64_t max_denominator = kDefaultMaxDenominator;
  std::uint64_t seed = 0;
};

}  // namespace envlab
