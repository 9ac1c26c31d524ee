#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>

namespace envlab {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline Rational make_rational(std::int64_t num, std::int64_t den) {
  return Rational(BigInt(num), BigInt(den));
}

inline std::string to_string(const Rational& q) {
  return q.str();
}

inline double to_double(const Rational& q) {
  return q.convert_to<double>();
}

}  // namespace envlab
