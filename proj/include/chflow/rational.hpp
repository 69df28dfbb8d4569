#pragma once

#include <Eigen/Core>
#include <boost/rational.hpp>

#include <string>
#include <limits>
#include <string_view>

namespace chflow {

/// Exact rational scalar. Curvature entries are small multiples of 1/4, so a
/// 64-bit numerator/denominator pair never overflows for the dimensions used.
using Rational = boost::rational<long long>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RationalMatrix = Matrix<Rational>;
using RationalVector = Vector<Rational>;

/// Parses "p/q", "p" or a terminating decimal such as "0.25".
/// Throws std::invalid_argument on malformed input or a zero denominator.
Rational parse_rational(std::string_view text);

std::string to_string(const Rational& r);

// Equality against a bare integer (r == 0) does not terminate with Boost 1.74
// under C++20 rewritten comparisons, so compare rational to rational or use this.
inline bool is_zero(const Rational& r) { return r.numerator() == 0; }

inline double to_double(const Rational& r) {
  return boost::rational_cast<double>(r);
}

Eigen::MatrixXd to_double(const RationalMatrix& m);

}  // namespace chflow

namespace Eigen {

template <>
struct NumTraits<chflow::Rational> : GenericNumTraits<chflow::Rational> {
  using Real = chflow::Rational;
  using NonInteger = chflow::Rational;
  using Nested = chflow::Rational;
  using Literal = chflow::Rational;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 8,
    MulCost = 16
  };
  static inline Real epsilon() { return Real(0); }
  static inline Real dummy_precision() { return Real(0); }
  static inline int digits10() { return 0; }
  static inline int max_digits10() { return 0; }
  static inline Real highest() { return Real(std::numeric_limits<long long>::max()); }
  static inline Real lowest() { return Real(std::numeric_limits<long long>::min() + 1); }
};

}  // namespace Eigen
