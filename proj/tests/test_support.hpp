#pragma once

#include "chflow/rational.hpp"

#include <doctest.h>

namespace doctest {

template <>
struct StringMaker<chflow::Rational> {
  static String convert(const chflow::Rational& r) { return chflow::to_string(r).c_str(); }
};

}  // namespace doctest
