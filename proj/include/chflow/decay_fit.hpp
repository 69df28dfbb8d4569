#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace chflow {

/// Negated least-squares slope of log y against t.
inline double fitted_decay_rate(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 2) throw std::invalid_argument("decay fit needs two or more samples");
  double st = 0.0, sl = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(y[k] > 0.0)) throw std::invalid_argument("decay fit needs positive samples");
    st += t[k];
    sl += std::log(y[k]);
  }
  const double n = static_cast<double>(t.size());
  st /= n;
  sl /= n;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    num += (t[k] - st) * (std::log(y[k]) - sl);
    den += (t[k] - st) * (t[k] - st);
  }
  return -num / den;
}

}  // namespace chflow
