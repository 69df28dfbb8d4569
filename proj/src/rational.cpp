#include "chflow/rational.hpp"

#include <charconv>
#include <stdexcept>

namespace chflow {

namespace {

long long parse_integer(std::string_view text, std::string_view whole) {
  long long value = 0;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("malformed rational '" + std::string(whole) + "'");
  }
  return value;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  const std::string_view whole = text;
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);

  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const long long num = parse_integer(text.substr(0, slash), whole);
    const long long den = parse_integer(text.substr(slash + 1), whole);
    if (den == 0) throw std::invalid_argument("zero denominator in '" + std::string(whole) + "'");
    return Rational(num, den);
  }

  if (const auto dot = text.find('.'); dot != std::string_view::npos) {
    std::string_view int_part = text.substr(0, dot);
    std::string_view frac_part = text.substr(dot + 1);
    bool negative = false;
    if (!int_part.empty() && (int_part.front() == '-' || int_part.front() == '+')) {
      negative = int_part.front() == '-';
      int_part.remove_prefix(1);
    }
    if (frac_part.size() > 15 || (int_part.empty() && frac_part.empty())) {
      throw std::invalid_argument("malformed rational '" + std::string(whole) + "'");
    }
    long long scale = 1;
    for (std::size_t k = 0; k < frac_part.size(); ++k) scale *= 10;
    const long long ip = int_part.empty() ? 0 : parse_integer(int_part, whole);
    const long long fp = frac_part.empty() ? 0 : parse_integer(frac_part, whole);
    if (ip < 0 || fp < 0) throw std::invalid_argument("malformed rational '" + std::string(whole) + "'");
    Rational r(ip * scale + fp, scale);
    return negative ? -r : r;
  }

  return Rational(parse_integer(text, whole));
}

std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

Eigen::MatrixXd to_double(const RationalMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = to_double(m(i, j));
  return out;
}

}  // namespace chflow
