#include "chflow/frame_algebra.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>

namespace chflow {

namespace {

void check_index(int m, int s) {
  if (m < 1) throw std::out_of_range("complex dimension must be >= 1");
  if (s < 1 || s > 2 * m) {
    throw std::out_of_range("frame index " + std::to_string(s) + " outside 1.." +
                            std::to_string(2 * m));
  }
}

int block_of(int s) { return (s + 1) / 2; }
bool is_odd(int s) { return s % 2 == 1; }

// Coefficient of c for the tabulated classes only; nullopt-like flag otherwise.
bool table_value(int i, int j, int k, int l, Rational& out) {
  if (i == l && j == k && i != j) {
    out = block_of(i) == block_of(j) ? Rational(-1) : Rational(-1, 4);
    return true;
  }
  // The three mixed classes need two distinct J-pairs (k,k+1), (p,p+1).
  // (k, k+1, p+1, p) -> -1/2
  if (is_odd(i) && j == i + 1 && is_odd(l) && k == l + 1 && block_of(i) != block_of(l)) {
    out = Rational(-1, 2);
    return true;
  }
  // (k, p, p+1, k+1) -> -1/4
  if (is_odd(i) && l == i + 1 && is_odd(j) && k == j + 1 && block_of(i) != block_of(j)) {
    out = Rational(-1, 4);
    return true;
  }
  // (k, p+1, p, k+1) -> +1/4
  if (is_odd(i) && l == i + 1 && !is_odd(j) && k == j - 1 && block_of(i) != block_of(j)) {
    out = Rational(1, 4);
    return true;
  }
  return false;
}

RationalMatrix f_block() {
  RationalMatrix f = RationalMatrix::Constant(4, 4, Rational(0));
  f(0, 0) = f(1, 1) = f(2, 2) = f(3, 3) = Rational(-1);
  f(0, 1) = f(1, 0) = Rational(3);
  f(2, 3) = f(3, 2) = Rational(-3);
  return f;
}

Rational dot(const RationalVector& a, const RationalVector& b) {
  Rational s(0);
  for (Eigen::Index k = 0; k < a.size(); ++k) s += a(k) * b(k);
  return s;
}

RationalVector apply_j(int m, const RationalVector& x) {
  RationalVector out = RationalVector::Constant(2 * m, Rational(0));
  for (int s = 1; s <= 2 * m; ++s) {
    const JImage img = j_action(m, s);
    out(img.index - 1) += Rational(img.sign) * x(s - 1);
  }
  return out;
}

Rational riemann_multilinear(int m, const RationalVector& x, const RationalVector& y,
                             const RationalVector& z, const RationalVector& w) {
  const int n = 2 * m;
  Rational s(0);
  for (int i = 1; i <= n; ++i) {
    if (is_zero(x(i - 1))) continue;
    for (int j = 1; j <= n; ++j) {
      if (is_zero(y(j - 1))) continue;
      for (int k = 1; k <= n; ++k) {
        if (is_zero(z(k - 1))) continue;
        for (int l = 1; l <= n; ++l) {
          if (is_zero(w(l - 1))) continue;
          const Rational r = riemann_coefficient(m, i, j, k, l);
          if (!is_zero(r)) s += r * x(i - 1) * y(j - 1) * z(k - 1) * w(l - 1);
        }
      }
    }
  }
  return s;
}

void merge_into(std::map<Rational, int>& acc, const Rational& v, int mult) {
  if (mult > 0) acc[v] += mult;
}

}  // namespace

JImage j_action(int m, int s) {
  check_index(m, s);
  if (is_odd(s)) return {s + 1, 1};
  return {s - 1, -1};
}

double GammaBasisElement::scale() const {
  return norm == GammaNorm::Half ? 0.5 : 1.0 / std::sqrt(2.0);
}

std::string GammaBasisElement::label() const {
  const char* g = group == GammaGroup::I ? "I" : (group == GammaGroup::II ? "II" : "III");
  return std::string(g) + ":e" + std::to_string(i) + "e" + std::to_string(j);
}

std::vector<GammaBasisElement> build_gamma_basis(int m) {
  if (m < 1) throw std::out_of_range("complex dimension must be >= 1");
  std::vector<GammaBasisElement> basis;
  basis.reserve(static_cast<std::size_t>(gamma_dimension(m)));
  for (int i = 1; i <= 2 * m; ++i) basis.push_back({GammaGroup::I, i, i, GammaNorm::Half});
  for (int j = 1; j <= m; ++j)
    basis.push_back({GammaGroup::II, 2 * j - 1, 2 * j, GammaNorm::InvSqrt2});
  for (int a = 1; a <= m; ++a) {
    for (int b = a + 1; b <= m; ++b) {
      basis.push_back({GammaGroup::III, 2 * a - 1, 2 * b - 1, GammaNorm::InvSqrt2});
      basis.push_back({GammaGroup::III, 2 * a, 2 * b, GammaNorm::InvSqrt2});
      basis.push_back({GammaGroup::III, 2 * a - 1, 2 * b, GammaNorm::InvSqrt2});
      basis.push_back({GammaGroup::III, 2 * a, 2 * b - 1, GammaNorm::InvSqrt2});
    }
  }
  return basis;
}

Rational riemann_coefficient(int m, int i, int j, int k, int l) {
  check_index(m, i);
  check_index(m, j);
  check_index(m, k);
  check_index(m, l);
  // Orbit under antisymmetry in each pair and pair exchange.
  const std::array<std::array<int, 4>, 8> orbit{{{i, j, k, l},
                                                 {j, i, k, l},
                                                 {i, j, l, k},
                                                 {j, i, l, k},
                                                 {k, l, i, j},
                                                 {l, k, i, j},
                                                 {k, l, j, i},
                                                 {l, k, j, i}}};
  constexpr std::array<int, 8> sign{1, -1, -1, 1, 1, -1, -1, 1};
  for (std::size_t t = 0; t < orbit.size(); ++t) {
    Rational v;
    const auto& o = orbit[t];
    if (table_value(o[0], o[1], o[2], o[3], v)) return Rational(sign[t]) * v;
  }
  return Rational(0);
}

Rational riemann_component(int m, const Rational& c, int i, int j, int k, int l) {
  return c * riemann_coefficient(m, i, j, k, l);
}

Rational sectional_curvature(int m, const Rational& c, const RationalVector& x,
                             const RationalVector& y) {
  if (x.size() != 2 * m || y.size() != 2 * m)
    throw std::invalid_argument("vectors must have 2m components");
  const Rational xx = dot(x, x);
  const Rational yy = dot(y, y);
  if (is_zero(xx) || is_zero(yy)) throw std::invalid_argument("sectional curvature of a zero vector");
  if (!is_zero(dot(x, y))) throw std::invalid_argument("sectional curvature needs orthogonal vectors");
  return c * riemann_multilinear(m, x, y, y, x) / (xx * yy);
}

Rational sectional_curvature_closed_form(int m, const Rational& c, const RationalVector& x,
                                         const RationalVector& y) {
  const Rational xx = dot(x, x);
  const Rational yy = dot(y, y);
  if (is_zero(xx) || is_zero(yy)) throw std::invalid_argument("sectional curvature of a zero vector");
  if (!is_zero(dot(x, y))) throw std::invalid_argument("sectional curvature needs orthogonal vectors");
  const Rational jxy = dot(apply_j(m, x), y);
  return -c / Rational(4) * (Rational(1) + Rational(3) * jxy * jxy / (xx * yy));
}

Rational wedge_action_entry(int m, const Rational& c, int i, int j, int k, int l) {
  return Rational(4) * riemann_component(m, c, i, j, l, k);
}

Rational symmetric_action_raw(int m, const Rational& c, int i, int j, int p, int q) {
  return c * (riemann_coefficient(m, i, p, q, j) + riemann_coefficient(m, j, p, q, i) +
              riemann_coefficient(m, i, q, p, j) + riemann_coefficient(m, j, q, p, i));
}

CurvatureMatrix assemble_R_gamma_bruteforce(int m, const Rational& c) {
  const auto basis = build_gamma_basis(m);
  const auto dim = static_cast<Eigen::Index>(basis.size());
  CurvatureMatrix out{m, c, RationalMatrix::Constant(dim, dim, Rational(0))};
  for (Eigen::Index a = 0; a < dim; ++a) {
    const auto& ga = basis[static_cast<std::size_t>(a)];
    for (Eigen::Index b = 0; b < dim; ++b) {
      const auto& gb = basis[static_cast<std::size_t>(b)];
      const Rational raw = symmetric_action_raw(m, c, ga.i, ga.j, gb.i, gb.j);
      if (ga.norm == GammaNorm::Half && gb.norm == GammaNorm::Half) {
        out.entries(a, b) = raw / Rational(4);
      } else if (ga.norm == GammaNorm::InvSqrt2 && gb.norm == GammaNorm::InvSqrt2) {
        out.entries(a, b) = raw / Rational(2);
      } else if (!is_zero(raw)) {
        throw std::logic_error("irrational curvature-operator entry between " + ga.label() +
                               " and " + gb.label());
      }
    }
  }
  return out;
}

RationalMatrix a_block(int m) {
  RationalMatrix a = RationalMatrix::Constant(2 * m, 2 * m, Rational(1));
  for (int k = 0; k < m; ++k) {
    a(2 * k, 2 * k) = a(2 * k + 1, 2 * k + 1) = Rational(0);
    a(2 * k, 2 * k + 1) = a(2 * k + 1, 2 * k) = Rational(4);
  }
  return a;
}

RationalMatrix b_block(int m) {
  RationalMatrix b = RationalMatrix::Constant(m, m, Rational(0));
  for (int k = 0; k < m; ++k) b(k, k) = Rational(-4);
  return b;
}

RationalMatrix c_block(int m) {
  const int blocks = m * (m - 1) / 2;
  RationalMatrix cm = RationalMatrix::Constant(4 * blocks, 4 * blocks, Rational(0));
  const RationalMatrix f = f_block();
  for (int k = 0; k < blocks; ++k) cm.block(4 * k, 4 * k, 4, 4) = f;
  return cm;
}

CurvatureMatrix block_R_gamma(int m, const Rational& c) {
  if (m < 1) throw std::out_of_range("complex dimension must be >= 1");
  const Eigen::Index dim = gamma_dimension(m);
  RationalMatrix diag = RationalMatrix::Constant(dim, dim, Rational(0));
  diag.topLeftCorner(2 * m, 2 * m) = a_block(m);
  diag.block(2 * m, 2 * m, m, m) = b_block(m);
  const Eigen::Index off = 3 * m;
  diag.bottomRightCorner(dim - off, dim - off) = c_block(m);
  const Rational scale = -c / Rational(4);
  return {m, c, diag.unaryExpr([&](const Rational& v) { return scale * v; })};
}

std::vector<SpectralValue> spectrum_R_gamma(int m, const Rational& c) {
  if (m < 1) throw std::out_of_range("complex dimension must be >= 1");
  const Rational s = -c / Rational(4);
  std::map<Rational, int> acc;
  merge_into(acc, s * Rational(2 * (m + 1)), 1);
  merge_into(acc, s * Rational(2), m - 1);
  merge_into(acc, s * Rational(-4), m);
  merge_into(acc, s * Rational(-4), m);  // B_m
  const int f_blocks = m * (m - 1) / 2;
  merge_into(acc, s * Rational(2), 2 * f_blocks);
  merge_into(acc, s * Rational(-4), 2 * f_blocks);
  std::vector<SpectralValue> out;
  for (const auto& [v, k] : acc) out.push_back({v, k});
  return out;
}

Eigen::VectorXd numeric_spectrum(const CurvatureMatrix& r) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(r.to_double(), Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

Eigen::VectorXd top_eigenvector(const CurvatureMatrix& r) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(r.to_double());
  return solver.eigenvectors().col(solver.eigenvalues().size() - 1);
}

bool ModelEigenvectorReport::all_hold() const {
  return std::all_of(identities.begin(), identities.end(),
                     [](const EigenIdentity& e) { return e.holds; });
}

std::vector<std::string> ModelEigenvectorReport::failures() const {
  std::vector<std::string> out;
  for (const auto& e : identities)
    if (!e.holds) out.push_back(e.name);
  return out;
}

ModelEigenvectorReport verify_model_eigenvectors(int m) {
  const RationalMatrix a = a_block(m);
  const Eigen::Index n = 2 * m;
  ModelEigenvectorReport report{m, {}};
  auto check = [&](const std::string& name, const RationalVector& v, const Rational& mu) {
    const RationalVector av = a * v;
    const RationalVector expected = v.unaryExpr([&](const Rational& x) { return mu * x; });
    report.identities.push_back({name, mu, av == expected});
  };

  check("X", RationalVector::Constant(n, Rational(1)), Rational(2 * (m + 1)));
  for (int i = 1; i <= m - 1; ++i) {
    RationalVector y = RationalVector::Constant(n, Rational(0));
    y(0) = y(1) = Rational(-1);
    y(2 * i) = y(2 * i + 1) = Rational(1);  // entries 2i+1, 2i+2 (1-based)
    check("Y" + std::to_string(i), y, Rational(2));
  }
  for (int i = 1; i <= m; ++i) {
    RationalVector z = RationalVector::Constant(n, Rational(0));
    z(2 * i - 2) = Rational(-1);
    z(2 * i - 1) = Rational(1);
    check("Z" + std::to_string(i), z, Rational(-4));
  }
  return report;
}

EinsteinConstants einstein_constants(int m, const Rational& c) {
  if (m < 1) throw std::out_of_range("complex dimension must be >= 1");
  if (c <= 0) throw std::invalid_argument("curvature scale c must be positive");
  const Rational lambda = Rational(m + 1) * c / Rational(2);
  const Rational scalar = -Rational(m) * Rational(m + 1) * c;
  Rational sum(0);
  const RationalMatrix a = a_block(m);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) sum += a(i, j);
  sum *= -c / Rational(4);
  return {lambda, scalar, sum, sum == scalar && lambda == -scalar / Rational(2 * m)};
}

Rational stability_bound_coefficient(int m) { return -Rational(m - 1, 2); }

Eigen::VectorXd gamma_coordinates(const std::vector<GammaBasisElement>& basis,
                                  const Eigen::MatrixXd& h) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(basis.size()));
  const double two_sqrt2 = 2.0 * std::sqrt(2.0);
  for (std::size_t a = 0; a < basis.size(); ++a) {
    const auto& g = basis[a];
    const double hij = h(g.i - 1, g.j - 1);
    v(static_cast<Eigen::Index>(a)) = g.i == g.j ? 2.0 * hij : two_sqrt2 * hij;
  }
  return v;
}

Eigen::MatrixXd from_gamma_coordinates(const std::vector<GammaBasisElement>& basis,
                                       const Eigen::VectorXd& v) {
  int n = 0;
  for (const auto& g : basis) n = std::max(n, g.j);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  const double two_sqrt2 = 2.0 * std::sqrt(2.0);
  for (std::size_t a = 0; a < basis.size(); ++a) {
    const auto& g = basis[a];
    const double va = v(static_cast<Eigen::Index>(a));
    if (g.i == g.j) {
      h(g.i - 1, g.i - 1) = va / 2.0;
    } else {
      h(g.i - 1, g.j - 1) = h(g.j - 1, g.i - 1) = va / two_sqrt2;
    }
  }
  return h;
}

}  // namespace chflow
