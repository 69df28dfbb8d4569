#include "chflow/frame_algebra.hpp"
#include "chflow/tensor_calculus.hpp"

#include "test_support.hpp"

#include <Eigen/LU>

#include <cmath>
#include <functional>
#include <random>

using namespace chflow;

namespace {

std::shared_ptr<ChartGrid> ball_grid(int m, double c, double spacing, double half_width, double radius) {
  auto chart = std::make_shared<BergmanBallChart>(m, c);
  return std::make_shared<ChartGrid>(chart, ChartGrid::Options{spacing, half_width, radius, true});
}

SymTensorField sample(const std::shared_ptr<ChartGrid>& grid, const std::function<SmallMatrix(const SmallVector&)>& f) {
  SymTensorField h(grid);
  for (Eigen::Index k = 0; k < grid->size(); ++k)
    if (grid->inside(k)) h.set(k, f(grid->point(k)));
  return h;
}

// phi = exp(-a |x|^2) with its exact first and second derivatives.
struct Gaussian {
  double a = 1.5;
  double value(const SmallVector& x) const { return std::exp(-a * x.squaredNorm()); }
  SmallVector grad(const SmallVector& x) const { return -2.0 * a * value(x) * x; }
  SmallMatrix hessian(const SmallVector& x) const {
    const auto n = x.size();
    return value(x) * (4.0 * a * a * x * x.transpose() - 2.0 * a * SmallMatrix::Identity(n, n));
  }
  // g^ij (d_i d_j phi - Gamma^k_ij d_k phi)
  double laplacian(const Chart& chart, const SmallVector& x) const {
    const LocalGeometry geo = local_geometry(chart.jet(x, 1));
    const SmallVector dphi = grad(x);
    SmallMatrix hess = hessian(x);
    for (int k = 0; k < geo.n; ++k) hess -= dphi(k) * geo.gamma[k];
    return (geo.ginv.array() * hess.array()).sum();
  }
};

// Smooth compactly supported bump (1 - |x - x0|^2 / r^2)^6.
double bump(const SmallVector& x, const SmallVector& x0, double r) {
  const double t = (x - x0).squaredNorm() / (r * r);
  return t >= 1.0 ? 0.0 : std::pow(1.0 - t, 6);
}

SmallMatrix random_symmetric(std::mt19937& rng, int n) {
  std::normal_distribution<double> nd;
  SmallMatrix s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) s(i, j) = s(j, i) = nd(rng);
  return s;
}

Eigen::Index node_at(const ChartGrid& grid, const SmallVector& x) {
  Eigen::Index idx = grid.origin();
  for (int a = 0; a < grid.dim(); ++a) idx += std::lround(x(a) / grid.spacing()) * grid.stride(a);
  return idx;
}

}  // namespace

TEST_CASE("packed symmetric storage") {
  std::mt19937 rng(1);
  for (int n : {2, 4, 6}) {
    const SmallMatrix s = random_symmetric(rng, n);
    const PackedVector p = pack(s);
    CHECK(p.size() == sym_components(n));
    CHECK(unpack(p, n) == s);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) CHECK(p(sym_index(i, j, n)) == s(i, j));
  }
}

TEST_CASE("field arithmetic") {
  auto grid = ball_grid(1, 4.0, 0.1, 0.5, 0.8);
  auto other = ball_grid(1, 4.0, 0.1, 0.5, 0.8);
  SymTensorField a = sample(grid, [](const SmallVector& x) { return SmallMatrix::Identity(2, 2) * x(0); });
  SymTensorField b = 2.0 * a;
  CHECK(((a + a).values() - b.values()).norm() == 0.0);
  CHECK((b - a).values() == a.values());
  CHECK_THROWS_AS(a += SymTensorField(other), std::invalid_argument);
}

TEST_CASE("metric is parallel up to discretization error") {
  double previous = 0.0;
  for (double h : {0.05, 0.025}) {
    auto grid = ball_grid(1, 4.0, h, 0.6, 1.0);
    const SymTensorField g = sample(grid, [&](const SmallVector& x) { return grid->chart().metric(x); });
    const ThreeTensorField ng = covariant_derivative(g);
    double worst = 0.0;
    for (Eigen::Index k : evaluation_nodes(*grid, StencilOrder::Second))
      if (GeodesicBallRegion{0.7}.contains(*grid, k))
        worst = std::max(worst, ng.values().col(k).cwiseAbs().maxCoeff() / g.values().col(k).cwiseAbs().maxCoeff());
    CHECK(worst < 50.0 * h * h);
    if (previous > 0.0) CHECK(previous / worst == doctest::Approx(4.0).epsilon(0.1));
    previous = worst;
  }
  auto grid = ball_grid(2, 1.0, 0.1, 0.3, 0.5);
  const SymTensorField g = sample(grid, [&](const SmallVector& x) { return grid->chart().metric(x); });
  const ThreeTensorField ng = covariant_derivative(g, StencilOrder::Fourth);
  for (Eigen::Index k : evaluation_nodes(*grid, StencilOrder::Fourth))
    CHECK(ng.values().col(k).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("covariant derivative at the origin reduces to the partial derivative") {
  auto grid = ball_grid(2, 4.0, 0.1, 0.3, 0.5);
  std::mt19937 rng(6);
  const SmallMatrix a = random_symmetric(rng, 4), b = random_symmetric(rng, 4), c = random_symmetric(rng, 4);
  const SymTensorField h = sample(grid, [&](const SmallVector& x) { return SmallMatrix(a + x(0) * b + x(3) * c); });
  const Eigen::Index o = grid->origin();
  for (StencilOrder s : {StencilOrder::Second, StencilOrder::Fourth}) {
    const ThreeTensorField nh = covariant_derivative(h, s);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        CHECK(nh(i, j, 0, o) == doctest::Approx(b(i, j)).epsilon(1e-12));
        CHECK(nh(i, j, 3, o) == doctest::Approx(c(i, j)).epsilon(1e-12));
        CHECK(std::abs(nh(i, j, 1, o)) < 1e-12);
      }
  }
  // linearity
  const SymTensorField h2 = sample(grid, [&](const SmallVector& x) { return SmallMatrix(x.squaredNorm() * b); });
  const ThreeTensorField lhs = covariant_derivative(3.0 * h + h2);
  const ThreeTensorField r1 = covariant_derivative(h), r2 = covariant_derivative(h2);
  CHECK((lhs.values() - 3.0 * r1.values() - r2.values()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(tensor_jet(*grid, h.values(), 0, StencilOrder::Second, 1), std::out_of_range);
}

TEST_CASE("Lichnerowicz Laplacian of a conformal multiple of the metric") {
  const Gaussian phi;
  auto grid = ball_grid(1, 4.0, 0.0125, 0.5, 1.0);
  const Chart& chart = grid->chart();
  const SymTensorField h = sample(grid, [&](const SmallVector& x) { return SmallMatrix(phi.value(x) * chart.metric(x)); });
  const LichnerowiczResult lich = lichnerowicz(h);
  double worst = 0.0, scale = 0.0;
  for (Eigen::Index k : evaluation_nodes(*grid, StencilOrder::Second)) {
    const SmallVector x = grid->point(k);
    const SmallMatrix expected = phi.laplacian(chart, x) * chart.metric(x);
    worst = std::max(worst, (lich.general.at(k) - expected).cwiseAbs().maxCoeff());
    scale = std::max(scale, expected.cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-2 * scale);
  CHECK(lich.max_path_difference < 1e-9 * scale);
}

TEST_CASE("rough Laplacian converges at the stencil order") {
  const Gaussian phi;
  SmallVector x(2);
  x << 0.2, -0.1;
  auto error_at = [&](double h, StencilOrder s) {
    auto grid = ball_grid(1, 4.0, h, 0.4, 1.0);
    const Chart& chart = grid->chart();
    const SymTensorField f =
        sample(grid, [&](const SmallVector& p) { return SmallMatrix(phi.value(p) * chart.metric(p)); });
    const SymTensorField lap = rough_laplacian(f, s);
    const Eigen::Index k = node_at(*grid, x);
    REQUIRE((grid->point(k) - x).norm() < 1e-12);
    return (lap.at(k) - phi.laplacian(chart, x) * chart.metric(x)).cwiseAbs().maxCoeff();
  };
  const double e1 = error_at(0.05, StencilOrder::Second), e2 = error_at(0.025, StencilOrder::Second);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.1));
  const double f1 = error_at(0.05, StencilOrder::Fourth), f2 = error_at(0.025, StencilOrder::Fourth);
  CHECK(std::log2(f1 / f2) > 3.6);
  CHECK(f2 < e2);
}

TEST_CASE("curvature action at the origin matches the gamma-basis operator") {
  const double c = 4.0;
  std::mt19937 rng(12);
  for (int m : {1, 2}) {
    const int n = 2 * m;
    const GeodesicNormalChart chart(m, c);
    const LocalGeometry geo = local_geometry(chart.jet(SmallVector::Zero(n), 2));
    const RiemannTensor r = riemann_tensor(geo);
    const auto basis = build_gamma_basis(m);
    const Eigen::MatrixXd rg = block_R_gamma(m, Rational(4)).to_double();
    for (int trial = 0; trial < 5; ++trial) {
      const SmallMatrix h = random_symmetric(rng, n);
      const Eigen::VectorXd lhs = gamma_coordinates(basis, Eigen::MatrixXd(2.0 * curvature_action_at(r, geo.ginv, h)));
      const Eigen::VectorXd rhs = 2.0 * rg * gamma_coordinates(basis, Eigen::MatrixXd(h));
      CHECK((lhs - rhs).norm() < 1e-6 * (1.0 + rhs.norm()));
    }
  }
}

TEST_CASE("divergence and its adjoint") {
  auto grid = ball_grid(1, 4.0, 0.01, 0.6, 1.2);
  std::mt19937 rng(21);
  SmallVector x0(2);
  x0 << 0.05, -0.1;
  const SmallMatrix s = random_symmetric(rng, 2), t = random_symmetric(rng, 2);
  const SymTensorField h = sample(grid, [&](const SmallVector& x) {
    return SmallMatrix(bump(x, x0, 0.4) * (s + x(1) * t));
  });
  OneFormField w(grid);
  for (Eigen::Index k = 0; k < grid->size(); ++k) {
    const SmallVector x = grid->point(k);
    SmallVector v(2);
    v << 1.0 + x(0), std::sin(2.0 * x(1));
    if (grid->inside(k)) w.set(k, bump(x, SmallVector::Zero(2), 0.45) * v);
  }
  const double lhs = l2_inner(divergence(h), w);
  const double rhs = l2_inner(h, divergence_adjoint(w));
  CHECK(std::abs(lhs - rhs) < 1e-3 * std::abs(rhs));
  CHECK(std::abs(rhs) > 1e-3);
}

TEST_CASE("Bianchi gauge trace") {
  std::mt19937 rng(31);
  auto grid = ball_grid(2, 2.0, 0.1, 0.3, 0.6);
  const SmallMatrix s = random_symmetric(rng, 4);
  const SymTensorField h = sample(grid, [&](const SmallVector& x) { return SmallMatrix(s * (1.0 + x(2))); });
  const SymTensorField gh = bianchi_gauge(h);
  for (Eigen::Index k = 0; k < grid->size(); ++k) {
    if (!grid->inside(k)) continue;
    const SmallMatrix gi = grid->chart().metric(grid->point(k)).inverse();
    const double tr_h = (gi * h.at(k)).trace();
    CHECK((gi * gh.at(k)).trace() == doctest::Approx((1.0 - 4.0 / 2.0) * tr_h).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("three-tensor T") {
  const Gaussian phi;
  auto grid = ball_grid(1, 4.0, 0.01, 0.5, 1.0);
  const Chart& chart = grid->chart();
  const SymTensorField g = sample(grid, [&](const SmallVector& x) { return chart.metric(x); });
  const ThreeTensorField tg = three_tensor_T(g);
  const SymTensorField h = sample(grid, [&](const SmallVector& x) { return SmallMatrix(phi.value(x) * chart.metric(x)); });
  const ThreeTensorField th = three_tensor_T(h);
  double worst_g = 0.0, worst = 0.0;
  for (Eigen::Index k : evaluation_nodes(*grid, StencilOrder::Second)) {
    if (!GeodesicBallRegion{0.7}.contains(*grid, k)) continue;
    const SmallVector x = grid->point(k);
    const SmallVector dphi = phi.grad(x);
    const SmallMatrix gx = chart.metric(x);
    const double scale = gx.cwiseAbs().maxCoeff();
    worst_g = std::max(worst_g, tg.values().col(k).cwiseAbs().maxCoeff() / scale);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int l = 0; l < 2; ++l) {
          CHECK(th(i, j, l, k) == -th(l, j, i, k));
          worst = std::max(worst, std::abs(th(i, j, l, k) - (dphi(l) * gx(i, j) - dphi(i) * gx(j, l))) / scale);
        }
  }
  CHECK(worst_g < 1e-2);
  CHECK(worst < 1e-2);
}

TEST_CASE("inner products carry the factor four") {
  const Gaussian phi;
  auto grid = ball_grid(2, 4.0, 0.1, 0.5, 0.9);
  const Chart& chart = grid->chart();
  const SymTensorField h = sample(grid, [&](const SmallVector& x) { return SmallMatrix(phi.value(x) * chart.metric(x)); });
  double raw = 0.0;
  OneFormField w(grid);
  for (Eigen::Index k = 0; k < grid->size(); ++k) {
    if (!grid->inside(k)) continue;
    const SmallVector x = grid->point(k);
    const SmallMatrix gx = chart.metric(x);
    raw += 4.0 * phi.value(x) * phi.value(x) * std::sqrt(gx.determinant());  // |phi g|^2 = n phi^2
    w.set(k, gx.col(0) * phi.value(x));  // |w|^2 = g_00 phi^2
  }
  raw *= grid->cell_volume();
  CHECK(l2_inner(h, h) == doctest::Approx(4.0 * raw).epsilon(1e-12));
  CHECK(l2_norm(h) == doctest::Approx(std::sqrt(4.0 * raw)).epsilon(1e-12));
  CHECK(l2_inner(2.0 * h, h) == doctest::Approx(2.0 * l2_inner(h, h)).epsilon(1e-14));

  double raw_w = 0.0;
  for (Eigen::Index k = 0; k < grid->size(); ++k) {
    if (!grid->inside(k)) continue;
    const SmallVector x = grid->point(k);
    const SmallMatrix gx = chart.metric(x);
    raw_w += 4.0 * gx(0, 0) * phi.value(x) * phi.value(x) * std::sqrt(gx.determinant());
  }
  CHECK(l2_inner(w, w) == doctest::Approx(raw_w * grid->cell_volume()).epsilon(1e-12));
}

TEST_CASE("both paths to the operator A agree") {
  auto grid = ball_grid(2, 4.0, 0.05, 0.4, 0.8);
  std::mt19937 rng(40);
  const SmallMatrix s = random_symmetric(rng, 4), t = random_symmetric(rng, 4);
  const SymTensorField h = sample(grid, [&](const SmallVector& x) {
    return SmallMatrix(bump(x, SmallVector::Zero(4), 0.3) * (s + x(1) * t));
  });
  const SymTensorField direct = operator_A(h, APath::Direct);
  const SymTensorField lich = operator_A(h, APath::Lichnerowicz);
  CHECK(l2_norm(direct - lich) < 1e-3 * l2_norm(direct));
}
