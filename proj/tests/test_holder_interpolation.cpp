#include "chflow/holder_interpolation.hpp"
#include "chflow/stability_analysis.hpp"

#include "test_support.hpp"

#include <cmath>
#include <functional>
#include <random>

using namespace chflow;

namespace {

constexpr double kTau = 1.0;  // m = 1 needs tau > 1/2

using Profile = std::function<SmallMatrix(const SmallVector&)>;

SymTensorField sample(const std::shared_ptr<const ChartGrid>& grid, const Profile& f, double support) {
  SymTensorField h(grid);
  for (Eigen::Index k = 0; k < grid->size(); ++k)
    if (grid->inside(k) && grid->radius(k) < support) h.set(k, f(grid->point(k)));
  h.support_radius = support;
  return h;
}

double cutoff(double r, double radius) {
  const double s = r / radius;
  return s < 1.0 ? std::pow(1.0 - s * s, 6) : 0.0;
}

// e^{-2 tau <r>} times a cutoff, shaped like the chart metric
SymTensorField decaying_field(const std::shared_ptr<const ChartGrid>& grid, double support) {
  const Chart& chart = grid->chart();
  return sample(
      grid,
      [&](const SmallVector& x) {
        const double r = x.norm();
        return std::exp(-2.0 * kTau * std::sqrt(1.0 + r * r)) * cutoff(r, support) * chart.metric(x);
      },
      support);
}

// a Gaussian bump of width w centred at (x0, 0)
SymTensorField bump(const std::shared_ptr<const ChartGrid>& grid, double x0, double w, double support,
                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  SmallMatrix s(2, 2);
  s << normal(rng), normal(rng), 0.0, normal(rng);
  s(1, 0) = s(0, 1);
  return sample(
      grid,
      [=](const SmallVector& x) {
        SmallVector c = SmallVector::Zero(2);
        c(0) = x0;
        return std::exp(-(x - c).squaredNorm() / (2.0 * w * w)) * cutoff(x.norm(), support) * s;
      },
      support);
}

}  // namespace

TEST_CASE("annuli overlap, cover the space and measure boundary distance") {
  for (int N = 1; N < 20; ++N) {
    const Annulus a = annulus(N), b = annulus(N + 1);
    CHECK(b.inner < a.outer);
    CHECK(a.contains(0.5 * (b.inner + a.outer)));
    CHECK(b.contains(0.5 * (b.inner + a.outer)));
  }
  for (double r = 0.0; r < 30.0; r += 0.173) {
    CAPTURE(r);
    const int lo = innermost_annulus(r), hi = outermost_annulus(r);
    CHECK(lo <= hi);
    for (int N = std::max(1, lo - 2); N <= hi + 2; ++N) CHECK(annulus(N).contains(r) == (N >= lo && N <= hi));
    for (int N = lo; N <= hi; ++N) {
      const double d = annulus(N).boundary_distance(r);
      CHECK(d > 0.0);
      CHECK(d <= (N == 1 ? 4.0 : 2.0));
    }
  }
  CHECK_THROWS_AS(annulus(0), std::invalid_argument);
}

TEST_CASE("weighted norms of simple fields") {
  auto grid = holder_grid(1, 1.0, 0.1, 3.0);

  SUBCASE("zero field") {
    const SymTensorField zero = sample(grid, [](const SmallVector&) { return SmallMatrix::Zero(2, 2); }, 2.0);
    CHECK(weighted_norm(zero, {1, 0.5}, kTau).total() == 0.0);
    CHECK(weighted_sup_norm(zero, kTau) == 0.0);
  }
  SUBCASE("a field in B_1 only meets the first annulus") {
    const SymTensorField h = bump(grid, 0.3, 0.2, 0.95, 3);
    const WeightedNormReport rep = weighted_norm(h, {1, 0.5}, kTau);
    REQUIRE(rep.annuli.size() == 1);
    const AnnulusSeminorms& a = rep.annuli.front();
    CHECK(a.index == 1);
    CHECK(rep.tail_bound == 0.0);
    CHECK(rep.total() == doctest::Approx(std::exp(kTau) * (a.sup.rowwise().sum() + a.holder).maxCoeff()));
    // |h|'_0 is the plain sup; first derivatives are weighted by d_x = 4 - r
    CHECK(a.sup.col(0).maxCoeff() == doctest::Approx(h.values().cwiseAbs().maxCoeff()));
  }
  SUBCASE("invalid input") {
    const SymTensorField h = bump(grid, 0.5, 0.3, 1.8, 3);
    CHECK_THROWS_AS(weighted_norm(h, {1, 0.5}, 0.5), std::invalid_argument);
    SymTensorField open = h;
    open.support_radius.reset();
    CHECK_THROWS_AS(weighted_norm(open, {1, 0.5}, kTau), std::invalid_argument);
    const SymTensorField wide = bump(grid, 0.0, 2.0, 10.0, 3);
    CHECK_THROWS_AS(weighted_norm(wide, {1, 0.5}, kTau), std::domain_error);
  }
}

TEST_CASE("weighted norm is a norm") {
  auto grid = holder_grid(1, 1.0, 0.1, 3.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-1.0, 1.0), width(0.2, 0.6), scale(-3.0, 3.0);
  const HolderSpec spec{1, 0.5};
  for (int trial = 0; trial < 8; ++trial) {
    const SymTensorField f = bump(grid, pos(rng), width(rng), 2.5, rng());
    const SymTensorField g = bump(grid, pos(rng), width(rng), 2.5, rng());
    const double s = scale(rng);
    const double nf = weighted_norm(f, spec, kTau).total();
    const double ng = weighted_norm(g, spec, kTau).total();
    CHECK(weighted_norm(s * f, spec, kTau).total() == doctest::Approx(std::abs(s) * nf).epsilon(1e-13));
    CHECK(weighted_norm(f + g, spec, kTau).total() <= (nf + ng) * (1.0 + 1e-13));
  }
}

TEST_CASE("decaying fields: geometric decay over annuli and the dense oracle") {
  const double support = 5.0;
  auto coarse = holder_grid(1, 1.0, 0.1, 6.0);
  auto fine = holder_grid(1, 1.0, 0.05, 6.0);
  const HolderSpec spec{1, 0.5};
  const WeightedNormReport a = weighted_norm(decaying_field(coarse, support), spec, kTau);
  const WeightedNormReport b = weighted_norm(decaying_field(fine, support), spec, kTau);

  REQUIRE(a.annuli.size() >= 5);
  for (std::size_t k = 1; k + 1 < a.annuli.size(); ++k) {
    CAPTURE(k);
    const double q = a.annuli[k + 1].weighted_total / a.annuli[k].weighted_total;
    CHECK(q < 0.6);
  }
  CHECK(a.total() == doctest::Approx(b.total()).epsilon(2e-2));
  CHECK(a.total() <= b.total() * (1.0 + 1e-2));
}

TEST_CASE("embedding chain in the smoothness order") {
  auto grid = holder_grid(1, 1.0, 0.1, 6.0);
  const SymTensorField h = decaying_field(grid, 5.0);
  const double n0 = weighted_norm(h, {0, 0.5}, kTau).total();
  const double n1 = weighted_norm(h, {1, 0.5}, kTau).total();
  const double n2 = weighted_norm(h, {2, 0.5}, kTau).total();
  CHECK(n0 <= n1);
  CHECK(n1 <= n2);
}

TEST_CASE("tail bound from a decay envelope") {
  auto grid = holder_grid(1, 1.0, 0.1, 3.0);
  SymTensorField h = decaying_field(grid, 10.0);
  h.support_radius.reset();
  NormOptions opts;
  opts.envelope = DecayEnvelope{20.0, 2.0 * kTau};
  const WeightedNormReport rep = weighted_norm(h, {0, 0.5}, kTau, opts);
  CHECK(rep.tail_bound > 0.0);
  CHECK(std::isfinite(rep.tail_bound));
  opts.envelope = DecayEnvelope{1.0, 0.5 * kTau};
  CHECK(std::isinf(weighted_norm(h, {0, 0.5}, kTau, opts).total()));
}

TEST_CASE("little modulus") {
  auto grid = holder_grid(1, 1.0, 0.02, 1.5);
  const SymTensorField h = bump(grid, 0.0, 0.3, 1.2, 5);
  const HolderSpec spec{0, 0.5};
  std::vector<double> f;
  for (double t : {0.1, 0.2, 0.4}) f.push_back(little_modulus(h, spec, kTau, t));
  CHECK(f[0] <= f[1]);
  CHECK(f[1] <= f[2]);
  CHECK(little_modulus(h, spec, kTau, 2.0) <= weighted_norm(h, spec, kTau).total());
  // a smooth field has modulus ~ t^(1 - alpha) at small scales
  const double expected = std::pow(2.0, 1.0 - spec.alpha);
  CHECK(f[1] / f[0] == doctest::Approx(expected).epsilon(0.1));
  CHECK(f[2] / f[1] == doctest::Approx(expected).epsilon(0.15));
}

TEST_CASE("Sobolev embedding") {
  auto grid = holder_grid(1, 1.0, 0.1, 6.0);
  CHECK(sobolev_constant(1, 1.0) == doctest::Approx(std::exp(0.0) + std::exp(2.0) * std::exp(-2.0) / (1.0 - std::exp(-2.0))));
  CHECK_THROWS_AS(sobolev_constant(2, 1.0), std::invalid_argument);

  const SymTensorField zero = sample(grid, [](const SmallVector&) { return SmallMatrix::Zero(2, 2); }, 2.0);
  const SobolevReport z = sobolev_embedding_check(zero, {1, 0.5}, kTau);
  CHECK(z.integral == 0.0);
  CHECK(z.holds());

  std::vector<SymTensorField> fields{decaying_field(grid, 5.0), bump(grid, 1.0, 0.4, 3.0, 2),
                                     bump(grid, -2.0, 0.8, 5.0, 4)};
  for (const SymTensorField& h : fields) {
    const SobolevReport lo = sobolev_embedding_check(h, {1, 0.5}, kTau);
    const SobolevReport hi = sobolev_embedding_check(h, {1, 0.5}, 1.5 * kTau);
    CHECK(lo.integral > 0.0);
    CHECK(lo.holds());
    CHECK(hi.norm > lo.norm);
    CHECK(hi.integral == lo.integral);
  }
}

TEST_CASE("mollifier has unit mass and bounded scale factors") {
  for (int m : {1, 2}) {
    const Mollifier zeta(m, 1.0);
    CHECK(zeta.scale_factor(1.0) == doctest::Approx(1.0).epsilon(1e-12));
    const double euclidean = zeta.scale_factor(1e-9);
    CHECK(euclidean < 1.0);
    double previous = euclidean;
    for (double t : {0.1, 0.3, 0.6, 0.9}) {
      const double c = zeta.scale_factor(t);
      CHECK(c > previous);
      CHECK(c < 1.0);
      previous = c;
    }
    CHECK(zeta(1.0) == 0.0);
    CHECK(zeta(0.0) == doctest::Approx(1.0 / zeta.mass_normalization()));
  }
}

TEST_CASE("K-functional") {
  auto grid = holder_grid(1, 1.0, 0.05, 3.0);
  const HolderSpec x{0, 0.0}, y{1, 0.0};
  const std::vector<double> t = log_spaced(0.01, 0.9, 10);

  SUBCASE("zero field") {
    const SymTensorField zero = sample(grid, [](const SmallVector&) { return SmallMatrix::Zero(2, 2); }, 1.0);
    for (double b : k_functional(zero, x, y, kTau, t).bounds()) CHECK(b == 0.0);
  }
  SUBCASE("bounds, monotonicity and concavity") {
    const SymTensorField h = bump(grid, 0.3, 0.4, 1.5, 7);
    std::vector<double> ts = t;
    ts.push_back(1.0);
    ts.push_back(3.0);
    const KFunctionalCurve k = k_functional(h, x, y, kTau, ts);
    const double hx = weighted_norm(h, x, kTau).total();
    for (const KFunctionalSample& s : k.samples) {
      CAPTURE(s.t);
      CHECK(s.bound() <= hx);
      if (s.t >= 1.0) {
        CHECK(s.bound() == hx);
      } else {
        CHECK(s.c_t >= Mollifier(1, 1.0).scale_factor(0.0));
        CHECK(s.c_t <= 1.0);
        if (s.t >= 5.0 * grid->spacing()) {
          CHECK(s.c_t_min == doctest::Approx(s.c_t).epsilon(0.1));
          CHECK(s.c_t_max == doctest::Approx(s.c_t).epsilon(0.1));
        }
      }
    }
    CHECK(k.samples.front().mollifier_wins());
    CHECK(k.monotonicity_defect() <= 1e-12);
    CHECK(k.concavity_defect() < 0.05);
  }
  SUBCASE("theta norm is homogeneous and the mollifier range is enforced") {
    const SymTensorField h = bump(grid, 0.3, 0.4, 1.5, 7);
    const double a = theta_norm(k_functional(h, x, y, kTau, t), 0.5);
    const double b = theta_norm(k_functional(-2.5 * h, x, y, kTau, t), 0.5);
    CHECK(b == doctest::Approx(2.5 * a).epsilon(1e-13));
    CHECK_THROWS_AS(k_functional(h, x, y, kTau, {0.0}), std::invalid_argument);
    const SymTensorField wide = bump(grid, 0.0, 0.5, 2.8, 7);
    CHECK_THROWS_AS(k_functional(wide, x, y, kTau, {0.9}), std::invalid_argument);
  }
}

TEST_CASE("interpolation inequality and norm equivalence over a family") {
  auto grid = holder_grid(1, 1.0, 0.05, 3.0);
  const HolderSpec x{0, 0.0}, y{1, 0.0};
  const double theta = 0.5;
  const std::vector<double> t = log_spaced(0.1, 0.9, 6);
  std::vector<SymTensorField> family;
  for (double w : {0.2, 0.35, 0.6}) family.push_back(bump(grid, 0.2, w, 1.6, 21));

  std::vector<double> ratios;
  for (const SymTensorField& h : family) ratios.push_back(interp_inequality_check(h, x, y, theta, kTau, t).ratio());
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  CHECK(*lo > 0.0);
  CHECK(*hi / *lo < 10.0);
  CHECK(*hi <= 1.0 + 1e-12);

  const EquivalenceReport eq = norm_equivalence(family, x, y, theta, kTau, t);
  CHECK(eq.target.k == 0);
  CHECK(eq.target.alpha == doctest::Approx(0.5));
  CHECK(eq.constant() < 10.0);
  CHECK_THROWS_AS(norm_equivalence(family, x, {2, 0.0}, theta, kTau, t), std::invalid_argument);
}

TEST_CASE("resolvent of a coordinate derivative") {
  SUBCASE("exponential profile") {
    const double spacing = 0.01;
    const int len = 4000;
    Eigen::VectorXd f(len);
    for (int j = 0; j < len; ++j) f(j) = std::exp(-j * spacing);
    for (double lambda : {0.1, 1.0, 10.0, 100.0}) {
      CAPTURE(lambda);
      const Eigen::VectorXd u = lambda * line_resolvent(f, spacing, lambda);
      const double err = (u.head(1000) - lambda / (lambda + 1.0) * f.head(1000)).cwiseAbs().maxCoeff();
      CHECK(err < 1e-4 * lambda / (lambda + 1.0));
    }
    CHECK(line_resolvent(Eigen::VectorXd::Zero(10), spacing, 1.0).isZero(0.0));
    CHECK_THROWS_AS(line_resolvent(f, spacing, 0.0), std::invalid_argument);
  }
  SUBCASE("ratios stay bounded and lambda R h tends to h") {
    auto grid = holder_grid(1, 1.0, 0.05, 6.0);
    const SymTensorField h = decaying_field(grid, 5.0);
    const ResolventReport rep = resolvent_bound_check(h, {0.1, 1.0, 10.0, 100.0}, 0, kTau);
    for (const ResolventSample& s : rep.samples) {
      CHECK(s.ratio <= 1.0 + 1e-2);
      CHECK(s.truncation_bound == 0.0);
    }
    CHECK(rep.samples[2].distance_to_h < rep.samples[1].distance_to_h);
    CHECK(rep.samples[3].distance_to_h < rep.samples[2].distance_to_h);
    CHECK(rep.samples[3].distance_to_h < 0.05 * h.values().cwiseAbs().maxCoeff());
  }
}
