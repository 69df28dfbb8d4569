#include "chflow/stability_analysis.hpp"

#include "test_support.hpp"

#include <cmath>

using namespace chflow;

namespace {

std::shared_ptr<ChartGrid> ball_grid(int m, double c, double spacing, double half_width) {
  auto chart = std::make_shared<BergmanBallChart>(m, c);
  return std::make_shared<ChartGrid>(chart, ChartGrid::Options{spacing, half_width, 10.0, true});
}

BumpOptions small_bumps() {
  BumpOptions o;
  o.cutoff_radius = 0.35;
  o.center_radius = 0.1;
  o.min_width = 0.12;
  o.max_width = 0.2;
  return o;
}

// phi = (1 - |x|^2/R^2)^6 and its coordinate gradient.
struct ScalarBump {
  double r;
  double value(const SmallVector& x) const {
    const double t = x.squaredNorm() / (r * r);
    return t >= 1.0 ? 0.0 : std::pow(1.0 - t, 6);
  }
  SmallVector grad(const SmallVector& x) const {
    const double t = x.squaredNorm() / (r * r);
    if (t >= 1.0) return SmallVector::Zero(x.size());
    return -12.0 * std::pow(1.0 - t, 5) / (r * r) * x;
  }
};

}  // namespace

TEST_CASE("zero field has vanishing energy terms") {
  auto grid = ball_grid(1, 4.0, 0.05, 0.5);
  const EnergyReport rep = energy_terms(SymTensorField(grid));
  CHECK(rep.grad_sq == 0.0);
  CHECK(rep.t_sq == 0.0);
  CHECK(rep.div_sq == 0.0);
  CHECK(rep.lambda_h_sq == 0.0);
  CHECK(rep.curvature == 0.0);
  CHECK(rep.a_h_h == 0.0);
  CHECK(rep.bochner_residual() == 0.0);
  CHECK(rep.energy_residual() == 0.0);
}

TEST_CASE("conformal field phi g reproduces the scalar energy integrals") {
  // For h = phi g: |nabla h|^2 = 4n I, |T|^2 / 2 = 4(n-1) I, |delta h|^2 = 4 I
  // with I = Int |d phi|^2 dmu, and lambda |h|^2 + Int <R_S h, h> = 0.
  for (int m : {1, 2}) {
    CAPTURE(m);
    const double spacing = m == 1 ? 0.01 : 0.05;
    const double radius = m == 1 ? 0.35 : 0.45;
    auto grid = ball_grid(m, 4.0, spacing, radius + 0.15);
    const ScalarBump phi{radius};
    SymTensorField h(grid);
    double dphi_sq = 0.0;
    double h_sq = 0.0;
    const int n = grid->dim();
    for (Eigen::Index k = 0; k < grid->size(); ++k) {
      if (!grid->inside(k)) continue;
      const SmallVector x = grid->point(k);
      const LocalGeometry geo = grid->geometry(k);
      h.set(k, phi.value(x) * geo.g);
      const SmallVector d = phi.grad(x);
      const double w = 4.0 * geo.sqrt_det * grid->cell_volume();
      dphi_sq += w * d.dot(geo.ginv * d);
      h_sq += w * n * phi.value(x) * phi.value(x);
    }
    const EnergyReport rep = energy_terms(h, StencilOrder::Fourth);
    CHECK(rep.grad_sq == doctest::Approx(n * dphi_sq).epsilon(1e-2));
    CHECK(0.5 * rep.t_sq == doctest::Approx((n - 1) * dphi_sq).epsilon(1e-2));
    CHECK(rep.div_sq == doctest::Approx(dphi_sq).epsilon(1e-2));
    CHECK(rep.h_sq == doctest::Approx(h_sq).epsilon(1e-12));
    CHECK(std::abs(rep.lambda_h_sq + rep.curvature) < 1e-6 * rep.lambda_h_sq);
  }
}

TEST_CASE("energy terms are quadratic in the field") {
  auto grid = ball_grid(1, 4.0, 0.02, 0.5);
  const SymTensorField h = sample_field(grid, random_bump_field(2, small_bumps(), 11));
  const EnergyReport a = energy_terms(h);
  const EnergyReport b = energy_terms(3.0 * h);
  CHECK(b.grad_sq == doctest::Approx(9.0 * a.grad_sq).epsilon(1e-12));
  CHECK(b.t_sq == doctest::Approx(9.0 * a.t_sq).epsilon(1e-12));
  CHECK(b.div_sq == doctest::Approx(9.0 * a.div_sq).epsilon(1e-12));
  CHECK(b.curvature == doctest::Approx(9.0 * a.curvature).epsilon(1e-12));
  CHECK(b.a_h_h == doctest::Approx(9.0 * a.a_h_h).epsilon(1e-12));
  CHECK(b.rayleigh_quotient() == doctest::Approx(a.rayleigh_quotient()).epsilon(1e-12));
}

TEST_CASE("support too close to the grid edge is rejected") {
  auto grid = ball_grid(1, 4.0, 0.05, 0.35);
  const SymTensorField h = sample_field(grid, random_bump_field(2, small_bumps(), 3));
  CHECK_THROWS_AS(energy_terms(h), std::domain_error);
  CHECK_THROWS_AS(energy_identity_check(h), std::domain_error);
}

TEST_CASE("Bochner and energy residuals converge at second order") {
  const std::vector<double> spacings{0.04, 0.02, 0.01};
  for (std::uint64_t seed : {1u, 2u}) {
    CAPTURE(seed);
    std::vector<double> bochner, energy;
    for (double s : spacings) {
      auto grid = ball_grid(1, 4.0, s, 0.45);
      const SymTensorField h = sample_field(grid, random_bump_field(2, small_bumps(), seed));
      const EnergyReport rep = energy_terms(h);
      bochner.push_back(rep.bochner_residual());
      energy.push_back(rep.energy_residual());
    }
    for (std::size_t k = 0; k + 1 < spacings.size(); ++k) {
      CHECK(std::log2(bochner[k] / bochner[k + 1]) >= 1.8);
      CHECK(std::log2(energy[k] / energy[k + 1]) >= 1.8);
    }
    CHECK(bochner.back() < 1e-2);
    CHECK(energy.back() < 1e-2);
  }
}

TEST_CASE("fourth-order stencils reach the energy identity in four dimensions") {
  auto grid = ball_grid(2, 4.0, 0.05, 0.65);
  BumpOptions o = small_bumps();
  o.cutoff_radius = 0.4;
  o.min_width = 0.2;
  o.max_width = 0.3;
  const SymTensorField h = sample_field(grid, random_bump_field(4, o, 4));
  const EnergyReport second = energy_terms(h, StencilOrder::Second);
  const EnergyReport fourth = energy_terms(h, StencilOrder::Fourth);
  CHECK(fourth.energy_residual() < second.energy_residual());
  CHECK(fourth.bochner_residual() < second.bochner_residual());
  CHECK(fourth.rayleigh_quotient() < -2.0);
}

TEST_CASE("Rayleigh quotients respect the spectral bound") {
  SUBCASE("m = 2 strict bound") {
    auto grid = ball_grid(2, 4.0, 0.1, 0.5);
    const RayleighReport rep = rayleigh_bound_check(grid, 4, 7, small_bumps(), 0.4);
    CHECK(rep.bound == -2.0);
    CHECK(rep.samples.size() == 4);
    CHECK(rep.holds());
    CHECK(rep.worst_quotient() <= -1.6);
  }
  SUBCASE("m = 1 degenerate bound") {
    auto grid = ball_grid(1, 4.0, 0.02, 0.45);
    const RayleighReport rep = rayleigh_bound_check(grid, 6, 7, small_bumps(), 0.4);
    CHECK(rep.bound == 0.0);
    CHECK(rep.holds());
  }
}

TEST_CASE("Rayleigh sampling is deterministic in the seed") {
  auto grid = ball_grid(1, 4.0, 0.02, 0.45);
  const RayleighReport a = rayleigh_bound_check(grid, 3, 99, small_bumps(), 0.4);
  const RayleighReport b = rayleigh_bound_check(grid, 3, 99, small_bumps(), 0.4);
  const RayleighReport c = rayleigh_bound_check(grid, 3, 100, small_bumps(), 0.4);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    CHECK(a.samples[k].seed == b.samples[k].seed);
    CHECK(a.samples[k].quotient == b.samples[k].quotient);
  }
  CHECK(a.samples[0].quotient != c.samples[0].quotient);
}

TEST_CASE("near-extremal fields approach the degenerate bound from below") {
  auto grid = ball_grid(1, 4.0, 0.01, 0.8);
  const std::vector<double> q = near_extremal_quotients(grid, {0.3, 0.5, 0.7});
  REQUIRE(q.size() == 3);
  for (std::size_t k = 0; k + 1 < q.size(); ++k) CHECK(q[k] < q[k + 1]);
  CHECK(q.back() < 0.0);
  CHECK(q.back() > q.front() / 3.0);
}

TEST_CASE("linearized flow") {
  auto chart = std::make_shared<BergmanBallChart>(2, 4.0);
  auto grid = std::make_shared<ChartGrid>(chart, ChartGrid::Options{0.1, std::tanh(0.7) + 0.1, 0.7, false});
  BumpOptions o;
  o.cutoff_radius = 0.4;
  o.center_radius = 0.1;
  o.min_width = 0.15;
  o.max_width = 0.25;
  LinearFlowOptions lo;
  lo.t_end = 0.3;

  SUBCASE("zero data stays zero") {
    const DecayTrace tr = linearized_flow(SymTensorField(grid), lo);
    for (double v : tr.norms) CHECK(v == 0.0);
  }
  SUBCASE("decay is bounded by the spectral rate and matches the quotients") {
    const SymTensorField h0 = sample_field(grid, random_bump_field(4, o, 5));
    const DecayTrace tr = linearized_flow(h0, lo);
    CHECK(tr.rate_floor == 2.0);
    REQUIRE(tr.norms.size() > 3);
    for (std::size_t k = 0; k < tr.norms.size(); ++k)
      CHECK(tr.norms[k] <= std::exp(-2.0 * tr.times[k]) * tr.norms[0] * (1.0 + 1e-9));
    for (std::size_t k = 0; k + 1 < tr.norms.size(); ++k) CHECK(tr.norms[k + 1] < tr.norms[k]);
    CHECK(tr.fitted_rate >= 0.9 * tr.rate_floor);
    CHECK(std::abs(tr.fitted_rate - tr.quotient_rate) < 0.05 * tr.quotient_rate);
  }
  SUBCASE("time steps above the stability limit are rejected") {
    LinearFlowOptions bad = lo;
    bad.dt = 1.5 * linear_flow_dt_limit(*grid, StencilOrder::Second);
    CHECK_THROWS_AS(linearized_flow(SymTensorField(grid), bad), std::invalid_argument);
  }
}

TEST_CASE("decay fit recovers an exact exponential") {
  std::vector<double> t, y;
  for (int k = 0; k < 10; ++k) {
    t.push_back(0.1 * k);
    y.push_back(3.0 * std::exp(-2.5 * t.back()));
  }
  CHECK(fitted_decay_rate(t, y) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK_THROWS_AS(fitted_decay_rate({0.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(fitted_decay_rate({0.0, 1.0}, {1.0, 0.0}), std::invalid_argument);
}
