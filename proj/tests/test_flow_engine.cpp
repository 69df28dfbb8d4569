#include "chflow/flow_engine.hpp"
#include "chflow/holder_interpolation.hpp"
#include "chflow/stability_analysis.hpp"

#include "test_support.hpp"

#include <cmath>

using namespace chflow;

namespace {

BumpOptions bumps(double radius) {
  BumpOptions o;
  o.cutoff_radius = radius;
  o.center_radius = 0.1;
  o.min_width = 0.15;
  o.max_width = 0.25;
  return o;
}

SymTensorField scaled_bump(const std::shared_ptr<const ChartGrid>& grid, double radius, double amplitude,
                           std::uint64_t seed) {
  SymTensorField h = sample_field(grid, random_bump_field(grid->dim(), bumps(radius), seed));
  h *= amplitude / h.values().cwiseAbs().maxCoeff();
  return h;
}

double max_abs(const SymTensorField& h) { return h.values().cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("metric fields check positivity and admissibility") {
  auto grid = flow_grid(1, 4.0, 0.1, 0.5);
  const MetricField gb = MetricField::background(grid);
  CHECK(gb.relative_floor() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gb.admissible(0.1));

  const MetricField small(0.05 * gb.tensor());
  CHECK(small.relative_floor() == doctest::Approx(0.05).epsilon(1e-12));
  CHECK_FALSE(small.admissible(0.1));

  SymTensorField bad = gb.tensor();
  SmallMatrix m = bad.at(grid->origin());
  m(0, 1) = m(1, 0) = 2.0;
  bad.set(grid->origin(), m);
  CHECK_THROWS_AS(MetricField{bad}, std::domain_error);
}

TEST_CASE("background Ricci curvature is Einstein") {
  std::vector<double> errors;
  for (double h : {0.1, 0.05}) {
    auto grid = flow_grid(1, 4.0, h, 0.5);
    const FlowOperator op(grid);
    const SymTensorField rc = op.ricci_of(op.background());
    double err = 0.0;
    for (Eigen::Index k : op.evaluation_nodes())
      err = std::max(err, (rc.at(k) + op.lambda() * op.background().at(k)).cwiseAbs().maxCoeff());
    errors.push_back(err);
  }
  CHECK(errors[1] < 1e-4);
  CHECK(std::log2(errors[0] / errors[1]) > 1.8);
}

TEST_CASE("Ricci curvature is scale invariant and natural under coordinate swaps") {
  auto grid = flow_grid(1, 4.0, 0.05, 0.5);
  const FlowOperator op(grid);
  const MetricField g(op.background().tensor() + scaled_bump(grid, 0.3, 0.1, 3));
  const SymTensorField rc = op.ricci_of(g);

  const SymTensorField rc_scaled = op.ricci_of(MetricField(2.5 * g.tensor()));
  CHECK(max_abs(rc_scaled - rc) < 1e-9 * max_abs(rc));

  // (x0, x1) -> (x1, x0)
  auto swap_index = [&](Eigen::Index k) {
    const auto mi = grid->multi_index(k);
    return mi[1] * grid->stride(0) + mi[0] * grid->stride(1);
  };
  SmallMatrix p(2, 2);
  p << 0, 1, 1, 0;
  SymTensorField swapped(grid);
  for (Eigen::Index k = 0; k < grid->size(); ++k) swapped.set(k, p * g.at(swap_index(k)) * p);
  const SymTensorField rc_swapped = op.ricci_of(MetricField(swapped));
  double err = 0.0;
  for (Eigen::Index k : op.evaluation_nodes())
    err = std::max(err, (rc_swapped.at(k) - p * rc.at(swap_index(k)) * p).cwiseAbs().maxCoeff());
  CHECK(err < 1e-9 * max_abs(rc));
}

TEST_CASE("the background is a fixed point up to the discretization error") {
  std::vector<double> residual, deturck;
  for (double h : {0.1, 0.05, 0.025}) {
    auto grid = flow_grid(1, 4.0, h, 0.4);
    const FlowOperator op(grid);
    residual.push_back(max_abs(op.q_apply(op.background())));
    deturck.push_back(max_abs(op.deturck_term(op.background())));
  }
  CHECK(residual[1] < 1e-3);
  for (std::size_t k = 0; k + 1 < residual.size(); ++k) CHECK(std::log2(residual[k] / residual[k + 1]) >= 1.8);
  // g and u share their difference jets, so the discrete G(g_B, g_B) is parallel
  for (double d : deturck) CHECK(d < 1e-12);
}

TEST_CASE("principal symbol at the background is the identity") {
  for (int m : {1, 2}) {
    CAPTURE(m);
    auto grid = flow_grid(m, 4.0, 0.1, 0.3);
    const FlowOperator op(grid);
    for (Eigen::Index node : {grid->origin(), op.evaluation_nodes().front()}) {
      const SymbolBounds b = op.ellipticity(op.background(), node);
      CHECK(b.lower == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(b.upper == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("ellipticity ratio of perturbed metrics stays bounded") {
  auto grid = flow_grid(1, 4.0, 0.05, 0.4);
  const FlowOperator op(grid);
  const SymTensorField h = scaled_bump(grid, 0.3, 1.0, 8);
  double previous = 1.0;
  for (double s : {0.05, 0.1, 0.2}) {
    const MetricField g(op.background().tensor() + s * h);
    double worst = 1.0;
    for (Eigen::Index k = 0; k < grid->size(); k += 7) {
      if (!grid->interior(k, 2) || grid->radius(k) > 0.3) continue;
      const SymbolBounds b = op.ellipticity(g, k, 8, 2);
      CHECK(b.lower > 0.0);
      worst = std::max(worst, b.ratio());
    }
    CAPTURE(s);
    CHECK(worst > previous);
    CHECK(worst < 1.0 + 10.0 * s);
    previous = worst;
  }
}

TEST_CASE("without the DeTurck term the linearization misses the gauge term") {
  std::vector<double> rel;
  for (double h : {0.05, 0.025}) {
    auto grid = flow_grid(1, 4.0, h, 0.5);
    const FlowOperator op(grid);
    const SymTensorField field = sample_field(grid, random_bump_field(2, bumps(0.35), 5));
    const GaugeMismatchReport rep = gauge_mismatch_check(op, field, 1e-3);
    CHECK(rep.mismatch_norm > 0.5 * rep.gauge_norm);
    rel.push_back(rep.relative());
  }
  CHECK(rel[1] < 2e-2);
  CHECK(rel[1] < rel[0] / 4.0);
}

TEST_CASE("linearization of the flow speed is A") {
  auto grid = flow_grid(1, 4.0, 0.025, 0.5);
  const FlowOperator op(grid);
  const SymTensorField h = sample_field(grid, random_bump_field(2, bumps(0.35), 5));

  const LinearizationReport rep = linearization_consistency(op, h, {1e-2, 5e-3, 2.5e-3});
  for (double r : rep.ratios()) CHECK(r == doctest::Approx(2.0).epsilon(0.1));
  CHECK(rep.errors.back() < 1e-2 * rep.a_norm);

  CHECK(max_abs(difference_quotient(op, SymTensorField(grid), 1e-2)) == 0.0);

  const SymTensorField d2h = difference_quotient(op, 2.0 * h, 1e-2);
  const SymTensorField dh = difference_quotient(op, h, 2e-2);
  CHECK(max_abs(d2h - 2.0 * dh) < 1e-10 * max_abs(d2h));

  CHECK_THROWS_AS(linearization_consistency(op, h, {1e-2, 2e-2}), std::invalid_argument);
  CHECK_THROWS_AS(linearization_consistency(op, -(1.0 / max_abs(h)) * h, {2.0}), std::domain_error);
}

TEST_CASE("nonlinear flow") {
  auto grid = flow_grid(2, 4.0, 0.1, 0.3);
  const FlowOperator op(grid);
  FlowConfig cfg;
  cfg.flow_radius = 0.3;
  cfg.t_end = 0.02;
  cfg.sample_every = 5;

  SUBCASE("the background stays fixed") {
    const FlowTrace tr = evolve(op, op.background(), cfg);
    for (const FlowSample& s : tr.samples) {
      CHECK(s.l2 == 0.0);
      CHECK(s.weighted_sup == 0.0);
    }
  }
  SUBCASE("small data decay and the rate does not depend on the amplitude") {
    const SymTensorField h = scaled_bump(grid, 0.2, 1.0, 5);
    const FlowTrace a = evolve(op, MetricField(op.background().tensor() + 1e-2 * h), cfg);
    const FlowTrace b = evolve(op, MetricField(op.background().tensor() + 2e-2 * h), cfg);
    CHECK(a.rate_floor == 2.0);
    for (std::size_t k = 1; k + 1 < a.samples.size(); ++k) CHECK(a.samples[k + 1].l2 < a.samples[k].l2);
    CHECK(a.samples.front().weighted_sup == doctest::Approx(std::exp(cfg.tau) * 1e-2).epsilon(1e-12));
    CHECK(a.fitted_rate >= 0.75 * a.rate_floor);
    CHECK(b.fitted_rate == doctest::Approx(a.fitted_rate).epsilon(0.05));
    CHECK(a.dt < a.min_dt_limit);
  }
  SUBCASE("invalid runs are rejected") {
    FlowConfig big = cfg;
    big.dt = 2.0 * flow_dt_limit(op.background(), op.evaluation_nodes());
    CHECK_THROWS_AS(evolve(op, op.background(), big), std::invalid_argument);

    FlowConfig strict = cfg;
    strict.epsilon = 1.5;
    CHECK_THROWS_AS(evolve(op, op.background(), strict), std::invalid_argument);

    FlowConfig narrow = cfg;
    narrow.flow_radius = 0.1;
    const MetricField g(op.background().tensor() + scaled_bump(grid, 0.2, 1e-2, 5));
    CHECK_THROWS_AS(evolve(op, g, narrow), std::invalid_argument);
  }
}
