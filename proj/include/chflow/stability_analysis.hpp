#pragma once

// Quadrature checks of the Bochner and energy identities for the operator
// A = Delta + 2 Rm on compactly supported fields, the Rayleigh-quotient bound,
// and the linearized flow dh/dt = A h.

#include "chflow/decay_fit.hpp"
#include "chflow/flow_engine.hpp"
#include "chflow/tensor_calculus.hpp"

#include <cstdint>
#include <vector>

namespace chflow {

/// A smooth compactly supported symmetric 2-tensor given in chart coordinates:
/// cutoff(|x|/R) * sum_b exp(-|x - x_b|^2 / (2 s_b^2)) S_b, cutoff(t) = (1 - t^2)^6.
struct BumpField {
  int n = 0;
  double cutoff_radius = 0.0;  // in chart coordinates
  struct Bump {
    SmallVector center;
    double width;
    SmallMatrix coefficients;
  };
  std::vector<Bump> bumps;

  SmallMatrix operator()(const SmallVector& x) const;
};

struct BumpOptions {
  int count = 3;
  double cutoff_radius = 0.35;
  double center_radius = 0.15;
  double min_width = 0.12;
  double max_width = 0.2;
};

BumpField random_bump_field(int n, const BumpOptions& options, std::uint64_t seed);

/// A constant coefficient matrix times a radial envelope cutoff(|x|/R).
BumpField constant_bump_field(const SmallMatrix& coefficients, double cutoff_radius);

/// Samples `f` on every inside node and declares its geodesic support radius.
SymTensorField sample_field(std::shared_ptr<const ChartGrid> grid, const BumpField& f);

/// Ball-model grid clipped to the geodesic ball of radius `domain_radius`,
/// with the box reaching one cell past it.
std::shared_ptr<ChartGrid> stability_grid(int m, double c, double spacing, double domain_radius);

struct EnergyReport {
  double spacing = 0.0;
  double grad_sq = 0.0;       // |nabla h|^2
  double t_sq = 0.0;          // |T|^2
  double div_sq = 0.0;        // |delta h|^2
  double lambda_h_sq = 0.0;   // lambda |h|^2
  double curvature = 0.0;     // int <R_S h, h>
  double a_h_h = 0.0;         // (A h, h)
  double h_sq = 0.0;          // |h|^2

  double bochner_lhs() const { return grad_sq; }
  double bochner_rhs() const { return 0.5 * t_sq + div_sq + lambda_h_sq + curvature; }
  /// |lhs - rhs| / max(lhs, 1)
  double bochner_residual() const;
  double energy_lhs() const { return a_h_h; }
  double energy_rhs() const { return -0.5 * t_sq - div_sq - lambda_h_sq + curvature; }
  /// |lhs - rhs| / max(|rhs|, 1)
  double energy_residual() const;
  /// -|nabla h|^2 + 2 int <R_S h, h>
  double integrated_by_parts() const { return -grad_sq + 2.0 * curvature; }
  double rayleigh_quotient() const { return a_h_h / h_sq; }
};

/// Every term of both identities in one pass. Throws std::domain_error when
/// the support comes within two stencil reaches of the grid domain's edge.
EnergyReport energy_terms(const SymTensorField& h, StencilOrder stencil = StencilOrder::Second);
EnergyReport bochner_check(const SymTensorField& h, StencilOrder stencil = StencilOrder::Second);
EnergyReport energy_identity_check(const SymTensorField& h, StencilOrder stencil = StencilOrder::Second);

struct RayleighSample {
  std::uint64_t seed;
  double quotient;
};

struct RayleighReport {
  int m = 0;
  double c = 0.0;
  double bound = 0.0;  // -(m-1)c/2
  double tolerance = 0.0;
  std::vector<RayleighSample> samples;
  double worst_quotient() const;
  double worst_margin() const { return bound - worst_quotient(); }
  bool holds() const { return worst_quotient() <= bound + tolerance; }
};

/// Rayleigh quotients (Ah,h)/|h|^2 of seeded random bump fields on `grid`.
RayleighReport rayleigh_bound_check(std::shared_ptr<const ChartGrid> grid, int samples, std::uint64_t seed,
                                    const BumpOptions& options, double tolerance);

/// Quotients for h = H * envelope with H the top eigenvector of the curvature
/// operator at the origin, for widening envelopes. Intended for ball chart
/// grids, where the metric is a multiple of the identity at the origin.
std::vector<double> near_extremal_quotients(std::shared_ptr<const ChartGrid> grid,
                                            const std::vector<double>& envelope_radii);

struct DecayTrace {
  std::vector<double> times;
  std::vector<double> norms;
  std::vector<double> quotients;  // (Ah,h)/|h|^2 at each sample time
  double fitted_rate = 0.0;       // from log-linear least squares on the tail
  double quotient_rate = 0.0;     // -mean quotient over the tail
  double rate_floor = 0.0;        // (m-1)c/2
  double dt = 0.0;
  double dt_limit = 0.0;
};

struct LinearFlowOptions {
  double t_end = 0.5;
  double dt = 0.0;           // 0 picks cfl * dt_limit
  double cfl = 0.8;
  int sample_every = 10;
  double tail_fraction = 0.5;
};

/// Explicit stability limit of RK2 for dh/dt = Ah on this grid.
double linear_flow_dt_limit(const ChartGrid& grid, StencilOrder stencil);

/// RK2 for dh/dt = A h with h held at zero off the evaluation nodes.
/// Throws std::invalid_argument when dt exceeds the stability limit and
/// std::runtime_error on blow-up.
DecayTrace linearized_flow(const SymTensorField& h0, const LinearFlowOptions& options,
                           StencilOrder stencil = StencilOrder::Second);

struct LinearizationReport {
  std::vector<double> steps;
  std::vector<double> errors;  // |D(s) - A h| with D(s) = (Q(g_B + s h) - Q(g_B)) / s
  double a_norm = 0.0;         // |A h|
  /// errors[k] / errors[k + 1]
  std::vector<double> ratios() const;
};

/// Compares difference quotients of the flow speed at g_B with the fourth-order
/// A h on the flow operator's grid. Steps must be positive and decreasing;
/// std::domain_error when g_B + s h is not positive definite.
LinearizationReport linearization_consistency(const FlowOperator& op, const SymTensorField& h,
                                              const std::vector<double>& steps);

}  // namespace chflow
