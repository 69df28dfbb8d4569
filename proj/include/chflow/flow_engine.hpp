#pragma once

// The curvature-normalized Ricci-DeTurck flow
//   dg/dt = Q(g) = -2 (Rc(g) + lambda g) - P(g),  P(g) = -2 delta*_g (u~ delta_g G(g, u)),
// with background u = g_B, G(g, u) = u - (tr_g u) g / 2 and (u~ b)_j = g_jk u^kl b_l.
// Every term is assembled pointwise from fourth-order difference jets of g
// and of the sampled background, so Q(g_B) vanishes up to the jets' error.

#include "chflow/tensor_calculus.hpp"

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace chflow {

/// A sampled Riemannian metric on a grid. Positive definiteness is checked on
/// construction at every inside node.
class MetricField {
 public:
  explicit MetricField(SymTensorField g);

  /// The chart metric sampled at every inside node.
  static MetricField background(std::shared_ptr<const ChartGrid> grid);

  const ChartGrid& grid() const { return values_.grid(); }
  std::shared_ptr<const ChartGrid> grid_ptr() const { return values_.grid_ptr(); }
  const SymTensorField& tensor() const { return values_; }
  SmallMatrix at(Eigen::Index node) const { return values_.at(node); }

  /// Smallest eigenvalue of g relative to the chart metric g_B over the given
  /// nodes (all inside nodes when empty): the largest e with g >= e g_B.
  double relative_floor(const std::vector<Eigen::Index>& nodes = {}) const;
  /// g > epsilon g_B as quadratic forms at every inside node.
  bool admissible(double epsilon) const { return relative_floor() > epsilon; }

 private:
  SymTensorField values_;
};

/// Quantities at one node.
struct QTerms {
  SmallMatrix ricci;
  SmallVector w;        // u~ delta_g G(g, u)
  SmallMatrix deturck;  // P(g)
  SmallMatrix q;
};

/// Q from second-order jets of g and of the background u.
QTerms q_terms(const TensorJet& g, const TensorJet& u, double lambda, bool with_deturck = true);

/// Extreme eigenvalues of the symmetrized principal symbol of Q at a jet,
/// over unit covectors (in g^-1) and in the inner product tr(g^-1 H g^-1 K).
/// Q is affine in the second derivatives, so the symbol is exact.
struct SymbolBounds {
  double lower = 0.0;
  double upper = 0.0;
  double ratio() const { return upper / lower; }
};

SymbolBounds principal_symbol_bounds(const TensorJet& g, const TensorJet& u, double lambda, int random_directions,
                                     std::uint64_t seed);

/// Grid of geodesic normal coordinates for the flow: the box reaches two
/// cells beyond the geodesic radius `flow_radius`, and every box node is inside.
std::shared_ptr<ChartGrid> flow_grid(int m, double c, double spacing, double flow_radius);

class FlowOperator {
 public:
  explicit FlowOperator(std::shared_ptr<const ChartGrid> grid);

  const ChartGrid& grid() const { return *grid_; }
  std::shared_ptr<const ChartGrid> grid_ptr() const { return grid_; }
  const MetricField& background() const { return background_; }
  double lambda() const { return lambda_; }
  /// Nodes with a full fourth-order stencil.
  const std::vector<Eigen::Index>& evaluation_nodes() const { return nodes_; }

  QTerms terms_at(const MetricField& g, Eigen::Index node, bool with_deturck = true) const;

  SymTensorField ricci_of(const MetricField& g) const;
  SymTensorField deturck_term(const MetricField& g) const;
  SymTensorField q_apply(const MetricField& g, bool with_deturck = true) const;
  /// Q at the listed nodes only; zero elsewhere. Throws std::runtime_error on
  /// a non-finite value.
  SymTensorField q_apply(const MetricField& g, const std::vector<Eigen::Index>& nodes,
                         bool with_deturck = true) const;

  SymbolBounds ellipticity(const MetricField& g, Eigen::Index node, int random_directions = 16,
                           std::uint64_t seed = 1) const;

 private:
  TensorJet jet(const MetricField& g, Eigen::Index node) const;

  std::shared_ptr<const ChartGrid> grid_;
  MetricField background_;
  double lambda_;
  std::vector<Eigen::Index> nodes_;
};

/// Q(g_B + s h) - Q(g_B) divided by s at the nodes where h's stencil reaches.
SymTensorField difference_quotient(const FlowOperator& op, const SymTensorField& h, double s,
                                   bool with_deturck = true);

/// Without the DeTurck term the linearization of -2(Rc + lambda g) differs
/// from A h by the gauge term 2 delta*(delta G(h)).
struct GaugeMismatchReport {
  double step = 0.0;
  double mismatch_norm = 0.0;    // |D(s) - A h|
  double gauge_norm = 0.0;       // |2 delta* delta G(h)|
  double difference_norm = 0.0;  // |D(s) - A h - 2 delta* delta G(h)|
  double relative() const { return difference_norm / gauge_norm; }
};

GaugeMismatchReport gauge_mismatch_check(const FlowOperator& op, const SymTensorField& h, double s);

struct FlowConfig {
  double flow_radius = 0.5;  // geodesic; g is held at g_B outside
  double dt = 0.0;           // 0 picks cfl times the initial stability limit
  double cfl = 0.5;
  double t_end = 0.1;
  double epsilon = 0.1;  // admissibility floor g > epsilon g_B
  double tau = 1.5;      // weight of the sup norm
  int sample_every = 10;
  double tail_fraction = 0.5;
  /// Step dg/dt = Q(g) - Q(g_B) so that the sampled background is an exact
  /// fixed point of the discrete flow.
  bool subtract_background_residual = true;
};

struct FlowSample {
  double t;
  double l2;            // |g - g_B|
  double weighted_sup;  // weighted sup norm of g - g_B
  double floor;         // relative_floor of g
};

struct FlowTrace {
  std::vector<FlowSample> samples;
  int steps = 0;
  double dt = 0.0;
  double min_dt_limit = 0.0;  // smallest stability limit met along the run
  double fitted_rate = 0.0;   // least-squares tail rate of the L2 distance
  double fitted_sup_rate = 0.0;
  double rate_floor = 0.0;    // (m-1)c/2
};

/// Explicit RK2 stability limit for the current metric: 2 over the largest
/// fourth-order difference symbol of g^ab d_a d_b on the grid.
double flow_dt_limit(const MetricField& g, const std::vector<Eigen::Index>& nodes);

/// Thrown when the flow leaves the admissible set or its stability limit drops
/// below the step. Carries the trace so far and the metric at the failure.
class FlowAborted : public std::runtime_error {
 public:
  FlowAborted(const std::string& reason, FlowTrace trace, SymTensorField snapshot)
      : std::runtime_error(reason), trace_(std::move(trace)), snapshot_(std::move(snapshot)) {}
  const FlowTrace& trace() const { return trace_; }
  const SymTensorField& snapshot() const { return snapshot_; }

 private:
  FlowTrace trace_;
  SymTensorField snapshot_;
};

/// RK2 stepping of dg/dt = Q(g) with g = g_B outside the flow radius.
/// Throws std::invalid_argument for inadmissible data, data not equal to g_B
/// outside the flow radius, or a step above the stability limit.
FlowTrace evolve(const FlowOperator& op, const MetricField& g0, const FlowConfig& config);

}  // namespace chflow
