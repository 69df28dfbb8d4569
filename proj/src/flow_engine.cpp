#include "chflow/flow_engine.hpp"

#include "chflow/decay_fit.hpp"
#include "chflow/holder_interpolation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace chflow {

namespace {

using Deriv = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Dual = Eigen::AutoDiffScalar<Deriv>;

// w_j = g_jk u^kl beta_l with beta_j = -g^ik (nabla_i G)_kj, and dw(j, a) = d_a w_j.
// Forward-mode derivatives are seeded from the second-order jets.
void deturck_vector(const TensorJet& g, const TensorJet& u, const SmallMatrix& ginv, SmallVector& w,
                    SmallMatrix& dw) {
  const int n = g.n;
  const auto sz = static_cast<std::size_t>(n);
  auto i2 = [sz](int i, int j) { return static_cast<std::size_t>(i) * sz + static_cast<std::size_t>(j); };
  auto i3 = [sz](int a, int i, int j) {
    return (static_cast<std::size_t>(a) * sz + static_cast<std::size_t>(i)) * sz + static_cast<std::size_t>(j);
  };
  const SmallMatrix uinv = u.value.inverse();
  std::array<SmallMatrix, kMaxDim> dginv, duinv;
  for (int a = 0; a < n; ++a) {
    dginv[a] = -ginv * g.d[a] * ginv;
    duinv[a] = -uinv * u.d[a] * uinv;
  }

  std::vector<Dual> G(sz * sz), Gi(sz * sz), U(sz * sz), Ui(sz * sz), dG(sz * sz * sz), dU(sz * sz * sz);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Deriv pg(n), pgi(n), pu(n), pui(n);
      for (int a = 0; a < n; ++a) {
        pg(a) = g.d[a](i, j);
        pgi(a) = dginv[a](i, j);
        pu(a) = u.d[a](i, j);
        pui(a) = duinv[a](i, j);
      }
      G[i2(i, j)] = Dual(g.value(i, j), pg);
      Gi[i2(i, j)] = Dual(ginv(i, j), pgi);
      U[i2(i, j)] = Dual(u.value(i, j), pu);
      Ui[i2(i, j)] = Dual(uinv(i, j), pui);
      for (int a = 0; a < n; ++a) {
        Deriv qg(n), qu(n);
        for (int b = 0; b < n; ++b) {
          qg(b) = g.dd[a * n + b](i, j);
          qu(b) = u.dd[a * n + b](i, j);
        }
        dG[i3(a, i, j)] = Dual(g.d[a](i, j), qg);
        dU[i3(a, i, j)] = Dual(u.d[a](i, j), qu);
      }
    }
  const Dual zero(0.0, Deriv::Zero(n));

  // gamma[p,i,k] = Gamma^p_ik
  std::vector<Dual> gamma(sz * sz * sz, zero);
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < n; ++i)
      for (int k = i; k < n; ++k) {
        Dual s = zero;
        for (int q = 0; q < n; ++q) s += Gi[i2(p, q)] * (dG[i3(i, q, k)] + dG[i3(k, q, i)] - dG[i3(q, i, k)]);
        gamma[i3(p, i, k)] = 0.5 * s;
        gamma[i3(p, k, i)] = gamma[i3(p, i, k)];
      }

  // t = tr_g u and its derivatives
  Dual t = zero;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) t += Gi[i2(a, b)] * U[i2(a, b)];
  std::vector<Dual> dt(sz, zero);
  for (int i = 0; i < n; ++i) {
    // d_i g^ab = -g^ap d_i g_pq g^qb
    std::vector<Dual> m(sz * sz, zero);
    for (int a = 0; a < n; ++a)
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p) m[i2(a, q)] += Gi[i2(a, p)] * dG[i3(i, p, q)];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        Dual dgi = zero;
        for (int q = 0; q < n; ++q) dgi -= m[i2(a, q)] * Gi[i2(q, b)];
        dt[i] += dgi * U[i2(a, b)] + Gi[i2(a, b)] * dU[i3(i, a, b)];
      }
  }

  std::vector<Dual> Gt(sz * sz), dGt(sz * sz * sz);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) {
      Gt[i2(k, j)] = U[i2(k, j)] - 0.5 * t * G[i2(k, j)];
      for (int i = 0; i < n; ++i)
        dGt[i3(i, k, j)] = dU[i3(i, k, j)] - 0.5 * dt[i] * G[i2(k, j)] - 0.5 * t * dG[i3(i, k, j)];
    }

  std::vector<Dual> beta(sz, zero);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        Dual cov = dGt[i3(i, k, j)];
        for (int p = 0; p < n; ++p)
          cov -= gamma[i3(p, i, k)] * Gt[i2(p, j)] + gamma[i3(p, i, j)] * Gt[i2(k, p)];
        beta[j] -= Gi[i2(i, k)] * cov;
      }

  w.resize(n);
  dw.resize(n, n);
  for (int j = 0; j < n; ++j) {
    Dual wj = zero;
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) wj += G[i2(j, k)] * Ui[i2(k, l)] * beta[l];
    w(j) = wj.value();
    for (int a = 0; a < n; ++a) dw(j, a) = wj.derivatives()(a);
  }
}

}  // namespace

// ---------------------------------------------------------------------------

MetricField::MetricField(SymTensorField g) : values_(std::move(g)) {
  const ChartGrid& grid = values_.grid();
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    if (!grid.inside(k)) continue;
    const SmallMatrix m = values_.at(k);
    if (!m.allFinite() || Eigen::LLT<SmallMatrix>(m).info() != Eigen::Success)
      throw std::domain_error("metric is not positive definite at node " + std::to_string(k));
  }
}

MetricField MetricField::background(std::shared_ptr<const ChartGrid> grid) {
  SymTensorField g(grid);
  for (Eigen::Index k = 0; k < grid->size(); ++k)
    if (grid->inside(k)) g.set(k, grid->chart().metric(grid->point(k)));
  return MetricField(std::move(g));
}

double MetricField::relative_floor(const std::vector<Eigen::Index>& nodes) const {
  const ChartGrid& grid = values_.grid();
  double floor = std::numeric_limits<double>::infinity();
  auto visit = [&](Eigen::Index k) {
    const SmallMatrix gb = grid.chart().metric(grid.point(k));
    Eigen::GeneralizedSelfAdjointEigenSolver<SmallMatrix> es(values_.at(k), gb, Eigen::EigenvaluesOnly);
    floor = std::min(floor, es.eigenvalues().minCoeff());
  };
  if (nodes.empty()) {
    for (Eigen::Index k = 0; k < grid.size(); ++k)
      if (grid.inside(k)) visit(k);
  } else {
    for (Eigen::Index k : nodes) visit(k);
  }
  return floor;
}

// ---------------------------------------------------------------------------

QTerms q_terms(const TensorJet& g, const TensorJet& u, double lambda, bool with_deturck) {
  const int n = g.n;
  MetricJet mj;
  mj.order = 2;
  mj.g = g.value;
  mj.dg = g.d;
  mj.ddg = g.dd;
  const LocalGeometry geo = local_geometry(mj);
  QTerms out;
  out.ricci = ricci_tensor(riemann_tensor(geo), geo.ginv);
  out.q = -2.0 * (out.ricci + lambda * g.value);
  out.w = SmallVector::Zero(n);
  out.deturck = SmallMatrix::Zero(n, n);
  if (with_deturck) {
    SmallMatrix dw;
    deturck_vector(g, u, geo.ginv, out.w, dw);
    // P = -2 delta* w = -(nabla_i w_j + nabla_j w_i)
    out.deturck = -(dw + dw.transpose());
    for (int p = 0; p < n; ++p) out.deturck += 2.0 * out.w(p) * geo.gamma[p];
    out.q -= out.deturck;
  }
  return out;
}

SymbolBounds principal_symbol_bounds(const TensorJet& g, const TensorJet& u, double lambda, int random_directions,
                                     std::uint64_t seed) {
  const int n = g.n;
  const int comps = sym_components(n);
  const SmallMatrix base = q_terms(g, u, lambda).q;
  const SmallMatrix ginv = g.value.inverse();
  const SmallMatrix lower = Eigen::LLT<SmallMatrix>(g.value).matrixL();
  const SmallMatrix lower_inv = lower.inverse();

  // Orthonormal basis of symmetric matrices for tr(g^-1 H g^-1 K): L E L^T.
  std::vector<SmallMatrix> basis;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      SmallMatrix e = SmallMatrix::Zero(n, n);
      if (i == j) {
        e(i, i) = 1.0;
      } else {
        e(i, j) = e(j, i) = std::sqrt(0.5);
      }
      basis.push_back(lower * e * lower.transpose());
    }
  auto coordinates = [&](const SmallMatrix& k) {
    const SmallMatrix m = lower_inv * k * lower_inv.transpose();
    Eigen::VectorXd v(comps);
    int c = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) v(c++) = i == j ? m(i, i) : std::sqrt(2.0) * m(i, j);
    return v;
  };

  std::vector<SmallVector> directions;
  for (int a = 0; a < n; ++a) directions.push_back(SmallVector::Unit(n, a));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int k = 0; k < random_directions; ++k) {
    SmallVector xi(n);
    for (int a = 0; a < n; ++a) xi(a) = normal(rng);
    directions.push_back(xi);
  }

  SymbolBounds bounds{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (SmallVector xi : directions) {
    xi /= std::sqrt(xi.dot(ginv * xi));
    Eigen::MatrixXd s(comps, comps);
    for (int c = 0; c < comps; ++c) {
      TensorJet probe = g;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) probe.dd[a * n + b] += xi(a) * xi(b) * basis[static_cast<std::size_t>(c)];
      s.col(c) = coordinates(q_terms(probe, u, lambda).q - base);
    }
    const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues();
    bounds.lower = std::min(bounds.lower, ev.minCoeff());
    bounds.upper = std::max(bounds.upper, ev.maxCoeff());
  }
  return bounds;
}

std::shared_ptr<ChartGrid> flow_grid(int m, double c, double spacing, double flow_radius) {
  auto chart = std::make_shared<GeodesicNormalChart>(m, c);
  const double half = spacing * (std::ceil(flow_radius / spacing - 1e-9) + 2.0);
  const double corner = half * std::sqrt(2.0 * m) + spacing;
  return std::make_shared<ChartGrid>(chart, ChartGrid::Options{spacing, half, corner, true});
}

// ---------------------------------------------------------------------------

FlowOperator::FlowOperator(std::shared_ptr<const ChartGrid> grid)
    : grid_(grid),
      background_(MetricField::background(grid)),
      lambda_(einstein_lambda(*grid)),
      nodes_(chflow::evaluation_nodes(*grid, StencilOrder::Fourth)) {}

TensorJet FlowOperator::jet(const MetricField& g, Eigen::Index node) const {
  return tensor_jet(*grid_, g.tensor().values(), node, StencilOrder::Fourth, 2);
}

QTerms FlowOperator::terms_at(const MetricField& g, Eigen::Index node, bool with_deturck) const {
  if (&g.grid() != grid_.get()) throw std::invalid_argument("metric lives on a different grid");
  return q_terms(jet(g, node), jet(background_, node), lambda_, with_deturck);
}

SymTensorField FlowOperator::ricci_of(const MetricField& g) const {
  SymTensorField out(grid_);
  for (Eigen::Index k : nodes_) out.set(k, terms_at(g, k, false).ricci);
  return out;
}

SymTensorField FlowOperator::deturck_term(const MetricField& g) const {
  SymTensorField out(grid_);
  for (Eigen::Index k : nodes_) out.set(k, terms_at(g, k, true).deturck);
  return out;
}

SymTensorField FlowOperator::q_apply(const MetricField& g, bool with_deturck) const {
  return q_apply(g, nodes_, with_deturck);
}

SymTensorField FlowOperator::q_apply(const MetricField& g, const std::vector<Eigen::Index>& nodes,
                                     bool with_deturck) const {
  SymTensorField out(grid_);
  for (Eigen::Index k : nodes) {
    const SmallMatrix q = terms_at(g, k, with_deturck).q;
    if (!q.allFinite()) throw std::runtime_error("non-finite flow speed at node " + std::to_string(k));
    out.set(k, q);
  }
  return out;
}

SymbolBounds FlowOperator::ellipticity(const MetricField& g, Eigen::Index node, int random_directions,
                                       std::uint64_t seed) const {
  return principal_symbol_bounds(jet(g, node), jet(background_, node), lambda_, random_directions, seed);
}

// ---------------------------------------------------------------------------

SymTensorField difference_quotient(const FlowOperator& op, const SymTensorField& h, double s, bool with_deturck) {
  if (&h.grid() != &op.grid()) throw std::invalid_argument("field lives on a different grid");
  const std::vector<Eigen::Index> nodes = active_nodes(op.grid(), h.values(), StencilOrder::Fourth);
  const MetricField perturbed(op.background().tensor() + s * h);
  SymTensorField d = op.q_apply(perturbed, nodes, with_deturck);
  d -= op.q_apply(op.background(), nodes, with_deturck);
  d *= 1.0 / s;
  return d;
}

GaugeMismatchReport gauge_mismatch_check(const FlowOperator& op, const SymTensorField& h, double s) {
  GaugeMismatchReport rep;
  rep.step = s;
  SymTensorField mismatch = difference_quotient(op, h, s, false);
  mismatch -= operator_A(h, APath::Direct, StencilOrder::Fourth);
  const SymTensorField gauge =
      2.0 * divergence_adjoint(divergence(bianchi_gauge(h), StencilOrder::Fourth), StencilOrder::Fourth);
  rep.mismatch_norm = l2_norm(mismatch);
  rep.gauge_norm = l2_norm(gauge);
  rep.difference_norm = l2_norm(mismatch - gauge);
  return rep;
}

// ---------------------------------------------------------------------------

double flow_dt_limit(const MetricField& g, const std::vector<Eigen::Index>& nodes) {
  const ChartGrid& grid = g.grid();
  const int n = grid.dim();
  // largest symbols of the fourth-order second and first differences, times h^2 and h
  constexpr double kSecond = 16.0 / 3.0;
  constexpr double kFirst = 1.3722;
  double rho = 0.0;
  for (Eigen::Index k : nodes) {
    const SmallMatrix ginv = g.at(k).inverse();
    double s = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) s += a == b ? kSecond * ginv(a, a) : kFirst * kFirst * std::abs(ginv(a, b));
    rho = std::max(rho, s);
  }
  return 2.0 * grid.spacing() * grid.spacing() / rho;
}

FlowTrace evolve(const FlowOperator& op, const MetricField& g0, const FlowConfig& config) {
  const ChartGrid& grid = op.grid();
  if (&g0.grid() != &grid) throw std::invalid_argument("initial metric lives on a different grid");
  if (!(config.t_end > 0.0) || !(config.cfl > 0.0) || config.sample_every < 1 || !(config.tail_fraction > 0.0) ||
      config.tail_fraction > 1.0)
    throw std::invalid_argument("invalid flow configuration");

  std::vector<Eigen::Index> nodes;
  std::vector<std::uint8_t> moving(static_cast<std::size_t>(grid.size()), 0);
  for (Eigen::Index k : op.evaluation_nodes())
    if (grid.radius(k) <= config.flow_radius) {
      nodes.push_back(k);
      moving[static_cast<std::size_t>(k)] = 1;
    }
  const Eigen::MatrixXd& gb = op.background().tensor().values();
  for (Eigen::Index k = 0; k < grid.size(); ++k)
    if (!moving[static_cast<std::size_t>(k)] && grid.inside(k) && !(g0.tensor().values().col(k) - gb.col(k)).isZero(0.0))
      throw std::invalid_argument("initial metric differs from the background outside the flow region");
  if (!(g0.relative_floor(nodes) > config.epsilon)) throw std::invalid_argument("initial metric is not admissible");

  FlowTrace trace;
  trace.rate_floor = (grid.chart().m() - 1) * grid.chart().c() / 2.0;
  const double limit0 = flow_dt_limit(g0, nodes);
  if (config.dt > limit0) throw std::invalid_argument("time step exceeds the stability limit");
  const double dt_target = config.dt > 0.0 ? config.dt : config.cfl * limit0;
  trace.steps = static_cast<int>(std::ceil(config.t_end / dt_target - 1e-9));
  trace.dt = config.t_end / trace.steps;
  trace.min_dt_limit = limit0;

  SymTensorField residual(op.grid_ptr());
  if (config.subtract_background_residual) residual = op.q_apply(op.background(), nodes);

  SymTensorField g = g0.tensor();
  auto record = [&](int step, double floor) {
    const SymTensorField diff = g - op.background().tensor();
    trace.samples.push_back({step * trace.dt, l2_norm(diff), weighted_sup_norm(diff, config.tau), floor});
  };
  auto abort = [&](const std::string& why, int step) {
    throw FlowAborted(why + " at t = " + std::to_string(step * trace.dt), trace, g);
  };

  for (int step = 0;; ++step) {
    const MetricField current(g);
    const double floor = current.relative_floor(nodes);
    if (!(floor > config.epsilon)) abort("metric left the admissible set", step);
    const double limit = flow_dt_limit(current, nodes);
    trace.min_dt_limit = std::min(trace.min_dt_limit, limit);
    if (trace.dt > limit) abort("stability limit fell below the time step", step);
    if (step % config.sample_every == 0 || step == trace.steps) record(step, floor);
    if (step == trace.steps) break;

    try {
      const SymTensorField k1 = op.q_apply(current, nodes) - residual;
      const MetricField stage(g + trace.dt * k1);
      const SymTensorField k2 = op.q_apply(stage, nodes) - residual;
      g += (0.5 * trace.dt) * (k1 + k2);
    } catch (const std::domain_error& e) {
      abort(e.what(), step);
    } catch (const std::runtime_error& e) {
      abort(e.what(), step);
    }
  }

  const auto first = static_cast<std::size_t>(
      std::floor((1.0 - config.tail_fraction) * static_cast<double>(trace.samples.size() - 1)));
  std::vector<double> t, l2, sup;
  for (std::size_t k = first; k < trace.samples.size(); ++k) {
    t.push_back(trace.samples[k].t);
    l2.push_back(trace.samples[k].l2);
    sup.push_back(trace.samples[k].weighted_sup);
  }
  if (t.size() >= 2 && l2.front() > 0.0 && l2.back() > 0.0) {
    trace.fitted_rate = fitted_decay_rate(t, l2);
    trace.fitted_sup_rate = fitted_decay_rate(t, sup);
  }
  return trace;
}

}  // namespace chflow
