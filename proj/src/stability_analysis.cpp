#include "chflow/stability_analysis.hpp"

#include "chflow/frame_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace chflow {

namespace {

double cutoff(double t) { return t >= 1.0 ? 0.0 : std::pow(1.0 - t * t, 6); }

void require_margin(const SymTensorField& h, int margin) {
  const ChartGrid& grid = h.grid();
  for (Eigen::Index k = 0; k < grid.size(); ++k)
    if (!h.values().col(k).isZero(0.0) && !grid.interior(k, margin))
      throw std::domain_error("field support comes within " + std::to_string(margin) +
                              " cells of the grid boundary");
}

// |T|^2 for T_ijk = nabla_k h_ij - nabla_i h_jk.
double t_norm_sq(const SmallMatrix& ginv, const std::array<SmallMatrix, kMaxDim>& nabla, int n) {
  std::vector<double> t(static_cast<std::size_t>(n * n * n));
  auto at = [n](int i, int j, int k) { return static_cast<std::size_t>((i * n + j) * n + k); };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) t[at(i, j, k)] = nabla[k](i, j) - nabla[i](j, k);
  // raise one index at a time
  std::vector<double> up = t, tmp(t.size());
  for (int slot = 0; slot < 3; ++slot) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double v = 0.0;
          for (int p = 0; p < n; ++p) {
            const int a = slot == 0 ? p : i, b = slot == 1 ? p : j, c = slot == 2 ? p : k;
            const int free = slot == 0 ? i : slot == 1 ? j : k;
            v += ginv(free, p) * up[at(a, b, c)];
          }
          tmp[at(i, j, k)] = v;
        }
    up.swap(tmp);
  }
  double s = 0.0;
  for (std::size_t q = 0; q < t.size(); ++q) s += t[q] * up[q];
  return s;
}

// Per-node coefficients of the linear operator A in packed components:
// (A h) = sum_ab g^ab d_a d_b h + F [d_0 h; ...; d_{n-1} h] + Z h.
class CachedOperator {
 public:
  CachedOperator(const ChartGrid& grid, StencilOrder stencil) : grid_(grid), stencil_(stencil) {
    n_ = grid.dim();
    comps_ = sym_components(n_);
    nodes_ = evaluation_nodes(grid, stencil);
    const Eigen::Index block = comps_ * comps_ * (n_ + 1) + n_ * n_;
    coeff_.resize(block, static_cast<Eigen::Index>(nodes_.size()));
    TensorJet jet;
    jet.n = n_;
    jet.order = 2;
    jet.value = SmallMatrix::Zero(n_, n_);
    for (int a = 0; a < n_; ++a) jet.d[a] = SmallMatrix::Zero(n_, n_);
    for (int a = 0; a < n_ * n_; ++a) jet.dd[a] = SmallMatrix::Zero(n_, n_);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(comps_);
    for (std::size_t q = 0; q < nodes_.size(); ++q) {
      const LocalGeometry geo = grid.geometry(nodes_[q], true);
      const RiemannTensor r = riemann_tensor(geo);
      auto kernel = [&](const TensorJet& j) {
        return pack(rough_laplacian_at(geo, j) + 2.0 * curvature_action_at(r, geo.ginv, j.value));
      };
      auto col = coeff_.col(static_cast<Eigen::Index>(q));
      for (int c = 0; c < comps_; ++c) {
        unit.setZero();
        unit(c) = 1.0;
        const SmallMatrix e = unpack(unit, n_);
        jet.value = e;
        col.segment(c * comps_, comps_) = kernel(jet);
        jet.value.setZero();
        for (int a = 0; a < n_; ++a) {
          jet.d[a] = e;
          col.segment(comps_ * comps_ * (1 + a) + c * comps_, comps_) = kernel(jet);
          jet.d[a].setZero();
        }
      }
      for (int a = 0; a < n_; ++a)
        for (int b = 0; b < n_; ++b) col(comps_ * comps_ * (n_ + 1) + a * n_ + b) = geo.ginv(a, b);
    }
  }

  const std::vector<Eigen::Index>& nodes() const { return nodes_; }

  void apply(const Eigen::MatrixXd& h, Eigen::MatrixXd& out) const {
    out.setZero(h.rows(), h.cols());
    const double hs = grid_.spacing();
    const bool fourth = stencil_ == StencilOrder::Fourth;
    Eigen::VectorXd d(comps_ * n_), dd(comps_), acc(comps_);
    for (std::size_t q = 0; q < nodes_.size(); ++q) {
      const Eigen::Index k = nodes_[q];
      const auto col = coeff_.col(static_cast<Eigen::Index>(q));
      for (int a = 0; a < n_; ++a) {
        const Eigen::Index s = grid_.stride(a);
        if (fourth)
          d.segment(a * comps_, comps_) =
              (h.col(k - 2 * s) - 8.0 * h.col(k - s) + 8.0 * h.col(k + s) - h.col(k + 2 * s)) / (12.0 * hs);
        else
          d.segment(a * comps_, comps_) = (h.col(k + s) - h.col(k - s)) / (2.0 * hs);
      }
      acc.noalias() = Eigen::Map<const Eigen::MatrixXd>(col.data(), comps_, comps_) * h.col(k);
      acc.noalias() += Eigen::Map<const Eigen::MatrixXd>(col.data() + comps_ * comps_, comps_, comps_ * n_) * d;
      const double* ginv = col.data() + comps_ * comps_ * (n_ + 1);
      for (int a = 0; a < n_; ++a) {
        const Eigen::Index s = grid_.stride(a);
        if (fourth)
          dd = (-h.col(k - 2 * s) + 16.0 * h.col(k - s) - 30.0 * h.col(k) + 16.0 * h.col(k + s) - h.col(k + 2 * s)) /
               (12.0 * hs * hs);
        else
          dd = (h.col(k + s) - 2.0 * h.col(k) + h.col(k - s)) / (hs * hs);
        acc += ginv[a * n_ + a] * dd;
        for (int b = a + 1; b < n_; ++b) {
          const double gab = ginv[a * n_ + b];
          if (gab == 0.0) continue;
          const Eigen::Index t = grid_.stride(b);
          if (fourth) {
            static constexpr double w[5] = {1.0, -8.0, 0.0, 8.0, -1.0};
            dd.setZero();
            for (int p = 0; p < 5; ++p)
              for (int r = 0; r < 5; ++r)
                if (w[p] != 0.0 && w[r] != 0.0) dd += w[p] * w[r] * h.col(k + (p - 2) * s + (r - 2) * t);
            dd /= 144.0 * hs * hs;
          } else {
            dd = (h.col(k + s + t) - h.col(k + s - t) - h.col(k - s + t) + h.col(k - s - t)) / (4.0 * hs * hs);
          }
          acc += 2.0 * gab * dd;
        }
      }
      out.col(k) = acc;
    }
  }

  // 2 / (bound on the spectral radius), from symbol bounds of each stencil.
  double dt_limit() const {
    const double hs = grid_.spacing();
    const bool fourth = stencil_ == StencilOrder::Fourth;
    const double second = fourth ? 16.0 / 3.0 : 4.0;
    const double first = fourth ? 1.372 : 1.0;
    double worst = 0.0;
    for (std::size_t q = 0; q < nodes_.size(); ++q) {
      const auto col = coeff_.col(static_cast<Eigen::Index>(q));
      const double* ginv = col.data() + comps_ * comps_ * (n_ + 1);
      double principal = 0.0;
      for (int a = 0; a < n_; ++a) {
        principal += second * ginv[a * n_ + a];
        for (int b = 0; b < n_; ++b)
          if (b != a) principal += first * first * std::abs(ginv[a * n_ + b]);
      }
      const double zero = Eigen::Map<const Eigen::MatrixXd>(col.data(), comps_, comps_).cwiseAbs().rowwise().sum().maxCoeff();
      const double one = Eigen::Map<const Eigen::MatrixXd>(col.data() + comps_ * comps_, comps_, comps_ * n_)
                             .cwiseAbs()
                             .rowwise()
                             .sum()
                             .maxCoeff();
      worst = std::max(worst, principal / (hs * hs) + first * one / hs + zero);
    }
    return worst > 0.0 ? 2.0 / worst : std::numeric_limits<double>::infinity();
  }

 private:
  const ChartGrid& grid_;
  StencilOrder stencil_;
  int n_ = 0;
  int comps_ = 0;
  std::vector<Eigen::Index> nodes_;
  Eigen::MatrixXd coeff_;
};

}  // namespace

// ---------------------------------------------------------------------------

SmallMatrix BumpField::operator()(const SmallVector& x) const {
  SmallMatrix out = SmallMatrix::Zero(n, n);
  const double env = cutoff(x.norm() / cutoff_radius);
  if (env == 0.0) return out;
  for (const Bump& b : bumps) {
    if (b.width <= 0.0) {
      out += b.coefficients;
      continue;
    }
    out += std::exp(-(x - b.center).squaredNorm() / (2.0 * b.width * b.width)) * b.coefficients;
  }
  return env * out;
}

BumpField random_bump_field(int n, const BumpOptions& options, std::uint64_t seed) {
  if (n < 1 || n > kMaxDim) throw std::invalid_argument("bump dimension out of range");
  if (options.count < 1 || !(options.cutoff_radius > 0.0) || !(options.min_width > 0.0) ||
      options.max_width < options.min_width)
    throw std::invalid_argument("invalid bump options");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  BumpField f;
  f.n = n;
  f.cutoff_radius = options.cutoff_radius;
  for (int b = 0; b < options.count; ++b) {
    SmallVector dir(n);
    for (int a = 0; a < n; ++a) dir(a) = normal(rng);
    const double r = options.center_radius * std::pow(unit(rng), 1.0 / n);
    BumpField::Bump bump;
    bump.center = dir.normalized() * r;
    bump.width = options.min_width + (options.max_width - options.min_width) * unit(rng);
    bump.coefficients.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) bump.coefficients(i, j) = bump.coefficients(j, i) = normal(rng);
    f.bumps.push_back(std::move(bump));
  }
  return f;
}

BumpField constant_bump_field(const SmallMatrix& coefficients, double cutoff_radius) {
  BumpField f;
  f.n = static_cast<int>(coefficients.rows());
  f.cutoff_radius = cutoff_radius;
  f.bumps.push_back({SmallVector::Zero(f.n), 0.0, coefficients});
  return f;
}

std::shared_ptr<ChartGrid> stability_grid(int m, double c, double spacing, double domain_radius) {
  auto chart = std::make_shared<BergmanBallChart>(m, c);
  const double half = std::tanh(std::sqrt(c) / 2.0 * domain_radius) + spacing;
  return std::make_shared<ChartGrid>(chart, ChartGrid::Options{spacing, half, domain_radius, true});
}

SymTensorField sample_field(std::shared_ptr<const ChartGrid> grid, const BumpField& f) {
  if (f.n != grid->dim()) throw std::invalid_argument("field and grid dimensions differ");
  SymTensorField h(grid);
  for (Eigen::Index k = 0; k < grid->size(); ++k)
    if (grid->inside(k)) h.set(k, f(grid->point(k)));
  SmallVector edge = SmallVector::Zero(f.n);
  edge(0) = f.cutoff_radius;
  if (grid->chart().contains(edge)) h.support_radius = grid->chart().radius(edge);
  return h;
}

// ---------------------------------------------------------------------------

double EnergyReport::bochner_residual() const {
  return std::abs(bochner_lhs() - bochner_rhs()) / std::max(bochner_lhs(), 1.0);
}

double EnergyReport::energy_residual() const {
  return std::abs(energy_lhs() - energy_rhs()) / std::max(std::abs(energy_rhs()), 1.0);
}

EnergyReport energy_terms(const SymTensorField& h, StencilOrder stencil) {
  const ChartGrid& grid = h.grid();
  require_margin(h, 2 * stencil_reach(stencil));
  const int n = grid.dim();
  const double lambda = einstein_lambda(grid);
  EnergyReport rep;
  rep.spacing = grid.spacing();
  for (Eigen::Index node : active_nodes(grid, h.values(), stencil)) {
    const LocalGeometry geo = grid.geometry(node, true);
    const TensorJet jet = tensor_jet(grid, h.values(), node, stencil, 2);
    const auto nabla = covariant_derivative_at(geo, jet);
    const RiemannTensor r = riemann_tensor(geo);
    const SmallMatrix rm = curvature_action_at(r, geo.ginv, jet.value);
    const SmallMatrix ah = rough_laplacian_at(geo, jet) + 2.0 * rm;
    const SmallVector div = divergence_at(geo, nabla);

    double grad = 0.0;
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        if (geo.ginv(k, l) != 0.0) grad += geo.ginv(k, l) * contract2(geo.ginv, nabla[k], nabla[l]);
    const double w = 4.0 * geo.sqrt_det * grid.cell_volume();
    const double hh = contract2(geo.ginv, jet.value, jet.value);
    rep.grad_sq += w * grad;
    rep.t_sq += w * t_norm_sq(geo.ginv, nabla, n);
    rep.div_sq += w * div.dot(geo.ginv * div);
    rep.h_sq += w * hh;
    rep.lambda_h_sq += w * lambda * hh;
    rep.curvature += w * contract2(geo.ginv, rm, jet.value);
    rep.a_h_h += w * contract2(geo.ginv, ah, jet.value);
  }
  return rep;
}

EnergyReport bochner_check(const SymTensorField& h, StencilOrder stencil) { return energy_terms(h, stencil); }
EnergyReport energy_identity_check(const SymTensorField& h, StencilOrder stencil) {
  return energy_terms(h, stencil);
}

// ---------------------------------------------------------------------------

double RayleighReport::worst_quotient() const {
  double w = -std::numeric_limits<double>::infinity();
  for (const auto& s : samples) w = std::max(w, s.quotient);
  return w;
}

RayleighReport rayleigh_bound_check(std::shared_ptr<const ChartGrid> grid, int samples, std::uint64_t seed,
                                    const BumpOptions& options, double tolerance) {
  if (samples < 1) throw std::invalid_argument("need at least one Rayleigh sample");
  RayleighReport rep;
  rep.m = grid->chart().m();
  rep.c = grid->chart().c();
  rep.bound = -(rep.m - 1) * rep.c / 2.0;
  rep.tolerance = tolerance;
  std::mt19937_64 seeds(seed);
  for (int s = 0; s < samples; ++s) {
    const std::uint64_t sample_seed = seeds();
    const SymTensorField h = sample_field(grid, random_bump_field(grid->dim(), options, sample_seed));
    rep.samples.push_back({sample_seed, energy_terms(h).rayleigh_quotient()});
  }
  return rep;
}

std::vector<double> near_extremal_quotients(std::shared_ptr<const ChartGrid> grid,
                                            const std::vector<double>& envelope_radii) {
  const int m = grid->chart().m();
  const auto basis = build_gamma_basis(m);
  // eigenvectors do not depend on c > 0
  const CurvatureMatrix rg = block_R_gamma(m, Rational(1));
  const Eigen::VectorXd v = top_eigenvector(rg);
  const Eigen::MatrixXd top = from_gamma_coordinates(basis, v);
  std::vector<double> out;
  for (double radius : envelope_radii) {
    const SymTensorField h = sample_field(grid, constant_bump_field(SmallMatrix(top), radius));
    out.push_back(energy_terms(h).rayleigh_quotient());
  }
  return out;
}

// ---------------------------------------------------------------------------

double linear_flow_dt_limit(const ChartGrid& grid, StencilOrder stencil) {
  return CachedOperator(grid, stencil).dt_limit();
}

DecayTrace linearized_flow(const SymTensorField& h0, const LinearFlowOptions& options, StencilOrder stencil) {
  const ChartGrid& grid = h0.grid();
  if (!(options.t_end > 0.0) || options.sample_every < 1 || !(options.tail_fraction > 0.0) ||
      options.tail_fraction > 1.0)
    throw std::invalid_argument("invalid linear flow options");
  const CachedOperator op(grid, stencil);
  DecayTrace trace;
  trace.dt_limit = op.dt_limit();
  trace.dt = options.dt > 0.0 ? options.dt : options.cfl * trace.dt_limit;
  if (trace.dt > trace.dt_limit) throw std::invalid_argument("time step exceeds the explicit stability limit");
  trace.rate_floor = (grid.chart().m() - 1) * grid.chart().c() / 2.0;

  // Dirichlet data: zero wherever A cannot be evaluated.
  SymTensorField h(h0.grid_ptr());
  for (Eigen::Index k : op.nodes()) h.values().col(k) = h0.values().col(k);

  const int steps = static_cast<int>(std::ceil(options.t_end / trace.dt - 1e-9));
  const double dt = options.t_end / steps;
  trace.dt = dt;
  SymTensorField k1(h0.grid_ptr()), k2(h0.grid_ptr()), mid(h0.grid_ptr());
  const double initial = l2_norm(h);
  for (int step = 0; step <= steps; ++step) {
    op.apply(h.values(), k1.values());
    if (step % options.sample_every == 0 || step == steps) {
      const double norm_sq = l2_inner(h, h);
      trace.times.push_back(step * dt);
      trace.norms.push_back(std::sqrt(norm_sq));
      trace.quotients.push_back(norm_sq > 0.0 ? l2_inner(k1, h) / norm_sq : 0.0);
      if (!std::isfinite(norm_sq) || std::sqrt(norm_sq) > 1e6 * std::max(initial, 1e-300))
        throw std::runtime_error("linearized flow blew up at t = " + std::to_string(step * dt));
    }
    if (step == steps) break;
    mid.values() = h.values() + dt * k1.values();
    op.apply(mid.values(), k2.values());
    h.values() += 0.5 * dt * (k1.values() + k2.values());
  }

  if (initial > 0.0) {
    const std::size_t first = static_cast<std::size_t>(
        std::floor((1.0 - options.tail_fraction) * static_cast<double>(trace.times.size() - 1)));
    const std::vector<double> t(trace.times.begin() + static_cast<long>(first), trace.times.end());
    const std::vector<double> y(trace.norms.begin() + static_cast<long>(first), trace.norms.end());
    trace.fitted_rate = fitted_decay_rate(t, y);
    double integral = 0.0;
    for (std::size_t k = first + 1; k < trace.times.size(); ++k)
      integral += 0.5 * (trace.quotients[k] + trace.quotients[k - 1]) * (trace.times[k] - trace.times[k - 1]);
    trace.quotient_rate = -integral / (trace.times.back() - trace.times[first]);
  }
  return trace;
}

// ---------------------------------------------------------------------------

std::vector<double> LinearizationReport::ratios() const {
  std::vector<double> r;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) r.push_back(errors[k] / errors[k + 1]);
  return r;
}

LinearizationReport linearization_consistency(const FlowOperator& op, const SymTensorField& h,
                                              const std::vector<double>& steps) {
  if (steps.empty()) throw std::invalid_argument("no step sizes");
  for (std::size_t k = 0; k < steps.size(); ++k)
    if (!(steps[k] > 0.0) || (k > 0 && !(steps[k] < steps[k - 1])))
      throw std::invalid_argument("step sizes must be positive and decreasing");
  LinearizationReport rep;
  rep.steps = steps;
  const SymTensorField ah = operator_A(h, APath::Direct, StencilOrder::Fourth);
  rep.a_norm = l2_norm(ah);
  for (double s : steps) rep.errors.push_back(l2_norm(difference_quotient(op, h, s) - ah));
  return rep;
}

}  // namespace chflow
