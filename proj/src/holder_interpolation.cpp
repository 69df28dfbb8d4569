#include "chflow/holder_interpolation.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace chflow {

namespace {

constexpr int kReach = 2;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Coordinate derivatives of every component: d[q] has rows component * L_q + l,
// with l running over the multi-indices of order q (pairs a <= b for q = 2).
struct Derivatives {
  int order = 0;
  int comps = 0;
  std::vector<int> count;  // L_q
  std::vector<Eigen::MatrixXd> d;
  std::vector<std::uint8_t> valid;
  double resolved_radius = 0.0;
};

double resolved_radius(const ChartGrid& grid, int reach) {
  double r = kInf;
  for (Eigen::Index k = 0; k < grid.size(); ++k)
    if (grid.depth(k) <= reach + 1) r = std::min(r, grid.radius(k));
  return r;
}

Derivatives derivatives(const SymTensorField& h, int order) {
  if (order < 0 || order > 2) throw std::invalid_argument("derivative order must be 0, 1 or 2");
  const ChartGrid& grid = h.grid();
  const int n = grid.dim();
  Derivatives out;
  out.order = order;
  out.comps = sym_components(n);
  out.count = {1, n, n * (n + 1) / 2};
  out.count.resize(static_cast<std::size_t>(order + 1));
  const int reach = order == 0 ? 0 : kReach;
  out.resolved_radius = resolved_radius(grid, reach);
  for (int q = 0; q <= order; ++q)
    out.d.push_back(Eigen::MatrixXd::Zero(out.comps * out.count[static_cast<std::size_t>(q)], grid.size()));
  out.valid.assign(static_cast<std::size_t>(grid.size()), 0);
  for (Eigen::Index k = 0; k < grid.size(); ++k) out.valid[static_cast<std::size_t>(k)] = grid.interior(k, reach);

  if (order == 0) {
    out.d[0] = h.values();
    return out;
  }
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(grid.size()), 0);
  for (Eigen::Index k = 0; k < grid.size(); ++k) mask[static_cast<std::size_t>(k)] = !h.values().col(k).isZero(0.0);
  mask = grid.dilate(std::move(mask), reach);
  const double support = h.support_radius.value_or(kInf);
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    if (!mask[static_cast<std::size_t>(k)] || grid.radius(k) >= support) continue;
    if (!grid.interior(k, reach)) throw std::domain_error("field support leaves no derivative margin");
    const TensorJet jet = tensor_jet(grid, h.values(), k, StencilOrder::Fourth, order);
    for (int c = 0, i = 0; i < n; ++i)
      for (int j = i; j < n; ++j, ++c) {
        out.d[0](c, k) = jet.value(i, j);
        for (int a = 0; a < n; ++a) out.d[1](c * n + a, k) = jet.d[a](i, j);
        if (order == 2)
          for (int a = 0, l = 0; a < n; ++a)
            for (int b = a; b < n; ++b, ++l) out.d[2](c * out.count[2] + l, k) = jet.dd[a * n + b](i, j);
      }
  }
  return out;
}

struct AnnulusTable {
  std::vector<Eigen::MatrixXd> sup;     // per annulus index - 1
  std::vector<Eigen::VectorXd> holder;
  void ensure(int index, int comps, int orders) {
    while (static_cast<int>(sup.size()) < index) {
      sup.push_back(Eigen::MatrixXd::Zero(comps, orders));
      holder.push_back(Eigen::VectorXd::Zero(comps));
    }
  }
};

void pointwise_sups(const ChartGrid& grid, const Derivatives& d, int k, AnnulusTable& table) {
  for (Eigen::Index x = 0; x < grid.size(); ++x) {
    if (!grid.inside(x)) continue;
    const double r = grid.radius(x);
    for (int q = 0; q <= k; ++q) {
      if (q > 0 && !d.valid[static_cast<std::size_t>(x)]) continue;
      const int len = d.count[static_cast<std::size_t>(q)];
      for (int c = 0; c < d.comps; ++c) {
        const double v = d.d[static_cast<std::size_t>(q)].col(x).segment(c * len, len).cwiseAbs().maxCoeff();
        if (v == 0.0) continue;
        for (int N = innermost_annulus(r); N <= outermost_annulus(r); ++N) {
          table.ensure(N, d.comps, k + 1);
          const double w = std::pow(annulus(N).boundary_distance(r), q);
          double& s = table.sup[static_cast<std::size_t>(N - 1)](c, q);
          s = std::max(s, w * v);
        }
      }
    }
  }
}

// sup over pairs in one annulus of d_xy^(k+alpha) |d^k h(x) - d^k h(y)| / d(x,y)^alpha
// with d(x, y) <= radius. The Euclidean offset bounds d(x, y) from below in
// normal coordinates, which prunes pairs before the exact distance is taken.
void holder_sups(const ChartGrid& grid, const Derivatives& d, const HolderSpec& spec, const PairSearch& search,
                 AnnulusTable& table) {
  const int n = grid.dim();
  const int k = spec.k;
  const double h = grid.spacing();
  const int stride = std::max(1, search.stride);
  const int reach = static_cast<int>(std::floor(search.radius / h + 1e-9));
  const int len = d.count[static_cast<std::size_t>(k)];
  const int comps = d.comps;
  const Eigen::MatrixXd& data = d.d[static_cast<std::size_t>(k)];
  const Eigen::Index rows = data.rows();
  const int axis_nodes = grid.nodes_per_axis();

  // lexicographically positive offsets within the Euclidean radius
  struct Offset {
    std::array<int, kMaxDim> o;
    Eigen::Index linear;
    double inv_len_alpha;
  };
  std::vector<Offset> offsets;
  std::array<int, kMaxDim> o{};
  for (int a = 0; a < n; ++a) o[a] = -reach;
  while (true) {
    int first = 0;
    while (first < n && o[first] == 0) ++first;
    bool on_lattice = true;
    double sq = 0.0;
    Eigen::Index linear = 0;
    for (int a = 0; a < n; ++a) {
      on_lattice = on_lattice && (o[a] % stride == 0);
      sq += static_cast<double>(o[a]) * o[a];
      linear += o[a] * grid.stride(a);
    }
    const double e = std::sqrt(sq) * h;
    if (first < n && o[first] > 0 && on_lattice && e <= search.radius + 1e-12)
      offsets.push_back({o, linear, std::pow(e, -spec.alpha)});
    int a = 0;
    while (a < n && ++o[a] > reach) o[a++] = -reach;
    if (a == n) break;
  }

  std::vector<std::uint8_t> nonzero(static_cast<std::size_t>(grid.size()), 0);
  std::vector<int> lo_index(static_cast<std::size_t>(grid.size())), hi_index(static_cast<std::size_t>(grid.size()));
  int top = 1;
  for (Eigen::Index x = 0; x < grid.size(); ++x) {
    const auto i = static_cast<std::size_t>(x);
    nonzero[i] = d.valid[i] && !data.col(x).isZero(0.0);
    lo_index[i] = innermost_annulus(grid.radius(x));
    hi_index[i] = outermost_annulus(grid.radius(x));
    if (d.valid[i]) top = std::max(top, hi_index[i]);
  }
  table.ensure(top, comps, k + 1);
  const std::vector<std::uint8_t> base = grid.dilate(nonzero, reach);

  std::mt19937_64 rng(search.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double power = spec.k + spec.alpha;
  const double cap_first = std::pow(4.0, power), cap_other = std::pow(2.0, power);
  std::array<double, kMaxDim * (kMaxDim + 1) / 2> diff{};
  for (Eigen::Index x = 0; x < grid.size(); ++x) {
    if (search.fraction < 1.0 && uniform(rng) >= search.fraction) continue;
    const auto xi = static_cast<std::size_t>(x);
    if (!d.valid[xi] || !base[xi]) continue;
    const auto mx = grid.multi_index(x);
    bool clear = true;
    for (int a = 0; a < n; ++a) clear = clear && mx[a] >= reach && mx[a] + reach < axis_nodes;
    const double* vx = data.data() + x * rows;
    const double rx = grid.radius(x);
    for (const Offset& off : offsets) {
      if (!clear) {
        bool in_box = true;
        for (int a = 0; a < n && in_box; ++a) {
          const int v = mx[a] + off.o[a];
          in_box = v >= 0 && v < axis_nodes;
        }
        if (!in_box) continue;
      }
      const Eigen::Index y = x + off.linear;
      const auto yi = static_cast<std::size_t>(y);
      if (!d.valid[yi] || (!nonzero[xi] && !nonzero[yi])) continue;
      const int lo = std::max(lo_index[xi], lo_index[yi]);
      const int hi = std::min(hi_index[xi], hi_index[yi]);
      if (lo > hi) continue;
      const double* vy = data.data() + y * rows;
      double dmax = 0.0;
      for (int c = 0; c < comps; ++c) {
        double m = 0.0;
        for (int l = 0; l < len; ++l) m = std::max(m, std::abs(vx[c * len + l] - vy[c * len + l]));
        diff[static_cast<std::size_t>(c)] = m;
        dmax = std::max(dmax, m);
      }
      if (dmax == 0.0) continue;
      double dist = -1.0;
      for (int N = lo; N <= hi; ++N) {
        Eigen::VectorXd& best = table.holder[static_cast<std::size_t>(N - 1)];
        const double cap = (N == 1 ? cap_first : cap_other) * off.inv_len_alpha;
        bool gain = false;
        for (int c = 0; c < comps && !gain; ++c) gain = cap * diff[static_cast<std::size_t>(c)] > best(c);
        if (!gain) continue;
        const Annulus A = annulus(N);
        const double scale = std::pow(std::min(A.boundary_distance(rx), A.boundary_distance(grid.radius(y))), power);
        gain = false;
        for (int c = 0; c < comps && !gain; ++c)
          gain = scale * off.inv_len_alpha * diff[static_cast<std::size_t>(c)] > best(c);
        if (!gain) continue;
        if (dist < 0.0) dist = grid.chart().distance(grid.point(x), grid.point(y));
        if (dist > search.radius) break;
        const double factor = scale / std::pow(dist, spec.alpha);
        for (int c = 0; c < comps; ++c) best(c) = std::max(best(c), factor * diff[static_cast<std::size_t>(c)]);
      }
    }
  }
}

double tail_bound(const SymTensorField& h, const HolderSpec& spec, double tau, double resolved,
                  const std::optional<DecayEnvelope>& envelope) {
  if (h.support_radius && *h.support_radius < resolved) return 0.0;
  if (!envelope)
    throw std::invalid_argument("field needs a support radius inside the grid or a decay envelope");
  if (!(envelope->rate > tau)) return kInf;
  double bound = 0.0;
  const int first = innermost_annulus(resolved);
  for (int N = first; N < first + 400; ++N) {
    const Annulus A = annulus(N);
    if (A.outer <= resolved) continue;
    const double reach = N == 1 ? 4.0 : 2.0;
    double factor = 0.0;
    for (int q = 0; q <= spec.k; ++q) factor += std::pow(reach, q);
    if (spec.alpha > 0.0) factor += 2.0 * std::pow(reach, spec.order());
    bound = std::max(bound, std::exp(N * tau) * factor * envelope->amplitude *
                                std::exp(-envelope->rate * std::max(resolved, A.inner)));
  }
  return bound;
}

WeightedNormReport assemble(const AnnulusTable& table, const HolderSpec& spec, double tau) {
  WeightedNormReport rep;
  rep.spec = spec;
  rep.tau = tau;
  std::size_t count = table.sup.size();
  while (count > 0 && table.sup[count - 1].isZero(0.0) && table.holder[count - 1].isZero(0.0)) --count;
  for (std::size_t i = 0; i < count; ++i) {
    AnnulusSeminorms a;
    a.index = static_cast<int>(i) + 1;
    a.weight = std::exp(a.index * tau);
    a.sup = table.sup[i];
    a.holder = table.holder[i];
    a.weighted_total = a.weight * (a.sup.rowwise().sum() + a.holder).maxCoeff();
    rep.sampled = std::max(rep.sampled, a.weighted_total);
    rep.annuli.push_back(std::move(a));
  }
  return rep;
}

void check_tau(const ChartGrid& grid, double tau) {
  if (!(tau > grid.chart().m() / 2.0)) throw std::invalid_argument("the weight tau must exceed m/2");
}

void check_spec(const HolderSpec& spec) {
  if (spec.k < 0 || spec.k > 2 || spec.alpha < 0.0 || spec.alpha >= 1.0)
    throw std::invalid_argument("Hoelder spaces need 0 <= k <= 2 and 0 <= alpha < 1");
}

// weighted_sup_norm over the nodes with x^i >= 0
double half_space_sup(const SymTensorField& h, double tau, int direction) {
  const ChartGrid& grid = h.grid();
  double norm = 0.0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    if (!grid.inside(k) || grid.point(k)(direction) < 0.0) continue;
    const double v = h.values().col(k).cwiseAbs().maxCoeff();
    if (v > 0.0) norm = std::max(norm, std::exp(outermost_annulus(grid.radius(k)) * tau) * v);
  }
  return norm;
}

double sphere_area(int n) {
  return 2.0 * std::pow(boost::math::constants::pi<double>(), n / 2.0) / boost::math::tgamma(n / 2.0);
}

}  // namespace

// ---------------------------------------------------------------------------

double Annulus::boundary_distance(double r) const {
  if (index == 1) return outer - r;
  return std::min(r - inner, outer - r);
}

Annulus annulus(int index) {
  if (index < 1) throw std::invalid_argument("annulus index starts at 1");
  return {index, index == 1 ? 0.0 : index - 1.0, index + 3.0};
}

int outermost_annulus(double r) { return std::max(1, static_cast<int>(std::ceil(r))); }

int innermost_annulus(double r) { return std::max(1, static_cast<int>(std::floor(r - 3.0)) + 1); }

double weighted_sup_norm(const SymTensorField& h, double tau) {
  const ChartGrid& grid = h.grid();
  double norm = 0.0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    if (!grid.inside(k)) continue;
    const double v = h.values().col(k).cwiseAbs().maxCoeff();
    if (v > 0.0) norm = std::max(norm, std::exp(outermost_annulus(grid.radius(k)) * tau) * v);
  }
  return norm;
}

std::shared_ptr<ChartGrid> holder_grid(int m, double c, double spacing, double radius) {
  auto chart = std::make_shared<GeodesicNormalChart>(m, c);
  const double half = spacing * (std::ceil(radius / spacing - 1e-9) + 2.0);
  const double corner = half * std::sqrt(2.0 * m) + spacing;
  return std::make_shared<ChartGrid>(chart, ChartGrid::Options{spacing, half, corner, true});
}

WeightedNormReport weighted_norm(const SymTensorField& h, const HolderSpec& spec, double tau,
                                 const NormOptions& options) {
  check_spec(spec);
  check_tau(h.grid(), tau);
  const Derivatives d = derivatives(h, spec.k);
  AnnulusTable table;
  pointwise_sups(h.grid(), d, spec.k, table);
  if (spec.alpha > 0.0) holder_sups(h.grid(), d, spec, options.pairs, table);
  WeightedNormReport rep = assemble(table, spec, tau);
  rep.resolved_radius = d.resolved_radius;
  rep.truncation_index = outermost_annulus(d.resolved_radius);
  rep.tail_bound = tail_bound(h, spec, tau, d.resolved_radius, options.envelope);
  return rep;
}

double little_modulus(const SymTensorField& h, const HolderSpec& spec, double tau, double t,
                      const NormOptions& options) {
  check_spec(spec);
  check_tau(h.grid(), tau);
  if (!(spec.alpha > 0.0)) throw std::invalid_argument("the little modulus needs alpha in (0, 1)");
  const Derivatives d = derivatives(h, spec.k);
  AnnulusTable table;
  PairSearch search = options.pairs;
  search.radius = t;
  holder_sups(h.grid(), d, spec, search, table);
  double f = 0.0;
  for (std::size_t i = 0; i < table.holder.size(); ++i)
    f = std::max(f, std::exp(static_cast<double>(i + 1) * tau) * table.holder[i].maxCoeff());
  return f;
}

// ---------------------------------------------------------------------------

double sobolev_constant(int m, double tau) {
  const double xi = 2.0 * tau - m;
  if (!(xi > 0.0)) throw std::invalid_argument("the weight tau must exceed m/2");
  return std::exp(m - xi) + std::exp(2.0 * m) * std::exp(-2.0 * xi) / (1.0 - std::exp(-2.0 * xi));
}

SobolevReport sobolev_embedding_check(const SymTensorField& h, const HolderSpec& spec, double tau,
                                      double implementation_factor, const NormOptions& options) {
  if (spec.k < 1) throw std::invalid_argument("the Sobolev embedding needs k >= 1");
  const ChartGrid& grid = h.grid();
  const int n = grid.dim();
  SobolevReport rep;
  rep.norm = weighted_norm(h, spec, tau, options).total();
  rep.constant = implementation_factor * sobolev_constant(grid.chart().m(), tau);
  const ThreeTensorField nabla = covariant_derivative(h, StencilOrder::Fourth);
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    if (!grid.inside(k)) continue;
    const SmallMatrix v = h.at(k);
    double density = v.squaredNorm();
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) density += nabla(a, i, j, k) * nabla(a, i, j, k);
    if (density > 0.0) rep.integral += density * grid.geometry(k).sqrt_det * grid.cell_volume();
  }
  return rep;
}

// ---------------------------------------------------------------------------

Mollifier::Mollifier(int m, double c) : m_(m), c_(c), mass_(1.0) {
  const GeodesicNormalChart chart(m, c);
  const int n = 2 * m;
  auto f = [&](double s) { return std::pow(1.0 - s * s, 4) * chart.volume_density(s) * std::pow(s, n - 1); };
  mass_ = sphere_area(n) * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0);
}

double Mollifier::operator()(double s) const {
  if (s >= 1.0) return 0.0;
  return std::pow(1.0 - s * s, 4) / mass_;
}

double Mollifier::scale_factor(double t) const {
  const GeodesicNormalChart chart(m_, c_);
  const int n = 2 * m_;
  auto f = [&](double u) { return (*this)(u)*chart.volume_density(t * u) * std::pow(u, n - 1); };
  return sphere_area(n) * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0);
}

std::vector<double> KFunctionalCurve::bounds() const {
  std::vector<double> b;
  for (const auto& s : samples) b.push_back(s.bound());
  return b;
}

double KFunctionalCurve::monotonicity_defect() const {
  const std::vector<double> b = bounds();
  if (b.empty()) return 0.0;
  const double top = *std::max_element(b.begin(), b.end());
  double defect = 0.0;
  for (std::size_t k = 0; k + 1 < b.size(); ++k) defect = std::max(defect, b[k] - b[k + 1]);
  return top > 0.0 ? defect / top : 0.0;
}

double KFunctionalCurve::concavity_defect() const {
  const std::vector<double> b = bounds();
  std::vector<double> slope;
  for (std::size_t k = 0; k + 1 < b.size(); ++k)
    slope.push_back((b[k + 1] - b[k]) / (samples[k + 1].t - samples[k].t));
  double top = 0.0, defect = 0.0;
  for (double s : slope) top = std::max(top, std::abs(s));
  for (std::size_t k = 0; k + 1 < slope.size(); ++k) defect = std::max(defect, slope[k + 1] - slope[k]);
  return top > 0.0 ? defect / top : 0.0;
}

KFunctionalCurve k_functional(const SymTensorField& h, const HolderSpec& x, const HolderSpec& y, double tau,
                              const std::vector<double>& t, const NormOptions& options) {
  check_spec(x);
  check_spec(y);
  const ChartGrid& grid = h.grid();
  const int n = grid.dim();
  KFunctionalCurve curve;
  curve.x = x;
  curve.y = y;
  curve.tau = tau;

  double support = 0.0;
  for (Eigen::Index k = 0; k < grid.size(); ++k)
    if (!h.values().col(k).isZero(0.0)) support = std::max(support, grid.radius(k));
  const double edge = resolved_radius(grid, 2 * kReach);
  curve.t_max = std::min(1.0, edge - support);
  const Mollifier zeta(grid.chart().m(), grid.chart().c());
  const double x_norm = weighted_norm(h, x, tau, options).total();

  // lattice offsets within the largest mollifier radius
  const double t_big = t.empty() ? 0.0 : *std::max_element(t.begin(), t.end());
  const int reach = static_cast<int>(std::floor(std::min(t_big, 1.0) / grid.spacing() + 1e-9));
  std::vector<std::array<int, kMaxDim>> offsets;
  std::vector<double> offset_lengths;
  {
    std::array<int, kMaxDim> o{};
    for (int a = 0; a < n; ++a) o[a] = -reach;
    while (true) {
      double sq = 0.0;
      for (int a = 0; a < n; ++a) sq += static_cast<double>(o[a]) * o[a];
      if (std::sqrt(sq) <= reach + 1e-9) {
        offsets.push_back(o);
        offset_lengths.push_back(std::sqrt(sq) * grid.spacing());
      }
      int a = 0;
      while (a < n && ++o[a] > reach) o[a++] = -reach;
      if (a == n) break;
    }
  }

  for (double ts : t) {
    if (!(ts > 0.0)) throw std::invalid_argument("K-functional scales must be positive");
    KFunctionalSample s;
    s.t = ts;
    s.identity = x_norm;
    s.mollified = kInf;
    if (ts < 1.0) {
      if (ts > curve.t_max) throw std::invalid_argument("mollifier support leaves the resolved region");
      s.c_t = zeta.scale_factor(ts);
      s.c_t_min = kInf;
      s.c_t_max = 0.0;
      SymTensorField b(h.grid_ptr());
      const double cell = grid.cell_volume() / std::pow(ts, n);
      for (Eigen::Index xi = 0; xi < grid.size(); ++xi) {
        if (!grid.inside(xi) || grid.radius(xi) > support + ts) continue;
        const auto mx = grid.multi_index(xi);
        const SmallVector px = grid.point(xi);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(h.values().rows());
        double wsum = 0.0;
        for (std::size_t p = 0; p < offsets.size(); ++p) {
          if (offset_lengths[p] >= ts) continue;
          const auto& o = offsets[p];
          Eigen::Index yi = 0;
          bool ok = true;
          for (int a = 0; a < n && ok; ++a) {
            const int v = mx[a] + o[a];
            ok = v >= 0 && v < grid.nodes_per_axis();
            yi += v * grid.stride(a);
          }
          if (!ok) continue;
          const double dist = grid.chart().distance(px, grid.point(yi));
          if (dist >= ts) continue;
          const double w = zeta(dist / ts) * grid.geometry(yi).sqrt_det;
          wsum += w;
          acc += w * h.values().col(yi);
        }
        s.c_t_min = std::min(s.c_t_min, wsum * cell);
        s.c_t_max = std::max(s.c_t_max, wsum * cell);
        b.values().col(xi) = acc / wsum;
      }
      b.support_radius = support + ts;
      SymTensorField a = h - b;
      a.support_radius = b.support_radius;
      s.a_norm = weighted_norm(a, x, tau, options).total();
      s.b_norm = weighted_norm(b, y, tau, options).total();
      s.mollified = s.a_norm + ts * s.b_norm;
    }
    curve.samples.push_back(s);
  }
  return curve;
}

double theta_norm(const KFunctionalCurve& curve, double theta) {
  double v = 0.0;
  for (const auto& s : curve.samples) v = std::max(v, std::pow(s.t, -theta) * s.bound());
  return v;
}

std::vector<double> log_spaced(double t_min, double t_max, int count) {
  if (!(t_min > 0.0) || !(t_max >= t_min) || count < 1) throw std::invalid_argument("invalid log-spaced range");
  std::vector<double> t;
  for (int k = 0; k < count; ++k)
    t.push_back(count == 1 ? t_min : t_min * std::pow(t_max / t_min, static_cast<double>(k) / (count - 1)));
  return t;
}

double InterpolationReport::ratio() const {
  const double denom = std::pow(x_norm, 1.0 - theta) * std::pow(y_norm, theta);
  return denom > 0.0 ? theta_norm / denom : 0.0;
}

InterpolationReport interp_inequality_check(const SymTensorField& h, const HolderSpec& x, const HolderSpec& y,
                                            double theta, double tau, const std::vector<double>& t,
                                            const NormOptions& options) {
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0, 1)");
  InterpolationReport rep;
  rep.theta = theta;
  rep.theta_norm = chflow::theta_norm(k_functional(h, x, y, tau, t, options), theta);
  rep.x_norm = weighted_norm(h, x, tau, options).total();
  rep.y_norm = weighted_norm(h, y, tau, options).total();
  return rep;
}

double EquivalenceReport::lower() const { return *std::min_element(ratios.begin(), ratios.end()); }
double EquivalenceReport::upper() const { return *std::max_element(ratios.begin(), ratios.end()); }
double EquivalenceReport::constant() const { return std::max(upper(), 1.0 / lower()); }

EquivalenceReport norm_equivalence(const std::vector<SymTensorField>& family, const HolderSpec& x,
                                   const HolderSpec& y, double theta, double tau, const std::vector<double>& t,
                                   const NormOptions& options) {
  if (family.empty()) throw std::invalid_argument("empty test family");
  const double order = (1.0 - theta) * x.order() + theta * y.order();
  EquivalenceReport rep;
  rep.target.k = static_cast<int>(std::floor(order));
  rep.target.alpha = order - rep.target.k;
  if (rep.target.alpha < 1e-12) throw std::invalid_argument("the interpolated order must not be an integer");
  for (const SymTensorField& h : family) {
    const double tn = theta_norm(k_functional(h, x, y, tau, t, options), theta);
    rep.ratios.push_back(tn / weighted_norm(h, rep.target, tau, options).total());
  }
  return rep;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd line_resolvent(const Eigen::VectorXd& f, double spacing, double lambda) {
  if (!(lambda > 0.0) || !(spacing > 0.0)) throw std::invalid_argument("resolvent needs lambda > 0");
  const Eigen::Index len = f.size();
  const double mu = lambda * spacing;
  const double decay = std::exp(-mu);
  const double one_minus = -std::expm1(-mu);
  // Int_0^h e^{-lambda s} (s / h) ds and its complement in Int_0^h e^{-lambda s} ds
  const double w2 = (one_minus - mu * decay) / (lambda * mu);
  const double w1 = one_minus / lambda - w2;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(len);
  for (Eigen::Index j = len - 2; j >= 0; --j) u(j) = w1 * f(j) + w2 * f(j + 1) + decay * u(j + 1);
  return u;
}

double ResolventReport::max_ratio() const {
  double r = 0.0;
  for (const auto& s : samples) r = std::max(r, s.ratio);
  return r;
}

ResolventReport resolvent_bound_check(const SymTensorField& h, const std::vector<double>& lambdas, int direction,
                                      double tau, const NormOptions& options) {
  const ChartGrid& grid = h.grid();
  check_tau(grid, tau);
  if (direction < 0 || direction >= grid.dim()) throw std::invalid_argument("direction out of range");
  ResolventReport rep;
  rep.direction = direction;
  const double h_norm = half_space_sup(h, tau, direction);
  const double edge = resolved_radius(grid, 0);
  double beyond = 0.0;
  if (!(h.support_radius && *h.support_radius < edge)) {
    if (!options.envelope)
      throw std::invalid_argument("field needs a support radius inside the grid or a decay envelope");
    beyond = options.envelope->amplitude * std::exp(-options.envelope->rate * edge);
  }
  const Eigen::Index stride = grid.stride(direction);
  const int len = grid.nodes_per_axis();
  for (double lambda : lambdas) {
    ResolventSample s;
    s.lambda = lambda;
    SymTensorField v(h.grid_ptr());
    for (Eigen::Index start = 0; start < grid.size(); ++start) {
      if (grid.multi_index(start)[direction] != 0) continue;
      for (Eigen::Index c = 0; c < h.values().rows(); ++c) {
        Eigen::VectorXd f(len);
        for (int j = 0; j < len; ++j) f(j) = h.values()(c, start + j * stride);
        if (f.isZero(0.0)) continue;
        const Eigen::VectorXd u = lambda * line_resolvent(f, grid.spacing(), lambda);
        for (int j = 0; j < len; ++j) v.values()(c, start + j * stride) = u(j);
      }
    }
    const double v_norm = half_space_sup(v, tau, direction);
    s.ratio = h_norm > 0.0 ? v_norm / h_norm : 0.0;
    for (Eigen::Index k = 0; k < grid.size(); ++k)
      if (grid.point(k)(direction) >= 0.0)
        s.distance_to_h = std::max(s.distance_to_h, (v.values().col(k) - h.values().col(k)).cwiseAbs().maxCoeff());
    double weight = 0.0;
    for (Eigen::Index k = 0; k < grid.size(); ++k)
      weight = std::max(weight, std::exp(outermost_annulus(grid.radius(k)) * tau));
    s.truncation_bound = beyond * weight;
    rep.samples.push_back(s);
  }
  return rep;
}

}  // namespace chflow
