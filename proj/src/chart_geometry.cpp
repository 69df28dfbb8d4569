#include "chflow/chart_geometry.hpp"
#include "chflow/frame_algebra.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace chflow {

namespace {

using Complex = std::complex<double>;

SmallMatrix zero_matrix(int n) { return SmallMatrix::Zero(n, n); }

// (sinh(t)^2 / t^2 - 1) / t^2, smooth through t = 0.
double sinhc_sq_excess(double t) {
  if (t < 0.5) {
    // sum_{k>=2} 2^(2k-1) t^(2k-4) / (2k)!
    double term = 8.0 / 24.0;
    double sum = term;
    const double t2 = t * t;
    for (int k = 3; k < 14; ++k) {
      term *= 4.0 * t2 / ((2.0 * k - 1.0) * (2.0 * k));
      sum += term;
    }
    return sum;
  }
  const double f = std::sinh(t) / t;
  return (f * f - 1.0) / (t * t);
}

using ComplexPoint = Eigen::Matrix<Complex, Eigen::Dynamic, 1, 0, kMaxDim / 2, 1>;

ComplexPoint to_complex(const SmallVector& x) {
  ComplexPoint z(x.size() / 2);
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = Complex(x(2 * k), x(2 * k + 1));
  return z;
}

// sinh^2 of the distance scaled by sqrt(c)/2 between two points given on the
// hyperboloid as Z = sinh(a) theta, W = sinh(b) phi.
double hyperboloid_sinh_sq(const ComplexPoint& Z, const ComplexPoint& W) {
  double zz = 0.0, ww = 0.0;
  for (Eigen::Index k = 0; k < Z.size(); ++k) {
    zz += std::norm(Z[k]);
    ww += std::norm(W[k]);
  }
  const double cz = std::sqrt(1.0 + zz);
  const double cw = std::sqrt(1.0 + ww);
  double diff = 0.0;
  for (Eigen::Index k = 0; k < Z.size(); ++k) diff += std::norm(Z[k] * cw - W[k] * cz);
  double lagrange = 0.0;
  for (Eigen::Index k = 0; k < Z.size(); ++k)
    for (Eigen::Index l = k + 1; l < Z.size(); ++l) lagrange += std::norm(Z[k] * W[l] - Z[l] * W[k]);
  return std::max(0.0, diff - lagrange);
}

MetricJet numeric_jet(const Chart& chart, const SmallVector& x, int order) {
  const int n = chart.dim();
  MetricJet jet;
  jet.order = order;
  jet.g = chart.metric(x);
  if (order < 1) return jet;
  static constexpr std::array<double, 5> w1{1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0};
  static constexpr std::array<double, 5> w2{-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0,
                                            -1.0 / 12.0};
  const double h1 = 1e-3;
  for (int a = 0; a < n; ++a) {
    SmallMatrix d = zero_matrix(n);
    for (int p = 0; p < 5; ++p) {
      if (w1[p] == 0.0) continue;
      SmallVector y = x;
      y(a) += (p - 2) * h1;
      d += w1[p] * chart.metric(y);
    }
    jet.dg[a] = d / h1;
  }
  if (order < 2) return jet;
  const double h2 = 2e-3;
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      SmallMatrix d = zero_matrix(n);
      if (a == b) {
        for (int p = 0; p < 5; ++p) {
          SmallVector y = x;
          y(a) += (p - 2) * h2;
          d += w2[p] * chart.metric(y);
        }
      } else {
        for (int p = 0; p < 5; ++p) {
          if (w1[p] == 0.0) continue;
          for (int q = 0; q < 5; ++q) {
            if (w1[q] == 0.0) continue;
            SmallVector y = x;
            y(a) += (p - 2) * h2;
            y(b) += (q - 2) * h2;
            d += w1[p] * w1[q] * chart.metric(y);
          }
        }
      }
      jet.ddg[a * n + b] = d / (h2 * h2);
      jet.ddg[b * n + a] = jet.ddg[a * n + b];
    }
  }
  return jet;
}

}  // namespace

SmallMatrix complex_structure(int m) {
  SmallMatrix j = zero_matrix(2 * m);
  for (int k = 0; k < m; ++k) {
    j(2 * k + 1, 2 * k) = 1.0;
    j(2 * k, 2 * k + 1) = -1.0;
  }
  return j;
}

Chart::Chart(int m, double c) : m_(m), c_(c) {
  if (m < 1 || 2 * m > kMaxDim) throw std::invalid_argument("chart dimension must satisfy 1 <= m <= 3");
  if (!(c > 0.0)) throw std::invalid_argument("curvature scale c must be positive");
}

// ---------------------------------------------------------------------------

BergmanBallChart::BergmanBallChart(int m, double c) : Chart(m, c) {}

bool BergmanBallChart::contains(const SmallVector& x) const { return x.squaredNorm() < 1.0; }

SmallMatrix BergmanBallChart::metric(const SmallVector& x) const { return jet(x, 0).g; }

MetricJet BergmanBallChart::jet(const SmallVector& x, int order) const {
  if (!contains(x)) throw std::domain_error("point outside the unit ball");
  const int n = dim();
  const double s = 4.0 / c_;
  const SmallMatrix J = complex_structure(m_);
  const SmallVector y = J * x;
  const SmallMatrix I = SmallMatrix::Identity(n, n);
  const SmallMatrix M = x * x.transpose() + y * y.transpose();
  const double u = 1.0 / (1.0 - x.squaredNorm());
  const double u2 = u * u, u3 = u2 * u, u4 = u3 * u;

  MetricJet out;
  out.order = order;
  out.g = s * (u * I + u2 * M);
  if (order < 1) return out;

  std::array<SmallMatrix, kMaxDim> dM;
  for (int a = 0; a < n; ++a) {
    SmallMatrix d = zero_matrix(n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        d(i, k) = (i == a ? x(k) : 0.0) + (k == a ? x(i) : 0.0) + J(i, a) * y(k) + y(i) * J(k, a);
    dM[a] = d;
    out.dg[a] = s * (2.0 * x(a) * u2 * I + 4.0 * x(a) * u3 * M + u2 * d);
  }
  if (order < 2) return out;

  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      SmallMatrix ddM = zero_matrix(n);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
          ddM(i, k) = (i == a && k == b ? 1.0 : 0.0) + (i == b && k == a ? 1.0 : 0.0) +
                      J(i, a) * J(k, b) + J(i, b) * J(k, a);
      const double dab = a == b ? 1.0 : 0.0;
      out.ddg[a * n + b] = s * ((2.0 * dab * u2 + 8.0 * x(a) * x(b) * u3) * I +
                                (4.0 * dab * u3 + 24.0 * x(a) * x(b) * u4) * M +
                                4.0 * x(a) * u3 * dM[b] + 4.0 * x(b) * u3 * dM[a] + u2 * ddM);
    }
  }
  return out;
}

double BergmanBallChart::distance(const SmallVector& x, const SmallVector& y) const {
  if (!contains(x) || !contains(y)) throw std::domain_error("point outside the unit ball");
  auto lift = [](const SmallVector& p) {
    const double r = p.norm();
    auto z = to_complex(p);
    const double scale = 1.0 / std::sqrt((1.0 - r) * (1.0 + r));
    for (auto& v : z) v *= scale;
    return z;
  };
  const double kappa = std::sqrt(c_) / 2.0;
  return std::asinh(std::sqrt(hyperboloid_sinh_sq(lift(x), lift(y)))) / kappa;
}

double BergmanBallChart::radius(const SmallVector& x) const {
  if (!contains(x)) return std::numeric_limits<double>::infinity();
  return std::atanh(x.norm()) * 2.0 / std::sqrt(c_);
}

SmallVector BergmanBallChart::from_polar(double r, const SmallVector& theta) const {
  return std::tanh(r * std::sqrt(c_) / 2.0) * theta;
}

// ---------------------------------------------------------------------------

GeodesicNormalChart::GeodesicNormalChart(int m, double c) : Chart(m, c) {}

bool GeodesicNormalChart::contains(const SmallVector& x) const { return std::isfinite(x.squaredNorm()); }

SmallMatrix GeodesicNormalChart::metric(const SmallVector& x) const {
  const int n = dim();
  const double kappa = std::sqrt(c_) / 2.0;
  const double s = kappa * x.norm();
  const double e1 = sinhc_sq_excess(s);
  const double e2 = sinhc_sq_excess(2.0 * s);
  const double f2sq = 1.0 + s * s * e1;
  const double a = -kappa * kappa * e1;
  const double b = kappa * kappa * (4.0 * e2 - e1);
  const SmallVector y = complex_structure(m_) * x;
  return f2sq * SmallMatrix::Identity(n, n) + a * x * x.transpose() + b * y * y.transpose();
}

MetricJet GeodesicNormalChart::jet(const SmallVector& x, int order) const {
  return numeric_jet(*this, x, order);
}

double GeodesicNormalChart::distance(const SmallVector& x, const SmallVector& y) const {
  const double kappa = std::sqrt(c_) / 2.0;
  auto lift = [kappa](const SmallVector& p) {
    const double r = p.norm();
    auto z = to_complex(p);
    const double scale = r > 0.0 ? std::sinh(kappa * r) / r : 0.0;
    for (auto& v : z) v *= scale;
    return z;
  };
  return std::asinh(std::sqrt(hyperboloid_sinh_sq(lift(x), lift(y)))) / kappa;
}

double GeodesicNormalChart::radius(const SmallVector& x) const { return x.norm(); }

SmallVector GeodesicNormalChart::from_polar(double r, const SmallVector& theta) const { return r * theta; }

double GeodesicNormalChart::volume_density(double rho) const {
  const double s = std::sqrt(c_) / 2.0 * rho;
  const double f1 = std::sqrt(1.0 + 4.0 * s * s * sinhc_sq_excess(2.0 * s));
  const double f2 = std::sqrt(1.0 + s * s * sinhc_sq_excess(s));
  return f1 * std::pow(f2, 2 * m_ - 2);
}

SmallVector GeodesicNormalChart::to_ball(const SmallVector& x) const {
  const double r = x.norm();
  if (r == 0.0) return x;
  return std::tanh(std::sqrt(c_) / 2.0 * r) / r * x;
}

// ---------------------------------------------------------------------------

LocalGeometry local_geometry(const MetricJet& jet) {
  LocalGeometry geo;
  const int n = static_cast<int>(jet.g.rows());
  geo.n = n;
  geo.g = jet.g;
  geo.ginv = jet.g.inverse();
  geo.sqrt_det = std::sqrt(jet.g.determinant());
  if (jet.order < 1) return geo;

  // first kind: first[l](i,j) = Gamma_{l,ij}
  std::array<SmallMatrix, kMaxDim> first;
  for (int l = 0; l < n; ++l) {
    first[l] = zero_matrix(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        first[l](i, j) = 0.5 * (jet.dg[i](j, l) + jet.dg[j](i, l) - jet.dg[l](i, j));
  }
  for (int k = 0; k < n; ++k) {
    geo.gamma[k] = zero_matrix(n);
    for (int l = 0; l < n; ++l) geo.gamma[k] += geo.ginv(k, l) * first[l];
  }
  if (jet.order < 2) return geo;

  geo.has_derivatives = true;
  for (int p = 0; p < n; ++p) {
    const SmallMatrix dginv = -geo.ginv * jet.dg[p] * geo.ginv;
    std::array<SmallMatrix, kMaxDim> dfirst;
    for (int l = 0; l < n; ++l) {
      dfirst[l] = zero_matrix(n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          dfirst[l](i, j) =
              0.5 * (jet.ddg[p * n + i](j, l) + jet.ddg[p * n + j](i, l) - jet.ddg[p * n + l](i, j));
    }
    for (int k = 0; k < n; ++k) {
      SmallMatrix d = zero_matrix(n);
      for (int l = 0; l < n; ++l) d += dginv(k, l) * first[l] + geo.ginv(k, l) * dfirst[l];
      geo.dgamma[p * n + k] = d;
    }
  }
  return geo;
}

RiemannTensor riemann_tensor(const LocalGeometry& geo) {
  if (!geo.has_derivatives) throw std::invalid_argument("riemann_tensor needs Christoffel derivatives");
  const int n = geo.n;
  RiemannTensor up(n);  // up(i,j,k,l) = R^l_ijk
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double v = geo.dgamma[i * n + l](j, k) - geo.dgamma[j * n + l](i, k);
          for (int p = 0; p < n; ++p)
            v += geo.gamma[l](i, p) * geo.gamma[p](j, k) - geo.gamma[l](j, p) * geo.gamma[p](i, k);
          up(i, j, k, l) = v;
        }
  RiemannTensor down(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double v = 0.0;
          for (int p = 0; p < n; ++p) v += geo.g(l, p) * up(i, j, k, p);
          down(i, j, k, l) = v;
        }
  return down;
}

SmallMatrix ricci_tensor(const RiemannTensor& r, const SmallMatrix& ginv) {
  const int n = r.dim();
  SmallMatrix rc = zero_matrix(n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      double v = 0.0;
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) v += ginv(i, l) * r(i, j, k, l);
      rc(j, k) = v;
    }
  return rc;
}

double scalar_curvature(const SmallMatrix& ricci, const SmallMatrix& ginv) {
  return (ginv.array() * ricci.array()).sum();
}

std::array<SmallMatrix, kMaxDim> christoffel_at(const Chart& chart, const SmallVector& x) {
  return local_geometry(chart.jet(x, 1)).gamma;
}

// ---------------------------------------------------------------------------

ChartGrid::ChartGrid(std::shared_ptr<const Chart> chart, const Options& options)
    : chart_(std::move(chart)), options_(options) {
  if (!chart_) throw std::invalid_argument("ChartGrid needs a chart");
  if (!(options.spacing > 0.0) || !(options.half_width > 0.0))
    throw std::invalid_argument("grid spacing and half width must be positive");
  n_ = chart_->dim();
  h_ = options.spacing;
  half_nodes_ = static_cast<int>(std::lround(options.half_width / h_));
  if (half_nodes_ < 1) throw std::invalid_argument("grid half width is below one spacing");
  nodes_ = 2 * half_nodes_ + 1;
  cell_volume_ = std::pow(h_, n_);

  Eigen::Index total = 1;
  for (int a = 0; a < n_; ++a) {
    strides_[a] = total;
    total *= nodes_;
  }
  if (total > 50'000'000) throw std::invalid_argument("grid too large");

  inside_.assign(static_cast<std::size_t>(total), 0);
  radius_.assign(static_cast<std::size_t>(total), std::numeric_limits<double>::infinity());
  for (Eigen::Index idx = 0; idx < total; ++idx) {
    const SmallVector x = point(idx);
    if (!chart_->contains(x)) continue;
    const double r = chart_->radius(x);
    radius_[idx] = r;
    inside_[idx] = r <= options.domain_radius ? 1 : 0;
  }

  // Depth by repeated max-norm erosion, separable along the axes.
  constexpr int kMaxDepth = 8;
  depth_.assign(inside_.begin(), inside_.end());
  std::vector<std::uint8_t> level(inside_.begin(), inside_.end());
  std::vector<std::uint8_t> next(level.size());
  for (int d = 2; d <= kMaxDepth; ++d) {
    for (int a = 0; a < n_; ++a) {
      for (Eigen::Index idx = 0; idx < total; ++idx) {
        const Eigen::Index lo = shifted(idx, a, -1);
        const Eigen::Index hi = shifted(idx, a, 1);
        next[idx] = level[idx] && lo >= 0 && hi >= 0 && level[lo] && level[hi];
      }
      level.swap(next);
    }
    bool any = false;
    for (Eigen::Index idx = 0; idx < total; ++idx)
      if (level[idx]) {
        depth_[idx] = static_cast<std::uint8_t>(d);
        any = true;
      }
    if (!any) break;
  }

  if (options.cache_geometry) {
    const int n = n_;
    cache_stride_ = 2 * n * n + 1 + n * n * n;
    cache_.assign(static_cast<std::size_t>(total * cache_stride_), 0.0);
    for (Eigen::Index idx = 0; idx < total; ++idx) {
      if (!inside(idx)) continue;
      const LocalGeometry geo = local_geometry(chart_->jet(point(idx), 1));
      double* p = cache_.data() + idx * cache_stride_;
      for (int i = 0; i < n * n; ++i) *p++ = geo.g(i % n, i / n);
      for (int i = 0; i < n * n; ++i) *p++ = geo.ginv(i % n, i / n);
      *p++ = geo.sqrt_det;
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n * n; ++i) *p++ = geo.gamma[k](i % n, i / n);
    }
  }
}

SmallVector ChartGrid::point(Eigen::Index idx) const {
  SmallVector x(n_);
  for (int a = 0; a < n_; ++a) {
    const auto i = static_cast<int>((idx / strides_[a]) % nodes_);
    x(a) = (i - half_nodes_) * h_;
  }
  return x;
}

std::array<int, kMaxDim> ChartGrid::multi_index(Eigen::Index idx) const {
  std::array<int, kMaxDim> out{};
  for (int a = 0; a < n_; ++a) out[a] = static_cast<int>((idx / strides_[a]) % nodes_);
  return out;
}

Eigen::Index ChartGrid::shifted(Eigen::Index idx, int axis, int offset) const {
  const auto i = static_cast<int>((idx / strides_[axis]) % nodes_) + offset;
  if (i < 0 || i >= nodes_) return -1;
  return idx + offset * strides_[axis];
}

Eigen::Index ChartGrid::origin() const {
  Eigen::Index idx = 0;
  for (int a = 0; a < n_; ++a) idx += half_nodes_ * strides_[a];
  return idx;
}

std::vector<std::uint8_t> ChartGrid::dilate(std::vector<std::uint8_t> mask, int layers) const {
  if (static_cast<Eigen::Index>(mask.size()) != size()) throw std::invalid_argument("mask size does not match the grid");
  std::vector<std::uint8_t> next(mask.size());
  for (int layer = 0; layer < layers; ++layer) {
    for (int a = 0; a < n_; ++a) {
      for (Eigen::Index idx = 0; idx < size(); ++idx) {
        const Eigen::Index lo = shifted(idx, a, -1);
        const Eigen::Index hi = shifted(idx, a, 1);
        next[idx] = mask[idx] || (lo >= 0 && mask[lo]) || (hi >= 0 && mask[hi]);
      }
      mask.swap(next);
    }
  }
  return mask;
}

std::vector<Eigen::Index> ChartGrid::interior_nodes(int margin) const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index idx = 0; idx < size(); ++idx)
    if (interior(idx, margin)) out.push_back(idx);
  return out;
}

LocalGeometry ChartGrid::geometry(Eigen::Index idx, bool with_derivatives) const {
  if (!with_derivatives && !cache_.empty()) {
    const int n = n_;
    LocalGeometry geo;
    geo.n = n;
    geo.g.resize(n, n);
    geo.ginv.resize(n, n);
    const double* p = cache_.data() + idx * cache_stride_;
    for (int i = 0; i < n * n; ++i) geo.g(i % n, i / n) = *p++;
    for (int i = 0; i < n * n; ++i) geo.ginv(i % n, i / n) = *p++;
    geo.sqrt_det = *p++;
    for (int k = 0; k < n; ++k) {
      geo.gamma[k].resize(n, n);
      for (int i = 0; i < n * n; ++i) geo.gamma[k](i % n, i / n) = *p++;
    }
    return geo;
  }
  return local_geometry(chart_->jet(point(idx), with_derivatives ? 2 : 1));
}

// ---------------------------------------------------------------------------

double CurvatureCrosscheck::max_error_at(std::size_t spacing_index) const {
  double e = 0.0;
  for (const auto& row : rows) e = std::max(e, row.error.at(spacing_index));
  return e;
}

double CurvatureCrosscheck::min_order() const {
  double o = std::numeric_limits<double>::infinity();
  for (const auto& row : rows)
    for (double v : row.order)
      if (std::isfinite(v)) o = std::min(o, v);
  return o;
}

std::vector<std::array<int, 4>> tabulated_components() {
  return {{1, 2, 2, 1}, {1, 3, 3, 1}, {1, 2, 4, 3}, {1, 3, 4, 2}, {1, 4, 3, 2}, {1, 2, 3, 1}};
}

CurvatureCrosscheck curvature_crosscheck(int m, double c, const std::vector<double>& spacings,
                                         const std::vector<std::array<int, 4>>& components) {
  if (spacings.size() < 3) throw std::invalid_argument("curvature_crosscheck needs at least three spacings");
  const BergmanBallChart chart(m, c);
  const int n = chart.dim();
  const SmallVector origin = SmallVector::Zero(n);

  CurvatureCrosscheck report{m, c, spacings, {}, true};
  std::vector<RiemannTensor> tensors;
  for (double h : spacings) {
    LocalGeometry geo = local_geometry(chart.jet(origin, 1));
    geo.has_derivatives = true;
    for (int l = 0; l < n; ++l) {
      SmallVector xp = origin, xm = origin;
      xp(l) += h;
      xm(l) -= h;
      const auto gp = christoffel_at(chart, xp);
      const auto gm = christoffel_at(chart, xm);
      for (int k = 0; k < n; ++k) geo.dgamma[l * n + k] = (gp[k] - gm[k]) / (2.0 * h);
    }
    tensors.push_back(riemann_tensor(geo));
  }

  const double frame = c / 4.0;  // e_i = sqrt(c)/2 d_i, four factors
  const Rational c_exact(1);
  for (const auto& comp : components) {
    for (int v : comp)
      if (v < 1 || v > n) throw std::out_of_range("component index out of range");
    CurvatureComponentRow row;
    row.indices = comp;
    row.exact = to_double(riemann_coefficient(m, comp[0], comp[1], comp[2], comp[3]) * c_exact) * c;
    for (const auto& r : tensors) {
      const double v = frame * frame * r(comp[0] - 1, comp[1] - 1, comp[2] - 1, comp[3] - 1);
      row.numeric.push_back(v);
      row.error.push_back(std::abs(v - row.exact));
    }
    for (std::size_t s = 1; s < spacings.size(); ++s) {
      const double e0 = row.error[s - 1], e1 = row.error[s];
      const bool resolved = e0 > 1e-11 && e1 > 1e-11;
      row.order.push_back(resolved ? std::log(e0 / e1) / std::log(spacings[s - 1] / spacings[s])
                                   : std::numeric_limits<double>::quiet_NaN());
      if (resolved && e1 >= e0) report.monotone = false;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------

double geodesic_ball_volume(int m, double c, double radius) {
  if (radius <= 0.0) return 0.0;
  const double kappa = std::sqrt(c) / 2.0;
  auto integrand = [m, kappa](double rho) {
    return std::sinh(2.0 * kappa * rho) / (2.0 * kappa) * std::pow(std::sinh(kappa * rho) / kappa, 2 * m - 2);
  };
  const double sphere = 2.0 * std::pow(M_PI, m) / std::tgamma(m);
  return sphere * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, radius, 10, 1e-12);
}

VolumeGrowth volume_growth(const ChartGrid& grid, const std::vector<double>& radii) {
  VolumeGrowth out;
  const Chart& chart = grid.chart();
  out.exponent = chart.m() * std::sqrt(chart.c());
  out.radii = radii;
  std::vector<double> density(static_cast<std::size_t>(grid.size()), 0.0);
  for (Eigen::Index idx = 0; idx < grid.size(); ++idx)
    if (grid.inside(idx)) density[idx] = std::sqrt(chart.metric(grid.point(idx)).determinant());
  for (double r : radii) {
    double v = 0.0;
    for (Eigen::Index idx = 0; idx < grid.size(); ++idx)
      if (grid.inside(idx) && grid.radius(idx) <= r) v += density[idx];
    out.volume.push_back(v * grid.cell_volume());
    out.exact_volume.push_back(geodesic_ball_volume(chart.m(), chart.c(), r));
    out.max_ratio = std::max(out.max_ratio, out.volume.back() * std::exp(-out.exponent * r));
  }
  for (std::size_t k = 1; k < radii.size(); ++k)
    out.slope.push_back(std::log(out.volume[k] / out.volume[k - 1]) / (radii[k] - radii[k - 1]));
  return out;
}

}  // namespace chflow
