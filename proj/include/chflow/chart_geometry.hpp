#pragma once

// Coordinate realizations of complex hyperbolic space with holomorphic
// sectional curvature -c, and tensor-product grids over them.
//
// Two charts are provided. The ball model carries analytic metric derivatives
// and is the workhorse for the PDE grids. Geodesic normal coordinates at the
// origin are used where the radius must reach several units of distance.
// Both use the real coordinates x = (x_0, ..., x_{2m-1}) with complex
// coordinates z_k = x_{2k} + i x_{2k+1}, so J is the constant matrix that
// sends e_{2k} to e_{2k+1}.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

namespace chflow {

inline constexpr int kMaxDim = 6;

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

/// The constant complex structure in chart coordinates.
SmallMatrix complex_structure(int m);

struct MetricJet {
  int order = 0;  // 0: g only, 1: plus dg, 2: plus ddg
  SmallMatrix g;
  std::array<SmallMatrix, kMaxDim> dg;                 // dg[a](i,j) = d_a g_ij
  std::array<SmallMatrix, kMaxDim * kMaxDim> ddg;      // ddg[a*n+b](i,j) = d_a d_b g_ij
};

class Chart {
 public:
  Chart(int m, double c);
  virtual ~Chart() = default;

  int m() const { return m_; }
  int dim() const { return 2 * m_; }
  double c() const { return c_; }

  virtual bool contains(const SmallVector& x) const = 0;
  virtual SmallMatrix metric(const SmallVector& x) const = 0;
  virtual MetricJet jet(const SmallVector& x, int order) const = 0;
  virtual double distance(const SmallVector& x, const SmallVector& y) const = 0;
  /// Geodesic distance to the origin.
  virtual double radius(const SmallVector& x) const = 0;
  /// Chart coordinates of the point at geodesic radius r in unit direction theta.
  virtual SmallVector from_polar(double r, const SmallVector& theta) const = 0;

 protected:
  int m_;
  double c_;
};

/// g = (4/c)[u I + u^2 (x x^T + Jx (Jx)^T)], u = 1/(1 - |x|^2), the
/// realification of the Kaehler metric with potential -(4/c) log(1 - |z|^2).
class BergmanBallChart final : public Chart {
 public:
  BergmanBallChart(int m, double c);

  bool contains(const SmallVector& x) const override;
  SmallMatrix metric(const SmallVector& x) const override;
  MetricJet jet(const SmallVector& x, int order) const override;
  double distance(const SmallVector& x, const SmallVector& y) const override;
  double radius(const SmallVector& x) const override;
  SmallVector from_polar(double r, const SmallVector& theta) const override;
};

/// Exponential coordinates at the origin for an orthonormal J-adapted frame:
/// g = theta theta^T + f1^2 Jtheta Jtheta^T + f2^2 (rest), x = rho theta,
/// f1 = sinh(2 k rho)/(2 k rho), f2 = sinh(k rho)/(k rho), k = sqrt(c)/2.
class GeodesicNormalChart final : public Chart {
 public:
  GeodesicNormalChart(int m, double c);

  bool contains(const SmallVector& x) const override;
  SmallMatrix metric(const SmallVector& x) const override;
  /// Derivatives by fourth-order differences of the closed-form metric.
  MetricJet jet(const SmallVector& x, int order) const override;
  double distance(const SmallVector& x, const SmallVector& y) const override;
  double radius(const SmallVector& x) const override;
  SmallVector from_polar(double r, const SmallVector& theta) const override;

  /// sqrt(det g) = f1 f2^(2m-2) as a function of the radius.
  double volume_density(double rho) const;
  /// The ball-model point with the same geodesic polar coordinates.
  SmallVector to_ball(const SmallVector& x) const;
};

/// Geometry at one point. Christoffel symbols gamma[k](i,j) = Gamma^k_ij,
/// derivatives dgamma[l*n+k](i,j) = d_l Gamma^k_ij when the jet had order 2.
struct LocalGeometry {
  int n = 0;
  bool has_derivatives = false;
  SmallMatrix g;
  SmallMatrix ginv;
  double sqrt_det = 0.0;
  std::array<SmallMatrix, kMaxDim> gamma;
  std::array<SmallMatrix, kMaxDim * kMaxDim> dgamma;
};

LocalGeometry local_geometry(const MetricJet& jet);

/// Fully covariant R_ijkl = g_lm R^m_ijk with
/// R^l_ijk = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_ip Gamma^p_jk - Gamma^l_jp Gamma^p_ik,
/// so that R_ijji is the sectional curvature of an orthonormal pair.
class RiemannTensor {
 public:
  explicit RiemannTensor(int n) : n_(n), data_(static_cast<std::size_t>(n * n * n * n), 0.0) {}

  int dim() const { return n_; }
  double& operator()(int i, int j, int k, int l) { return data_[index(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return data_[index(i, j, k, l)]; }

 private:
  std::size_t index(int i, int j, int k, int l) const {
    return static_cast<std::size_t>(((i * n_ + j) * n_ + k) * n_ + l);
  }
  int n_;
  std::vector<double> data_;
};

RiemannTensor riemann_tensor(const LocalGeometry& geo);
/// Rc_jk = g^il R_ijkl.
SmallMatrix ricci_tensor(const RiemannTensor& r, const SmallMatrix& ginv);
double scalar_curvature(const SmallMatrix& ricci, const SmallMatrix& ginv);

/// Christoffel symbols from the analytic chart derivatives.
std::array<SmallMatrix, kMaxDim> christoffel_at(const Chart& chart, const SmallVector& x);

/// Uniform tensor-product grid on [-L, L]^n with an odd number of nodes per
/// axis (so the origin is a node), clipped to the geodesic ball of radius
/// domain_radius. Nodes outside the clip are kept as addressable guard nodes.
class ChartGrid {
 public:
  struct Options {
    double spacing = 0.1;
    double half_width = 0.5;
    double domain_radius = 1.0;  // geodesic
    bool cache_geometry = false;
  };

  ChartGrid(std::shared_ptr<const Chart> chart, const Options& options);

  const Chart& chart() const { return *chart_; }
  std::shared_ptr<const Chart> chart_ptr() const { return chart_; }
  int dim() const { return n_; }
  int nodes_per_axis() const { return nodes_; }
  double spacing() const { return h_; }
  double cell_volume() const { return cell_volume_; }
  double domain_radius() const { return options_.domain_radius; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(inside_.size()); }

  SmallVector point(Eigen::Index idx) const;
  std::array<int, kMaxDim> multi_index(Eigen::Index idx) const;
  Eigen::Index stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }
  /// Flat index of idx shifted by `offset` nodes along `axis`; -1 if off the box.
  Eigen::Index shifted(Eigen::Index idx, int axis, int offset) const;
  Eigen::Index origin() const;

  bool inside(Eigen::Index idx) const { return inside_[static_cast<std::size_t>(idx)] != 0; }
  /// 0 outside; otherwise 1 + the number of max-norm node layers around idx
  /// that lie entirely inside.
  int depth(Eigen::Index idx) const { return depth_[static_cast<std::size_t>(idx)]; }
  /// Every node within `margin` steps (max norm) is inside.
  bool interior(Eigen::Index idx, int margin) const { return depth(idx) > margin; }
  std::vector<Eigen::Index> interior_nodes(int margin) const;
  /// Max-norm dilation of a node mask by `layers` steps, clipped to the box.
  std::vector<std::uint8_t> dilate(std::vector<std::uint8_t> mask, int layers) const;

  /// Geometry at a node, with Christoffel derivatives on request. Read from
  /// the cache when enabled and derivatives are not requested.
  LocalGeometry geometry(Eigen::Index idx, bool with_derivatives = false) const;
  double radius(Eigen::Index idx) const { return radius_[static_cast<std::size_t>(idx)]; }

 private:
  std::shared_ptr<const Chart> chart_;
  Options options_;
  int n_;
  int nodes_;
  int half_nodes_;
  double h_;
  double cell_volume_;
  std::array<Eigen::Index, kMaxDim> strides_{};
  std::vector<std::uint8_t> inside_;
  std::vector<std::uint8_t> depth_;
  std::vector<double> radius_;
  // g, g^-1, sqrt(det g) and Gamma packed per node
  std::vector<double> cache_;
  Eigen::Index cache_stride_ = 0;
};

/// Geodesic ball around the origin as a predicate on grid nodes.
struct GeodesicBallRegion {
  double radius;
  bool contains(const ChartGrid& grid, Eigen::Index idx) const { return grid.radius(idx) <= radius; }
};

struct CurvatureComponentRow {
  std::array<int, 4> indices;  // 1-based frame indices
  double exact;
  std::vector<double> numeric;  // one per spacing
  std::vector<double> error;
  std::vector<double> order;    // between consecutive spacings
};

struct CurvatureCrosscheck {
  int m;
  double c;
  std::vector<double> spacings;
  std::vector<CurvatureComponentRow> rows;
  bool monotone = true;  // error decays at every refinement for every row with error above roundoff
  double max_error_at(std::size_t spacing_index) const;
  double min_order() const;
};

/// Riemann components at the ball-model origin in the frame e_i = sqrt(c)/2 d_i,
/// with d Gamma from centered differences of the analytic Christoffel symbols.
/// Requires at least three spacings (std::invalid_argument).
CurvatureCrosscheck curvature_crosscheck(int m, double c, const std::vector<double>& spacings,
                                         const std::vector<std::array<int, 4>>& components);

/// The tabulated component classes plus a vanishing one.
std::vector<std::array<int, 4>> tabulated_components();

struct VolumeGrowth {
  std::vector<double> radii;
  std::vector<double> volume;        // grid quadrature
  std::vector<double> exact_volume;  // radial quadrature of the closed-form density
  std::vector<double> slope;         // d log V / dR between consecutive radii
  double exponent = 0.0;             // m sqrt(c)
  double max_ratio = 0.0;            // max V(R) exp(-exponent R) over the radii
};

/// Volume of geodesic balls by grid quadrature of sqrt(det g).
VolumeGrowth volume_growth(const ChartGrid& grid, const std::vector<double>& radii);

/// Volume of B_R by a fine one-dimensional radial quadrature.
double geodesic_ball_volume(int m, double c, double radius);

}  // namespace chflow
