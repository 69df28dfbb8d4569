#pragma once

// Grid tensor fields and the covariant operators of the stability analysis.
//
// Symmetric 2-tensors are stored packed (upper triangle, row by row) with one
// column per grid node. Operators are evaluated only at nodes whose stencil
// lies inside the grid's domain; other nodes are left at zero.
//
// Inner products follow (h, k) = 4 Int h^ij k_ij dmu, and the same factor 4 is
// used for one-forms and three-tensors.

#include "chflow/chart_geometry.hpp"

#include <Eigen/Core>

#include <memory>
#include <optional>

namespace chflow {

enum class StencilOrder { Second = 2, Fourth = 4 };

/// Number of nodes a centered stencil reaches along an axis.
inline int stencil_reach(StencilOrder s) { return s == StencilOrder::Second ? 1 : 2; }

inline int sym_components(int n) { return n * (n + 1) / 2; }
inline int sym_index(int i, int j, int n) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i - 1) / 2 + (j - i);
}

using PackedVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 21, 1>;

PackedVector pack(const SmallMatrix& h);
SmallMatrix unpack(const Eigen::Ref<const Eigen::VectorXd>& packed, int n);

class SymTensorField {
 public:
  explicit SymTensorField(std::shared_ptr<const ChartGrid> grid);

  const ChartGrid& grid() const { return *grid_; }
  std::shared_ptr<const ChartGrid> grid_ptr() const { return grid_; }
  int dim() const { return grid_->dim(); }

  Eigen::MatrixXd& values() { return values_; }
  const Eigen::MatrixXd& values() const { return values_; }

  SmallMatrix at(Eigen::Index node) const { return unpack(values_.col(node), dim()); }
  void set(Eigen::Index node, const SmallMatrix& h) { values_.col(node) = pack(h); }

  /// Declared geodesic radius outside of which the field vanishes.
  std::optional<double> support_radius;

  SymTensorField& operator+=(const SymTensorField& other);
  SymTensorField& operator-=(const SymTensorField& other);
  SymTensorField& operator*=(double s);

 private:
  std::shared_ptr<const ChartGrid> grid_;
  Eigen::MatrixXd values_;
};

SymTensorField operator+(SymTensorField a, const SymTensorField& b);
SymTensorField operator-(SymTensorField a, const SymTensorField& b);
SymTensorField operator*(double s, SymTensorField a);

class OneFormField {
 public:
  explicit OneFormField(std::shared_ptr<const ChartGrid> grid);

  const ChartGrid& grid() const { return *grid_; }
  std::shared_ptr<const ChartGrid> grid_ptr() const { return grid_; }
  Eigen::MatrixXd& values() { return values_; }
  const Eigen::MatrixXd& values() const { return values_; }
  SmallVector at(Eigen::Index node) const { return values_.col(node); }
  void set(Eigen::Index node, const SmallVector& w) { values_.col(node) = w; }

 private:
  std::shared_ptr<const ChartGrid> grid_;
  Eigen::MatrixXd values_;
};

/// T_ijk stored at row (i*n + j)*n + k.
class ThreeTensorField {
 public:
  explicit ThreeTensorField(std::shared_ptr<const ChartGrid> grid);

  const ChartGrid& grid() const { return *grid_; }
  Eigen::MatrixXd& values() { return values_; }
  const Eigen::MatrixXd& values() const { return values_; }
  double operator()(int i, int j, int k, Eigen::Index node) const {
    return values_((i * n_ + j) * n_ + k, node);
  }
  double& operator()(int i, int j, int k, Eigen::Index node) { return values_((i * n_ + j) * n_ + k, node); }

 private:
  std::shared_ptr<const ChartGrid> grid_;
  int n_;
  Eigen::MatrixXd values_;
};

// ---------------------------------------------------------------------------
// Pointwise kernels

/// Coordinate derivatives of a sampled symmetric tensor at one node:
/// d[a] = d_a h, dd[a*n+b] = d_a d_b h.
struct TensorJet {
  int n = 0;
  int order = 0;
  SmallMatrix value;
  std::array<SmallMatrix, kMaxDim> d;
  std::array<SmallMatrix, kMaxDim * kMaxDim> dd;
};

/// Centered differences of `values` (packed symmetric components) at `node`.
/// The node must be interior with margin stencil_reach(stencil).
TensorJet tensor_jet(const ChartGrid& grid, const Eigen::MatrixXd& values, Eigen::Index node,
                     StencilOrder stencil, int order);

/// Centered first differences of a vector-valued sample (rows = components).
Eigen::MatrixXd first_differences(const ChartGrid& grid, const Eigen::MatrixXd& values, Eigen::Index node,
                                  StencilOrder stencil);

/// nabla[k](i,j) = nabla_k h_ij.
std::array<SmallMatrix, kMaxDim> covariant_derivative_at(const LocalGeometry& geo, const TensorJet& jet);

/// g^ij nabla_i nabla_j h; needs Christoffel derivatives and a second-order jet.
SmallMatrix rough_laplacian_at(const LocalGeometry& geo, const TensorJet& jet);

/// Rm(h)_ij = R_ipqj h^pq.
SmallMatrix curvature_action_at(const RiemannTensor& r, const SmallMatrix& ginv, const SmallMatrix& h);

/// (delta h)_j = -g^ik nabla_i h_kj.
SmallVector divergence_at(const LocalGeometry& geo, const std::array<SmallMatrix, kMaxDim>& nabla);

/// Full contraction g^.. g^.. a_ij b_ij of two 2-tensors.
double contract2(const SmallMatrix& ginv, const SmallMatrix& a, const SmallMatrix& b);

// ---------------------------------------------------------------------------
// Grid operators

ThreeTensorField covariant_derivative(const SymTensorField& h, StencilOrder stencil = StencilOrder::Second);
SymTensorField rough_laplacian(const SymTensorField& h, StencilOrder stencil = StencilOrder::Second);

struct LichnerowiczResult {
  SymTensorField general;   // Delta h + 2 Rm(h) - Rc o h - h o Rc with Rc computed at each node
  SymTensorField einstein;  // Delta h + 2 Rm(h) + 2 lambda h
  double max_path_difference = 0.0;
};

LichnerowiczResult lichnerowicz(const SymTensorField& h, StencilOrder stencil = StencilOrder::Second);

OneFormField divergence(const SymTensorField& h, StencilOrder stencil = StencilOrder::Second);
/// (delta* w)_ij = (nabla_i w_j + nabla_j w_i) / 2.
SymTensorField divergence_adjoint(const OneFormField& w, StencilOrder stencil = StencilOrder::Second);
/// G(h) = h - (tr_g h) g / 2, with g the background metric.
SymTensorField bianchi_gauge(const SymTensorField& h);

double l2_inner(const SymTensorField& h, const SymTensorField& k);
double l2_norm(const SymTensorField& h);
double l2_inner(const OneFormField& a, const OneFormField& b);
double l2_inner(const ThreeTensorField& a, const ThreeTensorField& b);

enum class APath { Lichnerowicz, Direct };

/// A h = Delta_L h - 2 lambda h (Lichnerowicz path) or Delta h + 2 Rm(h) (direct path).
SymTensorField operator_A(const SymTensorField& h, APath path = APath::Direct,
                          StencilOrder stencil = StencilOrder::Second);

/// T_ijk = nabla_k h_ij - nabla_i h_jk.
ThreeTensorField three_tensor_T(const SymTensorField& h, StencilOrder stencil = StencilOrder::Second);

/// Einstein constant (m+1)c/2 of the grid's chart.
double einstein_lambda(const ChartGrid& grid);

/// Nodes where an operator with the given stencil can be evaluated.
std::vector<Eigen::Index> evaluation_nodes(const ChartGrid& grid, StencilOrder stencil);

/// Evaluation nodes whose stencil touches a non-zero column of `values`.
/// Linear operators vanish at every other node.
std::vector<Eigen::Index> active_nodes(const ChartGrid& grid, const Eigen::MatrixXd& values, StencilOrder stencil);

}  // namespace chflow
