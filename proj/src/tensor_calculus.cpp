#include "chflow/tensor_calculus.hpp"

#include <Eigen/LU>

#include <stdexcept>

namespace chflow {

namespace {

constexpr std::array<double, 5> kFirst4{1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0};
constexpr std::array<double, 5> kSecond4{-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0};
constexpr std::array<double, 3> kFirst2{-0.5, 0.0, 0.5};
constexpr std::array<double, 3> kSecond2{1.0, -2.0, 1.0};

struct Weights {
  int reach;
  const double* first;
  const double* second;
};

Weights weights(StencilOrder s) {
  if (s == StencilOrder::Second) return {1, kFirst2.data(), kSecond2.data()};
  return {2, kFirst4.data(), kSecond4.data()};
}

void require_interior(const ChartGrid& grid, Eigen::Index node, int reach) {
  if (!grid.interior(node, reach)) throw std::out_of_range("stencil leaves the grid domain");
}

// C[k](p,i) = Gamma^p_ki
std::array<SmallMatrix, kMaxDim> christoffel_slices(const LocalGeometry& geo) {
  const int n = geo.n;
  std::array<SmallMatrix, kMaxDim> c;
  for (int k = 0; k < n; ++k) {
    c[k].resize(n, n);
    for (int p = 0; p < n; ++p)
      for (int i = 0; i < n; ++i) c[k](p, i) = geo.gamma[p](k, i);
  }
  return c;
}

void check_same_grid(const ChartGrid& a, const ChartGrid& b) {
  if (&a != &b) throw std::invalid_argument("fields live on different grids");
}

}  // namespace

PackedVector pack(const SmallMatrix& h) {
  const auto n = static_cast<int>(h.rows());
  PackedVector v(sym_components(n));
  int c = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) v(c++) = h(i, j);
  return v;
}

SmallMatrix unpack(const Eigen::Ref<const Eigen::VectorXd>& packed, int n) {
  SmallMatrix h(n, n);
  int c = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      h(i, j) = packed(c);
      h(j, i) = packed(c);
      ++c;
    }
  return h;
}

// ---------------------------------------------------------------------------

SymTensorField::SymTensorField(std::shared_ptr<const ChartGrid> grid)
    : grid_(std::move(grid)), values_(Eigen::MatrixXd::Zero(sym_components(grid_->dim()), grid_->size())) {}

SymTensorField& SymTensorField::operator+=(const SymTensorField& other) {
  check_same_grid(*grid_, other.grid());
  values_ += other.values_;
  return *this;
}

SymTensorField& SymTensorField::operator-=(const SymTensorField& other) {
  check_same_grid(*grid_, other.grid());
  values_ -= other.values_;
  return *this;
}

SymTensorField& SymTensorField::operator*=(double s) {
  values_ *= s;
  return *this;
}

SymTensorField operator+(SymTensorField a, const SymTensorField& b) { return a += b; }
SymTensorField operator-(SymTensorField a, const SymTensorField& b) { return a -= b; }
SymTensorField operator*(double s, SymTensorField a) { return a *= s; }

OneFormField::OneFormField(std::shared_ptr<const ChartGrid> grid)
    : grid_(std::move(grid)), values_(Eigen::MatrixXd::Zero(grid_->dim(), grid_->size())) {}

ThreeTensorField::ThreeTensorField(std::shared_ptr<const ChartGrid> grid)
    : grid_(std::move(grid)),
      n_(grid_->dim()),
      values_(Eigen::MatrixXd::Zero(n_ * n_ * n_, grid_->size())) {}

// ---------------------------------------------------------------------------

TensorJet tensor_jet(const ChartGrid& grid, const Eigen::MatrixXd& values, Eigen::Index node,
                     StencilOrder stencil, int order) {
  const Weights w = weights(stencil);
  require_interior(grid, node, w.reach);
  const int n = grid.dim();
  const double h = grid.spacing();
  TensorJet jet;
  jet.n = n;
  jet.order = order;
  jet.value = unpack(values.col(node), n);
  if (order < 1) return jet;

  const int width = 2 * w.reach + 1;
  const auto rows = values.rows();
  Eigen::VectorXd acc(rows);
  for (int a = 0; a < n; ++a) {
    acc.setZero();
    for (int p = 0; p < width; ++p) {
      if (w.first[p] == 0.0) continue;
      acc += w.first[p] * values.col(node + (p - w.reach) * grid.stride(a));
    }
    jet.d[a] = unpack(acc / h, n);
  }
  if (order < 2) return jet;

  const double h2 = h * h;
  for (int a = 0; a < n; ++a) {
    acc.setZero();
    for (int p = 0; p < width; ++p) acc += w.second[p] * values.col(node + (p - w.reach) * grid.stride(a));
    jet.dd[a * n + a] = unpack(acc / h2, n);
    for (int b = a + 1; b < n; ++b) {
      acc.setZero();
      for (int p = 0; p < width; ++p) {
        if (w.first[p] == 0.0) continue;
        for (int q = 0; q < width; ++q) {
          if (w.first[q] == 0.0) continue;
          acc += w.first[p] * w.first[q] *
                 values.col(node + (p - w.reach) * grid.stride(a) + (q - w.reach) * grid.stride(b));
        }
      }
      jet.dd[a * n + b] = unpack(acc / h2, n);
      jet.dd[b * n + a] = jet.dd[a * n + b];
    }
  }
  return jet;
}

Eigen::MatrixXd first_differences(const ChartGrid& grid, const Eigen::MatrixXd& values, Eigen::Index node,
                                  StencilOrder stencil) {
  const Weights w = weights(stencil);
  require_interior(grid, node, w.reach);
  const int n = grid.dim();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(values.rows(), n);
  for (int a = 0; a < n; ++a)
    for (int p = 0; p < 2 * w.reach + 1; ++p)
      if (w.first[p] != 0.0) out.col(a) += w.first[p] * values.col(node + (p - w.reach) * grid.stride(a));
  return out / grid.spacing();
}

std::array<SmallMatrix, kMaxDim> covariant_derivative_at(const LocalGeometry& geo, const TensorJet& jet) {
  const int n = geo.n;
  const auto c = christoffel_slices(geo);
  std::array<SmallMatrix, kMaxDim> nabla;
  for (int k = 0; k < n; ++k) nabla[k] = jet.d[k] - c[k].transpose() * jet.value - jet.value * c[k];
  return nabla;
}

SmallMatrix rough_laplacian_at(const LocalGeometry& geo, const TensorJet& jet) {
  if (!geo.has_derivatives || jet.order < 2)
    throw std::invalid_argument("rough Laplacian needs Christoffel derivatives and a second-order jet");
  const int n = geo.n;
  const auto c = christoffel_slices(geo);
  const auto nabla = covariant_derivative_at(geo, jet);
  SmallMatrix out = SmallMatrix::Zero(n, n);
  SmallMatrix dc(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double gij = geo.ginv(i, j);
      if (gij == 0.0) continue;
      // dc(p,k) = d_i Gamma^p_jk
      for (int p = 0; p < n; ++p)
        for (int k = 0; k < n; ++k) dc(p, k) = geo.dgamma[i * n + p](j, k);
      SmallMatrix term = jet.dd[i * n + j] - dc.transpose() * jet.value - c[j].transpose() * jet.d[i] -
                         jet.value * dc - jet.d[i] * c[j];
      for (int p = 0; p < n; ++p) term -= geo.gamma[p](i, j) * nabla[p];
      term -= c[i].transpose() * nabla[j] + nabla[j] * c[i];
      out += gij * term;
    }
  }
  return out;
}

SmallMatrix curvature_action_at(const RiemannTensor& r, const SmallMatrix& ginv, const SmallMatrix& h) {
  const int n = r.dim();
  const SmallMatrix up = ginv * h * ginv;
  SmallMatrix out = SmallMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double v = 0.0;
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) v += r(i, p, q, j) * up(p, q);
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

SmallVector divergence_at(const LocalGeometry& geo, const std::array<SmallMatrix, kMaxDim>& nabla) {
  const int n = geo.n;
  SmallVector out = SmallVector::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) out -= geo.ginv(i, k) * nabla[i].row(k).transpose();
  return out;
}

double contract2(const SmallMatrix& ginv, const SmallMatrix& a, const SmallMatrix& b) {
  return ((ginv * a * ginv).array() * b.array()).sum();
}

// ---------------------------------------------------------------------------

double einstein_lambda(const ChartGrid& grid) { return (grid.chart().m() + 1) * grid.chart().c() / 2.0; }

std::vector<Eigen::Index> evaluation_nodes(const ChartGrid& grid, StencilOrder stencil) {
  return grid.interior_nodes(stencil_reach(stencil));
}

std::vector<Eigen::Index> active_nodes(const ChartGrid& grid, const Eigen::MatrixXd& values, StencilOrder stencil) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(grid.size()), 0);
  for (Eigen::Index k = 0; k < grid.size(); ++k) mask[k] = !values.col(k).isZero(0.0);
  mask = grid.dilate(std::move(mask), stencil_reach(stencil));
  const int reach = stencil_reach(stencil);
  std::vector<Eigen::Index> out;
  for (Eigen::Index k = 0; k < grid.size(); ++k)
    if (mask[k] && grid.interior(k, reach)) out.push_back(k);
  return out;
}

ThreeTensorField covariant_derivative(const SymTensorField& h, StencilOrder stencil) {
  const ChartGrid& grid = h.grid();
  const int n = grid.dim();
  ThreeTensorField out(h.grid_ptr());
  for (Eigen::Index node : active_nodes(grid, h.values(), stencil)) {
    const LocalGeometry geo = grid.geometry(node);
    const auto nabla = covariant_derivative_at(geo, tensor_jet(grid, h.values(), node, stencil, 1));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) out(i, j, k, node) = nabla[k](i, j);
  }
  return out;
}

SymTensorField rough_laplacian(const SymTensorField& h, StencilOrder stencil) {
  const ChartGrid& grid = h.grid();
  SymTensorField out(h.grid_ptr());
  for (Eigen::Index node : active_nodes(grid, h.values(), stencil)) {
    const LocalGeometry geo = grid.geometry(node, true);
    out.set(node, rough_laplacian_at(geo, tensor_jet(grid, h.values(), node, stencil, 2)));
  }
  return out;
}

LichnerowiczResult lichnerowicz(const SymTensorField& h, StencilOrder stencil) {
  const ChartGrid& grid = h.grid();
  const double lambda = einstein_lambda(grid);
  LichnerowiczResult out{SymTensorField(h.grid_ptr()), SymTensorField(h.grid_ptr()), 0.0};
  for (Eigen::Index node : active_nodes(grid, h.values(), stencil)) {
    const LocalGeometry geo = grid.geometry(node, true);
    const TensorJet jet = tensor_jet(grid, h.values(), node, stencil, 2);
    const RiemannTensor r = riemann_tensor(geo);
    const SmallMatrix rc = ricci_tensor(r, geo.ginv);
    const SmallMatrix base = rough_laplacian_at(geo, jet) + 2.0 * curvature_action_at(r, geo.ginv, jet.value);
    const SmallMatrix general = base - rc * geo.ginv * jet.value - jet.value * geo.ginv * rc;
    const SmallMatrix einstein = base + 2.0 * lambda * jet.value;
    out.general.set(node, general);
    out.einstein.set(node, einstein);
    out.max_path_difference = std::max(out.max_path_difference, (general - einstein).cwiseAbs().maxCoeff());
  }
  return out;
}

OneFormField divergence(const SymTensorField& h, StencilOrder stencil) {
  const ChartGrid& grid = h.grid();
  OneFormField out(h.grid_ptr());
  for (Eigen::Index node : active_nodes(grid, h.values(), stencil)) {
    const LocalGeometry geo = grid.geometry(node);
    out.set(node, divergence_at(geo, covariant_derivative_at(geo, tensor_jet(grid, h.values(), node, stencil, 1))));
  }
  return out;
}

SymTensorField divergence_adjoint(const OneFormField& w, StencilOrder stencil) {
  const ChartGrid& grid = w.grid();
  const int n = grid.dim();
  SymTensorField out(w.grid_ptr());
  for (Eigen::Index node : active_nodes(grid, w.values(), stencil)) {
    const LocalGeometry geo = grid.geometry(node);
    const Eigen::MatrixXd dw = first_differences(grid, w.values(), node, stencil);  // dw(j,i) = d_i w_j
    const SmallVector wv = w.at(node);
    SmallMatrix s(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double v = 0.5 * (dw(j, i) + dw(i, j));
        for (int p = 0; p < n; ++p) v -= geo.gamma[p](i, j) * wv(p);
        s(i, j) = v;
        s(j, i) = v;
      }
    out.set(node, s);
  }
  return out;
}

SymTensorField bianchi_gauge(const SymTensorField& h) {
  const ChartGrid& grid = h.grid();
  SymTensorField out(h.grid_ptr());
  for (Eigen::Index node = 0; node < grid.size(); ++node) {
    if (!grid.inside(node)) continue;
    const LocalGeometry geo = grid.geometry(node);
    const SmallMatrix hv = h.at(node);
    const double tr = (geo.ginv * hv).trace();
    out.set(node, hv - 0.5 * tr * geo.g);
  }
  return out;
}

double l2_inner(const SymTensorField& h, const SymTensorField& k) {
  check_same_grid(h.grid(), k.grid());
  const ChartGrid& grid = h.grid();
  double sum = 0.0;
  for (Eigen::Index node = 0; node < grid.size(); ++node) {
    if (!grid.inside(node)) continue;
    if (h.values().col(node).isZero(0.0) || k.values().col(node).isZero(0.0)) continue;
    const LocalGeometry geo = grid.geometry(node);
    sum += 4.0 * contract2(geo.ginv, h.at(node), k.at(node)) * geo.sqrt_det;
  }
  return sum * grid.cell_volume();
}

double l2_norm(const SymTensorField& h) { return std::sqrt(l2_inner(h, h)); }

double l2_inner(const OneFormField& a, const OneFormField& b) {
  check_same_grid(a.grid(), b.grid());
  const ChartGrid& grid = a.grid();
  double sum = 0.0;
  for (Eigen::Index node = 0; node < grid.size(); ++node) {
    if (!grid.inside(node)) continue;
    if (a.values().col(node).isZero(0.0) || b.values().col(node).isZero(0.0)) continue;
    const LocalGeometry geo = grid.geometry(node);
    sum += 4.0 * a.at(node).dot(geo.ginv * b.at(node)) * geo.sqrt_det;
  }
  return sum * grid.cell_volume();
}

double l2_inner(const ThreeTensorField& a, const ThreeTensorField& b) {
  check_same_grid(a.grid(), b.grid());
  const ChartGrid& grid = a.grid();
  const int n = grid.dim();
  double sum = 0.0;
  for (Eigen::Index node = 0; node < grid.size(); ++node) {
    if (!grid.inside(node)) continue;
    if (a.values().col(node).isZero(0.0) || b.values().col(node).isZero(0.0)) continue;
    const LocalGeometry geo = grid.geometry(node);
    const SmallMatrix& gi = geo.ginv;
    double v = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const double aijk = a(i, j, k, node);
          if (aijk == 0.0) continue;
          for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q)
              for (int r = 0; r < n; ++r) v += aijk * gi(i, p) * gi(j, q) * gi(k, r) * b(p, q, r, node);
        }
    sum += 4.0 * v * geo.sqrt_det;
  }
  return sum * grid.cell_volume();
}

SymTensorField operator_A(const SymTensorField& h, APath path, StencilOrder stencil) {
  if (path == APath::Lichnerowicz) {
    SymTensorField out = lichnerowicz(h, stencil).general;
    const double lambda = einstein_lambda(h.grid());
    for (Eigen::Index node : active_nodes(h.grid(), h.values(), stencil))
      out.values().col(node) -= 2.0 * lambda * h.values().col(node);
    return out;
  }
  const ChartGrid& grid = h.grid();
  SymTensorField out(h.grid_ptr());
  for (Eigen::Index node : active_nodes(grid, h.values(), stencil)) {
    const LocalGeometry geo = grid.geometry(node, true);
    const TensorJet jet = tensor_jet(grid, h.values(), node, stencil, 2);
    const RiemannTensor r = riemann_tensor(geo);
    out.set(node, rough_laplacian_at(geo, jet) + 2.0 * curvature_action_at(r, geo.ginv, jet.value));
  }
  return out;
}

ThreeTensorField three_tensor_T(const SymTensorField& h, StencilOrder stencil) {
  const ChartGrid& grid = h.grid();
  const int n = grid.dim();
  ThreeTensorField out(h.grid_ptr());
  for (Eigen::Index node : active_nodes(grid, h.values(), stencil)) {
    const LocalGeometry geo = grid.geometry(node);
    const auto nabla = covariant_derivative_at(geo, tensor_jet(grid, h.values(), node, stencil, 1));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) out(i, j, k, node) = nabla[k](i, j) - nabla[i](j, k);
  }
  return out;
}

}  // namespace chflow
