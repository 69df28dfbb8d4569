#pragma once

// Weighted little Hoelder norms over the annuli A_1 = B_4, A_N = B_{N+3} \ B_{N-1}
// (geodesic balls about the origin), K-functionals of the pair
// (h^{k+a}_tau, h^{l+b}_tau), continuous interpolation norms, and the
// resolvent of a coordinate derivative.
//
// Seminorms use coordinate derivatives of the components h_ij, taken by
// fourth-order differences on grids of geodesic normal coordinates.

#include "chflow/tensor_calculus.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

namespace chflow {

struct Annulus {
  int index;
  double inner;  // 0 for A_1
  double outer;

  bool contains(double r) const { return r < outer && (index == 1 || r > inner); }
  /// Distance from a point at radius r to the boundary of the annulus.
  double boundary_distance(double r) const;
};

Annulus annulus(int index);
/// Largest N with r in A_N.
int outermost_annulus(double r);
/// Smallest N with r in A_N.
int innermost_annulus(double r);

/// sup_N e^{N tau} sup_{A_N} max_ij |h_ij|, the zeroth-order weighted norm.
double weighted_sup_norm(const SymTensorField& h, double tau);

/// The space h^{k+alpha}; alpha = 0 selects the integer space h^k.
struct HolderSpec {
  int k = 0;
  double alpha = 0.0;
  double order() const { return k + alpha; }
};

/// |d^l h_ij(x)| <= amplitude exp(-rate r(x)) for |l| <= k + 1 beyond the
/// sampled region.
struct DecayEnvelope {
  double amplitude = 0.0;
  double rate = 0.0;
};

struct PairSearch {
  double radius = 2.0;    // pairs with d(x, y) up to this distance
  int stride = 1;         // partner offsets on a sublattice of this stride
  double fraction = 1.0;  // share of base points visited, drawn with `seed`
  std::uint64_t seed = 1;
};

struct NormOptions {
  PairSearch pairs;
  std::optional<DecayEnvelope> envelope;
};

struct AnnulusSeminorms {
  int index = 0;
  double weight = 0.0;        // e^{N tau}
  Eigen::MatrixXd sup;        // (component, q): sup_{|l|=q} sup_x d_x^q |d^l h_ij(x)|
  Eigen::VectorXd holder;     // per component; zero for integer spaces
  double weighted_total = 0;  // weight * max over components of (sum_q sup + holder)
};

struct WeightedNormReport {
  HolderSpec spec;
  double tau = 0.0;
  std::vector<AnnulusSeminorms> annuli;
  double sampled = 0.0;          // sup over sampled annuli
  double resolved_radius = 0.0;  // nodes below this radius carry derivatives
  int truncation_index = 0;      // last annulus that meets the resolved region
  double tail_bound = 0.0;       // bound on every contribution beyond the resolved radius
  double total() const { return std::max(sampled, tail_bound); }
};

/// Throws std::invalid_argument for tau <= m/2 or a field whose values beyond
/// the resolved radius are neither declared zero (support_radius) nor covered
/// by an envelope, and std::domain_error for missing derivative margin.
WeightedNormReport weighted_norm(const SymTensorField& h, const HolderSpec& spec, double tau,
                                 const NormOptions& options = {});

/// F_h(t): the weighted Hoelder seminorm with pairs restricted to d(x, y) <= t.
double little_modulus(const SymTensorField& h, const HolderSpec& spec, double tau, double t,
                      const NormOptions& options = {});

struct SobolevReport {
  double integral = 0.0;  // sum_ij Int (|h_ij|^2 + |nabla h_ij|^2) dmu
  double norm = 0.0;      // weighted norm of h
  double constant = 0.0;  // implementation factor times the geometric-series constant
  double margin() const { return constant * norm * norm - integral; }
  bool holds() const { return integral <= constant * norm * norm; }
};

/// e^{m - xi} + e^{2m} e^{-2 xi} / (1 - e^{-2 xi}) with xi = 2 tau - m.
double sobolev_constant(int m, double tau);

SobolevReport sobolev_embedding_check(const SymTensorField& h, const HolderSpec& spec, double tau,
                                      double implementation_factor = 10.0, const NormOptions& options = {});

/// zeta(s) = (1 - s^2)^4 / M with unit mass over a unit geodesic ball.
class Mollifier {
 public:
  Mollifier(int m, double c);
  double operator()(double s) const;
  double mass_normalization() const { return mass_; }
  /// C_t = t^{-n} Int_{B_t} zeta(d / t) dmu by radial quadrature.
  double scale_factor(double t) const;

 private:
  int m_;
  double c_;
  double mass_;
};

struct KFunctionalSample {
  double t = 0.0;
  double identity = 0.0;   // |h|_X from the split (h, 0)
  double mollified = 0.0;  // |a_t|_X + t |b_t|_Y, infinite when not evaluated
  double a_norm = 0.0;
  double b_norm = 0.0;
  double bound() const { return std::min(identity, mollified); }
  bool mollifier_wins() const { return mollified < identity; }
  double c_t_min = 0.0;  // discrete normalization over the evaluated nodes
  double c_t_max = 0.0;
  double c_t = 0.0;      // quadrature value
};

struct KFunctionalCurve {
  HolderSpec x;
  HolderSpec y;
  double tau = 0.0;
  double t_max = 0.0;
  std::vector<KFunctionalSample> samples;

  std::vector<double> bounds() const;
  /// Largest drop between consecutive samples relative to the largest bound.
  double monotonicity_defect() const;
  /// Largest increase of the slope between consecutive intervals, relative
  /// to the largest slope magnitude.
  double concavity_defect() const;
};

/// Upper bounds on K(t, h; X, Y) from the splits (h, 0) and the mollifier
/// pair a_t = h - b_t, b_t = zeta_t * h. The mollifier is used for t < 1.
/// Throws std::invalid_argument for t outside (0, t_max], where t_max keeps
/// the smoothed support inside the resolved region.
KFunctionalCurve k_functional(const SymTensorField& h, const HolderSpec& x, const HolderSpec& y, double tau,
                              const std::vector<double>& t, const NormOptions& options = {});

double theta_norm(const KFunctionalCurve& curve, double theta);

/// Log-spaced samples of [t_min, t_max].
std::vector<double> log_spaced(double t_min, double t_max, int count);

struct InterpolationReport {
  double theta = 0.0;
  double theta_norm = 0.0;
  double x_norm = 0.0;
  double y_norm = 0.0;
  double ratio() const;  // theta_norm / (x_norm^(1-theta) y_norm^theta)
};

InterpolationReport interp_inequality_check(const SymTensorField& h, const HolderSpec& x, const HolderSpec& y,
                                            double theta, double tau, const std::vector<double>& t,
                                            const NormOptions& options = {});

struct EquivalenceReport {
  HolderSpec target;
  std::vector<double> ratios;  // theta_norm / |h|_target
  double lower() const;
  double upper() const;
  /// Smallest C* with every ratio in [1/C*, C*].
  double constant() const;
};

/// Compares the interpolation norm of (X, Y)_theta with the norm of
/// h^{(1-theta)(k+a) + theta(l+b)}_tau over a family of fields.
EquivalenceReport norm_equivalence(const std::vector<SymTensorField>& family, const HolderSpec& x,
                                   const HolderSpec& y, double theta, double tau, const std::vector<double>& t,
                                   const NormOptions& options = {});

/// u(s_0) = Int_0^inf e^{-lambda s} f(s_0 + s) ds for samples of f on a uniform
/// line, integrating the piecewise-linear interpolant exactly. Values past the
/// last sample count as zero.
Eigen::VectorXd line_resolvent(const Eigen::VectorXd& f, double spacing, double lambda);

struct ResolventSample {
  double lambda = 0.0;
  double ratio = 0.0;            // |lambda R h|_{0;tau} / |h|_{0;tau} on x^i >= 0
  double distance_to_h = 0.0;    // max |lambda R h - h|
  double truncation_bound = 0.0;
};

struct ResolventReport {
  int direction = 0;
  std::vector<ResolventSample> samples;
  double max_ratio() const;
};

/// lambda R(lambda, d_i) h along coordinate lines of the grid, compared with h
/// on the half-space x^i >= 0 where the rays run outward. The truncation
/// bound covers the part of each ray beyond the grid through the envelope
/// (zero for fields declared to vanish there).
ResolventReport resolvent_bound_check(const SymTensorField& h, const std::vector<double>& lambdas, int direction,
                                      double tau, const NormOptions& options = {});

/// Geodesic normal coordinate grid reaching geodesic radius `radius`.
std::shared_ptr<ChartGrid> holder_grid(int m, double c, double spacing, double radius);

}  // namespace chflow
