#pragma once

// Pointwise linear algebra of complex hyperbolic space in a J-adapted
// orthonormal frame e_1..e_{2m}: the complex structure, the Riemann tensor of
// constant holomorphic sectional curvature -c, the canonical orthonormal basis
// of symmetric 2-tensors and the curvature operator on that basis.
//
// Frame indices are 1-based throughout this header, matching the usual
// e_1, ..., e_{2m} labelling.

#include "chflow/rational.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace chflow {

struct JImage {
  int index;
  int sign;  // J(e_s) = sign * e_index
};

/// J e_{2k-1} = e_{2k}, J e_{2k} = -e_{2k-1}. Throws std::out_of_range.
JImage j_action(int m, int s);

enum class GammaGroup { I, II, III };

/// 1/2 for e_i e_i, 1/sqrt(2) for e_i e_j with i != j.
enum class GammaNorm { Half, InvSqrt2 };

/// One element of the canonical orthonormal basis of symmetric 2-tensors,
/// norm * e_i e_j with e_i e_j = e_i (x) e_j + e_j (x) e_i and i <= j.
struct GammaBasisElement {
  GammaGroup group;
  int i;
  int j;
  GammaNorm norm;

  double scale() const;
  std::string label() const;
};

/// Group I (2m diagonal elements), group II (the m J-pairs e_{2k-1}e_{2k}),
/// then group III as consecutive quadruples
///   e_{2a-1}e_{2b-1}, e_{2a}e_{2b}, e_{2a-1}e_{2b}, e_{2a}e_{2b-1}   (a < b),
/// i.e. each (s,t) is followed by its partner (J(s),J(t)).
std::vector<GammaBasisElement> build_gamma_basis(int m);

inline int gamma_dimension(int m) { return m * (2 * m + 1); }

/// Coefficient of c in R(e_i,e_j,e_k,e_l), read off the tabulated non-zero
/// classes and extended by the curvature symmetries; zero otherwise.
Rational riemann_coefficient(int m, int i, int j, int k, int l);

Rational riemann_component(int m, const Rational& c, int i, int j, int k, int l);

/// R(X,Y,Y,X) / (|X|^2 |Y|^2 - <X,Y>^2) for frame-span vectors with exact
/// components. X and Y must be non-zero and orthogonal; they need not be unit
/// length, which keeps e.g. (e_2 + e_3) exact. Throws std::invalid_argument.
Rational sectional_curvature(int m, const Rational& c, const RationalVector& x,
                             const RationalVector& y);

/// -(c/4)(1 + 3 <JX,Y>^2 / (|X|^2 |Y|^2)) for orthogonal X, Y.
Rational sectional_curvature_closed_form(int m, const Rational& c, const RationalVector& x,
                                         const RationalVector& y);

/// <R_wedge(e_i ^ e_j), e_k ^ e_l> = 4 R(e_i,e_j,e_l,e_k). Exposed for
/// completeness; nothing downstream depends on it.
Rational wedge_action_entry(int m, const Rational& c, int i, int j, int k, int l);

/// <R_S(e_i e_j), e_p e_q> on unnormalized symmetric products.
Rational symmetric_action_raw(int m, const Rational& c, int i, int j, int p, int q);

/// The curvature operator on symmetric 2-tensors in the gamma basis.
struct CurvatureMatrix {
  int m = 0;
  Rational c{1};
  RationalMatrix entries;

  Eigen::Index size() const { return entries.rows(); }
  Eigen::MatrixXd to_double() const { return chflow::to_double(entries); }

  RationalMatrix a_part() const { return entries.topLeftCorner(2 * m, 2 * m); }
  RationalMatrix b_part() const { return entries.block(2 * m, 2 * m, m, m); }
  RationalMatrix c_part() const {
    const Eigen::Index off = 3 * m;
    return entries.bottomRightCorner(size() - off, size() - off);
  }
};

/// <R_S(gamma^a), gamma^b> from the Riemann components. Mixed-normalization
/// entries carry a factor 1/(2 sqrt 2); those are required to vanish, and a
/// std::logic_error is thrown otherwise, so the result stays in Q.
CurvatureMatrix assemble_R_gamma_bruteforce(int m, const Rational& c);

RationalMatrix a_block(int m);  // 2m x 2m, D on the diagonal, E elsewhere
RationalMatrix b_block(int m);  // -4 Id_m
RationalMatrix c_block(int m);  // block diagonal in F

/// -(c/4) diag(A_m, B_m, C_m).
CurvatureMatrix block_R_gamma(int m, const Rational& c);

struct SpectralValue {
  Rational value;
  int multiplicity;
};

/// Closed-form spectrum, ascending with merged multiplicities.
std::vector<SpectralValue> spectrum_R_gamma(int m, const Rational& c);

/// Ascending eigenvalues from a dense symmetric eigensolver.
Eigen::VectorXd numeric_spectrum(const CurvatureMatrix& r);

/// Unit eigenvector (in gamma coordinates) for the largest eigenvalue.
Eigen::VectorXd top_eigenvector(const CurvatureMatrix& r);

struct EigenIdentity {
  std::string name;  // "X", "Y3", "Z1", ...
  Rational eigenvalue;
  bool holds;
};

struct ModelEigenvectorReport {
  int m = 0;
  std::vector<EigenIdentity> identities;

  bool all_hold() const;
  std::vector<std::string> failures() const;
};

/// Checks A_m X = 2(m+1) X, A_m Y_i = 2 Y_i, A_m Z_i = -4 Z_i exactly.
ModelEigenvectorReport verify_model_eigenvectors(int m);

struct EinsteinConstants {
  Rational lambda;
  Rational scalar_curvature;
  Rational a_block_entry_sum;  // sum of entries of -(c/4) A_m
  bool entry_sum_matches;
};

EinsteinConstants einstein_constants(int m, const Rational& c);

/// Coefficient of c in the linear-stability bound, -lambda/c + 1 = -(m-1)/2.
Rational stability_bound_coefficient(int m);

// Coordinates of a symmetric matrix h (components h_ij in the orthonormal
// frame) with respect to the gamma basis, using the identification
// h <-> h^{ij} e_i e_j, under which <h, k> = 4 h^{ij} k_ij.
Eigen::VectorXd gamma_coordinates(const std::vector<GammaBasisElement>& basis,
                                  const Eigen::MatrixXd& h);
Eigen::MatrixXd from_gamma_coordinates(const std::vector<GammaBasisElement>& basis,
                                       const Eigen::VectorXd& v);

}  // namespace chflow
