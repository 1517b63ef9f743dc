#pragma once

#include <Eigen/Sparse>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lpshift/transfer.hpp"

namespace lpshift {

using SparseC = Eigen::SparseMatrix<cplx>;

// L^p over depth-d cylinders with the masses of a fully supported measure as
// weights: ||f||_p = (sum_w |f(w)|^p mu(C_w))^{1/p}.
struct WeightedLpSpace {
  int n = 0;
  int depth = 0;
  double p = 2.0;
  Eigen::VectorXd weights;

  static WeightedLpSpace from_measure(const CylinderMeasure& mu, double p);
  double q() const;  // conjugate exponent; infinity when p = 1
  double norm(const Eigen::VectorXcd& f) const;
};

enum class OpKind {
  multiplication,        // square diagonal
  weighted_composition,  // at most one nonzero per row
  general,
};

// A linear map between weighted L^p spaces of (possibly different) depths.
// gauge_degree counts composition-operator factors minus transfer factors;
// the circle action scales the operator by z^gauge_degree.
class RepOperator {
 public:
  RepOperator(WeightedLpSpace source, WeightedLpSpace target, SparseC matrix,
              int gauge_degree = 0);
  static RepOperator identity(const WeightedLpSpace& space);

  const WeightedLpSpace& source() const noexcept { return source_; }
  const WeightedLpSpace& target() const noexcept { return target_; }
  const SparseC& matrix() const noexcept { return matrix_; }
  OpKind kind() const noexcept { return kind_; }
  int gauge_degree() const noexcept { return gauge_degree_; }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& f) const;
  Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(matrix_); }

  // this after rhs; rhs.target must match this->source.
  RepOperator compose(const RepOperator& rhs) const;
  RepOperator plus(const RepOperator& rhs) const;
  RepOperator scaled(cplx factor) const;

  bool one_nonzero_per_row() const;
  bool one_nonzero_per_column() const;

 private:
  WeightedLpSpace source_;
  WeightedLpSpace target_;
  SparseC matrix_;
  OpKind kind_;
  int gauge_degree_;
};

inline RepOperator operator*(const RepOperator& lhs, const RepOperator& rhs) {
  return lhs.compose(rhs);
}

// Largest absolute entry of the difference; spaces must agree.
double max_abs_diff(const RepOperator& a, const RepOperator& b);

// Multiplication by a (lifted to the space depth); diagonal, norm max|a|.
RepOperator make_pi(const CylinderFunction& a, const WeightedLpSpace& space);

// Composition with the shift, f -> f o phi, from depth d to depth d+1.
// Requires both spaces to carry the same shift-invariant measure and p.
RepOperator make_T_phi(const WeightedLpSpace& source, const WeightedLpSpace& target);

// Averaging over preimages with the potential's weights, depth d+1 to d.
RepOperator make_S_phi(const Potential& rho, const WeightedLpSpace& source,
                       const WeightedLpSpace& target);

struct CuntzPair {
  RepOperator T;  // isometry from depth d into its letter's cylinder at d+1
  RepOperator S;  // left inverse, a contraction from depth d+1 to d
};

// The n isometry/contraction pairs T_i = pi(rho^{-1/p} 1_{X_i}) T_phi and
// S_i = S_phi pi(rho^{-1/q} 1_{X_i}), built over the fixed-point measure.
// When p = 1 the exponent -1/q is zero and the S-side factor is the plain
// letter indicator.
std::vector<CuntzPair> cuntz_family(const Potential& rho, double p, int depth,
                                    const PowerOptions& opts);
std::vector<CuntzPair> cuntz_family(const Potential& rho, double p, int depth,
                                    const CylinderMeasure& mu_deeper);

// Exact p -> p operator norm from the weighted-composition closed form.
// Handles diagonal operators, operators with at most one nonzero per row,
// and (via duality) operators with at most one nonzero per column; anything
// else is an unsupported-kind error directing callers to norm_bounds.
double exact_norm(const RepOperator& op);

struct NormBounds {
  double lower = 0.0;
  double upper = 0.0;
  bool exact = false;  // true when lower == upper is the exact norm (p in {1,2})
};

// Certified enclosure of the p -> p norm for a general operator: probe +
// ascent lower bound, interpolation upper bound; exact for p in {1, 2}.
NormBounds norm_bounds(const RepOperator& op, int probes = 64, unsigned seed = 0);

// Adjoint with respect to the weighted pairing <f, g> = sum f conj(g) w;
// acts between the dual (exponent q) spaces. Requires p > 1.
RepOperator weighted_adjoint(const RepOperator& op);

// The measurable set map underlying a weighted composition operator:
// atom_images[v] lists the rows supporting column v's image.
struct SetMonomorphism {
  int n = 0;
  int source_depth = 0;
  int target_depth = 0;
  std::vector<std::vector<std::int64_t>> atom_images;
};

struct LampertiDecomposition {
  SetMonomorphism phi;
  Eigen::VectorXcd h;             // row weights; zero off the image of phi
  Eigen::VectorXd criterion_lhs;  // per atom: sum_{r in phi(v)} |h_r|^p w_t(r)
  Eigen::VectorXd criterion_rhs;  // per atom: w_s(v)
  double criterion_max_dev = 0.0;
  bool is_isometry = false;  // criterion holds to 1e-12
};

// Writes op = diag(h) T_phi and evaluates the isometry criterion
// sum_{r in phi(v)} |h(r)|^p w_t(r) = w_s(v) atom by atom.
LampertiDecomposition lamperti_decompose(const RepOperator& op);

struct RelationReport {
  std::vector<std::pair<std::string, double>> deviations;
  void record(const std::string& name, double dev) { deviations.emplace_back(name, dev); }
  double max_deviation() const;
};

// Checks every generating relation of the covariant triple and the Cuntz
// family at working depth d: the two intertwining identities, the weighted
// resolution of identity, generator reconstruction from the family, the
// one-sided inverses, the letter projections, and word projections up to
// length 3. At p = 2 additionally compares S with the weighted adjoint of T.
RelationReport verify_covariance(const Potential& rho, const CylinderFunction& a,
                                 double p, int depth,
                                 const PowerOptions& opts = {});

struct AndoReport {
  double formula_dev = 0.0;     // projection formula vs the matrix TS
  double idempotent_dev = 0.0;  // (TS)^2 vs TS
  double unit_dev = 0.0;        // TS 1 vs 1
  double range_dev = 0.0;       // TS T vs T
  double norm_T = 0.0;
  double norm_S = 0.0;
};

// Builds the conditional expectation onto the sigma-algebra generated by the
// image atoms of T's set map and compares the contractive-projection formula
// against TS.
AndoReport ando_projection_check(const Potential& rho, double p, int depth,
                                 const PowerOptions& opts = {});

struct RadonNikodymReport {
  double max_rel_dev = 0.0;
};

// rho(i.w) against mu(C_{iw}) / mu(C_w) for every letter i and depth-d word w.
RadonNikodymReport radon_nikodym_check(const Potential& rho,
                                       const CylinderMeasure& mu, int depth);

}  // namespace lpshift
