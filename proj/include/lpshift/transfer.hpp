#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "lpshift/symbolic.hpp"

namespace lpshift {

using SparseR = Eigen::SparseMatrix<double>;

struct PowerOptions {
  double tol = 1e-13;      // sup-distance between successive normalized iterates
  int max_iter = 100000;
};

struct PerronResult {
  double value = 0.0;        // dominant eigenvalue (spectral radius)
  Eigen::VectorXd vector;    // nonnegative eigenvector, entries summing to 1
  int iterations = 0;
};

// Power iteration for a nonnegative matrix. A diagonal shift keeps the
// iteration aperiodic on every communicating class; the reported eigenpair
// is unshifted.
PerronResult perron_eigen(const SparseR& M, const PowerOptions& opts = {});
PerronResult perron_eigen(const Eigen::MatrixXd& M, const PowerOptions& opts = {});

// Strictly positive weight with unit preimage sums: for every word w,
// sum_i rho(i.w) = 1. Construction validates positivity, checks the sums to
// 1e-12, then renormalizes each fiber exactly.
class Potential {
 public:
  explicit Potential(const CylinderFunction& rho);
  // Fiber-normalizes arbitrary strictly positive data (no 1e-12 gate).
  static Potential from_unnormalized(const CylinderFunction& raw);
  static Potential uniform(int n);  // rho = 1/n at depth 1

  int n() const noexcept { return rho_.n(); }
  int depth() const noexcept { return rho_.depth(); }
  const CylinderFunction& rho() const noexcept { return rho_; }
  Eigen::VectorXd values() const { return rho_.real_values(); }

 private:
  struct normalized_tag {};
  Potential(CylinderFunction rho, normalized_tag) : rho_(std::move(rho)) {}
  CylinderFunction rho_;
};

// Masses of all depth-d cylinders: a probability vector with full support.
class CylinderMeasure {
 public:
  CylinderMeasure(int n, int depth, Eigen::VectorXd masses);

  int n() const noexcept { return n_; }
  int depth() const noexcept { return depth_; }
  const Eigen::VectorXd& masses() const noexcept { return masses_; }
  double mass(const Word& w) const;  // any word with size <= depth
  // Marginal at a shallower depth (sums over one-letter extensions).
  CylinderMeasure restricted(int new_depth) const;

 private:
  int n_;
  int depth_;
  Eigen::VectorXd masses_;
};

// Matrix of the weighted transfer operator on depth-d cylinder functions.
struct TransferMatrix {
  int n = 0;
  int depth = 0;
  CylinderFunction weight;
  SparseR matrix;  // n^d x n^d, at most n nonzeros per row
};

// (L_g f)(y) = sum_i g(i.y) f(i.y). Output depth = max(g.depth, f.depth, 1) - 1.
CylinderFunction apply_transfer(const CylinderFunction& g, const CylinderFunction& f);

// Requires depth >= max(g.depth - 1, 0); column for the indicator of w is
// apply_transfer(g, 1_w) lifted to `depth`.
TransferMatrix transfer_matrix(const CylinderFunction& g, int depth);

// The probability measure fixed by the dual transfer operator, as masses of
// depth-d cylinders. Computed as the left Perron eigenvector at the minimal
// depth and extended multiplicatively via mu(C_{iw}) = rho(iw) mu(C_w); the
// eigen-residual is verified at the requested depth.
CylinderMeasure fixed_point_measure(const Potential& rho, int depth,
                                    const PowerOptions& opts = {});

// Spectral radius of the weighted transfer operator, as the Perron eigenvalue
// of its matrix at `depth` (depth-independent for locally constant weights).
double radius_perron(const CylinderFunction& g, int depth,
                     const PowerOptions& opts = {});

struct GelfandEnclosure {
  double lower = 0.0;     // max_N (min_y L_g^N 1)^{1/N}
  double upper = 0.0;     // min_N (max_y L_g^N 1)^{1/N}
  double estimate = 0.0;  // (max_y L_g^{N_max} 1)^{1/N_max}
};

// Sup-norm Gelfand sequence of L_g applied to the unit, with a
// Collatz-Wielandt style enclosure; iterates are renormalized each step and
// tracked in log scale.
GelfandEnclosure radius_gelfand(const CylinderFunction& g, int n_max);

}  // namespace lpshift
