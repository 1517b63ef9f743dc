#pragma once

#include <Eigen/Dense>
#include <optional>

#include "lpshift/transfer.hpp"

namespace lpshift {

// Stationary Markov measure of order k on the full shift: states are depth-k
// words, transitions are supported on shift-compatible successors
// (u_2..u_k = v_1..v_{k-1}), and the stationary row vector is stored
// alongside the transition matrix.
class MarkovMeasure {
 public:
  MarkovMeasure(int n, int order, Eigen::MatrixXd transition,
                Eigen::VectorXd stationary);
  // Computes the stationary vector (direct solve, power-iteration fallback).
  static MarkovMeasure from_transition(int n, int order,
                                       const Eigen::MatrixXd& transition);
  static MarkovMeasure bernoulli(const Eigen::VectorXd& letter_probs);

  int n() const noexcept { return n_; }
  int order() const noexcept { return order_; }
  const Eigen::MatrixXd& transition() const noexcept { return transition_; }
  const Eigen::VectorXd& stationary() const noexcept { return stationary_; }

  // Induced cylinder masses at any depth (marginal below the order, chain
  // products above it).
  Eigen::VectorXd cylinder_masses(int depth) const;

 private:
  int n_;
  int order_;
  Eigen::MatrixXd transition_;
  Eigen::VectorXd stationary_;
};

// Uniform average over the shift orbit of the periodic point w w w ...;
// shift-invariant with zero entropy.
class PeriodicOrbitMeasure {
 public:
  explicit PeriodicOrbitMeasure(Word block);
  const Word& block() const noexcept { return block_; }
  int period() const noexcept { return block_.size(); }
  Eigen::VectorXd cylinder_masses(int depth) const;

 private:
  Word block_;
};

// Kolmogorov-Sinai entropy -sum_u pi(u) sum_v P(u,v) ln P(u,v), with
// 0 ln 0 = 0; lies in [0, ln n].
double entropy(const MarkovMeasure& mu);

cplx integrate(const CylinderFunction& f, const MarkovMeasure& mu);
cplx integrate(const CylinderFunction& f, const PeriodicOrbitMeasure& mu);

// Extended-real objective value; minus_infinity is a tagged state, never a NaN.
struct Objective {
  double value = 0.0;
  bool minus_infinity = false;
};

// F(mu) = int ln(|a| rho^{1/p}) dmu + h(mu)/p; minus infinity when mu charges
// a cylinder where a vanishes.
Objective objective(const CylinderFunction& a, const Potential& rho, double p,
                    const MarkovMeasure& mu);
Objective objective(const CylinderFunction& a, const Potential& rho, double p,
                    const PeriodicOrbitMeasure& mu);

struct GibbsResult {
  std::optional<MarkovMeasure> maximizer;  // empty iff value is minus infinity
  Objective value;
  double lambda = 0.0;  // Perron eigenvalue of the weighted transfer matrix
  bool unique = true;   // false when several components attain the maximum
};

// Closed-form maximizer of the objective over order-k Markov measures for the
// weight rho |a|^p: the Doeblin chain P(u,v) = W(u,v) r(v) / (lambda r(u))
// built from the Perron pair of the weight matrix. When the support graph is
// reducible the maximizing strongly connected component is used and
// non-uniqueness is flagged.
GibbsResult gibbs_maximizer(const CylinderFunction& a, const Potential& rho,
                            double p, int order, const PowerOptions& opts = {});

struct NumericOptResult {
  std::optional<MarkovMeasure> best;
  Objective value;
  bool converged = false;
};

// Independent derivative-free ascent over order-k Markov measures:
// transition rows are softmax-parameterized over the weight's support graph
// and refined by coordinate pattern search with step backtracking; restarts
// are merged by deterministic argmax.
NumericOptResult maximize_numeric(const CylinderFunction& a, const Potential& rho,
                                  double p, int order, int restarts,
                                  unsigned seed = 0);

// Objective of the periodic-orbit measure of w: an entropy-free lower bound
// for the variational maximum.
Objective periodic_orbit_bound(const CylinderFunction& a, const Potential& rho,
                               double p, const Word& w);

}  // namespace lpshift
