#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "lpshift/errors.hpp"

namespace lpshift {

using cplx = std::complex<double>;

// Global cap on working sizes: constructions needing more than this many
// cylinder states (n^depth) are rejected with a resource error.
std::int64_t state_cap() noexcept;
void set_state_cap(std::int64_t cap);

// n^depth, guarded by the cap.
std::int64_t state_count(int n, int depth);

// A finite word over the alphabet {1..n}; names the cylinder set of all
// one-sided sequences beginning with it.
//
// Canonical index: idx(w) = sum_k (w_k - 1) * n^(d-k), i.e. lexicographic
// with the first letter most significant. All vectors indexed by depth-d
// words use this order.
class Word {
 public:
  Word(int n, std::vector<int> letters);
  static Word from_index(int n, int depth, std::int64_t index);
  static Word parse(int n, const std::string& text);  // comma-separated, "2,1"

  int n() const noexcept { return n_; }
  int size() const noexcept { return static_cast<int>(letters_.size()); }
  const std::vector<int>& letters() const noexcept { return letters_; }
  std::int64_t index() const;
  Word rotated(int shift) const;  // cyclic left rotation by `shift`
  std::string str() const;

 private:
  int n_;
  std::vector<int> letters_;
};

// A locally constant function on the full shift: depends only on the first
// `depth` coordinates, stored as the n^depth values on depth-d cylinders in
// canonical word order.
class CylinderFunction {
 public:
  CylinderFunction(int n, int depth, Eigen::VectorXcd values);
  static CylinderFunction constant(int n, cplx value);
  static CylinderFunction from_real(int n, int depth, const Eigen::VectorXd& values);
  // Depth-d indicator of the cylinder named by w; requires w.size() <= depth.
  static CylinderFunction indicator(const Word& w, int depth);

  int n() const noexcept { return n_; }
  int depth() const noexcept { return depth_; }
  std::int64_t size() const noexcept { return values_.size(); }
  const Eigen::VectorXcd& values() const noexcept { return values_; }

  // Value on the cylinder named by w; requires w.size() >= depth (the value
  // depends only on the length-`depth` prefix).
  cplx value_at(const Word& w) const;

  // Same function represented at a deeper level; errors if new_depth < depth.
  CylinderFunction lifted(int new_depth) const;

  // f o shift: depth grows by one, value depends on coordinates 2..depth+1.
  CylinderFunction composed_with_shift() const;

  bool is_real(double tol = 1e-12) const;
  // Real part, after checking imaginary parts vanish to `tol`.
  Eigen::VectorXd real_values(double tol = 1e-12) const;
  double max_abs() const;

 private:
  int n_;
  int depth_;
  Eigen::VectorXcd values_;
};

// Pointwise algebra; depths are aligned automatically by lifting.
CylinderFunction add(const CylinderFunction& f, const CylinderFunction& g);
CylinderFunction mul(const CylinderFunction& f, const CylinderFunction& g);
// v -> |v|^t entrywise (real output). t < 0 on a zero entry is a
// singularity error.
CylinderFunction abs_pow(const CylinderFunction& f, double t);

}  // namespace lpshift
