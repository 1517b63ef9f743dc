#include "lpshift/transfer.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace lpshift {

namespace {

template <typename Mat>
PerronResult perron_impl(const Mat& M, const PowerOptions& opts) {
  const Eigen::Index dim = M.rows();
  if (dim != M.cols())
    throw_error(ErrorCode::validation, "perron_eigen needs a square matrix");
  if (dim == 0) throw_error(ErrorCode::validation, "perron_eigen on empty matrix");

  double max_row_sum = 0.0;
  {
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(dim);
    Eigen::VectorXd rows = M * ones;
    max_row_sum = rows.maxCoeff();
  }
  PerronResult out;
  out.vector = Eigen::VectorXd::Constant(dim, 1.0 / static_cast<double>(dim));
  if (max_row_sum <= 0.0) return out;  // zero matrix

  // shift keeps every communicating class aperiodic
  const double shift = 0.5 * max_row_sum;
  Eigen::VectorXd x = out.vector;
  bool converged = false;
  double prev_delta = std::numeric_limits<double>::infinity();
  int extra = 0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    Eigen::VectorXd y = M * x + shift * x;
    const double total = y.sum();  // > 0 since shift > 0 and sum(x) = 1
    y /= total;
    const double delta = (y - x).cwiseAbs().maxCoeff();
    x.swap(y);
    out.iterations = it;
    if (delta <= opts.tol) {
      // refine towards the machine-precision plateau; the stated tolerance
      // is the convergence criterion, the extra sweeps are free accuracy
      converged = true;
      if (delta <= 1e-16 || delta >= prev_delta || ++extra > 512) break;
    }
    prev_delta = delta;
  }
  if (!converged)
    throw_error(ErrorCode::convergence,
                "power iteration did not converge within iteration budget");
  out.vector = x;
  out.value = (M * x).sum();
  return out;
}

Eigen::VectorXd checked_weight(const CylinderFunction& g) {
  Eigen::VectorXd v = g.real_values();
  if (v.minCoeff() < 0.0)
    throw_error(ErrorCode::validation, "transfer weight must be nonnegative");
  return v;
}

}  // namespace

PerronResult perron_eigen(const SparseR& M, const PowerOptions& opts) {
  return perron_impl(M, opts);
}

PerronResult perron_eigen(const Eigen::MatrixXd& M, const PowerOptions& opts) {
  return perron_impl(M, opts);
}

Potential::Potential(const CylinderFunction& rho) : rho_(rho) {
  if (rho_.depth() < 1)
    throw_error(ErrorCode::validation, "potential must have depth >= 1");
  Eigen::VectorXd v = rho_.real_values();
  if (v.minCoeff() <= 0.0)
    throw_error(ErrorCode::validation, "potential must be strictly positive");
  const int n = rho_.n();
  const std::int64_t fibers = v.size() / n;
  Eigen::VectorXd out(v.size());
  for (std::int64_t w = 0; w < fibers; ++w) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += v[i * fibers + w];
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream msg;
      msg << "rho not normalized on fiber w="
          << Word::from_index(n, rho_.depth() - 1, w).str() << ": sum=" << sum;
      throw_error(ErrorCode::validation, msg.str());
    }
    for (int i = 0; i < n; ++i) out[i * fibers + w] = v[i * fibers + w] / sum;
  }
  rho_ = CylinderFunction::from_real(n, rho_.depth(), out);
}

Potential Potential::from_unnormalized(const CylinderFunction& raw) {
  if (raw.depth() < 1)
    throw_error(ErrorCode::validation, "potential must have depth >= 1");
  Eigen::VectorXd v = raw.real_values();
  if (v.minCoeff() <= 0.0)
    throw_error(ErrorCode::validation, "potential must be strictly positive");
  const int n = raw.n();
  const std::int64_t fibers = v.size() / n;
  Eigen::VectorXd out(v.size());
  for (std::int64_t w = 0; w < fibers; ++w) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += v[i * fibers + w];
    for (int i = 0; i < n; ++i) out[i * fibers + w] = v[i * fibers + w] / sum;
  }
  return Potential(CylinderFunction::from_real(n, raw.depth(), out),
                   normalized_tag{});
}

Potential Potential::uniform(int n) {
  return Potential(CylinderFunction::from_real(
      n, 1, Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))));
}

CylinderMeasure::CylinderMeasure(int n, int depth, Eigen::VectorXd masses)
    : n_(n), depth_(depth), masses_(std::move(masses)) {
  if (masses_.size() != state_count(n_, depth_))
    throw_error(ErrorCode::validation, "measure mass vector has wrong length");
  if (masses_.minCoeff() <= 0.0)
    throw_error(ErrorCode::validation, "measure must have full support");
  const double total = masses_.sum();
  if (std::abs(total - 1.0) > 1e-12)
    throw_error(ErrorCode::validation, "measure masses must sum to 1");
  masses_ /= total;
}

double CylinderMeasure::mass(const Word& w) const {
  if (w.n() != n_) throw_error(ErrorCode::validation, "alphabet mismatch");
  if (w.size() > depth_)
    throw_error(ErrorCode::depth, "word deeper than stored measure");
  const std::int64_t block = masses_.size() / state_count(n_, w.size());
  const std::int64_t start = w.index() * block;
  double sum = 0.0;
  for (std::int64_t j = 0; j < block; ++j) sum += masses_[start + j];
  return sum;
}

CylinderMeasure CylinderMeasure::restricted(int new_depth) const {
  if (new_depth > depth_)
    throw_error(ErrorCode::depth, "cannot restrict a measure to a deeper level");
  if (new_depth == depth_) return *this;
  const std::int64_t count = state_count(n_, new_depth);
  const std::int64_t block = masses_.size() / count;
  Eigen::VectorXd out(count);
  for (std::int64_t w = 0; w < count; ++w) {
    double sum = 0.0;
    for (std::int64_t j = 0; j < block; ++j) sum += masses_[w * block + j];
    out[w] = sum;
  }
  return CylinderMeasure(n_, new_depth, std::move(out));
}

CylinderFunction apply_transfer(const CylinderFunction& g,
                                const CylinderFunction& f) {
  if (g.n() != f.n())
    throw_error(ErrorCode::validation, "alphabet mismatch in apply_transfer");
  if (g.depth() < 1)
    throw_error(ErrorCode::depth, "transfer weight must have depth >= 1");
  checked_weight(g);
  const int n = g.n();
  const int up = std::max(g.depth(), std::max(f.depth(), 1));
  const CylinderFunction gl = g.lifted(up);
  const CylinderFunction fl = f.lifted(up);
  const std::int64_t out_count = state_count(n, up - 1);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(out_count);
  for (int i = 0; i < n; ++i) {
    const std::int64_t off = static_cast<std::int64_t>(i) * out_count;
    for (std::int64_t y = 0; y < out_count; ++y)
      out[y] += gl.values()[off + y] * fl.values()[off + y];
  }
  return CylinderFunction(n, up - 1, std::move(out));
}

TransferMatrix transfer_matrix(const CylinderFunction& g, int depth) {
  if (g.depth() < 1)
    throw_error(ErrorCode::depth, "transfer weight must have depth >= 1");
  checked_weight(g);
  if (depth < g.depth() - 1)
    throw_error(ErrorCode::depth,
                "transfer matrix depth below weight depth - 1");
  const int n = g.n();
  const std::int64_t dim = state_count(n, depth);
  const CylinderFunction gl = g.lifted(depth + 1);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(dim) * n);
  // (L_g f)(y) = sum_i g(i.y) f(i.y); the depth-d prefix of i.y indexes
  // the column, so row y has at most n nonzeros.
  for (std::int64_t y = 0; y < dim; ++y) {
    for (int i = 0; i < n; ++i) {
      const std::int64_t input = static_cast<std::int64_t>(i) * dim + y;
      const double val = gl.values()[input].real();
      if (val == 0.0) continue;
      const std::int64_t col = depth == 0 ? 0 : input / n;
      trips.emplace_back(static_cast<int>(y), static_cast<int>(col), val);
    }
  }
  SparseR M(dim, dim);
  M.setFromTriplets(trips.begin(), trips.end());
  TransferMatrix out{n, depth, g, std::move(M)};
  return out;
}

CylinderMeasure fixed_point_measure(const Potential& rho, int depth,
                                    const PowerOptions& opts) {
  const int n = rho.n();
  const int core = rho.depth() - 1;
  if (depth < core)
    throw_error(ErrorCode::depth, "measure depth below potential depth - 1");

  Eigen::VectorXd masses;
  if (core == 0) {
    masses = Eigen::VectorXd::Ones(1);
  } else {
    const SparseR M = transfer_matrix(rho.rho(), core).matrix;
    masses = perron_eigen(SparseR(M.transpose()), opts).vector;
  }
  // Extend one level at a time: mu(C_u) = rho(u) mu(C_{u_2...}).
  for (int level = core; level < depth; ++level) {
    const std::int64_t count = state_count(n, level + 1);
    const std::int64_t suffix = masses.size();
    const CylinderFunction rl = rho.rho().lifted(level + 1);
    Eigen::VectorXd next(count);
    for (std::int64_t u = 0; u < count; ++u)
      next[u] = rl.values()[u].real() * masses[u % suffix];
    masses = std::move(next);
  }
  masses /= masses.sum();

  // Residual of the dual eigen-equation at the requested depth.
  if (depth >= 1) {
    const SparseR M = transfer_matrix(rho.rho(), depth).matrix;
    const double residual = (M.transpose() * masses - masses).cwiseAbs().maxCoeff();
    if (residual > 1e-12) {
      std::ostringstream msg;
      msg << "fixed-point measure residual " << residual << " exceeds 1e-12";
      throw_error(ErrorCode::convergence, msg.str());
    }
  }
  return CylinderMeasure(n, depth, std::move(masses));
}

double radius_perron(const CylinderFunction& g, int depth,
                     const PowerOptions& opts) {
  Eigen::VectorXd v = checked_weight(g);
  if (v.maxCoeff() == 0.0) return 0.0;
  return perron_eigen(transfer_matrix(g, depth).matrix, opts).value;
}

GelfandEnclosure radius_gelfand(const CylinderFunction& g, int n_max) {
  checked_weight(g);
  if (n_max < 1)
    throw_error(ErrorCode::validation, "gelfand iteration count must be >= 1");
  const int depth = std::max(g.depth() - 1, 0);
  const SparseR M = transfer_matrix(g, depth).matrix;

  GelfandEnclosure out;
  out.upper = std::numeric_limits<double>::infinity();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(M.rows());
  double log_max = 0.0;  // log of max_y L_g^N 1
  for (int N = 1; N <= n_max; ++N) {
    Eigen::VectorXd w = M * v;
    // Collatz-Wielandt ratio bounds: the minimal ratio over the support is
    // a lower bound for any nonnegative iterate, the maximal ratio an upper
    // bound whenever the iterate is strictly positive. These tighten the
    // O(1/N) Gelfand bounds to a geometric rate.
    double ratio_min = std::numeric_limits<double>::infinity();
    double ratio_max = 0.0;
    const bool strictly_positive = v.minCoeff() > 0.0;
    for (Eigen::Index y = 0; y < v.size(); ++y) {
      if (v[y] <= 0.0) continue;
      const double ratio = w[y] / v[y];
      ratio_min = std::min(ratio_min, ratio);
      ratio_max = std::max(ratio_max, ratio);
    }
    out.lower = std::max(out.lower, ratio_min);
    if (strictly_positive) out.upper = std::min(out.upper, ratio_max);

    const double m = w.maxCoeff();
    if (m <= 0.0) return GelfandEnclosure{0.0, 0.0, 0.0};  // nilpotent
    log_max += std::log(m);
    v = w / m;
    const double upper_n = std::exp(log_max / N);
    const double vmin = v.minCoeff();
    const double lower_n = vmin > 0.0 ? std::exp((log_max + std::log(vmin)) / N) : 0.0;
    out.lower = std::max(out.lower, lower_n);
    out.upper = std::min(out.upper, upper_n);
    out.estimate = upper_n;
  }
  return out;
}

}  // namespace lpshift
