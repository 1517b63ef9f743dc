#include "lpshift/lp_rep.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace lpshift {

namespace {

constexpr double kSpaceTol = 1e-12;

void check_exponent(double p) {
  if (!(p >= 1.0) || !std::isfinite(p))
    throw_error(ErrorCode::validation, "exponent p must lie in [1, infinity)");
}

bool same_space(const WeightedLpSpace& a, const WeightedLpSpace& b) {
  if (a.n != b.n || a.depth != b.depth || a.p != b.p) return false;
  if (a.weights.size() != b.weights.size()) return false;
  for (Eigen::Index j = 0; j < a.weights.size(); ++j) {
    const double scale = std::max({1.0, std::abs(a.weights[j]), std::abs(b.weights[j])});
    if (std::abs(a.weights[j] - b.weights[j]) > kSpaceTol * scale) return false;
  }
  return true;
}

void require_same_space(const WeightedLpSpace& a, const WeightedLpSpace& b,
                        const char* what) {
  if (!same_space(a, b))
    throw_error(ErrorCode::validation,
                std::string("space mismatch in ") + what);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

WeightedLpSpace WeightedLpSpace::from_measure(const CylinderMeasure& mu, double p) {
  check_exponent(p);
  return WeightedLpSpace{mu.n(), mu.depth(), p, mu.masses()};
}

double WeightedLpSpace::q() const {
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  return p / (p - 1.0);
}

double WeightedLpSpace::norm(const Eigen::VectorXcd& f) const {
  if (f.size() != weights.size())
    throw_error(ErrorCode::validation, "vector size does not match space");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < f.size(); ++j)
    acc += std::pow(std::abs(f[j]), p) * weights[j];
  return std::pow(acc, 1.0 / p);
}

RepOperator::RepOperator(WeightedLpSpace source, WeightedLpSpace target,
                         SparseC matrix, int gauge_degree)
    : source_(std::move(source)),
      target_(std::move(target)),
      matrix_(std::move(matrix)),
      kind_(OpKind::general),
      gauge_degree_(gauge_degree) {
  if (matrix_.rows() != state_count(target_.n, target_.depth) ||
      matrix_.cols() != state_count(source_.n, source_.depth))
    throw_error(ErrorCode::validation, "operator matrix shape does not match spaces");
  if (source_.p != target_.p)
    throw_error(ErrorCode::validation, "operator endpoints carry different exponents");
  matrix_.prune(0.0, 0.0);
  matrix_.makeCompressed();

  // structural classification
  bool diagonal = matrix_.rows() == matrix_.cols();
  std::vector<int> row_count(static_cast<std::size_t>(matrix_.rows()), 0);
  bool one_per_row = true;
  for (int k = 0; k < matrix_.outerSize(); ++k)
    for (SparseC::InnerIterator it(matrix_, k); it; ++it) {
      if (++row_count[static_cast<std::size_t>(it.row())] > 1) one_per_row = false;
      if (it.row() != it.col()) diagonal = false;
    }
  kind_ = diagonal ? OpKind::multiplication
                   : (one_per_row ? OpKind::weighted_composition : OpKind::general);
}

RepOperator RepOperator::identity(const WeightedLpSpace& space) {
  SparseC id(state_count(space.n, space.depth), state_count(space.n, space.depth));
  id.setIdentity();
  return RepOperator(space, space, std::move(id), 0);
}

Eigen::VectorXcd RepOperator::apply(const Eigen::VectorXcd& f) const {
  if (f.size() != matrix_.cols())
    throw_error(ErrorCode::validation, "vector size does not match operator source");
  return matrix_ * f;
}

RepOperator RepOperator::compose(const RepOperator& rhs) const {
  require_same_space(source_, rhs.target_, "operator composition");
  SparseC prod = matrix_ * rhs.matrix_;
  return RepOperator(rhs.source_, target_, std::move(prod),
                     gauge_degree_ + rhs.gauge_degree_);
}

RepOperator RepOperator::plus(const RepOperator& rhs) const {
  require_same_space(source_, rhs.source_, "operator sum (source)");
  require_same_space(target_, rhs.target_, "operator sum (target)");
  SparseC sum = matrix_ + rhs.matrix_;
  // a sum of mixed gauge degrees is no longer homogeneous; degree is only
  // kept when both terms agree
  const int deg = gauge_degree_ == rhs.gauge_degree_ ? gauge_degree_ : 0;
  return RepOperator(source_, target_, std::move(sum), deg);
}

RepOperator RepOperator::scaled(cplx factor) const {
  SparseC m = matrix_;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseC::InnerIterator it(m, k); it; ++it) it.valueRef() *= factor;
  return RepOperator(source_, target_, std::move(m), gauge_degree_);
}

bool RepOperator::one_nonzero_per_row() const {
  return kind_ != OpKind::general;
}

bool RepOperator::one_nonzero_per_column() const {
  std::vector<int> count(static_cast<std::size_t>(matrix_.cols()), 0);
  for (int k = 0; k < matrix_.outerSize(); ++k)
    for (SparseC::InnerIterator it(matrix_, k); it; ++it)
      if (++count[static_cast<std::size_t>(it.col())] > 1) return false;
  return true;
}

double max_abs_diff(const RepOperator& a, const RepOperator& b) {
  require_same_space(a.source(), b.source(), "operator comparison (source)");
  require_same_space(a.target(), b.target(), "operator comparison (target)");
  SparseC diff = a.matrix() - b.matrix();
  double dev = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseC::InnerIterator it(diff, k); it; ++it)
      dev = std::max(dev, std::abs(it.value()));
  return dev;
}

RepOperator make_pi(const CylinderFunction& a, const WeightedLpSpace& space) {
  if (a.n() != space.n)
    throw_error(ErrorCode::validation, "alphabet mismatch in make_pi");
  if (a.depth() > space.depth)
    throw_error(ErrorCode::depth, "multiplier deeper than the space");
  const CylinderFunction al = a.lifted(space.depth);
  const std::int64_t dim = al.size();
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(static_cast<std::size_t>(dim));
  for (std::int64_t j = 0; j < dim; ++j)
    if (al.values()[j] != 0.0)
      trips.emplace_back(static_cast<int>(j), static_cast<int>(j), al.values()[j]);
  SparseC m(dim, dim);
  m.setFromTriplets(trips.begin(), trips.end());
  return RepOperator(space, space, std::move(m), 0);
}

namespace {

// T needs sum_i w_target(i.w) = w_source(w): the discrete form of carrying
// the same shift-invariant measure on both endpoints.
void require_compatible_pair(const WeightedLpSpace& shallow,
                             const WeightedLpSpace& deep, const char* what) {
  if (shallow.n != deep.n || deep.depth != shallow.depth + 1)
    throw_error(ErrorCode::depth,
                std::string(what) + ": endpoint depths must differ by one");
  if (shallow.p != deep.p)
    throw_error(ErrorCode::validation,
                std::string(what) + ": endpoints carry different exponents");
  const std::int64_t dim = shallow.weights.size();
  for (std::int64_t w = 0; w < dim; ++w) {
    double sum = 0.0;
    for (int i = 0; i < shallow.n; ++i)
      sum += deep.weights[static_cast<std::int64_t>(i) * dim + w];
    if (std::abs(sum - shallow.weights[w]) >
        kSpaceTol * std::max(1.0, shallow.weights[w]))
      throw_error(ErrorCode::validation,
                  std::string(what) +
                      ": endpoint weights do not come from one shift-invariant measure");
  }
}

}  // namespace

RepOperator make_T_phi(const WeightedLpSpace& source, const WeightedLpSpace& target) {
  require_compatible_pair(source, target, "make_T_phi");
  const std::int64_t rows = state_count(target.n, target.depth);
  const std::int64_t cols = source.weights.size();
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r)
    trips.emplace_back(static_cast<int>(r), static_cast<int>(r % cols), cplx(1.0));
  SparseC m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  return RepOperator(source, target, std::move(m), +1);
}

RepOperator make_S_phi(const Potential& rho, const WeightedLpSpace& source,
                       const WeightedLpSpace& target) {
  require_compatible_pair(target, source, "make_S_phi");
  if (target.depth < rho.depth() - 1)
    throw_error(ErrorCode::depth, "make_S_phi target depth below rho depth - 1");
  const std::int64_t rows = target.weights.size();
  const CylinderFunction rl = rho.rho().lifted(source.depth);
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(static_cast<std::size_t>(rows) * rho.n());
  for (std::int64_t w = 0; w < rows; ++w)
    for (int i = 0; i < rho.n(); ++i) {
      const std::int64_t c = static_cast<std::int64_t>(i) * rows + w;
      trips.emplace_back(static_cast<int>(w), static_cast<int>(c), rl.values()[c]);
    }
  SparseC m(rows, source.weights.size());
  m.setFromTriplets(trips.begin(), trips.end());
  return RepOperator(source, target, std::move(m), -1);
}

std::vector<CuntzPair> cuntz_family(const Potential& rho, double p, int depth,
                                    const PowerOptions& opts) {
  return cuntz_family(rho, p, depth, fixed_point_measure(rho, depth + 1, opts));
}

std::vector<CuntzPair> cuntz_family(const Potential& rho, double p, int depth,
                                    const CylinderMeasure& mu_deeper) {
  check_exponent(p);
  if (depth < rho.depth() - 1)
    throw_error(ErrorCode::depth, "cuntz_family depth below rho depth - 1");
  if (mu_deeper.depth() != depth + 1 || mu_deeper.n() != rho.n())
    throw_error(ErrorCode::validation, "cuntz_family measure must live at depth + 1");
  const WeightedLpSpace shallow =
      WeightedLpSpace::from_measure(mu_deeper.restricted(depth), p);
  const WeightedLpSpace deep = WeightedLpSpace::from_measure(mu_deeper, p);

  const int n = rho.n();
  const std::int64_t dim = shallow.weights.size();
  const Eigen::VectorXd rl = rho.rho().lifted(depth + 1).real_values();
  // S_i f(x) = rho(i.x)^{1/p} f(i.x); the pi-side exponent -1/q is taken to
  // be exactly zero when p = 1.
  const double inv_q = (p == 1.0) ? 0.0 : 1.0 - 1.0 / p;
  const double s_exp = 1.0 - inv_q;

  std::vector<CuntzPair> family;
  family.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<Eigen::Triplet<cplx>> t_trips, s_trips;
    t_trips.reserve(static_cast<std::size_t>(dim));
    s_trips.reserve(static_cast<std::size_t>(dim));
    for (std::int64_t w = 0; w < dim; ++w) {
      const std::int64_t r = static_cast<std::int64_t>(i) * dim + w;
      t_trips.emplace_back(static_cast<int>(r), static_cast<int>(w),
                           cplx(std::pow(rl[r], -1.0 / p)));
      s_trips.emplace_back(static_cast<int>(w), static_cast<int>(r),
                           cplx(std::pow(rl[r], s_exp)));
    }
    SparseC tm(dim * n, dim), sm(dim, dim * n);
    tm.setFromTriplets(t_trips.begin(), t_trips.end());
    sm.setFromTriplets(s_trips.begin(), s_trips.end());
    family.push_back(CuntzPair{RepOperator(shallow, deep, std::move(tm), +1),
                               RepOperator(deep, shallow, std::move(sm), -1)});
  }
  return family;
}

double exact_norm(const RepOperator& op) {
  const double p = op.source().p;
  const Eigen::VectorXd& ws = op.source().weights;
  const Eigen::VectorXd& wt = op.target().weights;
  const SparseC& M = op.matrix();

  if (op.kind() == OpKind::multiplication) {
    double m = 0.0;
    for (int k = 0; k < M.outerSize(); ++k)
      for (SparseC::InnerIterator it(M, k); it; ++it)
        m = std::max(m, std::abs(it.value()));
    return m;
  }
  if (op.one_nonzero_per_row()) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(M.cols());
    for (int k = 0; k < M.outerSize(); ++k)
      for (SparseC::InnerIterator it(M, k); it; ++it)
        acc[it.col()] += std::pow(std::abs(it.value()), p) * wt[it.row()];
    double best = 0.0;
    for (Eigen::Index v = 0; v < acc.size(); ++v)
      best = std::max(best, acc[v] / ws[v]);
    return std::pow(best, 1.0 / p);
  }
  if (op.one_nonzero_per_column()) {
    // duality: the weighted adjoint has one nonzero per row and acts with
    // the conjugate exponent between the dual spaces
    if (p == 1.0) {
      double best = 0.0;
      for (int k = 0; k < M.outerSize(); ++k)
        for (SparseC::InnerIterator it(M, k); it; ++it)
          best = std::max(best, std::abs(it.value()) * wt[it.row()] / ws[it.col()]);
      return best;
    }
    const double q = p / (p - 1.0);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(M.rows());
    for (int k = 0; k < M.outerSize(); ++k)
      for (SparseC::InnerIterator it(M, k); it; ++it) {
        const double entry = std::abs(it.value()) * wt[it.row()] / ws[it.col()];
        acc[it.row()] += std::pow(entry, q) * ws[it.col()];
      }
    double best = 0.0;
    for (Eigen::Index r = 0; r < acc.size(); ++r)
      best = std::max(best, acc[r] / wt[r]);
    return std::pow(best, 1.0 / q);
  }
  throw_error(ErrorCode::unsupported,
              "no closed-form p-norm for this operator; use norm_bounds");
}

RepOperator weighted_adjoint(const RepOperator& op) {
  const double p = op.source().p;
  if (p <= 1.0)
    throw_error(ErrorCode::unsupported,
                "weighted adjoint as an operator needs p > 1");
  const double q = p / (p - 1.0);
  const SparseC& M = op.matrix();
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(static_cast<std::size_t>(M.nonZeros()));
  for (int k = 0; k < M.outerSize(); ++k)
    for (SparseC::InnerIterator it(M, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.col()), static_cast<int>(it.row()),
                         std::conj(it.value()) * op.target().weights[it.row()] /
                             op.source().weights[it.col()]);
  SparseC m(M.cols(), M.rows());
  m.setFromTriplets(trips.begin(), trips.end());
  WeightedLpSpace src{op.target().n, op.target().depth, q, op.target().weights};
  WeightedLpSpace tgt{op.source().n, op.source().depth, q, op.source().weights};
  return RepOperator(std::move(src), std::move(tgt), std::move(m),
                     -op.gauge_degree());
}

NormBounds norm_bounds(const RepOperator& op, int probes, unsigned seed) {
  const double p = op.source().p;
  const Eigen::Index rows = op.matrix().rows();
  const Eigen::Index cols = op.matrix().cols();

  // conjugate the weights away: ||M||_{L^p(ws) -> L^p(wt)} = ||C||_{p->p}
  Eigen::MatrixXcd C = op.dense();
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double s = std::pow(op.target().weights[r], 1.0 / p);
    C.row(r) *= s;
  }
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double s = std::pow(op.source().weights[c], -1.0 / p);
    C.col(c) *= s;
  }

  NormBounds out;
  if (p == 2.0) {
    out.lower = out.upper = C.operatorNorm();
    out.exact = true;
    return out;
  }
  if (p == 1.0) {
    out.lower = out.upper = C.cwiseAbs().colwise().sum().maxCoeff();
    out.exact = true;
    return out;
  }

  const double q = p / (p - 1.0);
  const auto norm_p = [](const Eigen::VectorXcd& v, double e) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < v.size(); ++j) acc += std::pow(std::abs(v[j]), e);
    return std::pow(acc, 1.0 / e);
  };
  const auto dual_vec = [](const Eigen::VectorXcd& v, double e) {
    Eigen::VectorXcd out(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      const double m = std::abs(v[j]);
      out[j] = m == 0.0 ? cplx(0.0) : std::pow(m, e - 1.0) * (v[j] / m);
    }
    return out;
  };

  // probe set: basis vectors (strided when the space is large), the unit,
  // an alternating sign pattern, and seeded random directions
  std::vector<Eigen::VectorXcd> candidates;
  const Eigen::Index n_basis = std::min<Eigen::Index>(cols, std::max(probes, 1));
  const Eigen::Index stride = std::max<Eigen::Index>(1, cols / n_basis);
  for (Eigen::Index j = 0; j < cols; j += stride)
    candidates.push_back(Eigen::VectorXcd::Unit(cols, j));
  candidates.push_back(Eigen::VectorXcd::Ones(cols));
  {
    Eigen::VectorXcd alt(cols);
    for (Eigen::Index j = 0; j < cols; ++j) alt[j] = (j % 2 == 0) ? 1.0 : -1.0;
    candidates.push_back(alt);
  }
  std::mt19937_64 rng(seed);
  for (int k = 0; k < std::max(probes / 4, 4); ++k) {
    Eigen::VectorXcd v(cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      v[j] = cplx(2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0);
    candidates.push_back(v);
  }

  double best = 0.0;
  Eigen::VectorXcd best_x = candidates.front();
  for (const auto& x : candidates) {
    const double nx = norm_p(x, p);
    if (nx == 0.0) continue;
    const double ratio = norm_p(C * x, p) / nx;
    if (ratio > best) {
      best = ratio;
      best_x = x;
    }
  }

  // ascent refinement (p-norm power method); every iterate is a valid
  // lower bound
  Eigen::VectorXcd x = best_x / norm_p(best_x, p);
  for (int it = 0; it < 40; ++it) {
    Eigen::VectorXcd y = C * x;
    const double est = norm_p(y, p);
    if (est > best) best = est;
    if (est == 0.0) break;
    Eigen::VectorXcd z = C.adjoint() * dual_vec(y, p);
    const double zq = norm_p(z, q);
    const double inner = (z.adjoint() * x)(0).real();
    if (zq <= inner * (1.0 + 1e-12)) break;  // stationary point
    x = dual_vec(z, q);
    const double nx = norm_p(x, p);
    if (nx == 0.0) break;
    x /= nx;
  }
  out.lower = best;
  // Riesz-Thorin interpolation between the 1- and infinity-norms
  const double n1 = C.cwiseAbs().colwise().sum().maxCoeff();
  const double ninf = C.cwiseAbs().rowwise().sum().maxCoeff();
  out.upper = std::pow(n1, 1.0 / p) * std::pow(ninf, 1.0 / q);
  out.exact = false;
  return out;
}

LampertiDecomposition lamperti_decompose(const RepOperator& op) {
  const SparseC& M = op.matrix();
  const std::int64_t rows = M.rows();
  const std::int64_t cols = M.cols();

  LampertiDecomposition out;
  out.phi.n = op.source().n;
  out.phi.source_depth = op.source().depth;
  out.phi.target_depth = op.target().depth;
  out.phi.atom_images.assign(static_cast<std::size_t>(cols), {});
  out.h = Eigen::VectorXcd::Zero(rows);

  std::vector<char> row_used(static_cast<std::size_t>(rows), 0);
  for (int k = 0; k < M.outerSize(); ++k)
    for (SparseC::InnerIterator it(M, k); it; ++it) {
      if (row_used[static_cast<std::size_t>(it.row())]) {
        std::ostringstream msg;
        msg << "row " << it.row()
            << " has two nonzeros: not a weighted composition operator";
        throw_error(ErrorCode::validation, msg.str());
      }
      row_used[static_cast<std::size_t>(it.row())] = 1;
      out.phi.atom_images[static_cast<std::size_t>(it.col())].push_back(it.row());
      out.h[it.row()] = it.value();
    }
  for (std::int64_t v = 0; v < cols; ++v) {
    if (out.phi.atom_images[static_cast<std::size_t>(v)].empty()) {
      std::ostringstream msg;
      msg << "column " << v << " has empty support: operator kills a basis atom";
      throw_error(ErrorCode::validation, msg.str());
    }
    std::sort(out.phi.atom_images[static_cast<std::size_t>(v)].begin(),
              out.phi.atom_images[static_cast<std::size_t>(v)].end());
  }

  const double p = op.source().p;
  out.criterion_lhs = Eigen::VectorXd::Zero(cols);
  out.criterion_rhs = op.source().weights;
  for (std::int64_t v = 0; v < cols; ++v)
    for (std::int64_t r : out.phi.atom_images[static_cast<std::size_t>(v)])
      out.criterion_lhs[v] +=
          std::pow(std::abs(out.h[r]), p) * op.target().weights[r];
  out.criterion_max_dev =
      (out.criterion_lhs - out.criterion_rhs).cwiseAbs().maxCoeff();
  out.is_isometry = out.criterion_max_dev <= 1e-12;
  return out;
}

double RelationReport::max_deviation() const {
  double dev = 0.0;
  for (const auto& [name, value] : deviations) dev = std::max(dev, value);
  return dev;
}

RelationReport verify_covariance(const Potential& rho, const CylinderFunction& a,
                                 double p, int depth,
                                 const PowerOptions& opts) {
  check_exponent(p);
  const int n = rho.n();
  if (a.n() != n)
    throw_error(ErrorCode::validation, "alphabet mismatch in verify_covariance");
  if (depth < std::max({rho.depth() - 1, a.depth(), 1}))
    throw_error(ErrorCode::depth, "verify_covariance depth too small for inputs");

  const CylinderMeasure mu = fixed_point_measure(rho, depth + 1, opts);
  const WeightedLpSpace Xd = WeightedLpSpace::from_measure(mu.restricted(depth), p);
  const WeightedLpSpace Xd1 = WeightedLpSpace::from_measure(mu, p);
  const RepOperator T = make_T_phi(Xd, Xd1);
  const RepOperator S = make_S_phi(rho, Xd1, Xd);
  const RepOperator id_d = RepOperator::identity(Xd);
  const RepOperator id_d1 = RepOperator::identity(Xd1);

  RelationReport report;

  report.record("S_pi_a_T_eq_pi_L_a",
                max_abs_diff(S * make_pi(a, Xd1) * T,
                             make_pi(apply_transfer(rho.rho(), a), Xd)));
  report.record("T_pi_a_eq_pi_a_shift_T",
                max_abs_diff(T * make_pi(a, Xd),
                             make_pi(a.composed_with_shift(), Xd1) * T));

  const auto family = cuntz_family(rho, p, depth, mu);
  double dev = 0.0;
  for (int i = 0; i < n; ++i)
    dev = std::max(dev, max_abs_diff(family[i].S * family[i].T, id_d));
  report.record("Si_Ti_eq_identity", dev);

  dev = 0.0;
  for (int i = 0; i < n; ++i) {
    const CylinderFunction ind = CylinderFunction::indicator(Word(n, {i + 1}), 1);
    dev = std::max(dev, max_abs_diff(family[i].T * family[i].S, make_pi(ind, Xd1)));
  }
  report.record("Ti_Si_eq_letter_projection", dev);

  {
    RepOperator sum = family[0].T * family[0].S;
    for (int i = 1; i < n; ++i) sum = sum.plus(family[i].T * family[i].S);
    report.record("sum_Ti_Si_eq_identity", max_abs_diff(sum, id_d1));
  }

  // weighted resolution of identity, built from T and S directly; the q-side
  // exponent is exactly zero when p = 1
  const double inv_q = (p == 1.0) ? 0.0 : 1.0 - 1.0 / p;
  {
    std::optional<RepOperator> sum;
    for (int i = 0; i < n; ++i) {
      const CylinderFunction ind = CylinderFunction::indicator(Word(n, {i + 1}), 1);
      const CylinderFunction left = mul(abs_pow(rho.rho(), -1.0 / p), ind);
      const CylinderFunction right =
          inv_q == 0.0 ? ind : mul(abs_pow(rho.rho(), -inv_q), ind);
      RepOperator term =
          make_pi(left, Xd1) * T * S * make_pi(right, Xd1);
      sum = sum ? sum->plus(term) : term;
    }
    report.record("weighted_resolution_eq_identity", max_abs_diff(*sum, id_d1));
  }

  {
    std::optional<RepOperator> sum;
    const CylinderFunction rho_p = abs_pow(rho.rho(), 1.0 / p);
    for (int i = 0; i < n; ++i) {
      RepOperator term = make_pi(rho_p, Xd1) * family[i].T;
      sum = sum ? sum->plus(term) : term;
    }
    report.record("T_phi_from_family", max_abs_diff(*sum, T));
  }
  {
    std::optional<RepOperator> sum;
    for (int i = 0; i < n; ++i) {
      RepOperator term = inv_q == 0.0
                             ? family[i].S
                             : family[i].S * make_pi(abs_pow(rho.rho(), inv_q), Xd1);
      sum = sum ? sum->plus(term) : term;
    }
    report.record("S_phi_from_family", max_abs_diff(*sum, S));
  }

  // word projections T_w S_w = pi(1_{C_w}) for |w| <= 3, composed through the
  // intermediate depths
  const int max_len = std::min(3, depth - std::max(rho.depth() - 1, 0));
  if (max_len >= 1) {
    std::vector<std::vector<CuntzPair>> fam_at;  // index: source depth
    fam_at.resize(static_cast<std::size_t>(depth));
    for (int k = depth - max_len; k <= depth - 1; ++k)
      fam_at[static_cast<std::size_t>(k)] =
          cuntz_family(rho, p, k, mu.restricted(k + 1));
    dev = 0.0;
    for (int len = 1; len <= max_len; ++len) {
      const std::int64_t words = state_count(n, len);
      for (std::int64_t widx = 0; widx < words; ++widx) {
        const Word w = Word::from_index(n, len, widx);
        std::optional<RepOperator> chain;
        for (int j = 0; j < len; ++j) {  // S_{i_1} ... then up to S_{i_len}
          const int letter = w.letters()[static_cast<std::size_t>(j)];
          const auto& fam = fam_at[static_cast<std::size_t>(depth - 1 - j)];
          const RepOperator& Sj = fam[static_cast<std::size_t>(letter - 1)].S;
          chain = chain ? Sj * *chain : Sj;
        }
        for (int j = len - 1; j >= 0; --j) {
          const int letter = w.letters()[static_cast<std::size_t>(j)];
          const auto& fam = fam_at[static_cast<std::size_t>(depth - 1 - j)];
          chain = fam[static_cast<std::size_t>(letter - 1)].T * *chain;
        }
        const CylinderFunction ind = CylinderFunction::indicator(w, len);
        dev = std::max(dev, max_abs_diff(*chain, make_pi(ind, Xd)));
      }
    }
    report.record("word_projections_len_le_3", dev);
  }

  if (p == 2.0)
    report.record("p2_S_eq_weighted_adjoint_T", max_abs_diff(S, weighted_adjoint(T)));

  return report;
}

AndoReport ando_projection_check(const Potential& rho, double p, int depth,
                                 const PowerOptions& opts) {
  check_exponent(p);
  if (depth < std::max(rho.depth() - 1, 1))
    throw_error(ErrorCode::depth, "ando_projection_check depth too small");
  const CylinderMeasure mu = fixed_point_measure(rho, depth + 1, opts);
  const WeightedLpSpace Xd = WeightedLpSpace::from_measure(mu.restricted(depth), p);
  const WeightedLpSpace Xd1 = WeightedLpSpace::from_measure(mu, p);
  const RepOperator T = make_T_phi(Xd, Xd1);
  const RepOperator S = make_S_phi(rho, Xd1, Xd);
  const RepOperator TS = T * S;

  const LampertiDecomposition lam = lamperti_decompose(T);
  const std::int64_t dim = Xd1.weights.size();

  // conditional expectation onto the sigma-algebra generated by the image
  // atoms, with the measure's weights
  std::vector<Eigen::Triplet<cplx>> trips;
  for (const auto& atom : lam.phi.atom_images) {
    double mass = 0.0;
    for (std::int64_t r : atom) mass += Xd1.weights[r];
    for (std::int64_t r : atom)
      for (std::int64_t c : atom)
        trips.emplace_back(static_cast<int>(r), static_cast<int>(c),
                           cplx(Xd1.weights[c] / mass));
  }
  SparseC E(dim, dim);
  E.setFromTriplets(trips.begin(), trips.end());

  Eigen::VectorXcd habs_p(dim);
  for (std::int64_t r = 0; r < dim; ++r) {
    if (lam.h[r] == 0.0)
      throw_error(ErrorCode::singularity,
                  "zero weight entry: cannot form |h|^p / h");
    habs_p[r] = std::pow(std::abs(lam.h[r]), p);
  }
  const Eigen::VectorXcd e_habs_p = E * habs_p;

  SparseC left(dim, dim), right(dim, dim);
  {
    std::vector<Eigen::Triplet<cplx>> lt, rt;
    for (std::int64_t r = 0; r < dim; ++r) {
      lt.emplace_back(static_cast<int>(r), static_cast<int>(r),
                      lam.h[r] / e_habs_p[r]);
      rt.emplace_back(static_cast<int>(r), static_cast<int>(r),
                      habs_p[r] / lam.h[r]);
    }
    left.setFromTriplets(lt.begin(), lt.end());
    right.setFromTriplets(rt.begin(), rt.end());
  }
  const SparseC formula = left * (E * right);

  AndoReport out;
  {
    SparseC diff = formula - TS.matrix();
    double dev = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (SparseC::InnerIterator it(diff, k); it; ++it)
        dev = std::max(dev, std::abs(it.value()));
    out.formula_dev = dev;
  }
  out.idempotent_dev = max_abs_diff(TS * TS, TS);
  out.unit_dev =
      (TS.apply(Eigen::VectorXcd::Ones(dim)) - Eigen::VectorXcd::Ones(dim))
          .cwiseAbs()
          .maxCoeff();
  out.range_dev = max_abs_diff(TS * T, T);
  out.norm_T = exact_norm(T);
  out.norm_S = exact_norm(S);
  return out;
}

RadonNikodymReport radon_nikodym_check(const Potential& rho,
                                       const CylinderMeasure& mu, int depth) {
  if (mu.depth() < depth + 1)
    throw_error(ErrorCode::depth,
                "radon_nikodym_check needs the measure at depth + 1");
  if (depth < rho.depth() - 1)
    throw_error(ErrorCode::depth, "radon_nikodym_check depth below rho depth - 1");
  const CylinderMeasure fine = mu.restricted(depth + 1);
  const CylinderMeasure coarse = mu.restricted(depth);
  const Eigen::VectorXd rl = rho.rho().lifted(depth + 1).real_values();
  const std::int64_t dim = coarse.masses().size();

  RadonNikodymReport out;
  for (int i = 0; i < rho.n(); ++i)
    for (std::int64_t w = 0; w < dim; ++w) {
      const std::int64_t iw = static_cast<std::int64_t>(i) * dim + w;
      const double derivative = fine.masses()[iw] / coarse.masses()[w];
      out.max_rel_dev =
          std::max(out.max_rel_dev, std::abs(rl[iw] - derivative) / rl[iw]);
    }
  return out;
}

}  // namespace lpshift
